"""Exhaustive, determinized Delta history independence games.

Rather than flipping a coin, the challenger applies both candidate
sequences to the same starting representation and the adversary wins iff
the resulting byte strings differ.  A structure may define
``observe(rep)`` to say what the adversary actually sees of its full state
(for example, the image after a journal flush); it defaults to everything.  For a deterministic structure this is
exact: an adversary has non-zero advantage on a tuple iff the two
representations differ.

Transitions are memoized on representation bytes, and the object a
structure operates on is always rebuilt from those bytes, so no state
invisible to the adversary can influence the result.
"""

from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Any, Optional

from ..errors import ExplosionGuard
from .adt import Adt, Step
from .delta import Delta

DEFAULT_BUDGET = 10**6


@dataclass(frozen=True)
class Violation:
    s1: Any
    seq0: tuple[Step, ...]
    seq1: tuple[Step, ...]
    rep0: bytes
    rep1: bytes

    @property
    def d0(self):
        return tuple(op for op, _ in self.seq0)

    @property
    def d1(self):
        return tuple(op for op, _ in self.seq1)

    @property
    def i0(self):
        return tuple(arg for _, arg in self.seq0)

    @property
    def i1(self):
        return tuple(arg for _, arg in self.seq1)


@dataclass(frozen=True)
class BetaMismatch:
    rep: bytes
    step: Step
    adt_output: Any
    structure_output: Any


@dataclass
class GameReport:
    delta: str
    structure: str
    max_len: int
    starts: int = 0
    sequences: int = 0
    pairs_checked: int = 0
    violations: list[Violation] = field(default_factory=list)
    beta_mismatches: list[BetaMismatch] = field(default_factory=list)
    truncated: bool = False

    @property
    def passed(self) -> bool:
        return not self.violations and not self.beta_mismatches

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def lines(self, describe=None) -> list[str]:
        """One JSON object per line: a summary, then one line per violation."""
        head = {
            "delta": self.delta,
            "structure": self.structure,
            "max_len": self.max_len,
            "starts": self.starts,
            "sequences": self.sequences,
            "pairs_checked": self.pairs_checked,
            "violations": len(self.violations),
            "beta_mismatches": len(self.beta_mismatches),
            "truncated": self.truncated,
            "verdict": self.verdict,
        }
        out = [json.dumps(head)]
        for v in self.violations:
            rec = {
                "s1": _plain(v.s1),
                "d0": list(v.d0),
                "i0": _plain(v.i0),
                "d1": list(v.d1),
                "i1": _plain(v.i1),
                "rep0": v.rep0.hex(),
                "rep1": v.rep1.hex(),
            }
            if describe is not None:
                rec["layout0"] = describe(v.rep0)
                rec["layout1"] = describe(v.rep1)
            out.append(json.dumps(rec))
        for m in self.beta_mismatches:
            out.append(
                json.dumps(
                    {
                        "beta_mismatch": _plain(m.step),
                        "adt": _plain(m.adt_output),
                        "structure": _plain(m.structure_output),
                        "rep": m.rep.hex(),
                    }
                )
            )
        return out


def _plain(x):
    if isinstance(x, bytes):
        return x.decode("latin-1")
    if isinstance(x, (frozenset, set)):
        return sorted(_plain(v) for v in x)
    if isinstance(x, (tuple, list)):
        return [_plain(v) for v in x]
    return x


class _Explorer:
    """Shared memo of ADT and structure transitions, keyed by bytes."""

    def __init__(self, adt: Adt, dut, budget: int) -> None:
        self.adt = adt
        self.dut = dut
        self.budget = budget
        self.reps: dict[bytes, int] = {}
        self.rep_bytes: list[bytes] = []
        self.rep_trans: dict[tuple[int, Step], tuple[int, Any]] = {}
        self.adt_trans: dict[tuple[Any, Step], tuple[Any, Any]] = {}
        self.beta: list[BetaMismatch] = []
        self.observe = getattr(dut, "observe", None)
        self.obs_ids: dict[bytes, int] = {}
        self.obs_bytes: list[bytes] = []
        self.obs_of: dict[int, int] = {}
        self.initial_rep = self.intern(dut.represent(dut.initial()))

    def intern(self, rep: bytes) -> int:
        rid = self.reps.get(rep)
        if rid is None:
            rid = self.reps[rep] = len(self.rep_bytes)
            self.rep_bytes.append(rep)
        return rid

    def observed(self, rid: int) -> int:
        """Id of what the adversary sees for representation ``rid``."""
        oid = self.obs_of.get(rid)
        if oid is None:
            rep = self.rep_bytes[rid]
            obs = rep if self.observe is None else self.observe(rep)
            oid = self.obs_ids.setdefault(obs, len(self.obs_bytes))
            if oid == len(self.obs_bytes):
                self.obs_bytes.append(obs)
            self.obs_of[rid] = oid
        return oid

    def step(self, rid: int, state, step: Step):
        key = (state, step)
        hit = self.adt_trans.get(key)
        if hit is None:
            hit = self.adt_trans[key] = self.adt.apply(state, *step)
        state2, out = hit
        rkey = (rid, step)
        rhit = self.rep_trans.get(rkey)
        if rhit is None:
            obj = self.dut.load(self.rep_bytes[rid])
            mout = self.dut.apply(obj, *step)
            rhit = self.rep_trans[rkey] = (self.intern(self.dut.represent(obj)), mout)
        rid2, mout = rhit
        if mout != out:
            self.beta.append(BetaMismatch(self.rep_bytes[rid], step, out, mout))
        return rid2, state2, out

    def reachable(self, universe, depth: int):
        """``{(rep_id, adt_state): shortest witness}`` within ``depth`` steps."""
        start = (self.initial_rep, self.adt.initial)
        seen = {start: ()}
        frontier = deque([start])
        while frontier:
            node = frontier.popleft()
            seq = seen[node]
            if len(seq) == depth:
                continue
            for step in universe:
                rid, state, _ = self.step(node[0], node[1], step)
                nxt = (rid, state)
                if nxt not in seen:
                    seen[nxt] = seq + (step,)
                    frontier.append(nxt)
                    if len(seen) > self.budget:
                        raise ExplosionGuard(f"more than {self.budget} reachable representations")
        return seen


def play_game(
    adt: Adt,
    dut,
    delta: Delta,
    max_len: int,
    universe: Optional[list[Step]] = None,
    *,
    start_len: Optional[int] = None,
    budget: int = DEFAULT_BUDGET,
    max_violations: Optional[int] = None,
    compress: bool = True,
) -> GameReport:
    """Play the determinized game over every admissible tuple.

    Starting points are every (ADT state, representation) pair reachable
    within ``start_len`` steps (default ``max_len // 2``), mirroring an
    adversary who may pick any representation of ``s1``.  Both sequences
    range over all sequences of length at most ``max_len`` drawn from
    ``universe`` (default ``adt.inputs()``).

    With ``compress`` the runner keeps one witness per (representation,
    state, output, summary) and relies on the predicate depending on a
    sequence only through its summary.  ``compress=False`` enumerates every
    sequence literally.  ``budget`` caps predicate evaluations and explored
    nodes; exceeding it raises ExplosionGuard.
    """
    universe = list(adt.inputs() if universe is None else universe)
    start_len = max_len // 2 if start_len is None else start_len
    ex = _Explorer(adt, dut, budget)
    report = GameReport(delta=delta.name, structure=getattr(dut, "name", type(dut).__name__), max_len=max_len)

    starts = ex.reachable(universe, start_len)
    for (rid1, s1) in starts:
        if not delta.start_ok(adt, s1):
            continue
        report.starts += 1
        nodes = _explore(ex, delta, rid1, s1, universe, max_len, compress, report)
        if _judge(ex, adt, delta, s1, nodes, compress, report, max_violations):
            report.truncated = True
            break
    report.beta_mismatches = ex.beta
    return report


def _explore(ex, delta, rid1, s1, universe, max_len, compress, report):
    adt = ex.adt
    root_summary = delta.summary_init(adt, s1)
    if not compress:
        root_summary = (root_summary, ())
    root = (rid1, s1, adt.idle_output, root_summary)
    seen = {root: ()}
    frontier = [root]
    for _ in range(max_len):
        nxt_frontier = []
        for node in frontier:
            rid, state, _, summary = node
            seq = seen[node]
            for step in universe:
                rid2, state2, out = ex.step(rid, state, step)
                if compress:
                    summary2 = delta.summary_step(adt, summary, state, *step)
                else:
                    summary2 = (delta.summary_step(adt, summary[0], state, *step), summary[1] + (step,))
                child = (rid2, state2, out, summary2)
                if child not in seen:
                    seen[child] = seq + (step,)
                    nxt_frontier.append(child)
        frontier = nxt_frontier
        report.sequences += len(frontier)
        if report.sequences > ex.budget:
            raise ExplosionGuard(f"more than {ex.budget} sequence summaries")
    report.sequences += 1
    return seen


def _judge(ex, adt, delta, s1, nodes, compress, report, max_violations) -> bool:
    """Evaluate the predicate on every cross-representation pair; True to stop."""
    groups = defaultdict(lambda: defaultdict(list))
    for (rid, state, out, summary), seq in nodes.items():
        key = delta.group_key(summary if compress else summary[0])
        if key is None:
            continue
        groups[(state, out, key)][ex.observed(rid)].append(seq)
    for classes in groups.values():
        if len(classes) < 2:
            continue
        items = sorted(classes.items())
        for a, (ra, seqs_a) in enumerate(items):
            for b, (rb, seqs_b) in enumerate(items):
                if a == b or (delta.symmetric and b < a):
                    continue
                for sa in seqs_a:
                    for sb in seqs_b:
                        report.pairs_checked += 1
                        if report.pairs_checked > ex.budget:
                            raise ExplosionGuard(f"more than {ex.budget} predicate evaluations")
                        if delta.admits(adt, s1, sa, sb):
                            report.violations.append(Violation(s1, sa, sb, ex.obs_bytes[ra], ex.obs_bytes[rb]))
                            if max_violations is not None and len(report.violations) >= max_violations:
                                return True
    return False


def memory_representations(adt: Adt, dut, s, max_len: int, universe=None, *, budget: int = DEFAULT_BUDGET) -> set[bytes]:
    """Every representation of ADT state ``s`` reachable within ``max_len`` steps."""
    ex = _Explorer(adt, dut, budget)
    nodes = ex.reachable(list(adt.inputs() if universe is None else universe), max_len)
    return {ex.obs_bytes[ex.observed(rid)] for rid, state in nodes if state == s}


@dataclass(frozen=True)
class CanonicalResult:
    canonical: bool
    states: int
    witness: Optional[tuple[Any, tuple[Step, ...], bytes, tuple[Step, ...], bytes]] = None

    def __bool__(self) -> bool:
        return self.canonical


def is_canonical(adt: Adt, dut, max_len: int, universe=None, *, budget: int = DEFAULT_BUDGET) -> CanonicalResult:
    """Whether every state reachable within ``max_len`` steps has one representation.

    The witness, when there is one, is ``(state, seq_a, rep_a, seq_b, rep_b)``.
    """
    ex = _Explorer(adt, dut, budget)
    nodes = ex.reachable(list(adt.inputs() if universe is None else universe), max_len)
    first: dict[Any, tuple[int, tuple]] = {}
    witness = None
    for (rid, state), seq in nodes.items():
        oid = ex.observed(rid)
        if state not in first:
            first[state] = (oid, seq)
        elif first[state][0] != oid and witness is None:
            oid0, seq0 = first[state]
            witness = (state, seq0, ex.obs_bytes[oid0], seq, ex.obs_bytes[oid])
    return CanonicalResult(witness is None, len(first), witness)


@dataclass(frozen=True)
class DeltaComparison:
    relation: str
    size_a: int
    size_b: int
    common: int


CONTAINED_IN, CONTAINS, EQUAL, INCOMPARABLE = "CONTAINED_IN", "CONTAINS", "EQUAL", "INCOMPARABLE"


def admitted_tuples(delta: Delta, adt: Adt, max_len: int, universe=None, *, budget: int = DEFAULT_BUDGET) -> set:
    """H_delta restricted to sequences of length at most ``max_len``.

    Tuples are ``(s1, s2, seq0, seq1)`` with ``(op, arg)`` sequences, which
    carry the same information as the separate operation and input lists.
    Start states are every ADT state reachable within ``max_len`` steps.
    """
    universe = list(adt.inputs() if universe is None else universe)
    states = {adt.initial}
    frontier = {adt.initial}
    for _ in range(max_len):
        frontier = {adt.apply(s, *step)[0] for s in frontier for step in universe} - states
        states |= frontier
    seqs = [()]
    layer = [()]
    for _ in range(max_len):
        layer = [seq + (step,) for seq in layer for step in universe]
        seqs.extend(layer)
    out = set()
    evaluations = 0
    for s1 in sorted(states, key=repr):
        by_end = defaultdict(list)
        for seq in seqs:
            s2, tau = adt.run(s1, seq)
            by_end[(s2, tau)].append(seq)
        for (s2, _), group in by_end.items():
            for seq0 in group:
                for seq1 in group:
                    evaluations += 1
                    if evaluations > budget:
                        raise ExplosionGuard(f"more than {budget} predicate evaluations")
                    d0, i0 = tuple(o for o, _ in seq0), tuple(a for _, a in seq0)
                    d1, i1 = tuple(o for o, _ in seq1), tuple(a for _, a in seq1)
                    if delta(adt, s1, s2, d0, d1, i0, i1):
                        out.add((s1, s2, seq0, seq1))
    return out


def compare_deltas(delta_a: Delta, delta_b: Delta, adt: Adt, max_len: int, universe=None, *, budget: int = DEFAULT_BUDGET) -> DeltaComparison:
    """Order two notions by containment of their admitted tuple sets.

    ``CONTAINED_IN`` means every tuple ``delta_a`` protects is also protected
    by ``delta_b``; the larger set is the stronger notion.  Pairs of
    sequences that reach different end states or outputs are never admitted
    by any predicate and are skipped up front.
    """
    ha = admitted_tuples(delta_a, adt, max_len, universe, budget=budget)
    hb = admitted_tuples(delta_b, adt, max_len, universe, budget=budget)
    if ha == hb:
        rel = EQUAL
    elif ha < hb:
        rel = CONTAINED_IN
    elif ha > hb:
        rel = CONTAINS
    else:
        rel = INCOMPARABLE
    return DeltaComparison(rel, len(ha), len(hb), len(ha & hb))
