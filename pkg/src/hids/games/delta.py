"""Delta predicates selecting which pairs of histories must look alike.

Every predicate requires both sequences to take the ADT from ``s1`` to the
same ``s2`` with the same output, plus a notion-specific side condition.

For exhaustive games each predicate also exposes a *summary*: a finite,
hashable digest of a sequence, computed step by step, such that the side
condition depends on the sequences only through their summaries and
``group_key``.  The runner keeps one witness sequence per summary instead of
enumerating every sequence.
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import Any, Optional

from .adt import Adt, Step


class Delta:
    name = "delta"
    symmetric = True

    def start_ok(self, adt: Adt, s1) -> bool:
        return True

    def side_condition(self, adt: Adt, s1, d0, d1, i0, i1) -> bool:
        return True

    def __call__(self, adt: Adt, s1, s2, d0: Sequence[str], d1: Sequence[str], i0: Sequence, i1: Sequence) -> int:
        if len(d0) != len(i0) or len(d1) != len(i1):
            raise ValueError("operation and input sequences must have equal length")
        if not self.start_ok(adt, s1):
            return 0
        end0 = adt.run(s1, zip(d0, i0))
        end1 = adt.run(s1, zip(d1, i1))
        if end0[0] != s2 or end0 != end1:
            return 0
        return int(self.side_condition(adt, s1, tuple(d0), tuple(d1), tuple(i0), tuple(i1)))

    def admits(self, adt: Adt, s1, seq0: Sequence[Step], seq1: Sequence[Step]) -> int:
        """Predicate on ``(op, arg)`` sequences, with ``s2`` taken from ``seq0``."""
        s2 = adt.run(s1, seq0)[0]
        d0, i0 = _split(seq0)
        d1, i1 = _split(seq1)
        return self(adt, s1, s2, d0, d1, i0, i1)

    def summary_init(self, adt: Adt, s1) -> Any:
        return ()

    def summary_step(self, adt: Adt, summary, state, op: str, arg) -> Any:
        return summary

    def group_key(self, summary) -> Optional[Any]:
        """Pairs are admissible only within equal, non-None group keys."""
        return ()

    def __repr__(self) -> str:
        return self.name


def _split(seq):
    return tuple(op for op, _ in seq), tuple(arg for _, arg in seq)


class Shi(Delta):
    name = "SHI"


class Whi(Delta):
    name = "WHI"

    def start_ok(self, adt, s1):
        return s1 == adt.initial


class PhiNull(Delta):
    """Only identical histories are protected, as with an append-only log."""

    name = "PHI_NULL"

    def side_condition(self, adt, s1, d0, d1, i0, i1):
        return d0 == d1 and i0 == i1

    def summary_step(self, adt, summary, state, op, arg):
        return summary + ((op, arg),)

    def group_key(self, summary):
        return summary


class ShiStar(Delta):
    name = "SHI_STAR"

    def side_condition(self, adt, s1, d0, d1, i0, i1):
        return len(d0) > 0 and len(d1) > 0

    def summary_init(self, adt, s1):
        return False

    def summary_step(self, adt, summary, state, op, arg):
        return True

    def group_key(self, summary):
        return () if summary else None


class LastK(Delta):
    """Histories may differ anywhere except in their final ``k`` steps."""

    def __init__(self, k: int) -> None:
        if k < 0:
            raise ValueError("k must be non-negative")
        self.k = k
        self.name = f"LAST_K({k})"

    def side_condition(self, adt, s1, d0, d1, i0, i1):
        k = self.k
        if len(d0) < k or len(d1) < k:
            return False
        tail0 = list(zip(d0, i0))[len(d0) - k :]
        tail1 = list(zip(d1, i1))[len(d1) - k :]
        return tail0 == tail1

    def summary_step(self, adt, summary, state, op, arg):
        if self.k == 0:
            return ()
        return (summary + ((op, arg),))[-self.k :]

    def group_key(self, summary):
        return summary if len(summary) == self.k else None


class Oahi(Delta):
    """Operation-agnostic: the presence of ``op`` must leave no trace.

    ``literal=True`` admits any pair where ``op`` occurs in the first
    sequence only.  The default additionally requires the second sequence to
    be the first with every ``op`` and the history it undoes elided, which
    is the property a delete-agnostic structure actually provides.
    """

    symmetric = False

    def __init__(self, op: str = "delete", literal: bool = False) -> None:
        self.op = op
        self.literal = literal
        self.name = f"OAHI({op}{', literal' if literal else ''})"

    def side_condition(self, adt, s1, d0, d1, i0, i1):
        if self.op not in d0 or self.op in d1:
            return False
        if self.literal:
            return True
        return adt.elide(s1, tuple(zip(d0, i0)), self.op) == tuple(zip(d1, i1))

    def summary_init(self, adt, s1):
        return (False, None if self.literal else adt.elide_init())

    def summary_step(self, adt, summary, state, op, arg):
        seen, elision = summary
        seen = seen or op == self.op
        if self.literal:
            return seen, None
        if elision is not False:
            elision = adt.elide_step(elision, state, op, arg, self.op)
        # False marks a sequence that no longer elides to anything.
        return seen, elision if elision is not None else False

    def group_key(self, summary):
        seen, elision = summary
        if self.literal:
            return ()
        if elision is False:
            return None
        # Sequences pair up with the hidden-op-free sequence they elide to.
        return Adt.elide_result(elision)


SHI, WHI, PHI_NULL, SHI_STAR = Shi(), Whi(), PhiNull(), ShiStar()


def LAST_K(k: int) -> LastK:
    return LastK(k)


def OAHI(op: str = "delete", literal: bool = False) -> Oahi:
    return Oahi(op, literal)


def by_name(mode: str, k: int = 2) -> Delta:
    table = {
        "shi": SHI,
        "whi": WHI,
        "phinull": PHI_NULL,
        "shistar": SHI_STAR,
        "lastk": LastK(k),
        "oahi": Oahi("delete"),
        "oahi-literal": Oahi("delete", literal=True),
    }
    try:
        return table[mode]
    except KeyError:
        raise ValueError(f"unknown mode {mode!r}") from None
