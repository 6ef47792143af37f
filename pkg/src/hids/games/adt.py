"""Reference ADT semantics the structures under test are checked against.

An ADT here is a pure transition function over hashable states.  Operation
sequences are tuples of ``(op, arg)`` pairs; the output of a sequence is the
output of its last operation, or ``idle_output`` for the empty sequence.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from typing import Any, Optional

Step = tuple[str, Any]


class Adt:
    name = "adt"
    initial: Any = None
    idle_output: Any = None

    def apply(self, state, op: str, arg) -> tuple[Any, Any]:
        raise NotImplementedError

    def inputs(self) -> list[Step]:
        """Default operation universe for exhaustive games."""
        raise NotImplementedError

    def run(self, state, seq: Iterable[Step]) -> tuple[Any, Any]:
        out = self.idle_output
        for op, arg in seq:
            state, out = self.apply(state, op, arg)
        return state, out

    # Elision of a hidden operation, tracked step by step so a game runner
    # can fold it into a finite per-sequence summary.  The summary is a
    # hashable tuple, or None once elision is impossible.

    def elide_init(self):
        return ((), ())

    def elide_step(self, summary, state, op: str, arg, hidden: str):
        raise NotImplementedError

    @staticmethod
    def elide_result(summary) -> Optional[tuple[Step, ...]]:
        if summary is None:
            return None
        return tuple(s for s in summary[0] if s is not None)

    def elide(self, s1, seq: Sequence[Step], hidden: str = "delete") -> Optional[tuple[Step, ...]]:
        """``seq`` with every ``hidden`` operation and the history it undoes removed.

        Returns None when some ``hidden`` operation undoes state that existed
        before the sequence started, since no hidden-free sequence from
        ``s1`` can then be its counterpart.
        """
        summary, state = self.elide_init(), s1
        for op, arg in seq:
            summary = self.elide_step(summary, state, op, arg, hidden)
            if summary is None:
                return None
            state, _ = self.apply(state, op, arg)
        return self.elide_result(summary)


def _forget(out, origin, name, indices=None):
    out = list(out)
    for i in indices if indices is not None else dict(origin)[name]:
        out[i] = None
    return tuple(out), tuple((k, v) for k, v in origin if k != name)


class SetAdt(Adt):
    """Finite set with idempotent ``insert`` and ``delete``; both output None."""

    name = "set"
    initial = frozenset()

    def __init__(self, universe: Iterable[int]) -> None:
        self.universe = tuple(universe)

    def apply(self, state, op, arg):
        if op == "insert":
            return state | {arg}, None
        if op == "delete":
            return state - {arg}, None
        if op == "member":
            return state, arg in state
        raise ValueError(f"unknown set operation {op!r}")

    def inputs(self):
        return [(op, v) for v in self.universe for op in ("insert", "delete")]

    def elide_step(self, summary, state, op, arg, hidden):
        out, origin = summary
        if op != hidden:
            if op == "insert" and arg not in state:
                origin = tuple(sorted(origin + ((arg, (len(out),)),)))
            return out + ((op, arg),), origin
        if op != "delete":
            raise ValueError("set elision only understands deletes")
        if arg not in state:
            return out, origin
        if arg not in dict(origin):
            return None
        return _forget(out, origin, arg)


class FsAdt(Adt):
    """Flat file system: files are byte strings addressed by path.

    ``write(path, offset, data)`` outputs ``len(data)`` and creates the file if
    needed; ``delete(path)`` outputs 0, or -1 when absent; ``read`` outputs the
    bytes or None past end of file; ``open`` reports existence and ``close``
    always outputs 0.
    """

    name = "fs"
    initial: tuple = ()

    def __init__(self, paths=(b"a", b"b"), payloads=(b"x", b"y"), offsets=(0,)) -> None:
        self.paths = tuple(paths)
        self.payloads = tuple(payloads)
        self.offsets = tuple(offsets)

    def apply(self, state, op, arg):
        files = dict(state)
        if op == "write":
            path, offset, data = arg
            old = files.get(path, b"")
            body = old.ljust(offset, b"\0")
            files[path] = body[:offset] + data + body[offset + len(data) :]
            return tuple(sorted(files.items())), len(data)
        if op == "delete":
            if arg not in files:
                return state, -1
            del files[arg]
            return tuple(sorted(files.items())), 0
        if op == "read":
            path, offset, length = arg
            body = files.get(path)
            if body is None or offset + length > len(body):
                return state, None
            return state, body[offset : offset + length]
        if op == "open":
            return state, arg in files
        if op == "close":
            return state, 0
        raise ValueError(f"unknown fs operation {op!r}")

    def inputs(self):
        steps = [("write", (p, o, d)) for p in self.paths for o in self.offsets for d in self.payloads]
        return steps + [("delete", p) for p in self.paths]

    def elide_step(self, summary, state, op, arg, hidden):
        out, origin = summary
        present = dict(state)
        if op != hidden:
            if op == "write":
                path = arg[0]
                mine = dict(origin)
                if path not in present:
                    mine[path] = (len(out),)
                elif path in mine:
                    mine[path] = mine[path] + (len(out),)
                origin = tuple(sorted(mine.items()))
            return out + ((op, arg),), origin
        if op != "delete":
            raise ValueError("fs elision only understands deletes")
        if arg not in present:
            return out, origin
        if arg not in dict(origin):
            return None
        return _forget(out, origin, arg)
