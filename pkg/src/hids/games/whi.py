"""Sampling check of weak history independence for randomized structures.

A randomized structure is weakly history independent when the distribution
of its representation depends only on the ADT state reached from the
initial state.  We estimate both distributions and compare them by total
variation distance.
"""

from __future__ import annotations

import random
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

from .adt import Step


class RandomSlotToy:
    """Unordered list placing each new element at a uniformly random free slot."""

    name = "random-slot"

    def __init__(self, capacity: int, rng: Optional[random.Random] = None) -> None:
        self.slots: list[Optional[int]] = [None] * capacity
        self.rng = rng or random.Random(0)

    def reseed(self, seed: int) -> None:
        self.rng.seed(seed)

    def apply(self, op: str, value: int) -> None:
        if op == "insert":
            if value in self.slots:
                return
            free = [i for i, v in enumerate(self.slots) if v is None]
            if not free:
                raise OverflowError("toy is full")
            self.slots[self.rng.choice(free)] = value
        elif op == "delete":
            if value in self.slots:
                self.slots[self.slots.index(value)] = None
        else:
            raise ValueError(f"unknown operation {op!r}")

    def represent(self) -> bytes:
        return bytes(0 if v is None else v + 1 for v in self.slots)


class AppendToy(RandomSlotToy):
    """Same interface, but always uses the first free slot: order leaks."""

    name = "append"

    def apply(self, op: str, value: int) -> None:
        if op == "insert" and value not in self.slots:
            self.slots[self.slots.index(None)] = value
        else:
            super().apply(op, value)


@dataclass(frozen=True)
class WhiResult:
    passed: bool
    tvd: float
    trials: int
    distribution0: dict
    distribution1: dict


def total_variation(p: Counter, q: Counter) -> float:
    n_p, n_q = sum(p.values()), sum(q.values())
    support = set(p) | set(q)
    return 0.5 * sum(abs(p[x] / n_p - q[x] / n_q) for x in support)


def run_whi_statistical(
    factory,
    seq0: Sequence[Step],
    seq1: Sequence[Step],
    trials: int = 10_000,
    tvd_threshold: float = 0.05,
    seed: int = 0,
) -> WhiResult:
    """Compare representation distributions after ``seq0`` and ``seq1``.

    ``factory()`` builds a fresh structure with a ``reseed(int)`` method.
    The two sequences get disjoint seed ranges so the samples are
    independent.
    """
    counts = []
    for branch, seq in enumerate((seq0, seq1)):
        dist = Counter()
        for t in range(trials):
            dut = factory()
            dut.reseed(seed + branch * trials + t)
            for op, arg in seq:
                dut.apply(op, arg)
            dist[dut.represent()] += 1
        counts.append(dist)
    tvd = total_variation(*counts)
    return WhiResult(tvd <= tvd_threshold, tvd, trials, dict(counts[0]), dict(counts[1]))
