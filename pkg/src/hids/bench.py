"""Bucket writes per operation as a function of load factor.

Each trial fills one table with random keys, stepping through the requested
load factors in increasing order.  At each load it measures ``probes``
inserts of fresh keys (each removed again afterwards) and ``probes``
deletes of resident keys (each put back afterwards), so the load stays
where it was put.
"""

from __future__ import annotations

import random
from collections.abc import Iterable
from dataclasses import dataclass

from .dahi_table import DahiTable
from .keys import KeyRecord
from .policies import HashPriorityPolicy
from .stable_table import StableTable

TABLES = {"shi": StableTable, "dahi": DahiTable}


@dataclass(frozen=True)
class BenchRow:
    load: float
    insert_writes: float
    delete_writes: float
    samples: int


def run_bench(
    loads: Iterable[float],
    trials: int = 50,
    mode: str = "shi",
    capacity: int = 1024,
    seed: int = 0,
    probes: int = 10,
) -> list[BenchRow]:
    loads = sorted(set(loads))
    if any(not 0 <= a < 1 for a in loads):
        raise ValueError("load factors must lie in [0, 1)")
    try:
        table_cls = TABLES[mode]
    except KeyError:
        raise ValueError(f"unknown bench mode {mode!r}") from None
    policy = HashPriorityPolicy(capacity)
    ins = {a: 0 for a in loads}
    dels = {a: 0 for a in loads}
    n_del = {a: 0 for a in loads}
    for trial in range(trials):
        rng = random.Random(seed * 1_000_003 + trial)
        table = table_cls(policy)
        resident: list[KeyRecord] = []
        used = set()

        def fresh() -> KeyRecord:
            while True:
                v = rng.getrandbits(64)
                if v not in used:
                    used.add(v)
                    return KeyRecord.for_int(v)

        for a in loads:
            while len(resident) < round(a * capacity):
                k = fresh()
                table.insert(k)
                resident.append(k)
            for _ in range(probes):
                if table.count < capacity:
                    k = fresh()
                    ins[a] += table.insert(k).bucket_writes
                    table.delete(k)
                if resident:
                    k = resident[rng.randrange(len(resident))]
                    dels[a] += table.delete(k).bucket_writes
                    n_del[a] += 1
                    table.insert(k)
    samples = trials * probes
    return [BenchRow(a, ins[a] / samples, dels[a] / n_del[a] if n_del[a] else 0.0, samples) for a in loads]


def format_rows(rows: list[BenchRow]) -> str:
    out = ["load\tinsert_writes\tdelete_writes"]
    out += [f"{r.load:.2f}\t{r.insert_writes:.4f}\t{r.delete_writes:.4f}" for r in rows]
    return "\n".join(out)


def parse_loads(text: str) -> list[float]:
    """``"0.1..0.9"`` (steps of 0.1), ``"0.1..0.9:0.2"`` or ``"0.3,0.9"``."""
    if ".." in text:
        lo, _, rest = text.partition("..")
        hi, _, step = rest.partition(":")
        lo_f, hi_f = float(lo), float(hi)
        step_f = float(step) if step else 0.1
        n = int(round((hi_f - lo_f) / step_f))
        return [round(lo_f + i * step_f, 10) for i in range(n + 1)]
    return [float(x) for x in text.split(",") if x]
