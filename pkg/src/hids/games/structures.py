"""Adapters that expose concrete structures to the game runner.

A structure provides ``initial()``, ``apply(obj, op, arg) -> output``
(mutating ``obj``), ``represent(obj) -> bytes``, ``load(bytes) -> obj`` and
optionally ``describe(bytes) -> str`` for readable reports.
"""

from __future__ import annotations

from ..block_store import BATCHED, WRITE_THROUGH, BlockStore, Geometry
from ..dahi_table import DahiTable, LinearProbeBaseline
from ..errors import NotFound, ReadBeyondEof
from ..journal import JournaledStore, apply_plan, build_flush_plan, Journal
from ..keys import KeyRecord
from ..policies import HashPriorityPolicy, ModuloPolicy
from ..stable_table import StableTable
from .adt import FsAdt, SetAdt


class TableStructure:
    """A slot table implementing the set ADT over integers."""

    def __init__(self, name: str, table_cls, policy, seed: int = 0) -> None:
        self.name = name
        self.table_cls = table_cls
        self.policy = policy
        self.seed = seed

    def key(self, value: int) -> KeyRecord:
        return KeyRecord.for_int(value, self.seed)

    def initial(self):
        return self.table_cls(self.policy)

    def apply(self, table, op, value):
        k = self.key(value)
        present = k in table
        if op == "insert":
            if not present:
                table.insert(k)
            return None
        if op == "delete":
            if present:
                table.delete(k)
            return None
        if op == "member":
            return present
        raise ValueError(f"unknown set operation {op!r}")

    def represent(self, table) -> bytes:
        return table.serialize()

    def load(self, rep: bytes):
        return self.table_cls.from_bytes(self.policy, rep)

    def describe(self, rep: bytes) -> str:
        cells = ("_" if v is None else str(v) for v in self.load(rep).layout())
        return "<" + ",".join(cells) + ">"


def stable_structure(capacity: int = 7, policy=None) -> TableStructure:
    return TableStructure("stable", StableTable, policy or HashPriorityPolicy(capacity))


def dahi_structure(capacity: int = 7, policy=None) -> TableStructure:
    return TableStructure("dahi", DahiTable, policy or HashPriorityPolicy(capacity))


def baseline_structure(capacity: int = 3) -> TableStructure:
    return TableStructure("baseline", LinearProbeBaseline, ModuloPolicy(capacity))


# Tiny image: two groups of two one-block buckets.
FS_GEOMETRY = Geometry(block_size=128, blocks_per_bucket=1, group_count=2, buckets_per_group=2, inode_slots_per_group=2)


def _fs_apply(fs, op, arg):
    if op == "write":
        path, offset, data = arg
        return fs.write(path, offset, data)
    if op == "delete":
        # The journaled store records failed deletes too, so let it decide.
        if isinstance(fs, BlockStore) and not fs.exists(arg):
            return -1
        return fs.delete(arg)
    if op == "read":
        path, offset, length = arg
        try:
            return fs.read(path, offset, length)
        except (NotFound, ReadBeyondEof):
            return None
    if op == "open":
        return fs.exists(arg)
    if op == "close":
        return 0
    raise ValueError(f"unknown fs operation {op!r}")


class FsStructure:
    """The block store implementing the flat file system ADT."""

    name = "fs"

    def __init__(self, geometry: Geometry = FS_GEOMETRY) -> None:
        self.geometry = geometry

    def initial(self):
        return BlockStore(self.geometry)

    def apply(self, store, op, arg):
        return _fs_apply(store, op, arg)

    def represent(self, store) -> bytes:
        return store.to_bytes()

    def load(self, rep: bytes):
        return BlockStore.from_bytes(rep, verify=False)

    def describe(self, rep: bytes) -> str:
        return self.load(rep).layout_map()


class JournaledFsStructure(FsStructure):
    """Journaled block store; ``after_flush`` shows the adversary only flushed images."""

    def __init__(self, k: int = 2, mode: int = WRITE_THROUGH, geometry: Geometry = FS_GEOMETRY, after_flush: bool = False) -> None:
        super().__init__(geometry.replace(journal_slots=k, journal_mode=mode))
        self.after_flush = after_flush
        self.name = ("jhi" if mode == WRITE_THROUGH else "batched") + ("-flushed" if after_flush else "")

    def initial(self):
        return JournaledStore(BlockStore(self.geometry))

    def represent(self, fs) -> bytes:
        return fs.to_bytes()

    def load(self, rep: bytes):
        return JournaledStore(BlockStore.from_bytes(rep, verify=False))

    def observe(self, rep: bytes) -> bytes:
        if not self.after_flush:
            return rep
        return flushed(BlockStore.from_bytes(rep, verify=False)).to_bytes()


def flushed(store: BlockStore) -> BlockStore:
    """Copy of ``store`` with its journal applied (if batched) and erased."""
    out = store.copy()
    if store.geometry.journal_slots:
        journal = Journal(out)
        if out.geometry.journal_mode == BATCHED:
            apply_plan(out, build_flush_plan(journal.records(), out.files(), out.geometry.bucket_bytes))
        journal.write([])
    return out


SET_UNIVERSE = (1, 3, 6, 8, 10, 13)
BASELINE_UNIVERSE = (1, 3, 6)


def set_adt(values=SET_UNIVERSE) -> SetAdt:
    return SetAdt(values)


def fs_adt() -> FsAdt:
    return FsAdt()
