"""Circular-log journal in front of a block store.

The journal region holds a header slot followed by ``k`` record slots of
4096 bytes.  Two modes are supported:

``BATCHED``
    Operations are only recorded.  Once the log fills up it is flushed: the
    records are coalesced into a plan that touches every bucket at most
    once, the plan is applied, and the region is zeroed.  A flushed image
    depends on the file set alone.

``WRITE_THROUGH``
    Operations are applied immediately and the log keeps the last ``k`` of
    them in order, oldest first.  The image reveals those ``k`` operations
    and nothing older.

Header: ``head u32, count u32, flags u32, crc32 u32`` where the CRC covers
the first twelve bytes; an all-zero header is a valid empty journal.
Record: ``op u8, reserved u8, path_len u16, length u32, offset u64``, then
path and data, zero padded to 4092 bytes, then the CRC32 of those bytes.
"""

from __future__ import annotations

import struct
import zlib
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Optional

from .block_store import BATCHED, JOURNAL_SLOT, WRITE_THROUGH, BlockStore
from .errors import CorruptJournal, OversizeOp

HEADER = struct.Struct("<IIII")
RECORD = struct.Struct("<BBHIQ")
BODY = JOURNAL_SLOT - 4
INLINE_CAP = BODY - RECORD.size
FLUSHING = 1

OP_WRITE, OP_DELETE, OP_CREATE = 1, 2, 3
OP_CODES = {"write": OP_WRITE, "delete": OP_DELETE, "create": OP_CREATE}
OP_NAMES = {v: k for k, v in OP_CODES.items()}


@dataclass(frozen=True)
class JournalOp:
    op: str
    path: bytes
    offset: int = 0
    data: bytes = b""

    def encode(self) -> bytes:
        if self.op not in OP_CODES:
            raise ValueError(f"unknown journal op {self.op!r}")
        if RECORD.size + len(self.path) + len(self.data) > BODY:
            raise OversizeOp(f"{self.op} record of {len(self.path) + len(self.data)} bytes does not fit a slot")
        body = RECORD.pack(OP_CODES[self.op], 0, len(self.path), len(self.data), self.offset) + self.path + self.data
        body += bytes(BODY - len(body))
        return body + struct.pack("<I", zlib.crc32(body))

    @classmethod
    def decode(cls, slot: bytes) -> Optional["JournalOp"]:
        """Parse a slot; None if its checksum or fields are invalid."""
        body, (crc,) = slot[:BODY], struct.unpack_from("<I", slot, BODY)
        if zlib.crc32(body) != crc:
            return None
        code, _, n_path, n_data, offset = RECORD.unpack_from(body)
        if code not in OP_NAMES or RECORD.size + n_path + n_data > BODY:
            return None
        path = bytes(body[RECORD.size : RECORD.size + n_path])
        data = bytes(body[RECORD.size + n_path : RECORD.size + n_path + n_data])
        return cls(OP_NAMES[code], path, offset, data)


@dataclass(frozen=True)
class FlushOp:
    """One step of a flush plan.

    ``write`` steps carry every patch to one logical bucket, in order, and
    ``size`` is the file size the step must guarantee (set on the first write
    after the file (re)appears, zero otherwise).
    """

    kind: str
    path: bytes
    lb: Optional[int] = None
    patches: tuple[tuple[int, bytes], ...] = ()
    size: int = 0


def split_write(path: bytes, offset: int, data: bytes, bucket_bytes: int) -> list[JournalOp]:
    """Cut a write into records that each fit a slot and stay inside one bucket."""
    cap = INLINE_CAP - len(path)
    if cap <= 0:
        raise OversizeOp("path leaves no room for data in a journal slot")
    ops = []
    pos = 0
    while pos < len(data):
        start = offset + pos
        room = min(cap, bucket_bytes - start % bucket_bytes, len(data) - pos)
        ops.append(JournalOp("write", path, start, data[pos : pos + room]))
        pos += room
    return ops


def _per_bucket(rec: JournalOp, bucket_bytes: int) -> list[JournalOp]:
    if not rec.data:
        return [rec]
    out, pos = [], 0
    while pos < len(rec.data):
        start = rec.offset + pos
        room = min(bucket_bytes - start % bucket_bytes, len(rec.data) - pos)
        out.append(JournalOp("write", rec.path, start, rec.data[pos : pos + room]))
        pos += room
    return out


def _drop_covered(patches: list[tuple[int, bytes]]) -> tuple[tuple[int, bytes], ...]:
    kept = []
    for i, (off, data) in enumerate(patches):
        end = off + len(data)
        if any(o <= off and o + len(d) >= end for o, d in patches[i + 1 :]):
            continue
        kept.append((off, data))
    return tuple(kept)


def build_flush_plan(records: Sequence[JournalOp], existing: Iterable[bytes] = (), bucket_bytes: int = 1 << 62) -> list[FlushOp]:
    """Coalesce journaled operations.

    * writes to the same ``(path, logical bucket)`` between two deletes of
      that path merge into one step at the position of the first of them;
    * a delete cancels the creates and writes before it back to the previous
      delete of the path, and is itself dropped when the path did not exist
      at that point (so create-then-delete vanishes without a trace);
    * everything else keeps its relative order.

    ``existing`` lists the paths present before the batch.
    """
    present_at_start = {bytes(p): True for p in existing}
    plan: list[Optional[FlushOp]] = []
    open_writes: dict[tuple[bytes, int], int] = {}
    segment: dict[bytes, list[int]] = {}
    first_write: dict[bytes, int] = {}
    sizes: dict[bytes, int] = {}

    for rec in records:
        path = rec.path
        if rec.op == "delete":
            for i in segment.pop(path, []):
                plan[i] = None
            for key in [k for k in open_writes if k[0] == path]:
                del open_writes[key]
            first_write.pop(path, None)
            sizes.pop(path, None)
            if present_at_start.get(path, False):
                plan.append(FlushOp("delete", path))
            present_at_start[path] = False
            continue
        if rec.op == "create":
            segment.setdefault(path, []).append(len(plan))
            plan.append(FlushOp("create", path))
            continue
        sizes[path] = max(sizes.get(path, 0), rec.offset + len(rec.data))
        for piece in _per_bucket(rec, bucket_bytes):
            lb = piece.offset // bucket_bytes if piece.data else None
            at = open_writes.get((path, lb))
            if at is None:
                at = len(plan)
                open_writes[(path, lb)] = at
                segment.setdefault(path, []).append(at)
                plan.append(FlushOp("write", path, lb, ((piece.offset, piece.data),)))
                first_write.setdefault(path, at)
            else:
                patches = list(plan[at].patches) + [(piece.offset, piece.data)]
                plan[at] = FlushOp("write", path, lb, _drop_covered(patches))
    for path, at in first_write.items():
        op = plan[at]
        plan[at] = FlushOp(op.kind, op.path, op.lb, op.patches, sizes[path])
    return [op for op in plan if op is not None]


def apply_plan(store: BlockStore, plan: Iterable[FlushOp]) -> None:
    for op in plan:
        if op.kind == "delete":
            if store.exists(op.path):
                store.delete(op.path)
        elif op.kind == "create":
            store.create(op.path)
        else:
            store.write_extents(op.path, op.patches, op.size)


def apply_record(store: BlockStore, rec: JournalOp):
    """Apply one operation directly; returns the file system output."""
    if rec.op == "write":
        return store.write(rec.path, rec.offset, rec.data)
    if rec.op == "create":
        return store.create(rec.path)
    if not store.exists(rec.path):
        return -1
    return store.delete(rec.path)


class Journal:
    """Typed view of a store's journal region."""

    def __init__(self, store: BlockStore) -> None:
        self.store = store
        self.k = store.geometry.journal_slots
        if self.k <= 0:
            raise ValueError("image has no journal")

    def header(self) -> tuple[int, int, int]:
        raw = self.store.journal_region[: HEADER.size]
        head, count, flags, crc = HEADER.unpack(raw)
        if any(raw) and zlib.crc32(raw[:12]) != crc:
            raise CorruptJournal("journal header checksum mismatch")
        if head >= self.k or count > self.k or flags & ~FLUSHING:
            raise CorruptJournal(f"journal header out of range: head={head} count={count} flags={flags}")
        return head, count, flags

    def slot(self, i: int) -> bytes:
        off = JOURNAL_SLOT * (1 + i)
        return self.store.journal_region[off : off + JOURNAL_SLOT]

    def records(self) -> list[JournalOp]:
        head, count, _ = self.header()
        out = []
        for j in range(count):
            rec = JournalOp.decode(self.slot((head + j) % self.k))
            if rec is None:
                raise CorruptJournal(f"record {j} fails its checksum")
            out.append(rec)
        return out

    def write(self, records: Sequence[JournalOp], flags: int = 0) -> None:
        """Lay ``records`` out from slot 0 and zero everything else."""
        if len(records) > self.k:
            raise ValueError("more records than journal slots")
        region = bytearray(len(self.store.journal_region))
        if records or flags:
            head = HEADER.pack(0, len(records), flags, 0)[:12]
            region[: HEADER.size] = head + struct.pack("<I", zlib.crc32(head))
        for i, rec in enumerate(records):
            off = JOURNAL_SLOT * (1 + i)
            region[off : off + JOURNAL_SLOT] = rec.encode()
        self.store.journal_region = bytes(region)

    def set_flags(self, flags: int) -> None:
        self.write(self.records(), flags)


class JournaledStore:
    """File operations routed through the journal of ``store``."""

    def __init__(self, store: BlockStore) -> None:
        self.store = store
        self.journal = Journal(store)
        self.mode = store.geometry.journal_mode

    @property
    def k(self) -> int:
        return self.journal.k

    def pending(self) -> list[JournalOp]:
        return self.journal.records() if self.mode == BATCHED else []

    def _existing(self) -> set[bytes]:
        return set(self.store.files())

    def plan(self) -> list[FlushOp]:
        return build_flush_plan(self.pending(), self._existing(), self.store.geometry.bucket_bytes)

    def view(self) -> BlockStore:
        """The store as it will look once pending records are flushed."""
        if self.mode != BATCHED or not self.pending():
            return self.store
        shadow = self.store.copy()
        apply_plan(shadow, self.plan())
        return shadow

    def _record(self, ops: list[JournalOp]) -> None:
        if self.mode == WRITE_THROUGH:
            if len(ops) != 1:
                raise OversizeOp("write-through journaling needs each operation to fit one record")
            window = self.journal.records()
            self.journal.write((window + ops)[-self.k :])
            try:
                apply_record(self.store, ops[0])
            except Exception:
                self.journal.write(window)
                raise
            return
        for op in ops:
            records = self.journal.records() + [op]
            self.journal.write(records)
            if len(records) == self.k:
                self.flush()

    def write(self, path: bytes, offset: int, data: bytes) -> int:
        path, data = bytes(path), bytes(data)
        if not data:
            raise ValueError("data must be non-empty")
        self.store._check_path(path)
        if self.mode == WRITE_THROUGH:
            ops = [JournalOp("write", path, offset, data)]
        else:
            ops = split_write(path, offset, data, self.store.geometry.bucket_bytes)
        self._record(ops)
        return len(data)

    def create(self, path: bytes) -> int:
        self.store._check_path(path)
        self._record([JournalOp("create", bytes(path))])
        return 0

    def delete(self, path: bytes) -> int:
        """Delete ``path``; returns 0, or -1 if it did not exist (still journaled)."""
        path = bytes(path)
        existed = self.view().exists(path)
        self._record([JournalOp("delete", path)])
        return 0 if existed else -1

    def read(self, path: bytes, offset: int, length: int) -> bytes:
        return self.view().read(path, offset, length)

    def exists(self, path: bytes) -> bool:
        return self.view().exists(path)

    def files(self) -> list[bytes]:
        return self.view().files()

    def flush(self) -> None:
        """Apply pending records and erase the log (batched mode)."""
        if self.mode != BATCHED:
            return
        records = self.journal.records()
        if not records:
            return
        plan = build_flush_plan(records, self._existing(), self.store.geometry.bucket_bytes)
        self.journal.write(records, FLUSHING)
        apply_plan(self.store, plan)
        self.journal.write([])

    def digest(self) -> str:
        return self.store.digest()

    def to_bytes(self) -> bytes:
        return self.store.to_bytes()


def recover(store: BlockStore) -> BlockStore:
    """Bring a possibly crashed image back to a consistent state, in place.

    A valid prefix of records is kept and anything after the first bad
    record is erased.  An interrupted flush is completed by replaying its
    plan, which is idempotent, so the pre-crash bucket contents do not
    matter.  In write-through mode the window is replayed, finishing an
    operation the crash may have cut short.
    """
    journal = Journal(store)
    head, count, flags = journal.header()
    records = []
    for j in range(count):
        rec = JournalOp.decode(journal.slot((head + j) % journal.k))
        if rec is None:
            break
        records.append(rec)
    mode = store.geometry.journal_mode
    if flags & FLUSHING:
        # Which deleted paths existed before the batch is no longer knowable,
        # so assume all did: a surplus delete-if-exists only removes state
        # that the rest of the plan then rebuilds.
        assumed = set(store.files()) | {r.path for r in records if r.op == "delete"}
        plan = build_flush_plan(records, assumed, store.geometry.bucket_bytes)
        apply_plan(store, plan)
        journal.write([])
        return store
    if mode == WRITE_THROUGH:
        for rec in records:
            apply_record(store, rec)
    journal.write(records)
    return store
