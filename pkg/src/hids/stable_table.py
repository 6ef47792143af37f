"""Strongly history independent hash table built on stable matching.

Keys propose to buckets in the order of their preference lists; a bucket
holding a key it likes less evicts that key, which resumes proposing right
after the bucket it lost.  Because every preference is unambiguous the final
assignment is the unique stable matching of the key set, so the serialized
slot array depends on the key set only and never on the order of operations.
"""

from __future__ import annotations

import struct
from collections.abc import Callable, Iterator
from dataclasses import dataclass
from typing import Optional

from .errors import DuplicateKey, NotFound, PayloadTooLarge, TableFull
from .keys import KeyRecord

# key_hash, path_hash, logical_bucket, payload_len
RECORD_HEADER = struct.Struct("<QQQI")

Slot = Optional[tuple[KeyRecord, bytes]]


@dataclass(frozen=True)
class InsertStats:
    bucket_writes: int
    displacements: int = 0


@dataclass(frozen=True)
class DeleteStats:
    bucket_writes: int
    relocations: int = 0


class SlotTable:
    """Fixed-capacity slot array shared by every table flavour.

    Serialized form: one fixed-width little-endian record per slot, header
    ``(key_hash u64, path_hash u64, logical_bucket u64, payload_len u32)``
    followed by the payload padded to ``payload_size``.  Empty slots are all
    zero, so a wiped slot is indistinguishable from a never-used one.
    """

    def __init__(self, policy, payload_size: int = 0) -> None:
        self.policy = policy
        self.payload_size = payload_size
        self.capacity = policy.capacity
        self.slots: list[Slot] = [None] * self.capacity
        self.count = 0

    @property
    def record_size(self) -> int:
        return RECORD_HEADER.size + self.payload_size

    @property
    def load_factor(self) -> float:
        return self.count / self.capacity

    def __len__(self) -> int:
        return self.count

    def __contains__(self, key: KeyRecord) -> bool:
        return self.search(key) is not None

    def search(self, key: KeyRecord) -> Optional[int]:
        return self.locate(key)[0]

    def locate(self, key: KeyRecord) -> tuple[Optional[int], int]:
        """Return ``(bucket or None, probes)``."""
        for b, slot in enumerate(self.slots):
            if slot is not None and slot[0] == key:
                return b, b + 1
        return None, self.capacity

    def get(self, key: KeyRecord) -> bytes:
        b = self.search(key)
        if b is None:
            raise NotFound(key)
        return self.slots[b][1]

    def update(self, key: KeyRecord, payload: bytes) -> int:
        """Replace the payload of a present key in place; returns bucket writes."""
        self._check_payload(payload)
        b = self.search(key)
        if b is None:
            raise NotFound(key)
        self.slots[b] = (self.slots[b][0], bytes(payload))
        return 1

    def keys(self) -> Iterator[KeyRecord]:
        for slot in self.slots:
            if slot is not None:
                yield slot[0]

    def items(self) -> Iterator[tuple[int, KeyRecord, bytes]]:
        for b, slot in enumerate(self.slots):
            if slot is not None:
                yield b, slot[0], slot[1]

    def layout(self) -> list[Optional[int]]:
        """Slot contents as logical-bucket numbers; handy for integer fixtures."""
        return [None if s is None else s[0].logical_bucket for s in self.slots]

    def copy(self):
        other = object.__new__(type(self))
        other.__dict__.update(self.__dict__)
        other.slots = list(self.slots)
        return other

    def _check_payload(self, payload: bytes) -> None:
        if len(payload) > self.payload_size:
            raise PayloadTooLarge(f"payload of {len(payload)} bytes exceeds {self.payload_size}")

    def _check_insert(self, key: KeyRecord, payload: bytes) -> None:
        self._check_payload(payload)
        if self.search(key) is not None:
            raise DuplicateKey(key)
        if self.count >= self.capacity:
            raise TableFull(f"all {self.capacity} slots occupied")

    def encode_slot(self, slot: Slot) -> bytes:
        if slot is None:
            return bytes(self.record_size)
        key, payload = slot
        header = RECORD_HEADER.pack(key.key_hash, key.path_hash, key.logical_bucket, len(payload))
        return header + payload + bytes(self.payload_size - len(payload))

    def serialize(self) -> bytes:
        return b"".join(self.encode_slot(slot) for slot in self.slots)

    @classmethod
    def decode_slot(cls, record: bytes) -> Slot:
        if not any(record):
            return None
        key_hash, path_hash, lb, n = RECORD_HEADER.unpack_from(record)
        payload = record[RECORD_HEADER.size : RECORD_HEADER.size + n]
        return KeyRecord(path_hash=path_hash, logical_bucket=lb, key_hash=key_hash), bytes(payload)

    @classmethod
    def from_bytes(cls, policy, data: bytes, payload_size: int = 0):
        table = cls(policy, payload_size)
        size = table.record_size
        if len(data) != size * table.capacity:
            raise ValueError(f"expected {size * table.capacity} bytes, got {len(data)}")
        for b in range(table.capacity):
            slot = cls.decode_slot(data[b * size : (b + 1) * size])
            table.slots[b] = slot
            table.count += slot is not None
        return table

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SlotTable):
            return NotImplemented
        return self.slots == other.slots

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.policy.describe()}, count={self.count})"


class StableTable(SlotTable):
    """Canonically laid out table; the layout is the stable matching of its keys."""

    def insert(
        self,
        key: KeyRecord,
        payload: bytes = b"",
        on_probe: Optional[Callable[[KeyRecord, int, int], None]] = None,
    ) -> InsertStats:
        """Insert ``key``; ``on_probe(key, rank, bucket)`` sees every proposal."""
        self._check_insert(key, payload)
        policy = self.policy
        cur, cur_payload, rank = key, bytes(payload), 0
        writes = displacements = 0
        while True:
            if rank >= self.capacity:
                raise AssertionError("proposal ran off the preference list")  # unreachable
            b = policy.bucket_at(cur, rank)
            if on_probe is not None:
                on_probe(cur, rank, b)
            occupant = self.slots[b]
            if occupant is None:
                self.slots[b] = (cur, cur_payload)
                writes += 1
                break
            if policy.bucket_prefers(b, cur, occupant[0]) is cur:
                self.slots[b] = (cur, cur_payload)
                writes += 1
                displacements += 1
                cur, cur_payload = occupant
                rank = policy.rank_of(cur, b) + 1
            else:
                rank += 1
        self.count += 1
        return InsertStats(bucket_writes=writes, displacements=displacements)

    def locate(self, key: KeyRecord) -> tuple[Optional[int], int]:
        # A present key sits behind buckets that all hold keys they prefer
        # to it, so the first empty or weaker occupant ends the search.
        policy = self.policy
        probes = 0
        for rank in range(self.capacity):
            b = policy.bucket_at(key, rank)
            probes += 1
            occupant = self.slots[b]
            if occupant is None:
                return None, probes
            if occupant[0] == key:
                return b, probes
            if policy.bucket_prefers(b, key, occupant[0]) is key:
                return None, probes
        return None, probes

    def delete(self, key: KeyRecord) -> DeleteStats:
        """Remove ``key`` and refill the hole as if the key had never been inserted."""
        hole = self.search(key)
        if hole is None:
            raise NotFound(key)
        policy = self.policy
        self.slots[hole] = None
        self.count -= 1
        relocations = 0
        while True:
            best = best_at = None
            for j in policy.delete_candidates(self.slots, hole):
                slot = self.slots[j]
                if slot is None:
                    continue
                k = slot[0]
                if policy.rank_of(k, hole) < policy.rank_of(k, j):
                    if best is None or policy.bucket_prefers(hole, k, best) is k:
                        best, best_at = k, j
            if best is None:
                break
            self.slots[hole] = self.slots[best_at]
            self.slots[best_at] = None
            hole = best_at
            relocations += 1
        # Each relocation writes its target; the final hole is wiped once.
        return DeleteStats(bucket_writes=relocations + 1, relocations=relocations)

    def blocking_pair(self) -> Optional[tuple[KeyRecord, int, int]]:
        """Return ``(key, its bucket, bucket it would rather take)`` or None if stable."""
        policy = self.policy
        for b, slot in enumerate(self.slots):
            if slot is None:
                continue
            k = slot[0]
            for rank in range(policy.rank_of(k, b)):
                other = policy.bucket_at(k, rank)
                occupant = self.slots[other]
                if occupant is None or policy.bucket_prefers(other, k, occupant[0]) is k:
                    return k, b, other
        return None
