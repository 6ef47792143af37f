"""Delete-agnostic table: first-free linear probing plus hole-filling deletes.

Inserts are cheap (one bucket write) and the layout does reveal insertion
order.  Deletes shift later members of the probe run back into the hole,
leaving exactly the layout the remaining insertions would have produced on
their own, so a delete leaves no trace.
"""

from __future__ import annotations

from typing import Optional

from .errors import NotFound
from .keys import KeyRecord
from .stable_table import DeleteStats, InsertStats, SlotTable


class DahiTable(SlotTable):
    """Linear probing from the policy's most preferred bucket, forward cyclic."""

    def home(self, key: KeyRecord) -> int:
        return self.policy.bucket_at(key, 0)

    def locate(self, key: KeyRecord) -> tuple[Optional[int], int]:
        C = self.capacity
        b = self.home(key)
        for i in range(C):
            slot = self.slots[b]
            if slot is None:
                return None, i + 1
            if slot[0] == key:
                return b, i + 1
            b = (b + 1) % C
        return None, C

    def insert(self, key: KeyRecord, payload: bytes = b"") -> InsertStats:
        self._check_insert(key, payload)
        C = self.capacity
        b = self.home(key)
        while self.slots[b] is not None:
            b = (b + 1) % C
        self.slots[b] = (key, bytes(payload))
        self.count += 1
        return InsertStats(bucket_writes=1)

    def delete(self, key: KeyRecord) -> DeleteStats:
        hole = self.search(key)
        if hole is None:
            raise NotFound(key)
        C = self.capacity
        self.slots[hole] = None
        self.count -= 1
        relocations = 0
        j = hole
        while True:
            j = (j + 1) % C
            slot = self.slots[j]
            if slot is None:
                break
            h = self.home(slot[0])
            # The hole is on this key's probe path strictly before its slot.
            if (hole - h) % C < (j - h) % C:
                self.slots[hole] = slot
                self.slots[j] = None
                hole = j
                relocations += 1
        return DeleteStats(bucket_writes=relocations + 1, relocations=relocations)

    def probe_chain_broken(self) -> Optional[KeyRecord]:
        """Return a key unreachable from its home slot, or None."""
        C = self.capacity
        for b, slot in enumerate(self.slots):
            if slot is None:
                continue
            h = self.home(slot[0])
            i = h
            while i != b:
                if self.slots[i] is None:
                    return slot[0]
                i = (i + 1) % C
        return None


class LinearProbeBaseline(DahiTable):
    """First-free linear probing whose delete just wipes the slot.

    History dependent on purpose.  Lookups scan the whole table because a
    wiped slot may cut a probe run.
    """

    def locate(self, key: KeyRecord) -> tuple[Optional[int], int]:
        return SlotTable.locate(self, key)

    def delete(self, key: KeyRecord) -> DeleteStats:
        b = self.search(key)
        if b is None:
            raise NotFound(key)
        self.slots[b] = None
        self.count -= 1
        return DeleteStats(bucket_writes=1)
