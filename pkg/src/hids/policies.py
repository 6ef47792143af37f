"""Preference policies: who a key wants, and who a bucket wants.

A policy answers four questions for the generic table procedures:

* ``bucket_at(key, 0)``     -- the key's most preferred bucket,
* ``bucket_at(key, r + 1)`` -- the bucket after ``bucket_at(key, r)``,
* ``key_prefers``           -- which of two buckets a key ranks higher,
* ``bucket_prefers``        -- which of two keys a bucket ranks higher.

Every key's preference list is a permutation of all buckets and every bucket
ranks keys by one strict total order, so the stable matching is unique and
the table layout is canonical.  New locality schemes only need a new subclass.
"""

from __future__ import annotations

from collections.abc import Iterable

from .dahi_table import LinearProbeBaseline
from .errors import RankOutOfRange
from .keys import KeyRecord

HASH_PRIORITY = 1
BLOCK_GROUP = 2
LINEAR_PROBE_BASELINE = 3
DAHI_BLOCK_GROUP = 4
FIXTURE = 0


class PreferencePolicy:
    policy_id = FIXTURE

    def __init__(self, group_count: int, buckets_per_group: int) -> None:
        if group_count <= 0 or buckets_per_group <= 0:
            raise ValueError("group_count and buckets_per_group must be positive")
        self.group_count = group_count
        self.buckets_per_group = buckets_per_group
        self.capacity = group_count * buckets_per_group

    def bucket_at(self, key: KeyRecord, rank: int) -> int:
        raise NotImplementedError

    def rank_of(self, key: KeyRecord, bucket: int) -> int:
        """Inverse of ``bucket_at``: position of ``bucket`` on the key's list."""
        raise NotImplementedError

    def most_preferred_bucket(self, key: KeyRecord) -> int:
        return self.bucket_at(key, 0)

    def next_bucket(self, key: KeyRecord, bucket: int) -> int:
        return self.bucket_at(key, self.rank_of(key, bucket) + 1)

    def key_prefers(self, key: KeyRecord, b1: int, b2: int) -> int:
        if b1 == b2:
            raise ValueError("key_prefers needs two distinct buckets")
        return b1 if self.rank_of(key, b1) < self.rank_of(key, b2) else b2

    def bucket_prefers(self, bucket: int, k1: KeyRecord, k2: KeyRecord) -> KeyRecord:
        # Buckets prefer keys with higher numerical values.
        return k1 if k1.order > k2.order else k2

    def delete_candidates(self, slots: list, hole: int):
        """Buckets whose occupants might prefer ``hole`` over where they sit."""
        return range(len(slots))

    def _group_run_candidates(self, slots: list, hole: int):
        # For group-cyclic lists, a key that prefers the hole sits in the
        # occupied run after it inside the hole's group.  Only when that
        # group is otherwise full can keys from other groups qualify.
        B = self.buckets_per_group
        base, s = hole - hole % B, hole % B
        run = []
        for i in range(1, B):
            b = base + (s + i) % B
            if slots[b] is None:
                return run
            run.append(b)
        return range(len(slots))

    def preference_list(self, key: KeyRecord) -> list[int]:
        return [self.bucket_at(key, r) for r in range(self.capacity)]

    def _check_rank(self, rank: int) -> None:
        if not 0 <= rank < self.capacity:
            raise RankOutOfRange(f"rank {rank} outside 0..{self.capacity - 1}")

    def describe(self) -> str:
        return f"{type(self).__name__}(G={self.group_count}, B={self.buckets_per_group})"

    def __repr__(self) -> str:
        return self.describe()


class BlockGroupLocalityPolicy(PreferencePolicy):
    """Keys walk their home group cyclically, then the following groups.

    The home group comes from the high half of the *path* hash so that all
    logical buckets of one file share a group; the starting slot comes from
    the low half of the key hash.
    """

    policy_id = BLOCK_GROUP

    def home_group(self, key: KeyRecord) -> int:
        return (key.path_hash >> 32) % self.group_count

    def home_slot(self, key: KeyRecord) -> int:
        return (key.key_hash & 0xFFFFFFFF) % self.buckets_per_group

    def bucket_at(self, key: KeyRecord, rank: int) -> int:
        self._check_rank(rank)
        B = self.buckets_per_group
        group = (self.home_group(key) + rank // B) % self.group_count
        slot = (self.home_slot(key) + rank % B) % B
        return group * B + slot

    def rank_of(self, key: KeyRecord, bucket: int) -> int:
        B = self.buckets_per_group
        group, slot = divmod(bucket, B)
        group_offset = (group - self.home_group(key)) % self.group_count
        return group_offset * B + (slot - self.home_slot(key)) % B

    def delete_candidates(self, slots: list, hole: int):
        return self._group_run_candidates(slots, hole)

    def group_of(self, bucket: int) -> int:
        return bucket // self.buckets_per_group


class HashPriorityPolicy(BlockGroupLocalityPolicy):
    """One group: plain priority linear probing from ``key_hash mod C``."""

    policy_id = HASH_PRIORITY

    def __init__(self, capacity: int) -> None:
        super().__init__(1, capacity)

    def describe(self) -> str:
        return f"HashPriorityPolicy(C={self.capacity})"


class ModuloPolicy(PreferencePolicy):
    """Integer-keyed fixture: home slot ``value mod C``, forward cyclic probing.

    The value is the key's ``logical_bucket`` (see ``KeyRecord.for_int``).
    Buckets prefer the smaller value unless ``prefer_lower`` is false.
    """

    def __init__(self, capacity: int, prefer_lower: bool = True) -> None:
        super().__init__(1, capacity)
        self.prefer_lower = prefer_lower

    def bucket_at(self, key: KeyRecord, rank: int) -> int:
        self._check_rank(rank)
        return (key.logical_bucket + rank) % self.capacity

    def rank_of(self, key: KeyRecord, bucket: int) -> int:
        return (bucket - key.logical_bucket) % self.capacity

    def delete_candidates(self, slots: list, hole: int):
        return self._group_run_candidates(slots, hole)

    def bucket_prefers(self, bucket: int, k1: KeyRecord, k2: KeyRecord) -> KeyRecord:
        v1, v2 = k1.logical_bucket, k2.logical_bucket
        if v1 == v2:
            return super().bucket_prefers(bucket, k1, k2)
        if self.prefer_lower:
            return k1 if v1 < v2 else k2
        return k1 if v1 > v2 else k2

    def describe(self) -> str:
        return f"ModuloPolicy(C={self.capacity}, prefer_lower={self.prefer_lower})"


POLICY_NAMES = {
    HASH_PRIORITY: "hash-priority",
    BLOCK_GROUP: "block-group locality",
    LINEAR_PROBE_BASELINE: "linear-probe baseline",
    DAHI_BLOCK_GROUP: "delete-agnostic linear probing",
}


def make_policy(policy_id: int, group_count: int, buckets_per_group: int) -> PreferencePolicy:
    """Build the policy registered under ``policy_id`` for a geometry."""
    if policy_id == HASH_PRIORITY:
        return HashPriorityPolicy(group_count * buckets_per_group)
    if policy_id in (BLOCK_GROUP, DAHI_BLOCK_GROUP):
        return BlockGroupLocalityPolicy(group_count, buckets_per_group)
    if policy_id == LINEAR_PROBE_BASELINE:
        return ModuloPolicy(group_count * buckets_per_group)
    raise ValueError(f"unknown policy id {policy_id}")


def linear_probe_baseline(values: Iterable[int], capacity: int = 3) -> LinearProbeBaseline:
    """Insert integers into a first-free linear-probing table with ``h(v) = v mod C``.

    Deletions (``("delete", v)`` items) just wipe the slot.  The layout depends
    on insertion order, which is what makes it a useful negative control.
    """
    table = LinearProbeBaseline(ModuloPolicy(capacity))
    for item in values:
        if isinstance(item, tuple):
            op, value = item
        else:
            op, value = "insert", item
        key = KeyRecord.for_int(value)
        if op == "insert":
            table.insert(key)
        elif op == "delete":
            table.delete(key)
        else:
            raise ValueError(f"unknown operation {op!r}")
    return table
