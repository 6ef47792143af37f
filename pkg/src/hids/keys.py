"""Seeded 64-bit hashing and the key records stored in the tables.

Hashes are 8-byte BLAKE2b digests keyed with the seed.  They are
deterministic across processes and platforms (no use of Python's randomized
``hash``) and every input bit affects every output bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import total_ordering

MASK64 = (1 << 64) - 1


def hash64(data: bytes, seed: int = 0) -> int:
    """Return the seeded 64-bit hash of ``data``."""
    h = hashlib.blake2b(data, digest_size=8, key=(seed & MASK64).to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


@total_ordering
@dataclass(frozen=True, eq=False)
class KeyRecord:
    """Identity of one (path, logical bucket) pair.

    Equality only looks at ``(path_hash, logical_bucket)``.  The ordering is
    the priority a bucket uses to choose between keys: a larger ``order``
    means a more preferred key, so ``max`` picks the winner.
    """

    path_hash: int
    logical_bucket: int
    key_hash: int

    @classmethod
    def derive(cls, path: bytes, logical_bucket: int, seed: int = 0) -> KeyRecord:
        if logical_bucket < 0:
            raise ValueError("logical_bucket must be non-negative")
        return cls(
            path_hash=hash64(path, seed),
            logical_bucket=logical_bucket,
            key_hash=hash64(path + logical_bucket.to_bytes(8, "little"), seed),
        )

    @classmethod
    def for_int(cls, value: int, seed: int = 0) -> KeyRecord:
        """Key for element ``value`` of an integer universe (test fixtures, benches)."""
        return cls.derive(b"", value, seed)

    @property
    def order(self) -> tuple[int, int, int]:
        return (self.key_hash, self.path_hash, self.logical_bucket)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KeyRecord):
            return NotImplemented
        return (self.path_hash, self.logical_bucket) == (other.path_hash, other.logical_bucket)

    def __hash__(self) -> int:
        return hash((self.path_hash, self.logical_bucket))

    def __lt__(self, other: KeyRecord) -> bool:
        return self.order < other.order

    def __repr__(self) -> str:
        return f"KeyRecord(lb={self.logical_bucket}, path={self.path_hash:016x}, key={self.key_hash:016x})"
