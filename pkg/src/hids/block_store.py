"""Canonical on-disk file store.

The image is a superblock, a journal region, and ``group_count`` block
groups.  Each group holds a bucket map (one 32-byte entry per data bucket),
an inode table (512-byte slots) and the data buckets themselves.  The bucket
maps of all groups together form one hash table keyed by
``(path, logical bucket)``; the inode tables form a second one keyed by path.
Both tables place keys canonically, free space is all zero, and a data
bucket is stored only when its content is non-zero, so the whole image is
a function of the set of files and their contents.

Images can be far larger than memory would comfortably hold, so the store
keeps only occupied payloads and generates bytes lazily.
"""

from __future__ import annotations

import hashlib
import io
import os
import struct
from collections.abc import Callable, Iterator
from dataclasses import dataclass, fields, replace
from typing import BinaryIO, Optional

from .dahi_table import DahiTable, LinearProbeBaseline
from .errors import (
    BadGeometry,
    BadHandle,
    CorruptImage,
    NoSpace,
    NotFound,
    PathTooLong,
    ReadBeyondEof,
)
from .keys import KeyRecord
from .policies import (
    BLOCK_GROUP,
    DAHI_BLOCK_GROUP,
    HASH_PRIORITY,
    LINEAR_PROBE_BASELINE,
    make_policy,
)
from .stable_table import RECORD_HEADER, SlotTable, StableTable

MAGIC = b"HIDS0001"
VERSION = 1
SUPERBLOCK = struct.Struct("<8sIIIIIIQIIQI")
MAP_ENTRY = struct.Struct("<IQQQI")
JOURNAL_SLOT = 4096
INODE_SLOT = 512
INODE_PAYLOAD = INODE_SLOT - RECORD_HEADER.size
INODE_META = struct.Struct("<QIH")
MAX_PATH = INODE_PAYLOAD - INODE_META.size
FILE_MODE = 0o100644
ZERO_CHUNK = 1 << 20

TABLE_CLASSES = {
    HASH_PRIORITY: StableTable,
    BLOCK_GROUP: StableTable,
    LINEAR_PROBE_BASELINE: LinearProbeBaseline,
    DAHI_BLOCK_GROUP: DahiTable,
}

# journal_mode values
BATCHED = 0
WRITE_THROUGH = 1


def _round_up(n: int, unit: int) -> int:
    return -(-n // unit) * unit


@dataclass(frozen=True)
class Geometry:
    block_size: int = 4096
    blocks_per_bucket: int = 5120
    group_count: int = 8
    buckets_per_group: int = 4
    inode_slots_per_group: int = 8
    seed: int = 0
    policy_id: int = BLOCK_GROUP
    journal_slots: int = 0
    journal_mode: int = BATCHED

    def __post_init__(self) -> None:
        for name in ("block_size", "blocks_per_bucket", "group_count", "buckets_per_group", "inode_slots_per_group"):
            if getattr(self, name) <= 0:
                raise BadGeometry(f"{name} must be positive")
        if self.block_size < SUPERBLOCK.size:
            raise BadGeometry(f"block_size must be at least {SUPERBLOCK.size}")
        if self.journal_slots < 0:
            raise BadGeometry("journal_slots must be non-negative")
        if self.policy_id not in TABLE_CLASSES:
            raise BadGeometry(f"unknown policy id {self.policy_id}")
        if self.journal_mode not in (BATCHED, WRITE_THROUGH):
            raise BadGeometry(f"unknown journal mode {self.journal_mode}")
        if not 0 <= self.seed < 1 << 64:
            raise BadGeometry("seed must fit in 64 bits")

    @property
    def bucket_bytes(self) -> int:
        return self.block_size * self.blocks_per_bucket

    @property
    def map_bytes(self) -> int:
        return _round_up(self.buckets_per_group * MAP_ENTRY.size, self.block_size)

    @property
    def inode_bytes(self) -> int:
        return _round_up(self.inode_slots_per_group * INODE_SLOT, self.block_size)

    @property
    def group_bytes(self) -> int:
        return self.map_bytes + self.inode_bytes + self.buckets_per_group * self.bucket_bytes

    @property
    def journal_offset(self) -> int:
        return self.block_size

    @property
    def journal_bytes(self) -> int:
        if not self.journal_slots:
            return 0
        return _round_up((self.journal_slots + 1) * JOURNAL_SLOT, self.block_size)

    @property
    def groups_offset(self) -> int:
        return self.journal_offset + self.journal_bytes

    @property
    def image_size(self) -> int:
        return self.groups_offset + self.group_count * self.group_bytes

    @property
    def bucket_count(self) -> int:
        return self.group_count * self.buckets_per_group

    @property
    def inode_count(self) -> int:
        return self.group_count * self.inode_slots_per_group

    def gdb(self, offset: int) -> int:
        """Logical bucket holding byte ``offset`` of a file."""
        return offset // self.bucket_bytes

    def group_offset(self, g: int) -> int:
        return self.groups_offset + g * self.group_bytes

    def bucket_offset(self, b: int) -> int:
        g, s = divmod(b, self.buckets_per_group)
        return self.group_offset(g) + self.map_bytes + self.inode_bytes + s * self.bucket_bytes

    def map_entry_offset(self, b: int) -> int:
        g, s = divmod(b, self.buckets_per_group)
        return self.group_offset(g) + s * MAP_ENTRY.size

    def inode_offset(self, i: int) -> int:
        g, s = divmod(i, self.inode_slots_per_group)
        return self.group_offset(g) + self.map_bytes + s * INODE_SLOT

    def pack(self) -> bytes:
        sb = SUPERBLOCK.pack(
            MAGIC,
            VERSION,
            self.block_size,
            self.blocks_per_bucket,
            self.group_count,
            self.buckets_per_group,
            self.inode_slots_per_group,
            self.seed,
            self.policy_id,
            self.journal_slots,
            self.journal_offset if self.journal_slots else 0,
            self.journal_mode,
        )
        return sb + bytes(self.block_size - len(sb))

    @classmethod
    def unpack(cls, data: bytes) -> "Geometry":
        if len(data) < SUPERBLOCK.size:
            raise CorruptImage("image shorter than a superblock")
        (magic, version, bs, bpb, g, b, i, seed, pid, k, joff, jmode) = SUPERBLOCK.unpack_from(data)
        if magic != MAGIC:
            raise CorruptImage(f"bad magic {magic!r}")
        if version != VERSION:
            raise CorruptImage(f"unsupported version {version}")
        try:
            geo = cls(bs, bpb, g, b, i, seed, pid, k, jmode)
        except BadGeometry as exc:
            raise CorruptImage(str(exc)) from exc
        if joff != (geo.journal_offset if k else 0):
            raise CorruptImage("journal offset disagrees with geometry")
        return geo

    def replace(self, **changes) -> "Geometry":
        return replace(self, **changes)


DEFAULT_GEOMETRY = Geometry()
# Small journaled variant with four groups of 512-block buckets.
JOURNALED_GEOMETRY = Geometry(group_count=4, blocks_per_bucket=512, journal_slots=16)


@dataclass(frozen=True)
class Inode:
    path: bytes
    file_size: int
    mode: int = FILE_MODE

    def pack(self) -> bytes:
        return INODE_META.pack(self.file_size, self.mode, len(self.path)) + self.path

    @classmethod
    def unpack(cls, payload: bytes) -> "Inode":
        size, mode, n = INODE_META.unpack_from(payload)
        return cls(bytes(payload[INODE_META.size : INODE_META.size + n]), size, mode)


class BlockStore:
    """A mutable image; every method keeps it canonical.

    ``on_mutation`` (if set) is called before every table mutation, which
    lets tests simulate a crash between two bucket writes.
    """

    def __init__(self, geometry: Geometry = DEFAULT_GEOMETRY) -> None:
        self.geometry = geometry
        G = geometry.group_count
        cls = TABLE_CLASSES[geometry.policy_id]
        self.data = cls(make_policy(geometry.policy_id, G, geometry.buckets_per_group), geometry.bucket_bytes)
        self.inodes = cls(make_policy(geometry.policy_id, G, geometry.inode_slots_per_group), INODE_PAYLOAD)
        self.journal_region = bytes(geometry.journal_bytes)
        self.writes = 0
        self.on_mutation: Optional[Callable[[str], None]] = None
        self._handles: dict[int, bytes] = {}
        self._next_handle = 1

    # keys

    def data_key(self, path: bytes, lb: int) -> KeyRecord:
        return KeyRecord.derive(path, lb, self.geometry.seed)

    def inode_key(self, path: bytes) -> KeyRecord:
        return KeyRecord.derive(path, 0, self.geometry.seed)

    # table mutations, funnelled through one place for write counting and faults

    def _mutate(self, table: SlotTable, op: str, key: KeyRecord, payload: bytes = b"") -> None:
        if self.on_mutation is not None:
            self.on_mutation(op)
        if op == "insert":
            self.writes += table.insert(key, payload).bucket_writes
        elif op == "update":
            self.writes += table.update(key, payload)
        else:
            self.writes += table.delete(key).bucket_writes

    # file system operations

    def _check_path(self, path: bytes) -> bytes:
        path = bytes(path)
        if not path:
            raise ValueError("path must be non-empty")
        if len(path) > MAX_PATH:
            raise PathTooLong(f"path of {len(path)} bytes exceeds {MAX_PATH}")
        return path

    def inode(self, path: bytes) -> Inode:
        key = self.inode_key(path)
        b = self.inodes.search(key)
        if b is None:
            raise NotFound(path)
        return Inode.unpack(self.inodes.slots[b][1])

    def exists(self, path: bytes) -> bool:
        return self.inodes.search(self.inode_key(path)) is not None

    def files(self) -> list[bytes]:
        return sorted(Inode.unpack(p).path for _, _, p in self.inodes.items())

    def write(self, path: bytes, offset: int, data: bytes) -> int:
        """Write ``data`` at ``offset``, creating the file if needed; returns ``len(data)``."""
        data = bytes(data)
        if not data:
            raise ValueError("data must be non-empty")
        self.write_extents(path, [(offset, data)])
        return len(data)

    def create(self, path: bytes) -> int:
        """Create an empty file if it does not exist; returns 0."""
        self.write_extents(path, [])
        return 0

    def write_extents(self, path: bytes, extents, size: int = 0) -> None:
        """Apply ``(offset, data)`` patches in order, touching each bucket once.

        The file grows to at least ``size`` and to the end of every patch.
        Nothing is modified if the write cannot fit.
        """
        path = self._check_path(path)
        geo = self.geometry
        bb = geo.bucket_bytes
        touched: dict[int, list[tuple[int, bytes]]] = {}
        for offset, data in extents:
            if offset < 0:
                raise ValueError("offset must be non-negative")
            end = offset + len(data)
            size = max(size, end)
            for lb in range(geo.gdb(offset), geo.gdb(end - 1) + 1 if data else geo.gdb(offset)):
                lo, hi = max(offset, lb * bb), min(end, (lb + 1) * bb)
                touched.setdefault(lb, []).append((lo - lb * bb, data[lo - offset : hi - offset]))

        plan = []
        for lb in sorted(touched):
            key = self.data_key(path, lb)
            at = self.data.search(key)
            old = self.data.slots[at][1] if at is not None else b""
            body = bytearray(old)
            for lo, chunk in touched[lb]:
                if len(body) < lo + len(chunk):
                    body.extend(bytes(lo + len(chunk) - len(body)))
                body[lo : lo + len(chunk)] = chunk
            new = bytes(body).rstrip(b"\0")
            if new != old:
                plan.append((key, at is not None, new))
        new_keys = sum(1 for _, present, new in plan if not present and new)
        if self.data.count + new_keys > self.data.capacity:
            raise NoSpace(f"need {new_keys} free data buckets")
        exists = self.exists(path)
        if not exists and self.inodes.count >= self.inodes.capacity:
            raise NoSpace("inode table full")

        node = Inode(path, max(self.inode(path).file_size if exists else 0, size)).pack()
        ikey = self.inode_key(path)
        if not exists:
            self._mutate(self.inodes, "insert", ikey, node)
        elif self.inodes.get(ikey) != node:
            self._mutate(self.inodes, "update", ikey, node)
        for key, present, new in plan:
            if present and new:
                self._mutate(self.data, "update", key, new)
            elif present:
                self._mutate(self.data, "delete", key)
            else:
                self._mutate(self.data, "insert", key, new)

    def read(self, path: bytes, offset: int, length: int) -> bytes:
        node = self.inode(path)
        if offset < 0 or length < 0 or offset + length > node.file_size:
            raise ReadBeyondEof(f"read of [{offset}, {offset + length}) past size {node.file_size}")
        if length == 0:
            return b""
        geo = self.geometry
        bb = geo.bucket_bytes
        out = bytearray(length)
        for lb in range(geo.gdb(offset), geo.gdb(offset + length - 1) + 1):
            at = self.data.search(self.data_key(node.path, lb))
            if at is None:
                continue
            payload = self.data.slots[at][1]
            start = lb * bb
            lo = max(offset, start)
            hi = min(offset + length, start + len(payload))
            if hi > lo:
                out[lo - offset : hi - offset] = payload[lo - start : hi - start]
        return bytes(out)

    def delete(self, path: bytes) -> int:
        """Remove the file and every trace of it; returns 0."""
        node = self.inode(path)
        geo = self.geometry
        n = -(-node.file_size // geo.bucket_bytes)
        for lb in range(n):
            key = self.data_key(node.path, lb)
            if self.data.search(key) is not None:
                self._mutate(self.data, "delete", key)
        self._mutate(self.inodes, "delete", self.inode_key(node.path))
        return 0

    def open(self, path: bytes) -> int:
        self.inode(path)
        handle = self._next_handle
        self._next_handle += 1
        self._handles[handle] = bytes(path)
        return handle

    def close(self, handle: int) -> int:
        if self._handles.pop(handle, None) is None:
            raise BadHandle(handle)
        return 0

    def path_of(self, handle: int) -> bytes:
        try:
            return self._handles[handle]
        except KeyError:
            raise BadHandle(handle) from None

    def bucket_of(self, path: bytes, lb: int) -> Optional[int]:
        """Global bucket index holding logical bucket ``lb`` of ``path``."""
        return self.data.search(self.data_key(path, lb))

    # image

    def copy(self) -> "BlockStore":
        other = object.__new__(BlockStore)
        other.__dict__.update(self.__dict__)
        other.data = self.data.copy()
        other.inodes = self.inodes.copy()
        other._handles = {}
        other.on_mutation = None
        return other

    def iter_chunks(self) -> Iterator[bytes]:
        """Yield the image bytes in order; concatenation is ``to_bytes()``."""
        geo = self.geometry
        yield geo.pack()
        yield self.journal_region
        B, I = geo.buckets_per_group, geo.inode_slots_per_group
        for g in range(geo.group_count):
            entries = []
            for b in range(g * B, (g + 1) * B):
                slot = self.data.slots[b]
                if slot is None:
                    entries.append(bytes(MAP_ENTRY.size))
                else:
                    k, p = slot
                    entries.append(MAP_ENTRY.pack(1, k.key_hash, k.path_hash, k.logical_bucket, len(p)))
            yield b"".join(entries).ljust(geo.map_bytes, b"\0")
            inodes = (self.inodes.encode_slot(self.inodes.slots[i]) for i in range(g * I, (g + 1) * I))
            yield b"".join(inodes).ljust(geo.inode_bytes, b"\0")
            for b in range(g * B, (g + 1) * B):
                slot = self.data.slots[b]
                payload = slot[1] if slot is not None else b""
                if payload:
                    yield payload
                yield from _zeros(geo.bucket_bytes - len(payload))

    def to_bytes(self) -> bytes:
        return b"".join(self.iter_chunks())

    def digest(self) -> str:
        h = hashlib.sha256()
        for chunk in self.iter_chunks():
            h.update(chunk)
        return h.hexdigest()

    def save(self, path) -> None:
        """Write the image, leaving long zero runs as holes where the OS allows."""
        with open(path, "wb") as f:
            for chunk in self.iter_chunks():
                if len(chunk) >= 4096 and _is_zero(chunk):
                    f.seek(len(chunk), os.SEEK_CUR)
                else:
                    f.write(chunk)
            f.truncate(self.geometry.image_size)

    @classmethod
    def load(cls, path, verify: bool = False) -> "BlockStore":
        with open(path, "rb") as f:
            return cls.read_from(f, verify=verify)

    @classmethod
    def from_bytes(cls, data: bytes, verify: bool = True) -> "BlockStore":
        return cls.read_from(io.BytesIO(data), verify=verify)

    @classmethod
    def read_from(cls, f: BinaryIO, verify: bool = False) -> "BlockStore":
        """Parse an image.  ``verify`` also checks that free space is all zero."""
        f.seek(0, os.SEEK_END)
        size = f.tell()
        f.seek(0)
        geo = Geometry.unpack(f.read(SUPERBLOCK.size))
        if size != geo.image_size:
            raise CorruptImage(f"image is {size} bytes, geometry says {geo.image_size}")
        store = cls(geo)
        if verify:
            f.seek(SUPERBLOCK.size)
            if any(f.read(geo.block_size - SUPERBLOCK.size)):
                raise CorruptImage("superblock padding is not zero")
        f.seek(geo.journal_offset)
        store.journal_region = f.read(geo.journal_bytes)
        B, I = geo.buckets_per_group, geo.inode_slots_per_group
        for g in range(geo.group_count):
            f.seek(geo.group_offset(g))
            maps = f.read(geo.map_bytes)
            inodes = f.read(geo.inode_bytes)
            if verify and (any(maps[B * MAP_ENTRY.size :]) or any(inodes[I * INODE_SLOT :])):
                raise CorruptImage(f"group {g} metadata padding is not zero")
            for s in range(I):
                slot = SlotTable.decode_slot(inodes[s * INODE_SLOT : (s + 1) * INODE_SLOT])
                if slot is not None:
                    store.inodes.slots[g * I + s] = slot
                    store.inodes.count += 1
            for s in range(B):
                b = g * B + s
                flag, kh, ph, lb, n = MAP_ENTRY.unpack_from(maps, s * MAP_ENTRY.size)
                if flag == 0:
                    if any(maps[s * MAP_ENTRY.size : (s + 1) * MAP_ENTRY.size]):
                        raise CorruptImage(f"free map entry {b} is not zero")
                    if verify and _nonzero(f, geo.bucket_offset(b), geo.bucket_bytes):
                        raise CorruptImage(f"free bucket {b} holds data")
                    continue
                if flag != 1 or n > geo.bucket_bytes:
                    raise CorruptImage(f"bad map entry {b}")
                f.seek(geo.bucket_offset(b))
                payload = f.read(n)
                if verify and _nonzero(f, geo.bucket_offset(b) + n, geo.bucket_bytes - n):
                    raise CorruptImage(f"bucket {b} has bytes past its length")
                key = KeyRecord(path_hash=ph, logical_bucket=lb, key_hash=kh)
                store.data.slots[b] = (key, payload)
                store.data.count += 1
        if verify:
            store.check()
        return store

    def check(self) -> None:
        """Raise CorruptImage unless the image is exactly what its files imply."""
        seed = self.geometry.seed
        owners = {}
        for _, key, payload in self.inodes.items():
            node = Inode.unpack(payload)
            if self.inode_key(node.path).order != key.order:
                raise CorruptImage(f"inode key of {node.path!r} does not match its path")
            owners[key.path_hash] = node
        for b, key, payload in self.data.items():
            node = owners.get(key.path_hash)
            if node is None:
                raise CorruptImage(f"bucket {b} belongs to no file")
            if KeyRecord.derive(node.path, key.logical_bucket, seed).order != key.order:
                raise CorruptImage(f"bucket {b} key does not match its file")
            if not payload or payload[-1] == 0:
                raise CorruptImage(f"bucket {b} payload is not trimmed")
            if key.logical_bucket * self.geometry.bucket_bytes + len(payload) > node.file_size:
                raise CorruptImage(f"bucket {b} extends past end of file")
        if self.data.__class__ is StableTable and (
            self.data.blocking_pair() is not None or self.inodes.blocking_pair() is not None
        ):
            raise CorruptImage("table layout is not the canonical one")

    def layout_map(self) -> str:
        """Human-readable map of every group's buckets and inode slots."""
        geo = self.geometry
        names = {}
        for _, key, payload in self.inodes.items():
            names[key.path_hash] = Inode.unpack(payload)
        lines = [
            f"geometry: {geo.group_count} groups x {geo.buckets_per_group} buckets of "
            f"{geo.blocks_per_bucket} x {geo.block_size} bytes, {geo.inode_slots_per_group} inode slots/group, "
            f"policy {geo.policy_id}, seed {geo.seed:#x}, journal slots {geo.journal_slots}"
        ]
        B, I = geo.buckets_per_group, geo.inode_slots_per_group
        for g in range(geo.group_count):
            lines.append(f"group {g}")
            for b in range(g * B, (g + 1) * B):
                slot = self.data.slots[b]
                if slot is None:
                    lines.append(f"  bucket {b:4d}: FREE")
                else:
                    key, payload = slot
                    node = names.get(key.path_hash)
                    label = _excerpt(node.path) if node else f"?{key.path_hash:016x}"
                    lines.append(f"  bucket {b:4d}: {label} lb={key.logical_bucket} len={len(payload)}")
            for i in range(g * I, (g + 1) * I):
                slot = self.inodes.slots[i]
                if slot is not None:
                    node = Inode.unpack(slot[1])
                    lines.append(f"  inode  {i:4d}: {_excerpt(node.path)} size={node.file_size}")
        return "\n".join(lines)


def _excerpt(path: bytes, width: int = 32) -> str:
    text = path.decode("utf-8", "backslashreplace")
    return text if len(text) <= width else text[: width - 3] + "..."


def _zeros(n: int) -> Iterator[bytes]:
    full, rest = divmod(n, ZERO_CHUNK)
    if full:
        block = bytes(ZERO_CHUNK)
        for _ in range(full):
            yield block
    if rest:
        yield bytes(rest)


def _is_zero(chunk: bytes) -> bool:
    return chunk.count(0) == len(chunk)


def _nonzero(f: BinaryIO, offset: int, n: int) -> bool:
    f.seek(offset)
    while n > 0:
        chunk = f.read(min(n, ZERO_CHUNK))
        if not chunk:
            return True
        if not _is_zero(chunk):
            return True
        n -= len(chunk)
    return False


def mkfs(geometry: Geometry = DEFAULT_GEOMETRY) -> BlockStore:
    """A fresh, empty image for ``geometry``."""
    return BlockStore(geometry)


GEOMETRY_FIELDS = tuple(f.name for f in fields(Geometry))
