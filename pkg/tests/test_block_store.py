import hashlib
import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hids.block_store import (
    DEFAULT_GEOMETRY,
    MAX_PATH,
    BlockStore,
    Geometry,
    mkfs,
)
from hids.errors import (
    BadGeometry,
    BadHandle,
    CorruptImage,
    NoSpace,
    NotFound,
    PathTooLong,
    ReadBeyondEof,
)
from hids.policies import BlockGroupLocalityPolicy

# Three groups of three 256-byte buckets and three inode slots.
SMALL = Geometry(block_size=128, blocks_per_bucket=2, group_count=3, buckets_per_group=3, inode_slots_per_group=3)
BB = SMALL.bucket_bytes


def expected_size(block_size, blocks_per_bucket, groups, buckets, inodes, journal_slots=0):
    """Image size from the layout description, independent of Geometry."""

    def blocks(n):
        return (n + block_size - 1) // block_size * block_size

    journal = blocks((journal_slots + 1) * 4096) if journal_slots else 0
    group = blocks(32 * buckets) + blocks(512 * inodes) + buckets * blocks_per_bucket * block_size
    return block_size + journal + groups * group


def build(files, geometry=SMALL):
    """Fresh store holding ``files`` (path -> content), written in sorted order."""
    store = BlockStore(geometry)
    for path in sorted(files):
        if files[path]:
            store.write(path, 0, files[path])
        else:
            store.create(path)
    return store


# geometry and mkfs

def test_mkfs_is_deterministic():
    assert mkfs(SMALL).to_bytes() == mkfs(SMALL).to_bytes()
    assert mkfs(SMALL).digest() == hashlib.sha256(mkfs(SMALL).to_bytes()).hexdigest()


@pytest.mark.parametrize(
    "args",
    [(4096, 5120, 8, 4, 8, 0), (4096, 512, 4, 4, 8, 16), (128, 2, 3, 3, 3, 0), (512, 1, 1, 1, 1, 3), (1000, 3, 2, 5, 7, 1)],
)
def test_image_size_matches_independent_calculator(args):
    bs, bpb, g, b, i, k = args
    geo = Geometry(block_size=bs, blocks_per_bucket=bpb, group_count=g, buckets_per_group=b, inode_slots_per_group=i, journal_slots=k)
    assert geo.image_size == expected_size(*args)


def test_default_image_size_and_stream_length():
    assert DEFAULT_GEOMETRY.image_size == expected_size(4096, 5120, 8, 4, 8)
    assert sum(len(c) for c in mkfs(SMALL).iter_chunks()) == SMALL.image_size


@pytest.mark.parametrize("field", ["group_count", "block_size", "blocks_per_bucket", "buckets_per_group", "inode_slots_per_group"])
def test_bad_geometry(field):
    with pytest.raises(BadGeometry):
        SMALL.replace(**{field: 0})


def test_bad_geometry_other_fields():
    for change in ({"journal_slots": -1}, {"policy_id": 99}, {"journal_mode": 7}, {"block_size": 32}, {"seed": 1 << 64}):
        with pytest.raises(BadGeometry):
            SMALL.replace(**change)


def test_superblock_round_trip():
    geo = SMALL.replace(seed=0xDEADBEEF, journal_slots=2)
    assert Geometry.unpack(geo.pack()) == geo
    assert geo.pack()[:8] == b"HIDS0001"
    with pytest.raises(CorruptImage):
        Geometry.unpack(b"NOTMAGIC" + geo.pack()[8:])


# write and read

def test_single_write_occupies_home_bucket():
    store = mkfs(SMALL)
    assert store.write(b"f1", 0, b"hello") == 5
    occupied = [b for b in range(SMALL.bucket_count) if store.data.slots[b] is not None]
    assert len(occupied) == 1
    policy = BlockGroupLocalityPolicy(3, 3)
    assert occupied == [policy.most_preferred_bucket(store.data_key(b"f1", 0))]


def test_write_spanning_boundary_uses_consecutive_logical_buckets():
    store = mkfs(SMALL)
    store.write(b"f", BB - 2, b"abcd")
    keys = sorted(k.logical_bucket for _, k, _ in store.data.items())
    assert keys == [0, 1]
    assert store.read(b"f", BB - 2, 4) == b"abcd"
    assert store.inode(b"f").file_size == BB + 2


def test_holes_read_as_zeros():
    store = mkfs(SMALL)
    store.write(b"f", 2 * BB + 5, b"z")
    assert store.read(b"f", 0, 2 * BB + 5) == bytes(2 * BB + 5)
    # Only the bucket actually written is stored.
    assert store.data.count == 1


def test_overwrite_and_extend():
    store = mkfs(SMALL)
    store.write(b"f", 0, b"aaaaaa")
    store.write(b"f", 2, b"BB")
    store.write(b"f", 8, b"c")
    assert store.read(b"f", 0, 9) == b"aaBBaa\0\0c"


def test_read_is_pure():
    store = build({b"a": b"xyz" * 90, b"b": b"q"})
    before = store.to_bytes()
    store.read(b"a", 10, 200)
    store.exists(b"b")
    assert store.to_bytes() == before


def test_read_errors():
    store = build({b"a": b"xyz"})
    with pytest.raises(NotFound):
        store.read(b"nope", 0, 1)
    with pytest.raises(ReadBeyondEof):
        store.read(b"a", 2, 2)
    assert store.read(b"a", 3, 0) == b""


def test_writing_zeros_keeps_buckets_free():
    store = mkfs(SMALL)
    store.write(b"f", 0, bytes(10))
    assert store.data.count == 0 and store.inode(b"f").file_size == 10
    store.write(b"g", 0, b"abc")
    store.write(b"g", 0, bytes(3))
    assert store.data.count == 0 and store.bucket_of(b"g", 0) is None
    assert store.to_bytes() == build({b"f": bytes(10), b"g": bytes(3)}).to_bytes()


def test_path_limits():
    store = mkfs(SMALL)
    store.write(b"p" * MAX_PATH, 0, b"ok")
    with pytest.raises(PathTooLong):
        store.write(b"p" * (MAX_PATH + 1), 0, b"no")
    with pytest.raises(ValueError):
        store.write(b"", 0, b"no")
    with pytest.raises(ValueError):
        store.write(b"f", 0, b"")


def test_no_space_leaves_image_unchanged():
    store = mkfs(SMALL)
    store.write(b"big", 0, b"\1" * (BB * 8))
    before = store.to_bytes()
    with pytest.raises(NoSpace):
        store.write(b"more", 0, b"\1" * (BB * 2))
    assert store.to_bytes() == before
    for i in range(8):
        store.create(b"e%d" % i)
    with pytest.raises(NoSpace):
        store.create(b"one-too-many")


# canonical images

FILES = {b"alpha": b"A" * 300, b"beta": b"B" * 40, b"gamma": b"\0" * 10 + b"G" * 500, b"delta": b""}


def write_in_pieces(store, path, content, rng):
    if not content:
        store.create(path)
        return
    cuts = sorted(rng.sample(range(1, len(content)), min(3, len(content) - 1)))
    pieces = list(zip([0] + cuts, cuts + [len(content)]))
    rng.shuffle(pieces)
    for lo, hi in pieces:
        if content[lo:hi].strip(b"\0") or hi == len(content):
            store.write(path, lo, content[lo:hi])


@pytest.mark.parametrize("seed", range(20))
def test_creation_order_does_not_matter(seed):
    rng = random.Random(seed)
    order = list(FILES)
    rng.shuffle(order)
    store = mkfs(SMALL)
    for path in order:
        write_in_pieces(store, path, FILES[path], rng)
    assert store.digest() == build(FILES).digest()


def test_different_content_different_digest():
    rng = random.Random(5)
    for _ in range(30):
        a = bytes(rng.randrange(256) for _ in range(20))
        b = bytearray(a)
        b[rng.randrange(20)] ^= 1 + rng.randrange(255)
        assert build({b"f": a}).digest() != build({b"f": bytes(b)}).digest()


OPS = st.lists(
    st.one_of(
        st.tuples(st.just("write"), st.sampled_from([b"a", b"b", b"c"]), st.sampled_from([0, 100, BB - 1, BB + 7]), st.binary(min_size=1, max_size=40)),
        st.tuples(st.just("delete"), st.sampled_from([b"a", b"b", b"c"]), st.just(0), st.just(b"")),
    ),
    max_size=12,
)


def replay_model(ops):
    files = {}
    for op, path, offset, data in ops:
        if op == "write":
            body = bytearray(files.get(path, b""))
            body.extend(bytes(max(0, offset + len(data) - len(body))))
            body[offset : offset + len(data)] = data
            files[path] = bytes(body)
        else:
            files.pop(path, None)
    return files


def replay_store(ops, geometry=SMALL):
    store = BlockStore(geometry)
    for op, path, offset, data in ops:
        if op == "write":
            store.write(path, offset, data)
        elif store.exists(path):
            store.delete(path)
    return store


@settings(max_examples=150, deadline=None)
@given(OPS)
def test_any_history_matches_fresh_build(ops):
    files = replay_model(ops)
    store = replay_store(ops)
    oracle = build(files)
    assert store.to_bytes() == oracle.to_bytes()
    # Fixed-location corollary: every (path, logical bucket) sits where the fresh build puts it.
    for path, content in files.items():
        for lb in range(-(-len(content) // BB)):
            assert store.bucket_of(path, lb) == oracle.bucket_of(path, lb)
        assert store.read(path, 0, len(content)) == content
    store.check()


# deletion

def test_create_then_delete_restores_mkfs():
    store = mkfs(SMALL)
    store.write(b"f1", 0, b"secret" * 100)
    store.delete(b"f1")
    assert store.to_bytes() == mkfs(SMALL).to_bytes()


def test_delete_matches_never_created():
    store = build({b"f1": b"one" * 100, b"f2": b"two" * 50})
    assert store.delete(b"f1") == 0
    assert store.digest() == build({b"f2": b"two" * 50}).digest()


def test_delete_absent_raises_and_leaves_image():
    store = build({b"f": b"x"})
    before = store.to_bytes()
    with pytest.raises(NotFound):
        store.delete(b"g")
    assert store.to_bytes() == before


@pytest.mark.parametrize("seed", range(25))
def test_secure_delete_random_workloads(seed):
    rng = random.Random(seed)
    others = {b"o%d" % i: rng.randbytes(rng.randrange(1, 2 * BB)) for i in range(rng.randrange(0, 4))}
    victim = rng.randbytes(rng.randrange(1, 3 * BB))
    store = mkfs(SMALL)
    paths = list(others) + [b"victim"]
    rng.shuffle(paths)
    for p in paths:
        store.write(p, 0, victim if p == b"victim" else others[p])
    store.delete(b"victim")
    assert store.digest() == build(others).digest()
    assert victim not in store.to_bytes()


# handles

def test_open_close():
    store = build({b"f": b"x"})
    digest = store.digest()
    h = store.open(b"f")
    assert store.path_of(h) == b"f"
    assert store.close(h) == 0
    assert store.digest() == digest
    with pytest.raises(BadHandle):
        store.close(h)
    with pytest.raises(NotFound):
        store.open(b"missing")


# persistence

def test_save_load_round_trip(tmp_path):
    store = build(FILES)
    path = tmp_path / "img"
    store.save(path)
    assert path.read_bytes() == store.to_bytes()
    again = BlockStore.load(path, verify=True)
    assert again.to_bytes() == store.to_bytes()
    assert again.read(b"gamma", 0, 510) == FILES[b"gamma"]


def test_verify_rejects_residue():
    raw = bytearray(build({b"f": b"abc"}).to_bytes())
    # A byte in a free bucket of the last group.
    raw[SMALL.bucket_offset(SMALL.bucket_count - 1) + 7] = 1
    with pytest.raises(CorruptImage):
        BlockStore.from_bytes(bytes(raw))
    # Without verification the image still parses.
    BlockStore.from_bytes(bytes(raw), verify=False)


def test_verify_rejects_wrong_size_and_bad_trim():
    raw = build({b"f": b"abc"}).to_bytes()
    with pytest.raises(CorruptImage):
        BlockStore.from_bytes(raw + b"\0")
    store = build({b"f": b"abc"})
    b = store.bucket_of(b"f", 0)
    key, _ = store.data.slots[b]
    store.data.slots[b] = (key, b"abc\0")
    with pytest.raises(CorruptImage):
        store.check()


def test_save_is_sparse_for_default_geometry(tmp_path):
    store = mkfs(DEFAULT_GEOMETRY)
    store.write(b"f", 0, b"hi")
    path = tmp_path / "big.img"
    store.save(path)
    assert path.stat().st_size == DEFAULT_GEOMETRY.image_size
    with open(path, "rb") as f:
        assert BlockStore.read_from(f).read(b"f", 0, 2) == b"hi"


def test_read_from_stream():
    store = build(FILES)
    assert BlockStore.read_from(io.BytesIO(store.to_bytes())).digest() == store.digest()


# locality

def test_small_files_stay_in_home_group():
    geo = Geometry(block_size=64, blocks_per_bucket=1, group_count=4, buckets_per_group=4, inode_slots_per_group=4)
    policy = BlockGroupLocalityPolicy(4, 4)
    for i in range(40):
        store = mkfs(geo)
        path = b"file-%d" % i
        store.write(path, 0, b"\1" * (64 * 4))
        groups = {store.bucket_of(path, lb) // 4 for lb in range(4)}
        assert groups == {policy.home_group(store.data_key(path, 0))}


def test_layout_map_mentions_files():
    text = build({b"alpha": b"A" * 300}).layout_map()
    assert "alpha lb=0" in text and "alpha lb=1" in text and "FREE" in text
    assert text == build({b"alpha": b"A" * 300}).layout_map()
