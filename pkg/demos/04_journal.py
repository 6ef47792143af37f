"""Journaling that reveals only the last k operations.

In write-through mode the journal keeps the last k operations; anything
older leaves no trace.  In batched mode the journal buffers operations and
a flush applies a coalesced plan, after which the image depends on the
file set alone.  A crash in the middle of a flush is repaired by replay.
"""

from hids.block_store import BATCHED, WRITE_THROUGH, BlockStore, Geometry
from hids.journal import Journal, JournaledStore, recover

geo = Geometry(block_size=512, blocks_per_bucket=1, group_count=2, buckets_per_group=4, inode_slots_per_group=4)

# %% Two histories that end with the same two operations.
one = JournaledStore(BlockStore(geo.replace(journal_slots=2, journal_mode=WRITE_THROUGH)))
two = JournaledStore(BlockStore(geo.replace(journal_slots=2, journal_mode=WRITE_THROUGH)))
one.write(b"a", 0, b"first")
two.write(b"tmp", 0, b"gone soon")
two.delete(b"tmp")
two.write(b"a", 0, b"first")
for fs in (one, two):
    fs.write(b"b", 0, b"second")
    fs.write(b"a", 0, b"third")
print("journal window:", [(r.op, r.path) for r in Journal(one.store).records()])
print("images equal:", one.to_bytes() == two.to_bytes())

# %% Batched mode: redundant writes are merged before they reach the store.
bat = JournaledStore(BlockStore(geo.replace(journal_slots=4, journal_mode=BATCHED)))
for text in (b"v1", b"v2", b"v3"):
    bat.write(b"doc", 0, text)
print("plan:", bat.plan())
bat.flush()
print("store writes for three journaled rewrites:", bat.store.writes)

# %% Crash halfway through a flush, then recover.
bat.write(b"x", 0, b"1" * 300)
bat.write(b"y", 0, b"2" * 300)
bat.write(b"z", 0, b"3" * 300)
expected = JournaledStore(BlockStore.from_bytes(bat.to_bytes(), verify=False))
expected.write(b"w", 0, b"4")  # the uninterrupted run


class Crash(Exception):
    pass


calls = []


def crash_on_second(op):
    calls.append(op)
    if len(calls) == 2:
        raise Crash


bat.store.on_mutation = crash_on_second
try:
    bat.write(b"w", 0, b"4")  # fills the log and triggers the flush
except Crash:
    print("crashed after", len(calls) - 1, "bucket writes")
disk = bat.store.to_bytes()
recovered = recover(BlockStore.from_bytes(disk, verify=False))
print("recovered image matches uninterrupted run:", recovered.digest() == expected.digest())
