"""A file store whose image is a function of the files it holds.

We build the same three files in two different ways, compare digests,
then delete one and compare against an image where it never existed.
"""

import random

from hids.block_store import BlockStore, Geometry

geo = Geometry(block_size=512, blocks_per_bucket=2, group_count=3, buckets_per_group=4, inode_slots_per_group=4)
files = {b"/etc/motd": b"welcome\n", b"/var/log/app": b"line\n" * 300, b"/home/u/notes": b"todo: " * 50}

# %% Straightforward creation.
tidy = BlockStore(geo)
for path in sorted(files):
    tidy.write(path, 0, files[path])

# %% A messier history: shuffled, piecewise, with a scratch file that comes and goes.
rng = random.Random(7)
messy = BlockStore(geo)
messy.write(b"/tmp/scratch", 0, b"x" * 1500)
for path in rng.sample(sorted(files), len(files)):
    data = files[path]
    cut = len(data) // 2
    messy.write(path, cut, data[cut:])
    messy.write(path, 0, data[:cut])
messy.delete(b"/tmp/scratch")

print("same files, same digest:", tidy.digest() == messy.digest())
print(tidy.layout_map())

# %% Secure deletion: removing a file gives the never-created image.
tidy.delete(b"/var/log/app")
never = BlockStore(geo)
for path in sorted(files):
    if path != b"/var/log/app":
        never.write(path, 0, files[path])
print("delete equals never-created:", tidy.digest() == never.digest())
print("old contents anywhere in the image:", b"line\n" * 10 in tidy.to_bytes())
