"""Two ways to lay out the same set of keys.

A stable-matching table puts a given key set in exactly one arrangement,
whatever order the keys arrived in.  A plain first-free linear prober does
not, and the difference is visible in the serialized bytes.
"""

from itertools import permutations

from hids.dahi_table import DahiTable
from hids.keys import KeyRecord
from hids.policies import HashPriorityPolicy, linear_probe_baseline
from hids.stable_table import StableTable

# %% The baseline first: h(v) = v mod 3, first free slot wins.
for order in ([3, 1, 6], [6, 1, 3]):
    print("baseline, insert", order, "->", linear_probe_baseline(order).layout())

# %% The stable table over the same integers, every insertion order.
policy = HashPriorityPolicy(7)
keys = {v: KeyRecord.for_int(v) for v in (1, 3, 6, 8)}
images = set()
for order in permutations(keys):
    table = StableTable(policy)
    for v in order:
        table.insert(keys[v])
    images.add(table.serialize())
print(f"stable table: {len(list(permutations(keys)))} insertion orders, {len(images)} distinct image(s)")
print("layout:", table.layout())

# %% Deleting leaves no gap: the result equals a table that never saw the key.
table.delete(keys[3])
fresh = StableTable(policy)
for v in (1, 6, 8):
    fresh.insert(keys[v])
print("after delete of 3 equals fresh build:", table.serialize() == fresh.serialize())

# %% The delete-agnostic table: one write per insert, but order leaks.
a, b = DahiTable(policy), DahiTable(policy)
for v in (1, 3, 6, 8):
    a.insert(keys[v])
for v in (8, 6, 3, 1):
    b.insert(keys[v])
print("delete-agnostic layouts:", a.layout(), b.layout())
# Insert then delete is invisible, though.
c = DahiTable(policy)
for v in (1, 3, 10):
    c.insert(KeyRecord.for_int(v))
c.delete(KeyRecord.for_int(10))
d = DahiTable(policy)
for v in (1, 3):
    d.insert(keys[v])
print("insert+delete of 10 invisible:", c.serialize() == d.serialize())
