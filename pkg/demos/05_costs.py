"""What canonical placement costs as the table fills up.

Bucket writes per insert and per delete, for the stable table and the
delete-agnostic table, on a 1024-bucket table.
"""

from hids.bench import run_bench

loads = [0.1, 0.3, 0.5, 0.7, 0.8, 0.9]
shi = run_bench(loads, trials=20, mode="shi")
dahi = run_bench(loads, trials=20, mode="dahi")

print("load   stable ins  stable del   dahi ins   dahi del")
for s, d in zip(shi, dahi):
    print(f"{s.load:4.1f} {s.insert_writes:11.2f} {s.delete_writes:11.2f} {d.insert_writes:10.2f} {d.delete_writes:10.2f}")

ratio = shi[-1].insert_writes / shi[1].insert_writes
print(f"stable insert cost grows {ratio:.1f}x from 30% to 90% load; delete-agnostic inserts stay at one write")
