"""Playing history independence games exhaustively.

Each game enumerates pairs of operation histories that a notion says must
be indistinguishable, runs both on the structure, and compares the
resulting bytes.  A structure passes when no admissible pair differs.
"""

from hids.games import LAST_K, OAHI, PHI_NULL, SHI, SHI_STAR, WHI, is_canonical, play_game
from hids.games.structures import BASELINE_UNIVERSE, baseline_structure, dahi_structure, set_adt, stable_structure

adt = set_adt()
deltas = [SHI, WHI, OAHI(), OAHI(literal=True), LAST_K(2), SHI_STAR, PHI_NULL]
structures = [stable_structure(7), dahi_structure(7)]

# %% A verdict table at history length 4.
print(f"{'':22s}" + "".join(f"{s.name:>10s}" for s in structures))
for delta in deltas:
    row = [play_game(adt, s, delta, 4, max_violations=1).verdict for s in structures]
    print(f"{delta.name:22s}" + "".join(f"{v:>10s}" for v in row))

# %% Canonical representation and SHI go together.
for s in structures:
    print(s.name, "canonical up to length 4:", bool(is_canonical(adt, s, 4)))

# %% The smallest counterexample for the linear prober.
dut = baseline_structure(3)
report = play_game(set_adt(BASELINE_UNIVERSE), dut, SHI, 3, start_len=0, compress=False)
for v in report.violations:
    if v.seq0 == (("insert", 3), ("insert", 1), ("insert", 6)) and v.seq1[0] == ("insert", 6):
        print("witness:", v.seq0, "->", dut.describe(v.rep0), "vs", v.seq1, "->", dut.describe(v.rep1))
        break
print(report.lines()[0])
