"""Small version of the plate stacking benchmark.

    python3 demos/stacking_bench.py [max_plates] [repeats]

Plates start scattered or partly stacked; the goal is one size-ordered pile.
For each size the script prints plan validity, plan length against twice the
number of plates that must move, and the median time per phase.
"""
import statistics
import sys

from cgplus import cli

top = int(sys.argv[1]) if len(sys.argv) > 1 else 6
repeats = int(sys.argv[2]) if len(sys.argv) > 2 else 3

print(f"{'n':>3} {'valid':>6} {'length ok':>10} {'structure':>10} {'pose':>8} {'plan':>8}")
for n in range(2, top + 1, 2):
    rows, trows = cli.bench_stack(n, repeats, seed=0)
    med = {k: statistics.median(float(t[k]) for t in trows) for k in ("structure_s", "pose_s", "plan_s")}
    valid = sum(r["valid"] for r in rows)
    length = sum(r["plan_length"] == r["expected_length"] for r in rows)
    print(f"{n:3d} {valid:4d}/{repeats} {length:8d}/{repeats} {med['structure_s']:9.2f}s "
          f"{med['pose_s']:7.2f}s {med['plan_s']:7.2f}s")
