"""Put a box and a cylinder into a cabinet that is too narrow for both.

    python3 demos/cabinet_walkthrough.py [seed]

The rough goal only says "both objects in the cabinet".  The structure search
has to discover that the cylinder must ride on the box, the pose optimiser
places them, and the planner wraps the edits in Open/Close.
"""
import sys

from cgplus import cgraph, cli, goalsynth, planner, scenes
from cgplus.errors import LayerInfeasibleError

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
ga, pose, opts = cli.load_config(None, seed)
initial, rough = scenes.cabinet_scene()

print("initial scene")
for c, r in sorted(initial.supports.items()):
    print(f"  {c:10s} on {r.parent}")
print("rough goal: box and cylinder inside the cabinet; side_table is the swap node")

res = goalsynth.evolve(rough, ga, pose)
print(f"\nstructure search: {res.generations} generations, fitness {res.fitness:.4f}, "
      f"{res.pose_attempts} pose attempts")
goal = res.graph
for c in ("box", "cylinder"):
    r = goal.supports[c]
    print(f"  {c:10s} on {r.parent:8s} pose ({r.pose[0]:+.3f}, {r.pose[1]:+.3f}, yaw {r.pose[2]:+.2f})")
print("  goal violations:", cgraph.validate(goal) or "none")

# the interior is 0.43 m wide, so side by side is ruled out by the layer check
side = goal.evolve(supports={**goal.supports, "cylinder": scenes.rel("cabinet", "cylinder")})
try:
    goalsynth.synthesize_poses(side, pose)
    print("\nside-by-side layout unexpectedly fits")
except LayerInfeasibleError as exc:
    print(f"\nside-by-side layout rejected: {exc}")

p = planner.plan(initial, goal, seed=seed)
print(f"\nplan ({len(p)} actions, {p.expanded} search nodes)")
for i, a in enumerate(p.actions):
    print(f"  {i}: {a}")
report = planner.validate_plan(p, initial, goal)
print("replay:", "ok" if report.ok else f"fails at step {report.step}: {report.reason}")
