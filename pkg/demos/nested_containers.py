"""Move four objects into a drawer inside a cabinet inside a wardrobe.

    python3 demos/nested_containers.py [seed]

Shows how accessibility constraints chain Open/Close through three levels,
and replays the plan state by state with full validation.
"""
import sys

from cgplus import cgraph, cli, planner, scenes

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
ga, pose, opts = cli.load_config(None, seed)
initial, rough = scenes.nested_scene()
p, goal, timings = cli.run_plan(initial, rough, [], ga, pose, opts, seed)

print("timings: " + ", ".join(f"{k} {v:.2f} s" for k, v in timings.items()))
print("\ngoal inside the drawer")
for c in sorted(goal.children("drawer")):
    x, y, yaw = goal.supports[c].pose
    print(f"  {c:11s} ({x:+.3f}, {y:+.3f}, yaw {yaw:+.2f})")

# the constraint set behind the plan, grouped by reason
script, cons = planner.derive_constraints(planner.ged_edit_script(initial, goal), initial, goal)
for reason in planner.REASONS:
    pairs = sorted(f"{c.before} < {c.after}" for c in cons if c.reason == reason)
    print(f"\n{reason} ({len(pairs)})")
    for s in pairs[:8]:
        print("  " + s)
    if len(pairs) > 8:
        print(f"  ... {len(pairs) - 8} more")

print(f"\nreplay of {len(p)} actions")
state = initial
for i, a in enumerate(p.actions):
    state = cgraph.apply_action(state, a)
    bad = cgraph.validate(state)
    print(f"  {i:2d} {str(a):32s} {'valid' if not bad else bad}")
print("matches goal:", cgraph.same_state(state, goal))
