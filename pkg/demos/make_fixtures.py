"""Write the reference scenes as JSON files the command line can read.

    python3 demos/make_fixtures.py [output-dir]

Produces ``cabinet_scene.json`` / ``cabinet_goal.json`` (box and cylinder into a
narrow cabinet), ``nested_scene.json`` / ``nested_goal.json`` (three nested
containers) and ``stack4_scene.json`` / ``stack4_goal.json`` (four plates
with size-order goal constraints).
"""
import sys
from pathlib import Path

import numpy as np

from cgplus import io, scenes

out = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "fixtures")
out.mkdir(parents=True, exist_ok=True)

for name, build in (("cabinet", scenes.cabinet_scene), ("nested", scenes.nested_scene)):
    initial, rough = build()
    io.dump_scene(initial, out / f"{name}_scene.json")
    io.dump_scene(rough, out / f"{name}_goal.json")

initial, rough, above = scenes.stacking_scene(4, np.random.default_rng(4))
io.dump_scene(initial, out / "stack4_scene.json")
io.dump_scene(rough, out / "stack4_goal.json", goal_constraints=above)

for p in sorted(out.glob("*.json")):
    print(p)
