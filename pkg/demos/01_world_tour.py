#!/usr/bin/env python3
"""A tour of the simulated world.

Builds a structured scene, drops in a small crowd of FSM pedestrians, drives
the robot in a lazy arc, and renders everything that happened to an SVG.
Along the way it prints what the depth sensor sees and how the pedestrian
state machine behaves.
"""

import collections
import os

import numpy as np

from fluxlab.episodes import Task, gen_episodes
from fluxlab.scenes import structured_eval_scenes
from fluxlab.world import FSMState, Outcome, check_termination, make_world, raycast, step_world

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

scene = structured_eval_scenes()[0]  # the pillar hall
print(f"scene '{scene.name}': {len(scene.circles)} circles, {len(scene.rects)} rects,"
      f" bounds {scene.bounds}")

spec = gen_episodes([scene], Task.SOCIALNAV, 1, seed=4)[0]
print(f"episode: start {np.round(spec.start, 2)}, goal {np.round(spec.goal, 2)},"
      f" {spec.n_pedestrians} pedestrians")

world = make_world(scene, spec.start, spec.ped_routes, spec.seed)

# what does the robot see before moving?
depth = raycast(world)
print(f"depth rays: min {depth.min():.2f} m, max {depth.max():.2f} m "
      f"(64 rays over a 90 degree fan, clamped at 5 m)")

# drive a lazy arc for 30 seconds and watch the crowd
state_counts = collections.Counter()
log = open(os.path.join(OUT, "world_tour.jsonl"), "w")
import json
log.write(json.dumps({"type": "meta", **spec.to_dict()}) + "\n")
for k in range(300):
    step_world(world, (0.4, 0.15 * np.sin(k / 40.0)))
    for a in world.pedestrians:
        state_counts[FSMState(a.fsm_state).name] += 1
    log.write(json.dumps({
        "t": world.time,
        "robot": [float(v) for v in world.robot_pose],
        "cmd": [0.4, 0.15 * float(np.sin(k / 40.0))],
        "peds": [[float(a.pos[0]), float(a.pos[1]), float(a.heading), int(a.fsm_state)]
                 for a in world.pedestrians],
        "reward": {},
    }) + "\n")
log.write(json.dumps({"type": "end", "outcome": "demo", "metrics": {}}) + "\n")
log.close()

total = sum(state_counts.values())
print("pedestrian state occupancy over 30 s:")
for name, n in state_counts.most_common():
    print(f"  {name:<11} {n / total:6.1%}")

outcome = check_termination(world, goal_xy=spec.goal, goal_conditioned=True)
print(f"termination check after the scripted arc: {Outcome(outcome).name}"
      " (the blind arc usually ends wedged against something)")

from fluxlab.runner import read_log
from fluxlab.plots import replay_figure

meta, steps, _ = read_log(os.path.join(OUT, "world_tour.jsonl"))
replay_figure(meta, steps, scene, os.path.join(OUT, "world_tour.svg"))
print(f"rendered {OUT}/world_tour.svg")
