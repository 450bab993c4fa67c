#!/usr/bin/env python3
"""End-to-end mini benchmark: experts -> imitation -> evaluation.

A compressed version of the stage-1 pipeline (a few hundred expert samples,
a short training schedule, a couple dozen episodes) that exercises every
moving part: scene generation, A* experts, rectified-flow imitation,
critic-guided evaluation and the metrics report. Expect a few minutes.
"""

import os
import time

import numpy as np

from fluxlab.episodes import Task, gen_episodes
from fluxlab.harness import evaluate, write_metrics_csv
from fluxlab.policy import ModelHandle
from fluxlab.scenes import gen_scene, structured_eval_scenes
from fluxlab.training import gen_expert_dataset, train_il

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

train_scenes = [gen_scene(9000 + i, name=f"demo-train-{i}") for i in range(8)]
print(f"{len(train_scenes)} procedural training scenes")

t0 = time.time()
dataset = gen_expert_dataset(train_scenes, 800, seed=1)
print(f"expert dataset: {len(dataset['obs'])} samples in {time.time() - t0:.0f}s")

model = ModelHandle("rf", seed=0)
t0 = time.time()
history = train_il(model, dataset, train_scenes, seed=0,
                   lr_schedule=[(60, 1e-3), (20, 3e-4)])
print(f"imitation: 80 epochs in {time.time() - t0:.0f}s "
      f"(head loss {history[0]['head_loss']:.2f} -> {history[-1]['head_loss']:.2f})")

eval_scenes = structured_eval_scenes()
specs = gen_episodes(eval_scenes, Task.POINTNAV, 24, seed=42)
t0 = time.time()
report = evaluate(model, eval_scenes, specs)
agg = report.aggregate()
print(f"evaluated {agg['n']} PointNav episodes in {time.time() - t0:.0f}s:")
print(f"  SR {agg['sr']:.2f}  SPL {agg['spl']:.3f}  S-TL {agg['s_tl']:.1f} m")
print("(the acceptance pipeline runs the same loop with a 3000-sample dataset"
      " and a longer schedule)")

csv_path = os.path.join(OUT, "demo_metrics.csv")
write_metrics_csv(report, csv_path, {"version": "demo", "config_hash": "demo", "seed": 42})
print(f"wrote {csv_path}")
