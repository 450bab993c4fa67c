#!/usr/bin/env python3
"""Stage 2 in miniature: GRPO fine-tuning in a crowd.

Takes a quickly imitation-trained policy, rolls it out in SocialNav episodes
with Gaussian exploration around the selected candidate, and applies a few
dozen clipped policy-gradient updates with episode-level advantages. Prints
the update statistics the real stage-2 run logs to CSV. Expect several
minutes on one core.
"""

import os
import time

import numpy as np

from fluxlab.episodes import Task
from fluxlab.policy import ModelHandle
from fluxlab.scenes import gen_scene
from fluxlab.training import gen_expert_dataset, train_il, train_rl

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

scenes = [gen_scene(9100 + i, name=f"demo-rl-{i}") for i in range(8)]
dataset = gen_expert_dataset(scenes, 600, seed=2)
model = ModelHandle("rf", seed=0)
print("warming up with a short imitation phase...")
train_il(model, dataset, scenes, seed=0, lr_schedule=[(50, 1e-3)])

rows = []
t0 = time.time()
train_rl(model, scenes, updates=12, episodes_per_update=8, lr=5e-5,
         seed=3, tasks=(Task.SOCIALNAV,), log_rows=rows)
print(f"12 GRPO updates in {time.time() - t0:.0f}s")
print(f"{'update':>6} {'return':>8} {'SR':>5} {'loss':>8} {'clip%':>6}")
for r in rows:
    print(f"{r['update']:>6} {r['mean_return']:>8.2f} {r['success_rate']:>5.2f}"
          f" {r['loss']:>8.4f} {100 * r['clip_fraction']:>5.1f}%")
print("(the acceptance run uses more updates and evaluates before/after on a"
      " fixed SocialNav episode set)")
