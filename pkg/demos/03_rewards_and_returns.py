#!/usr/bin/env python3
"""The reward stack, end to end.

Plots the proxemic penalty curve, walks through the novelty-bonus sequence,
then builds a tiny synthetic episode and shows how discounted returns turn
into clipped episode-level advantages.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fluxlab.rewards import (NoveltyGrid, discounted_returns, normalize_advantages,
                             reward_exploration_step, reward_goal_step, reward_social)
from fluxlab.world import Outcome

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

# 1. proxemic penalty: -0.5 inside 0.45 m, linear ramp to 0 at 1.2 m
ds = np.linspace(0.0, 2.0, 400)
penalty = [reward_social([d]) for d in ds]
fig, axes = plt.subplots(1, 3, figsize=(14, 3.6))
axes[0].plot(ds, penalty)
axes[0].axvline(0.45, color="r", ls=":", label="intimate 0.45 m")
axes[0].axvline(1.2, color="g", ls=":", label="comfort 1.2 m")
axes[0].set_xlabel("distance to pedestrian (m)")
axes[0].set_ylabel("per-pedestrian penalty")
axes[0].legend(fontsize=8)
print(f"penalty at 0.40 m: {reward_social([0.40]):+.3f}")
print(f"penalty at 0.825 m: {reward_social([0.825]):+.3f}  (midpoint of the ramp)")
print(f"penalty at 1.50 m: {reward_social([1.50]):+.3f}")

# 2. novelty sequence per cell: 2.0, 0.2, then nothing
grid = NoveltyGrid()
seq = [reward_exploration_step((0.0, 0.0), (0, 0), grid).r_novelty for _ in range(4)]
print(f"novelty bonus sequence for one cell: {seq}")
axes[1].bar(range(1, 5), seq)
axes[1].set_xlabel("visit number")
axes[1].set_ylabel("novelty bonus")

# 3. a synthetic goal episode: approach, wobble, reach
dists = [5.0, 4.8, 4.9, 4.5, 4.0, 3.4, 2.6, 1.8, 1.1, 0.9]
rewards = []
for i in range(1, len(dists)):
    outcome = Outcome.SUCCESS if i == len(dists) - 1 else Outcome.RUNNING
    rb = reward_goal_step(dists[i - 1], dists[i], outcome)
    rewards.append(rb.total)
print(f"episode rewards: {[round(r, 2) for r in rewards]}")
G = discounted_returns(rewards)
A = normalize_advantages(G)
print(f"returns G_t:    {[round(float(g), 2) for g in G]}")
print(f"advantages:     {[round(float(a), 2) for a in A]}")
print(f"advantage mean {A.mean():+.2e}, std {A.std():.3f} (z-scored, clipped to ±3)")
axes[2].plot(G, "o-", label="return $G_t$")
axes[2].plot(A, "s--", label="advantage")
axes[2].set_xlabel("step")
axes[2].legend(fontsize=8)

fig.tight_layout()
fig.savefig(os.path.join(OUT, "reward_stack.svg"), format="svg", metadata={"Date": None})
print(f"wrote {OUT}/reward_stack.svg")
