#!/usr/bin/env python3
"""Four trajectory heads on one two-mode problem.

Trains regression, DDPM, CFM and rectified-flow heads on the symmetric
left/right detour dataset, then draws 16 candidates from each. The
generative heads should keep both detours alive; the regression head
averages them into a single straight-through compromise.

Also demonstrates the rectified-flow step-count insensitivity: a converged
RF head lands in (nearly) the same place with 1 Euler step as with 16.
"""

import os
import time

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fluxlab.policy import ModelHandle, sample_ddpm, sample_euler
from fluxlab.toydata import classify_mode, detour_trajectory, two_mode_dataset
from fluxlab.training import fit_head

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

rng = np.random.default_rng(0)
obs, tau = two_mode_dataset(1024, rng)
print(f"two-mode dataset: {len(obs)} samples, detour apex ±{0.35 * 2.0:.2f} m")

fig, axes = plt.subplots(1, 4, figsize=(16, 4), sharex=True, sharey=True)
schedule = [(250, 1e-3), (100, 2e-4), (50, 5e-5)]

for ax, kind in zip(axes, ("regression", "ddpm", "cfm", "rf")):
    t0 = time.time()
    model = ModelHandle(kind, obs_dim=8, seed=0)
    fit_head(model, obs, tau, 0, 0, lr_schedule=schedule)
    e, _ = model.encode(obs[:1])
    srng = np.random.default_rng(7)
    if kind == "regression":
        out, _ = model.head.forward(e)
        cands = np.repeat(out, 16, axis=0).reshape(16, 8, 2)
    elif kind == "ddpm":
        cands = sample_ddpm(model, e, srng, 16).reshape(16, 8, 2)
    else:
        cands = sample_euler(model, e, model.config.K,
                             srng.standard_normal((16, 16))).reshape(16, 8, 2)
    labels = [classify_mode(t) for t in cands]
    left, right, mid = labels.count(1), labels.count(-1), labels.count(0)
    print(f"{kind:<11} trained in {time.time() - t0:5.1f}s ->"
          f" candidates left/right/averaged: {left}/{right}/{mid}")
    for side in (1, -1):
        ref = detour_trajectory(side) * 2.0
        ax.plot(ref[:, 0], ref[:, 1], "k--", lw=1, alpha=0.6)
    for c in cands:
        pts = c * 2.0
        ax.plot(pts[:, 0], pts[:, 1], alpha=0.7)
    ax.set_title(f"{kind} ({left}L/{right}R/{mid}avg)")
    ax.set_aspect("equal")

fig.suptitle("16 candidates per head on the two-mode detour task (dashed = experts)")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "flow_heads_modes.svg"), format="svg",
            metadata={"Date": None})
print(f"wrote {OUT}/flow_heads_modes.svg")

# RF straightness: resample one trained RF head with different step counts
model = ModelHandle("rf", obs_dim=8, seed=0)
fit_head(model, obs, tau, 0, 0, lr_schedule=schedule)
e, _ = model.encode(obs[:1])
tau0 = np.random.default_rng(3).standard_normal((64, 16))
ends = {}
for K in (1, 4, 16):
    out = sample_euler(model, e, K, tau0).reshape(64, 8, 2)
    ends[K] = out[:, -1, :] * 2.0
gap_1_16 = np.hypot(*(ends[1] - ends[16]).T)
print(f"RF endpoint gap K=1 vs K=16: mean {gap_1_16.mean():.3f} m over 64 shared latents")
print("(straight-line transport makes the step count nearly irrelevant)")
