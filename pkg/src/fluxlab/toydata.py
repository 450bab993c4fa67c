"""Synthetic micro-datasets for head diagnostics.

Two controlled distributions:

  * unimodal: one trajectory per observation (drive straight toward a
    goal direction encoded in the observation) -- used to check that a
    converged rectified-flow head transports straight, making endpoints
    insensitive to the Euler step count.
  * two-mode: a symmetric left/right detour around a blocking obstacle,
    identical observation for both -- used to check that generative heads
    keep both modes while the regression head collapses to one.
"""

from __future__ import annotations

import math

import numpy as np

from .policy import HORIZON, NORM_SCALE

TOY_OBS_DIM = 8
DETOUR_AMPLITUDE = 0.35  # normalized lateral apex of each detour mode


def straight_trajectory(angle, reach=0.9):
    """Evenly spaced waypoints along a ray from the origin (normalized units)."""
    steps = np.arange(1, HORIZON + 1) / HORIZON * reach
    return np.stack([steps * math.cos(angle), steps * math.sin(angle)], axis=1)


def detour_trajectory(side, amplitude=DETOUR_AMPLITUDE, reach=0.9):
    """Forward trajectory bulging left (+1) or right (-1) around mid-course."""
    xs = np.arange(1, HORIZON + 1) / HORIZON * reach
    ys = side * amplitude * np.sin(np.pi * xs / reach)
    return np.stack([xs, ys], axis=1)


def unimodal_dataset(n, rng):
    """(obs, tau) pairs: obs encodes the goal direction, tau drives toward it."""
    angles = rng.uniform(-math.pi / 2, math.pi / 2, n)
    obs = np.zeros((n, TOY_OBS_DIM))
    obs[:, 0] = np.cos(angles)
    obs[:, 1] = np.sin(angles)
    taus = np.stack([straight_trajectory(a) for a in angles])
    return obs, taus


def two_mode_dataset(n, rng):
    """Identical observations; half the labels detour left, half right."""
    obs = np.zeros((n, TOY_OBS_DIM))
    obs[:, 0] = 1.0
    sides = np.where(rng.uniform(size=n) < 0.5, 1.0, -1.0)
    taus = np.stack([detour_trajectory(s) for s in sides])
    return obs, taus


def classify_mode(traj, amplitude=DETOUR_AMPLITUDE):
    """+1 / -1 for a clear left / right detour, 0 for neither (mode-averaged).

    The apex lateral offset must reach half the expert amplitude with the
    correct sign to count as mode coverage.
    """
    traj = np.asarray(traj, dtype=float).reshape(HORIZON, 2)
    apex = traj[np.argmax(np.abs(traj[:, 1])), 1]
    if apex >= 0.5 * amplitude:
        return 1
    if apex <= -0.5 * amplitude:
        return -1
    return 0


def modes_covered(trajs, min_per_mode=2):
    """True if both detour modes appear at least min_per_mode times."""
    labels = [classify_mode(t) for t in np.asarray(trajs)]
    return (labels.count(1) >= min_per_mode) and (labels.count(-1) >= min_per_mode)
