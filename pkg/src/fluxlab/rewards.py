"""Reward shaping and episode-level advantages.

Goal-conditioned tasks earn asymmetric progress toward the goal (weight 5
approaching, 2 receding), a +20 success bonus, -2 for getting stuck and
-0.5 * final-distance on timeout, plus a proxemic penalty per pedestrian.
Exploration tasks earn 4*||dx|| for moving, a decaying novelty bonus
(2.0, 0.2, 0 per 0.5 m cell) and a -0.05 per-step living cost.

Returns are discounted over the whole episode and advantages are the
episode-level Z-scores clipped to [-3, 3].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metrics import D_COMFORT, D_INTIMATE
from .world import Outcome

GOAL_BONUS = 20.0
ALPHA_APPROACH = 5.0
ALPHA_RECEDE = 2.0
STUCK_PENALTY = -2.0
TIMEOUT_SCALE = -0.5
INTIMATE_PENALTY = -0.5
COMFORT_PENALTY = -0.1
EXPL_MOVE_SCALE = 4.0
NOVELTY_LAMBDA = 2.0
NOVELTY_SEQ = (1.0, 0.1)  # first visit, second visit, then 0
EXPL_STEP_COST = -0.05
NOVELTY_CELL = 0.5

GAMMA = 0.99
ADV_CLIP = 3.0


@dataclass
class RewardBreakdown:
    r_goal: float = 0.0
    r_progress: float = 0.0
    r_social: float = 0.0
    r_expl: float = 0.0
    r_novelty: float = 0.0
    r_term: float = 0.0

    @property
    def total(self) -> float:
        return (self.r_goal + self.r_progress + self.r_social
                + self.r_expl + self.r_novelty + self.r_term)

    def add(self, other: "RewardBreakdown"):
        self.r_goal += other.r_goal
        self.r_progress += other.r_progress
        self.r_social += other.r_social
        self.r_expl += other.r_expl
        self.r_novelty += other.r_novelty
        self.r_term += other.r_term

    def to_dict(self):
        return {"r_goal": self.r_goal, "r_progress": self.r_progress,
                "r_social": self.r_social, "r_expl": self.r_expl,
                "r_novelty": self.r_novelty, "r_term": self.r_term,
                "total": self.total}


class NoveltyGrid:
    """Per-episode visit counts on a 0.5 m grid."""

    def __init__(self, cell: float = NOVELTY_CELL):
        self.cell = cell
        self.counts: dict = {}

    def cell_of(self, xy):
        return (int(math.floor(xy[0] / self.cell)), int(math.floor(xy[1] / self.cell)))

    def visit(self, cell) -> float:
        """Record a visit; returns the novelty value phi for this visit."""
        c = self.counts.get(cell, 0)
        self.counts[cell] = c + 1
        if c < len(NOVELTY_SEQ):
            return NOVELTY_SEQ[c]
        return 0.0


def reward_goal_step(d_prev: float, d_now: float, outcome: Outcome) -> RewardBreakdown:
    """Progress + terminal components for a goal-conditioned step."""
    alpha = ALPHA_APPROACH if d_now < d_prev else ALPHA_RECEDE
    rb = RewardBreakdown(r_progress=alpha * (d_prev - d_now))
    if outcome == Outcome.SUCCESS:
        rb.r_goal = GOAL_BONUS
    elif outcome == Outcome.STUCK:
        rb.r_term = STUCK_PENALTY
    elif outcome == Outcome.TIMEOUT:
        rb.r_term = TIMEOUT_SCALE * d_now
    return rb


def reward_social(distances) -> float:
    """Summed proxemic penalty over pedestrians (zero outside the comfort zone)."""
    total = 0.0
    for d in distances:
        if d < D_INTIMATE:
            total += INTIMATE_PENALTY
        elif d < D_COMFORT:
            total += COMFORT_PENALTY * (D_COMFORT - d) / (D_COMFORT - D_INTIMATE)
    return total


def reward_exploration_step(delta_xy, cell, grid: NoveltyGrid) -> RewardBreakdown:
    """Coverage reward: movement term, novelty bonus, per-step living cost."""
    phi = grid.visit(cell)
    return RewardBreakdown(
        r_expl=EXPL_MOVE_SCALE * float(np.hypot(*delta_xy)),
        r_novelty=NOVELTY_LAMBDA * phi,
        r_term=EXPL_STEP_COST,
    )


def discounted_returns(rewards, gamma: float = GAMMA) -> np.ndarray:
    """G_t = sum_{k>=t} gamma^(k-t) r_k by backward recursion."""
    rewards = np.asarray(rewards, dtype=float)
    G = np.zeros_like(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        G[t] = acc
    return G


def normalize_advantages(returns, clip: float = ADV_CLIP) -> np.ndarray:
    """Episode-level Z-score of returns, clipped; zeros for degenerate episodes."""
    G = np.asarray(returns, dtype=float)
    std = float(np.std(G))
    if std < 1e-6:
        return np.zeros_like(G)
    return np.clip((G - float(np.mean(G))) / std, -clip, clip)
