"""Benchmark metrics: SR, SPL, S-TL, ET, EA, SC, Coll., MinDist.

Social thresholds follow Hall's proxemic bands: intimate < 0.45 m (an entry
counts one intrusion per pedestrian per contiguous interval) and social
< 1.2 m (fraction of time). Distances are center-to-center. Coverage counts
0.5 m cells whose centers fall inside the 2.0 m sensing disk at any step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenes import Scene, free_cell_centers

D_INTIMATE = 0.45
D_COMFORT = 1.2
SENSE_RADIUS = 2.0
COVER_CELL = 0.5


def compute_spl(success: bool, shortest: float, actual: float) -> float:
    """Success weighted by path length: success * shortest / max(shortest, actual)."""
    if shortest <= 0.0:
        raise ValueError(f"shortest path must be positive, got {shortest}")
    if actual < 0.0:
        raise ValueError(f"actual path must be nonnegative, got {actual}")
    if not success:
        return 0.0
    return shortest / max(shortest, actual)


class SocialTracker:
    """Streaming SC / Coll. / MinDist over per-step pedestrian distances."""

    def __init__(self, n_pedestrians: int):
        self.n = n_pedestrians
        self.steps = 0
        self.close_steps = 0
        self.collisions = 0
        self.min_dist = math.inf
        self._inside = [False] * n_pedestrians

    def update(self, dists):
        self.steps += 1
        if self.n == 0:
            return
        m = min(dists)
        if m < self.min_dist:
            self.min_dist = m
        if m < D_COMFORT:
            self.close_steps += 1
        for j, d in enumerate(dists):
            if d < D_INTIMATE:
                if not self._inside[j]:
                    self.collisions += 1
                    self._inside[j] = True
            else:
                self._inside[j] = False

    def results(self):
        sc = self.close_steps / self.steps if self.steps else 0.0
        return sc, self.collisions, self.min_dist


class CoverageTracker:
    """Streaming exploration-area accounting on the 0.5 m grid."""

    def __init__(self, scene: Scene, sense_radius=SENSE_RADIUS, cell=COVER_CELL):
        xs, ys = free_cell_centers(scene, cell)
        self._centers = np.stack([xs, ys], axis=1) if xs.size else np.zeros((0, 2))
        self.cell = cell
        self.sense_radius = sense_radius
        self._covered = np.zeros(len(self._centers), dtype=bool)

    def update(self, robot_xy):
        if not len(self._centers):
            return
        d2 = ((self._centers[:, 0] - robot_xy[0]) ** 2
              + (self._centers[:, 1] - robot_xy[1]) ** 2)
        self._covered |= d2 <= self.sense_radius ** 2

    def area(self):
        return float(np.count_nonzero(self._covered)) * self.cell * self.cell


def social_metrics_from_records(records, n_pedestrians):
    """Brute-force SC/Coll./MinDist recomputation from parsed step records."""
    tracker = SocialTracker(n_pedestrians)
    for rec in records:
        rx, ry = rec["robot"][0], rec["robot"][1]
        dists = [math.hypot(p["x"] - rx, p["y"] - ry) for p in rec["peds"]]
        tracker.update(dists)
    return tracker.results()


def coverage_from_records(records, scene: Scene, sense_radius=SENSE_RADIUS, cell=COVER_CELL):
    """Brute-force (ET, EA) recomputation from parsed step records."""
    tracker = CoverageTracker(scene, sense_radius, cell)
    t_end = 0.0
    for rec in records:
        tracker.update((rec["robot"][0], rec["robot"][1]))
        t_end = rec["t"]
    return t_end, tracker.area()


def path_length_from_records(records, start_xy):
    total = 0.0
    px, py = start_xy
    for rec in records:
        rx, ry = rec["robot"][0], rec["robot"][1]
        total += math.hypot(rx - px, ry - py)
        px, py = rx, ry
    return total


@dataclass
class EpisodeMetrics:
    episode: int
    task: str
    scene: str
    outcome: str
    success: bool
    time: float
    path_len: float
    shortest: float
    spl: float
    sc: float
    coll: int
    min_dist: float
    ea: float
    reward_total: float = 0.0


@dataclass
class MetricsReport:
    rows: list = field(default_factory=list)

    def add(self, m: EpisodeMetrics):
        self.rows.append(m)

    def aggregate(self):
        n = len(self.rows)
        if n == 0:
            return {}
        sr = sum(1.0 for r in self.rows if r.success) / n
        spl = sum(r.spl for r in self.rows) / n
        succ_lens = [r.path_len for r in self.rows if r.success]
        s_tl = sum(succ_lens) / len(succ_lens) if succ_lens else 0.0
        et = sum(r.time for r in self.rows) / n
        ea = sum(r.ea for r in self.rows) / n
        sc = sum(r.sc for r in self.rows) / n
        coll = sum(r.coll for r in self.rows) / n
        dists = [r.min_dist for r in self.rows if math.isfinite(r.min_dist)]
        min_dist = sum(dists) / len(dists) if dists else math.inf
        return {"n": n, "sr": sr, "spl": spl, "s_tl": s_tl, "et": et, "ea": ea,
                "sc": sc, "coll": coll, "min_dist": min_dist}
