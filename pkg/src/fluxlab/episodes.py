"""Episode generation for the five tasks, reproducible from a seed.

An EpisodeSpec fully determines a benchmark run: scene, start pose, goal (a
point, or the tracked agent for moving-goal episodes), pedestrian routes and
the seed for every random stream consumed while running it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .planner import OccupancyGrid, UnreachableError, path_length, plan_global
from .scenes import PED_RADIUS, ROBOT_RADIUS, Scene, point_free
from .seeding import derive_u64, stream_rng

MIN_GEODESIC = 3.0
ROUTE_MIN_SEP = 2.0


class Task(str, Enum):
    POINTNAV = "PointNav"
    EXPLORATION = "Exploration"
    DYN_POINTNAV = "DynPointNav"
    SOCIALNAV = "SocialNav"
    DYN_EXPLORATION = "DynExploration"


GOAL_CONDITIONED = {Task.POINTNAV, Task.DYN_POINTNAV, Task.SOCIALNAV}
EXPLORATION_TASKS = {Task.EXPLORATION, Task.DYN_EXPLORATION}

# pedestrian count ranges per task
PED_COUNTS = {
    Task.POINTNAV: (0, 0),
    Task.EXPLORATION: (0, 0),
    Task.SOCIALNAV: (10, 15),
    Task.DYN_POINTNAV: (3, 6),
    Task.DYN_EXPLORATION: (3, 6),
}


class SceneInfeasibleError(Exception):
    """Rejection sampling failed to place a feasible episode."""


@dataclass
class EpisodeSpec:
    task: Task
    scene_name: str
    start: tuple                    # (x, y, heading)
    goal: tuple | None              # point for static goals, None otherwise
    tracked_agent: int | None       # pedestrian index for moving-goal tasks
    n_pedestrians: int
    ped_routes: list                # n_pedestrians routes of 3 waypoints
    seed: int
    shortest_path_len: float        # smoothed geodesic for SPL; 0 for exploration

    def to_dict(self):
        return {
            "task": self.task.value,
            "scene": self.scene_name,
            "start": list(self.start),
            "goal": list(self.goal) if self.goal is not None else None,
            "tracked_agent": self.tracked_agent,
            "n_pedestrians": self.n_pedestrians,
            "ped_routes": [[list(p) for p in r] for r in self.ped_routes],
            "seed": int(self.seed),
            "shortest_path_len": self.shortest_path_len,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            task=Task(d["task"]),
            scene_name=d["scene"],
            start=tuple(d["start"]),
            goal=tuple(d["goal"]) if d.get("goal") is not None else None,
            tracked_agent=d.get("tracked_agent"),
            n_pedestrians=int(d["n_pedestrians"]),
            ped_routes=[[tuple(p) for p in r] for r in d["ped_routes"]],
            seed=int(d["seed"]),
            shortest_path_len=float(d["shortest_path_len"]),
        )


def _sample_free_point(scene, rng, radius, max_tries=1000):
    xmin, ymin, xmax, ymax = scene.bounds
    for _ in range(max_tries):
        p = (float(rng.uniform(xmin + radius, xmax - radius)),
             float(rng.uniform(ymin + radius, ymax - radius)))
        if point_free(scene, p, radius):
            return p
    raise SceneInfeasibleError(f"no free point in {scene.name}")


def _sample_route(scene, rng, grid, max_tries=1000):
    """Three pairwise-separated, mutually reachable waypoints."""
    for _ in range(max_tries):
        pts = []
        ok = True
        for _ in range(3):
            try:
                p = _sample_free_point(scene, rng, PED_RADIUS + 0.05, max_tries=200)
            except SceneInfeasibleError:
                ok = False
                break
            pts.append(p)
        if not ok:
            continue
        seps = [math.dist(pts[i], pts[j]) for i in range(3) for j in range(i + 1, 3)]
        if min(seps) < ROUTE_MIN_SEP:
            continue
        try:
            for i in range(3):
                plan_global(scene, pts[i], pts[(i + 1) % 3], PED_RADIUS, grid=grid)
        except UnreachableError:
            continue
        return pts
    raise SceneInfeasibleError(f"no feasible route in {scene.name}")


def gen_episodes(scenes, task, count, seed, max_rejects=1000):
    """Deterministic list of `count` episodes over the given scene set."""
    task = Task(task)
    out = []
    scene_grids = {}
    for i in range(count):
        rng = stream_rng(seed, "episode", i)
        scene = scenes[int(rng.integers(len(scenes)))]
        if scene.name not in scene_grids:
            scene_grids[scene.name] = (OccupancyGrid(scene, ROBOT_RADIUS),
                                       OccupancyGrid(scene, PED_RADIUS))
        robot_grid, ped_grid = scene_grids[scene.name]
        lo, hi = PED_COUNTS[task]
        n_ped = int(rng.integers(lo, hi + 1)) if hi > 0 else 0
        spec = None
        for _ in range(max_rejects):
            try:
                start_xy = _sample_free_point(scene, rng, ROBOT_RADIUS + 0.05)
            except SceneInfeasibleError:
                continue
            heading = float(rng.uniform(-math.pi, math.pi))
            routes = []
            try:
                routes = [_sample_route(scene, rng, ped_grid) for _ in range(n_ped)]
            except SceneInfeasibleError:
                continue
            goal = None
            tracked = None
            shortest = 0.0
            if task in (Task.POINTNAV, Task.SOCIALNAV):
                try:
                    goal = _sample_free_point(scene, rng, ROBOT_RADIUS + 0.05)
                    pts = plan_global(scene, start_xy, goal, ROBOT_RADIUS, grid=robot_grid)
                except (SceneInfeasibleError, UnreachableError):
                    continue
                shortest = path_length(pts)
                if shortest < MIN_GEODESIC:
                    continue
            elif task == Task.DYN_POINTNAV:
                tracked = 0
                anchor = routes[0][0]
                try:
                    pts = plan_global(scene, start_xy, anchor, ROBOT_RADIUS, grid=robot_grid)
                except UnreachableError:
                    continue
                shortest = path_length(pts)
                if shortest < MIN_GEODESIC:
                    continue
            spec = EpisodeSpec(
                task=task,
                scene_name=scene.name,
                start=(start_xy[0], start_xy[1], heading),
                goal=goal,
                tracked_agent=tracked,
                n_pedestrians=n_ped,
                ped_routes=routes,
                seed=derive_u64(seed, "episode", i, 0xE),
                shortest_path_len=float(shortest),
            )
            break
        if spec is None:
            raise SceneInfeasibleError(f"episode {i}: {max_rejects} rejections in {scene.name}")
        out.append(spec)
    return out
