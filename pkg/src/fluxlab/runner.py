"""Closed-loop episode execution.

The policy is queried every `replan_every` sim steps (0.5 s at the 0.1 s
world step); the selected trajectory is tracked by pure pursuit in between.
Rewards accrue per sim step and are folded into the current decision's
breakdown, which is what stage-2 training consumes. Streaming metrics are
updated step-by-step and must match a brute-force recomputation from the
JSONL log exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .episodes import EXPLORATION_TASKS, GOAL_CONDITIONED, EpisodeSpec, Task
from .metrics import CoverageTracker, SocialTracker, compute_spl
from .planner import UnreachableError, path_length, plan_global
from .policy import (ModelHandle, generate_candidates, observation_vector,
                     project_feasible, traj_to_world, trajectory_to_command,
                     NORM_SCALE, HORIZON, TRAJ_DIM)
from .rewards import (NoveltyGrid, RewardBreakdown, reward_exploration_step,
                      reward_goal_step, reward_social)
from .scenes import ROBOT_RADIUS, Scene
from .seeding import stream_rng
from .world import (DT, HISTORY_FRAMES, Outcome, WorldState, check_termination,
                    goal_in_robot_frame, make_world, raycast, step_world)

REPLAN_EVERY = 5
ACTION_SIGMA = 0.1  # per-waypoint Gaussian std in normalized units
LOGP_CONST = -0.5 * TRAJ_DIM * math.log(2.0 * math.pi * ACTION_SIGMA ** 2)


def gaussian_logp(action, mean, sigma=ACTION_SIGMA):
    d = np.asarray(action, dtype=float).ravel() - np.asarray(mean, dtype=float).ravel()
    return float(-0.5 * (d @ d) / (sigma * sigma) + LOGP_CONST)


@dataclass
class Decision:
    """One policy query: everything stage-2 needs to recompute the action density."""
    obs_vec: np.ndarray
    tau0: np.ndarray          # latent that produced the selected candidate
    noise_chain: np.ndarray | None  # per-step reverse noises (ddpm only)
    action: np.ndarray        # executed action in normalized units (flat)
    logp_behavior: float
    reward: RewardBreakdown = field(default_factory=RewardBreakdown)


@dataclass
class EpisodeResult:
    spec: EpisodeSpec
    outcome: Outcome
    time: float
    path_len: float
    spl: float
    sc: float
    coll: int
    min_dist: float
    ea: float
    reward_total: float
    decisions: list = field(default_factory=list)
    frames: list = field(default_factory=list)   # (obs_vec, pose, step_idx) for relabeling
    poses: list = field(default_factory=list)    # per-step robot poses, incl. start

    @property
    def success(self):
        return self.outcome == Outcome.SUCCESS


class ModelPolicy:
    """Candidate generation + critic selection (+ optional exploration noise)."""

    def __init__(self, model: ModelHandle, M=None, K=None, explore_sigma=0.0):
        self.model = model
        self.M = M if M is not None else model.config.M
        self.K = K if K is not None else model.config.K
        self.explore_sigma = explore_sigma

    def plan(self, state: WorldState, obs_vec, rng):
        order, raw, proj, scores, tau0, chains = generate_candidates(
            self.model, obs_vec, self.M, self.K, rng)
        sel = order[0]
        mean = raw[sel].reshape(-1)
        if self.explore_sigma > 0.0:
            action = mean + self.explore_sigma * rng.standard_normal(mean.shape)
        else:
            action = mean.copy()
        logp = gaussian_logp(action, mean, ACTION_SIGMA)
        traj_norm = project_feasible(action.reshape(HORIZON, 2))
        traj_world = traj_to_world(traj_norm, state.robot_pose)
        info = {"tau0": tau0[sel], "action": action, "logp": logp,
                "noise_chain": chains[:, sel, :] if chains is not None else None,
                "scores": scores, "order": order, "candidates": raw}
        return traj_world, info


class ExpertPolicy:
    """A*-planned path followed at max speed; the in-simulator data expert."""

    def __init__(self, scene: Scene, goal_xy):
        self.scene = scene
        self.goal = goal_xy
        self.path = None

    def plan(self, state: WorldState, obs_vec, rng):
        if self.path is None:
            pts = plan_global(self.scene, tuple(state.robot_pose[:2]), tuple(self.goal),
                              ROBOT_RADIUS)
            self.path = _densify(pts, 0.05)
        # waypoints ahead of the closest path point, spaced one decision apart
        pos = state.robot_pose[:2]
        d = np.hypot(self.path[:, 0] - pos[0], self.path[:, 1] - pos[1])
        k0 = int(np.argmin(d))
        step_pts = 5  # 0.25 m at 0.05 m spacing: max reach per 0.5 s
        idx = np.minimum(k0 + step_pts * np.arange(1, HORIZON + 1), len(self.path) - 1)
        return self.path[idx].copy(), None


def _densify(points, spacing):
    out = [np.asarray(points[0], dtype=float)]
    for a, b in zip(points[:-1], points[1:]):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        seg = float(np.hypot(*(b - a)))
        n = max(1, int(math.ceil(seg / spacing)))
        for i in range(1, n + 1):
            out.append(a + (b - a) * (i / n))
    return np.asarray(out)


def _goal_xy(state: WorldState, spec: EpisodeSpec):
    if spec.task == Task.DYN_POINTNAV:
        return state.pedestrians[spec.tracked_agent].pos
    return spec.goal


def run_episode(scene: Scene, spec: EpisodeSpec, policy, *,
                collect_decisions=False, collect_frames=False,
                log_fh=None, meta=None, replan_every=REPLAN_EVERY,
                timeout_s=120.0) -> EpisodeResult:
    """Run one episode to termination.

    log_fh: open text file; meta: extra fields for the leading meta record.
    """
    state = make_world(scene, spec.start, spec.ped_routes, spec.seed)
    policy_rng = stream_rng(spec.seed, "policy")
    goal_conditioned = spec.task in GOAL_CONDITIONED
    exploration = spec.task in EXPLORATION_TASKS

    social = SocialTracker(spec.n_pedestrians)
    coverage = CoverageTracker(scene) if exploration else None
    novelty = NoveltyGrid() if exploration else None

    if log_fh is not None:
        head = {"type": "meta", **(meta or {}), **spec.to_dict()}
        log_fh.write(json.dumps(head) + "\n")

    depth_frames = []
    goal_frames = []
    frames = []
    decisions = []
    poses = [tuple(map(float, state.robot_pose))]

    d_prev = None
    if goal_conditioned:
        g = _goal_xy(state, spec)
        d_prev = math.hypot(state.robot_pose[0] - g[0], state.robot_pose[1] - g[1])

    path_len = 0.0
    reward_total = 0.0
    traj_world = None
    current_decision = None
    outcome = Outcome.RUNNING
    max_steps = int(round(timeout_s / DT)) + replan_every + 2

    for step_idx in range(max_steps):
        if step_idx % replan_every == 0:
            depth = raycast(state)
            gvec = (goal_in_robot_frame(state, _goal_xy(state, spec))
                    if goal_conditioned else np.zeros(2))
            if not depth_frames:
                depth_frames = [depth] * HISTORY_FRAMES
                goal_frames = [gvec] * HISTORY_FRAMES
            else:
                depth_frames = depth_frames[1:] + [depth]
                goal_frames = goal_frames[1:] + [gvec]
            obs_vec = observation_vector(depth_frames, goal_frames)
            if collect_frames:
                frames.append((obs_vec, tuple(map(float, state.robot_pose)), step_idx))
            traj_world, info = policy.plan(state, obs_vec, policy_rng)
            if collect_decisions and info is not None:
                current_decision = Decision(
                    obs_vec=obs_vec, tau0=info["tau0"],
                    noise_chain=info["noise_chain"],
                    action=info["action"], logp_behavior=info["logp"])
                decisions.append(current_decision)

        prev_xy = (float(state.robot_pose[0]), float(state.robot_pose[1]))
        cmd = trajectory_to_command(traj_world, state.robot_pose)
        step_world(state, cmd)
        x, y = float(state.robot_pose[0]), float(state.robot_pose[1])
        poses.append(tuple(map(float, state.robot_pose)))
        step_len = math.hypot(x - prev_xy[0], y - prev_xy[1])
        path_len += step_len

        goal_now = _goal_xy(state, spec) if goal_conditioned else None
        outcome = check_termination(state, goal_xy=goal_now,
                                    goal_conditioned=goal_conditioned,
                                    timeout_s=timeout_s)

        dists = [float(np.hypot(a.pos[0] - x, a.pos[1] - y)) for a in state.pedestrians]
        if goal_conditioned:
            d_now = math.hypot(x - goal_now[0], y - goal_now[1])
            rb = reward_goal_step(d_prev, d_now, outcome)
            d_prev = d_now
        else:
            rb = reward_exploration_step((x - prev_xy[0], y - prev_xy[1]),
                                         novelty.cell_of((x, y)), novelty)
        rb.r_social = reward_social(dists)
        reward_total += rb.total
        if current_decision is not None:
            current_decision.reward.add(rb)

        social.update(dists)
        if coverage is not None:
            coverage.update((x, y))

        if log_fh is not None:
            rec = {"t": state.time, "robot": [x, y, float(state.robot_pose[2])],
                   "cmd": [cmd[0], cmd[1]],
                   "peds": [[float(a.pos[0]), float(a.pos[1]), float(a.heading),
                             int(a.fsm_state)] for a in state.pedestrians],
                   "reward": rb.to_dict()}
            log_fh.write(json.dumps(rec) + "\n")

        if outcome != Outcome.RUNNING:
            break

    sc, coll, min_dist = social.results()
    ea = coverage.area() if coverage is not None else 0.0
    spl = 0.0
    if goal_conditioned and spec.shortest_path_len > 0.0:
        spl = compute_spl(outcome == Outcome.SUCCESS, spec.shortest_path_len, path_len)

    result = EpisodeResult(
        spec=spec, outcome=outcome, time=state.time, path_len=path_len, spl=spl,
        sc=sc, coll=coll, min_dist=min_dist, ea=ea, reward_total=reward_total,
        decisions=decisions, frames=frames, poses=poses)

    if log_fh is not None:
        log_fh.write(json.dumps({"type": "end", "outcome": outcome.name,
                                 "metrics": {"time": state.time, "path_len": path_len,
                                             "spl": spl, "sc": sc, "coll": coll,
                                             "min_dist": min_dist, "ea": ea,
                                             "reward_total": reward_total}}) + "\n")
    return result


def read_log(path):
    """Parse a JSONL episode log -> (meta, step records, end record)."""
    meta = None
    steps = []
    end = None
    with open(path) as f:
        for line in f:
            rec = json.loads(line)
            if rec.get("type") == "meta":
                meta = rec
            elif rec.get("type") == "end":
                end = rec
            else:
                steps.append(rec)
    return meta, steps, end


def records_for_metrics(steps):
    """Adapt raw step records to the metrics module's record shape."""
    return [{"t": r["t"], "robot": r["robot"],
             "peds": [{"x": p[0], "y": p[1]} for p in r["peds"]]} for r in steps]
