"""Deterministic 2D dynamic world.

Fixed-step (0.1 s) simulation of a disk robot with unicycle kinematics among
static obstacles and pedestrian agents. Pedestrians cycle a fixed triangular
waypoint route under a three-state Markov FSM (GoTo / Idle / LookAround),
plan globally with A* and dodge locally with a heading-fan rule. Collisions
are resolved by positional projection so no two rigid bodies overlap after a
step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import geometry as geo
from .planner import OccupancyGrid, UnreachableError, plan_global
from .scenes import PED_RADIUS, ROBOT_RADIUS, Scene

DT = 0.1
ROBOT_VMAX = 0.5
ROBOT_WMAX = 1.0
PED_VMAX = 1.1

N_RAYS = 64
FOV = math.pi / 2.0
MAX_RANGE = 5.0
HISTORY_FRAMES = 3

ARRIVE_DIST = 0.2
DWELL_RANGE = (1.0, 3.0)
LOOKAROUND_RATE = 0.5
TTC_MIN = 1.0
FAN_SIZE = 16

STUCK_WINDOW = 2.0
STUCK_DISP = 0.1
TIMEOUT_S = 120.0
SUCCESS_DIST = 1.0


class FSMState(IntEnum):
    GOTO = 0
    IDLE = 1
    LOOKAROUND = 2


# Markov transition matrix; rows sum to 1, no self-transitions.
P_MATRIX = np.array([
    [0.0, 0.5, 0.5],   # from GoTo
    [0.6, 0.0, 0.4],   # from Idle
    [0.7, 0.3, 0.0],   # from LookAround
])


class Outcome(IntEnum):
    RUNNING = 0
    SUCCESS = 1
    STUCK = 2
    TIMEOUT = 3


@dataclass
class PedestrianAgent:
    pos: np.ndarray                 # (2,)
    heading: float
    route: np.ndarray               # (3, 2) triangular waypoints
    route_index: int                # index of the current target vertex
    fsm_state: FSMState = FSMState.GOTO
    state_timer: float = 0.0
    radius: float = PED_RADIUS
    vel: np.ndarray = field(default_factory=lambda: np.zeros(2))
    path: list = field(default_factory=list)
    path_idx: int = 0

    def target(self):
        return self.route[self.route_index]


@dataclass
class Observation:
    depth_rays: np.ndarray          # (R,) ranges in (0, max_range]
    goal_vec: np.ndarray            # (2,) goal in robot frame; zeros for exploration
    history: list                   # most recent HISTORY_FRAMES (depth, goal) frames, oldest first


@dataclass
class WorldState:
    scene: Scene
    time: float
    robot_pose: np.ndarray          # (3,) x, y, heading
    robot_vel: float
    pedestrians: list
    rng: np.random.Generator
    peds_avoid_robot: bool = True
    pose_history: list = field(default_factory=list)  # (t, x, y), trailing STUCK_WINDOW
    _grid: OccupancyGrid | None = None
    _leg_cache: dict = field(default_factory=dict)

    @property
    def bounds(self):
        return self.scene.bounds

    def ped_grid(self):
        if self._grid is None:
            self._grid = OccupancyGrid(self.scene, PED_RADIUS)
        return self._grid


def make_world(scene: Scene, start_pose, routes, seed, peds_avoid_robot=True) -> WorldState:
    """Build a world with the robot at start_pose and one pedestrian per route.

    Each pedestrian spawns at a random vertex of its triangle and heads for
    the next one. Deterministic in the seed.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, 0xBE]))
    state = WorldState(
        scene=scene,
        time=0.0,
        robot_pose=np.array(start_pose, dtype=float),
        robot_vel=0.0,
        pedestrians=[],
        rng=rng,
        peds_avoid_robot=peds_avoid_robot,
    )
    state.pose_history.append((0.0, float(start_pose[0]), float(start_pose[1])))
    for route in routes:
        route = np.asarray(route, dtype=float).reshape(3, 2)
        k = int(rng.integers(3))
        agent = PedestrianAgent(
            pos=route[k].copy(),
            heading=float(rng.uniform(-math.pi, math.pi)),
            route=route,
            route_index=(k + 1) % 3,
        )
        state.pedestrians.append(agent)
    for i, agent in enumerate(state.pedestrians):
        _replan_leg(state, i, agent)
    return state


def _replan_leg(state: WorldState, idx: int, agent: PedestrianAgent):
    """Plan agent's current leg, reusing the per-(agent, leg) cache when the
    agent is close to the cached polyline."""
    key = (idx, agent.route_index)
    cached = state._leg_cache.get(key)
    if cached is not None:
        d = [float(np.hypot(*(np.asarray(p) - agent.pos))) for p in cached]
        j = int(np.argmin(d))
        if d[j] <= 1.0:
            agent.path = cached
            agent.path_idx = j
            return
    try:
        pts = plan_global(state.scene, tuple(agent.pos), tuple(agent.target()),
                          PED_RADIUS, grid=state.ped_grid())
    except UnreachableError:
        pts = [tuple(agent.pos), tuple(agent.target())]  # fall back to a straight dash
    agent.path = [np.asarray(p, dtype=float) for p in pts]
    agent.path_idx = 0
    state._leg_cache[key] = agent.path


def fsm_transition(agent: PedestrianAgent, rng: np.random.Generator) -> FSMState:
    """Sample the next state from the agent's row of the Markov matrix.

    Entering Idle/LookAround draws a dwell timer; entering GoTo advances the
    route to the next vertex (the caller replans the leg).
    """
    row = P_MATRIX[int(agent.fsm_state)]
    nxt = FSMState(int(rng.choice(3, p=row)))
    agent.fsm_state = nxt
    if nxt == FSMState.GOTO:
        agent.route_index = (agent.route_index + 1) % 3
        agent.state_timer = 0.0
    else:
        agent.state_timer = float(rng.uniform(*DWELL_RANGE))
    return nxt


_FAN_CACHE = {}


def _fan_offsets(fan):
    if fan not in _FAN_CACHE:
        offsets = (np.arange(fan) - fan // 2) * (math.pi / fan)
        order = np.lexsort((offsets, np.abs(offsets)))
        _FAN_CACHE[fan] = (offsets, order)
    return _FAN_CACHE[fan]


def _avoid_arrays(pos, desired_vel, max_speed, npos, nvel, nrad,
                  ttc_min=TTC_MIN, fan=FAN_SIZE):
    """Vectorized heading-fan search over (speed tier, heading) candidates."""
    speed = math.hypot(desired_vel[0], desired_vel[1])
    if speed < 1e-9 or len(npos) == 0:
        return np.asarray(desired_vel, dtype=float)
    speed = min(speed, max_speed)
    rel_pos = npos - np.asarray(pos, dtype=float)[None, :]
    base = math.atan2(desired_vel[1], desired_vel[0])
    vd = np.array([speed * math.cos(base), speed * math.sin(base)])
    # fast path: the desired velocity itself is already safe
    ttc = geo.time_to_collision(rel_pos, nvel - vd[None, :], nrad)
    if np.all(ttc > ttc_min):
        return vd
    offsets, order = _fan_offsets(fan)
    angs = base + offsets
    dirs = np.stack([np.cos(angs), np.sin(angs)], axis=1)            # (F, 2)
    scales = np.array([1.0, 0.5, 0.25]) * speed
    vels = scales[:, None, None] * dirs[None, :, :]                  # (3, F, 2)
    rel_vel = nvel[None, None, :, :] - vels[:, :, None, :]           # (3, F, nb, 2)
    ttc = geo.time_to_collision(rel_pos[None, None, :, :], rel_vel, nrad)
    feasible = np.all(ttc > ttc_min, axis=-1)                        # (3, F)
    for s in range(len(scales)):
        row = feasible[s]
        for k in order:
            if row[k]:
                return vels[s, k]
    return np.zeros(2)


def local_avoid(pos, desired_vel, max_speed, neighbors, ttc_min=TTC_MIN, fan=FAN_SIZE):
    """Heading-fan collision dodge.

    neighbors: list of (pos (2,), vel (2,), combined_radius). Picks the
    smallest heading deviation (at full, then half, then quarter speed) whose
    time-to-collision with every neighbor exceeds ttc_min; falls back to
    standing still.
    """
    desired_vel = np.asarray(desired_vel, dtype=float)
    if not neighbors:
        return desired_vel
    npos = np.asarray([n[0] for n in neighbors], dtype=float)
    nvel = np.asarray([n[1] for n in neighbors], dtype=float)
    nrad = np.asarray([n[2] for n in neighbors], dtype=float)
    return _avoid_arrays(pos, desired_vel, max_speed, npos, nvel, nrad,
                         ttc_min=ttc_min, fan=fan)


def _cross_track(agent: PedestrianAgent) -> float:
    """Distance from the agent to its current path segment."""
    if not agent.path:
        return 0.0
    b = agent.path[agent.path_idx]
    if agent.path_idx == 0:
        return float(np.hypot(*(b - agent.pos)))
    a = agent.path[agent.path_idx - 1]
    ab = b - a
    L2 = float(ab @ ab)
    if L2 < 1e-12:
        return float(np.hypot(*(b - agent.pos)))
    t = float(np.clip((agent.pos - a) @ ab / L2, 0.0, 1.0))
    return float(np.hypot(*(a + t * ab - agent.pos)))


def step_world(state: WorldState, robot_cmd, dt: float = DT) -> WorldState:
    """Advance the world by one fixed step. Mutates and returns state."""
    v = float(np.clip(robot_cmd[0], -ROBOT_VMAX, ROBOT_VMAX))
    w = float(np.clip(robot_cmd[1], -ROBOT_WMAX, ROBOT_WMAX))
    x, y, th = state.robot_pose
    nx = x + v * math.cos(th) * dt
    ny = y + v * math.sin(th) * dt
    nth = float(geo.wrap_angle(th + w * dt))
    state.robot_pose = np.array([nx, ny, nth])
    state.robot_vel = v

    # snapshot of body states at step start, used symmetrically by all agents
    n_ped = len(state.pedestrians)
    robot_vel_vec = np.array([v * math.cos(th), v * math.sin(th)])
    if n_ped:
        all_pos = np.empty((n_ped + 1, 2))
        all_vel = np.empty((n_ped + 1, 2))
        all_rad = np.empty(n_ped + 1)
        for j, a in enumerate(state.pedestrians):
            all_pos[j] = a.pos
            all_vel[j] = a.vel
            all_rad[j] = a.radius
        all_pos[n_ped] = (x, y)
        all_vel[n_ped] = robot_vel_vec
        all_rad[n_ped] = ROBOT_RADIUS

    for i, agent in enumerate(state.pedestrians):
        # events: arrival (GoTo) or dwell expiry (Idle / LookAround)
        if agent.fsm_state == FSMState.GOTO:
            if float(np.hypot(*(agent.target() - agent.pos))) <= ARRIVE_DIST:
                if fsm_transition(agent, state.rng) == FSMState.GOTO:
                    _replan_leg(state, i, agent)
        else:
            agent.state_timer -= dt
            if agent.state_timer <= 0.0:
                if fsm_transition(agent, state.rng) == FSMState.GOTO:
                    _replan_leg(state, i, agent)

        if agent.fsm_state == FSMState.GOTO:
            if not agent.path:
                _replan_leg(state, i, agent)
            # advance along the planned polyline
            while (agent.path_idx < len(agent.path) - 1
                   and float(np.hypot(*(agent.path[agent.path_idx] - agent.pos))) < 0.3):
                agent.path_idx += 1
            tgt = agent.path[agent.path_idx]
            to_tgt = tgt - agent.pos
            dist = float(np.hypot(*to_tgt))
            if dist < 1e-9:
                desired = np.zeros(2)
            else:
                desired = to_tgt / dist * min(PED_VMAX, dist / dt)
            mask = np.ones(n_ped + 1, dtype=bool)
            mask[i] = False
            if not state.peds_avoid_robot:
                mask[n_ped] = False
            vel = _avoid_arrays(agent.pos, desired, PED_VMAX, all_pos[mask],
                                all_vel[mask], all_rad[mask] + agent.radius)
            agent.vel = vel
            agent.pos = agent.pos + vel * dt
            sp = float(np.hypot(*vel))
            if sp > 1e-6:
                agent.heading = math.atan2(vel[1], vel[0])
            if _cross_track(agent) > 1.0:  # shoved off the leg; plan fresh
                _replan_leg(state, i, agent)
        elif agent.fsm_state == FSMState.IDLE:
            agent.vel = np.zeros(2)
        else:  # LookAround
            agent.vel = np.zeros(2)
            agent.heading = float(geo.wrap_angle(agent.heading + LOOKAROUND_RATE * dt))

    _resolve_collisions(state)

    state.time += dt
    state.pose_history.append((state.time, float(state.robot_pose[0]), float(state.robot_pose[1])))
    cutoff = state.time - STUCK_WINDOW - 1e-9
    while len(state.pose_history) > 1 and state.pose_history[1][0] <= cutoff:
        state.pose_history.pop(0)
    return state


def _resolve_collisions(state: WorldState, max_iters: int = 40, tol: float = 1e-9):
    """Projection-based overlap resolution across all bodies and statics."""
    circles = state.scene.circles
    rects = state.scene.rects
    bounds = state.scene.bounds
    bodies = [(np.asarray(state.robot_pose[:2], dtype=float), ROBOT_RADIUS)]
    for a in state.pedestrians:
        bodies.append((np.asarray(a.pos, dtype=float), a.radius))
    pos = np.stack([b[0].astype(float) for b in bodies])
    rad = np.asarray([b[1] for b in bodies])
    n = len(pos)
    need = rad[:, None] + rad[None, :]
    for _ in range(max_iters):
        moved = 0.0
        for i in range(n):
            fixed = geo.resolve_circle_static(pos[i], rad[i], circles, rects, bounds)
            moved = max(moved, abs(fixed[0] - pos[i][0]) + abs(fixed[1] - pos[i][1]))
            pos[i, 0], pos[i, 1] = fixed
        diff = pos[None, :, :] - pos[:, None, :]
        dist = np.hypot(diff[:, :, 0], diff[:, :, 1])
        over = np.triu(dist < need, k=1)
        for i, j in zip(*np.nonzero(over)):
            d = pos[j] - pos[i]
            dij = float(np.hypot(*d))
            if dij < 1e-12:
                d = np.array([1.0, 0.0])
                dij = 1.0
            push = (need[i, j] - dij) * 0.5
            unit = d / dij
            pos[i] -= unit * push
            pos[j] += unit * push
            moved = max(moved, push)
        if moved <= tol:
            break
    state.robot_pose = np.array([pos[0][0], pos[0][1], state.robot_pose[2]])
    for k, a in enumerate(state.pedestrians):
        a.pos = pos[k + 1]


def ray_angles(heading: float, n_rays: int = N_RAYS, fov: float = FOV):
    """Ray angle set: n_rays at fov/n spacing with an exact forward ray."""
    return heading + (np.arange(n_rays) - n_rays // 2) * (fov / n_rays)


def raycast(state: WorldState, n_rays: int = N_RAYS, fov: float = FOV,
            max_range: float = MAX_RANGE) -> np.ndarray:
    """Depth readings from the robot: nearest obstacle / pedestrian / wall per ray."""
    angles = ray_angles(float(state.robot_pose[2]), n_rays, fov)
    circles = list(state.scene.circles)
    for a in state.pedestrians:
        circles.append((float(a.pos[0]), float(a.pos[1]), a.radius))
    d = geo.raycast_distances(state.robot_pose[:2], angles, circles,
                              state.scene.rects, state.scene.bounds, max_range)
    return np.maximum(d, 1e-9)


def goal_in_robot_frame(state: WorldState, goal_xy) -> np.ndarray:
    x, y, th = state.robot_pose
    dx = goal_xy[0] - x
    dy = goal_xy[1] - y
    c, s = math.cos(th), math.sin(th)
    return np.array([c * dx + s * dy, -s * dx + c * dy])


def check_termination(state: WorldState, goal_xy=None, goal_conditioned=True,
                      timeout_s: float = TIMEOUT_S) -> Outcome:
    """Success -> Stuck -> Timeout, in that order.

    goal_xy: current goal position (tracked-agent position for moving goals);
    ignored when goal_conditioned is False.
    """
    if goal_conditioned and goal_xy is not None:
        d = math.hypot(state.robot_pose[0] - goal_xy[0], state.robot_pose[1] - goal_xy[1])
        if d < SUCCESS_DIST:
            return Outcome.SUCCESS
    if state.pose_history and state.time - state.pose_history[0][0] >= STUCK_WINDOW - 1e-9:
        px, py = state.robot_pose[0], state.robot_pose[1]
        disp = max(math.hypot(px - hx, py - hy) for _, hx, hy in state.pose_history)
        if disp < STUCK_DISP:
            return Outcome.STUCK
    if state.time > timeout_s:
        return Outcome.TIMEOUT
    return Outcome.RUNNING
