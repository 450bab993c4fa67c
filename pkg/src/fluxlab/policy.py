"""Generative trajectory heads and critic-guided candidate selection.

Four interchangeable heads produce a horizon-8 trajectory of 2D waypoints in
the robot frame (0.5 s spacing, normalized by a 2.0 m reach so latent noise
N(0, I) covers the action range):

  * regression -- deterministic, trained with MSE to the expert trajectory;
  * ddpm       -- noise-prediction diffusion, stochastic reverse chain;
  * cfm        -- flow matching along a trigonometric (curved) interpolant;
  * rf         -- rectified flow: linear interpolant, constant target
                  velocity tau1 - tau0, sampled with K plain Euler steps.

A shared critic head scores M candidates; the argmax (ties to the lower
index) is executed through a pure-pursuit tracker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import geometry as geo
from .net import MLP, ShapeMismatchError, save_checkpoint, load_checkpoint
from .scenes import ROBOT_RADIUS
from .world import MAX_RANGE, N_RAYS, HISTORY_FRAMES, ROBOT_VMAX, ROBOT_WMAX, WorldState

HORIZON = 8
WAYPOINT_DT = 0.5
TRAJ_DIM = HORIZON * 2
NORM_SCALE = 2.0          # meters; trajectories live in units of this scale
MAX_STEP_M = 0.25         # feasibility: per-waypoint displacement cap (0.5 m/s * 0.5 s)
GOAL_CLIP = 5.0           # meters; goal vector saturation in the observation
TFEAT_DIM = 8
EMBED_DIM = 128
WIDTH = 128

OBS_FRAME_DIM = N_RAYS + 2
OBS_DIM = HISTORY_FRAMES * OBS_FRAME_DIM

LOOKAHEAD = 0.3
HEADING_GAIN = 2.0

COLLISION_PENALTY = 5.0


class HeadKind(str, Enum):
    REGRESSION = "regression"
    DDPM = "ddpm"
    CFM = "cfm"
    RF = "rf"


class ScheduleError(Exception):
    """Invalid diffusion schedule coefficients."""


class NonFiniteStateError(Exception):
    """Sampling produced NaN/Inf; the model is corrupt."""


@dataclass
class FlowConfig:
    head: HeadKind = HeadKind.RF
    K: int = 6                 # sampling steps (10 for ddpm)
    M: int = 16                # candidates per decision
    ddpm_beta_lo: float = 1e-4
    ddpm_beta_hi: float = 0.02

    def __post_init__(self):
        self.head = HeadKind(self.head)
        if self.K < 1 or self.M < 1:
            raise ValueError("K and M must be >= 1")


def ddpm_schedule(K, beta_lo=1e-4, beta_hi=0.02):
    """Linear-beta schedule -> (beta, alpha, abar, sigma) arrays of length K.

    Index k in 1..K maps to position k-1. sigma is the posterior std; the
    final reverse step (k=1) adds no noise by convention.
    """
    beta = np.linspace(beta_lo, beta_hi, K)
    alpha = 1.0 - beta
    abar = np.cumprod(alpha)
    if np.any(abar <= 0.0) or np.any(abar >= 1.0):
        raise ScheduleError("abar coefficients must lie in (0, 1)")
    abar_prev = np.concatenate([[1.0], abar[:-1]])
    sigma = np.sqrt((1.0 - abar_prev) / (1.0 - abar) * beta)
    return beta, alpha, abar, sigma


def time_features(t, batch):
    """8-dim sinusoidal embedding of a flow time (scalar or (B,) array)."""
    t = np.broadcast_to(np.asarray(t, dtype=float), (batch,))
    feats = []
    for j in range(TFEAT_DIM // 2):
        feats.append(np.sin((2.0 ** j) * np.pi * t))
        feats.append(np.cos((2.0 ** j) * np.pi * t))
    return np.stack(feats, axis=1)


class ModelHandle:
    """Shared conditioning encoder + one policy head + critic head.

    Tracks per-sample head evaluations (`head_evals`) so NFE accounting is
    exact: one K-step sample of one candidate costs exactly K.
    """

    def __init__(self, head_kind, obs_dim=OBS_DIM, embed=EMBED_DIM, width=WIDTH,
                 seed=0, K=None, M=16, horizon=HORIZON):
        self.head_kind = HeadKind(head_kind)
        self.obs_dim = obs_dim
        self.horizon = horizon
        self.traj_dim = horizon * 2
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x11]))
        self.encoder = MLP([obs_dim, width, width, embed], rng)
        if self.head_kind == HeadKind.REGRESSION:
            self.head = MLP([embed, width, width, self.traj_dim], rng, out_scale=0.1)
        else:
            # flow/noise heads carry a linear input bypass: their targets have
            # a dominant linear-in-tau component (-tau0 for flows, tau_k
            # scaling for noise prediction) that tanh units represent poorly
            self.head = MLP([TFEAT_DIM + self.traj_dim + embed, width, width, self.traj_dim],
                            rng, out_scale=0.1, skip=True)
        self.critic = MLP([self.traj_dim + embed, width, width, 1], rng, out_scale=0.1)
        default_K = 10 if self.head_kind == HeadKind.DDPM else 6
        self.config = FlowConfig(head=self.head_kind, K=K or default_K, M=M)
        self.embed = embed
        self.head_evals = 0
        if self.head_kind == HeadKind.DDPM:
            self.schedule = ddpm_schedule(self.config.K)

    # --- parameter plumbing -------------------------------------------------

    def params(self):
        return self.encoder.params() + self.head.params() + self.critic.params()

    def set_params(self, arrays):
        ne = len(self.encoder.params())
        nh = len(self.head.params())
        self.encoder.set_params(arrays[:ne])
        self.head.set_params(arrays[ne:ne + nh])
        self.critic.set_params(arrays[ne + nh:])

    def get_flat(self):
        from .net import flatten
        return flatten(self.params())

    def set_flat(self, vec):
        from .net import unflatten
        self.set_params(unflatten(vec, self.params()))

    def zero_grads(self):
        return [np.zeros_like(p) for p in self.params()]

    def grad_slices(self):
        ne = len(self.encoder.params())
        nh = len(self.head.params())
        nc = len(self.critic.params())
        return slice(0, ne), slice(ne, ne + nh), slice(ne + nh, ne + nh + nc)

    def named_params(self):
        out = {}
        for prefix, net_ in (("enc", self.encoder), ("head", self.head), ("critic", self.critic)):
            for i, (W, b) in enumerate(zip(net_.Ws, net_.bs)):
                out[f"{prefix}.W{i}"] = W
                out[f"{prefix}.b{i}"] = b
        return out

    def load_named(self, arrays):
        for name, arr in self.named_params().items():
            arr[...] = arrays[name].reshape(arr.shape)
        self.encoder.version += 1
        self.head.version += 1
        self.critic.version += 1

    # --- forward passes -----------------------------------------------------

    def encode(self, obs):
        """(B, obs_dim) -> embedding (B, embed), tape."""
        return self.encoder.forward(obs)

    def head_velocity(self, t, tau, e):
        """Policy head evaluation; counts one NFE per sample in the batch."""
        B = tau.shape[0]
        inp = np.concatenate([time_features(t, B), tau, e], axis=1)
        out, tape = self.head.forward(inp)
        self.head_evals += B
        return out, tape

    def critic_score(self, tau, e):
        s, tape = self.critic.forward(np.concatenate([tau, e], axis=1))
        return s[:, 0], tape

    def save(self, path, meta):
        save_checkpoint(path, {k: v for k, v in self.named_params().items()}, meta)

    @classmethod
    def load(cls, path, obs_dim=OBS_DIM):
        arrays, meta = load_checkpoint(path)
        model = cls(meta.get("head", "rf"), obs_dim=int(meta.get("obs_dim", obs_dim)),
                    seed=int(meta.get("seed", 0)), K=meta.get("K"), M=int(meta.get("M", 16)))
        model.load_named(arrays)
        return model, meta


# --- interpolants and losses ------------------------------------------------


def rf_interpolate(tau0, tau1, t):
    """Linear interpolant tau_t = (1-t) tau0 + t tau1, target u = tau1 - tau0."""
    tau0 = np.asarray(tau0, dtype=float)
    tau1 = np.asarray(tau1, dtype=float)
    if tau0.shape != tau1.shape:
        raise ShapeMismatchError(f"{tau0.shape} vs {tau1.shape}")
    t = np.asarray(t, dtype=float)
    tb = t.reshape(t.shape + (1,) * (tau0.ndim - t.ndim)) if t.ndim else t
    return (1.0 - tb) * tau0 + tb * tau1, tau1 - tau0


def cfm_interpolate(tau0, tau1, t):
    """Trigonometric (variance-preserving) interpolant and its velocity."""
    tau0 = np.asarray(tau0, dtype=float)
    tau1 = np.asarray(tau1, dtype=float)
    if tau0.shape != tau1.shape:
        raise ShapeMismatchError(f"{tau0.shape} vs {tau1.shape}")
    t = np.asarray(t, dtype=float)
    tb = t.reshape(t.shape + (1,) * (tau0.ndim - t.ndim)) if t.ndim else t
    a = np.cos(np.pi * tb / 2.0)
    b = np.sin(np.pi * tb / 2.0)
    tau_t = a * tau0 + b * tau1
    u = (np.pi / 2.0) * (a * tau1 - b * tau0)
    return tau_t, u


def make_flow_draws(rng, batch, traj_dim=TRAJ_DIM):
    """Frozen randomness for one flow-loss evaluation (for exact grad checks)."""
    return {"t": rng.uniform(0.0, 1.0, batch),
            "tau0": rng.standard_normal((batch, traj_dim))}


def make_ddpm_draws(rng, batch, K, traj_dim=TRAJ_DIM):
    return {"k": rng.integers(1, K + 1, batch),
            "eps": rng.standard_normal((batch, traj_dim))}


def _flow_loss(model: ModelHandle, obs, tau1, draws, interpolate):
    """Shared CFM/RF loss body: mean squared velocity error + exact grads."""
    obs = np.asarray(obs, dtype=float)
    tau1 = np.asarray(tau1, dtype=float).reshape(len(obs), -1)
    B = len(obs)
    t = draws["t"]
    tau0 = draws["tau0"]
    tau_t, u = interpolate(tau0, tau1, t)
    e, e_tape = model.encode(obs)
    v, h_tape = model.head_velocity(t, tau_t, e)
    diff = v - u
    loss = float(np.sum(diff * diff)) / B
    dv = 2.0 * diff / B
    g_head, dx = model.head.backward(h_tape, dv)
    de = dx[:, TFEAT_DIM + model.traj_dim:]
    g_enc, _ = model.encoder.backward(e_tape, de)
    grads = model.zero_grads()
    s_enc, s_head, _ = model.grad_slices()
    grads[s_enc] = g_enc
    grads[s_head] = g_head
    return loss, grads


def rf_loss(model, obs, tau1, draws=None, rng=None):
    """Rectified-flow objective: E || v(t, tau_t, e) - (tau1 - tau0) ||^2."""
    if draws is None:
        draws = make_flow_draws(rng, len(obs), model.traj_dim)
    loss, grads = _flow_loss(model, obs, tau1, draws, rf_interpolate)
    return loss, grads, draws


def cfm_loss(model, obs, tau1, draws=None, rng=None):
    """Flow-matching objective along the trigonometric interpolant."""
    if draws is None:
        draws = make_flow_draws(rng, len(obs), model.traj_dim)
    loss, grads = _flow_loss(model, obs, tau1, draws, cfm_interpolate)
    return loss, grads, draws


def ddpm_loss(model, obs, tau1, draws=None, rng=None):
    """Noise-prediction objective E || eps - eps_theta(tau_k, k, e) ||^2."""
    _, _, abar, _ = model.schedule
    if draws is None:
        draws = make_ddpm_draws(rng, len(obs), model.config.K, model.traj_dim)
    obs = np.asarray(obs, dtype=float)
    tau1 = np.asarray(tau1, dtype=float).reshape(len(obs), -1)
    B = len(obs)
    k = draws["k"]
    eps = draws["eps"]
    ab = abar[k - 1][:, None]
    tau_k = np.sqrt(ab) * tau1 + np.sqrt(1.0 - ab) * eps
    e, e_tape = model.encode(obs)
    pred, h_tape = model.head_velocity(k / model.config.K, tau_k, e)
    diff = pred - eps
    loss = float(np.sum(diff * diff)) / B
    dv = 2.0 * diff / B
    g_head, dx = model.head.backward(h_tape, dv)
    g_enc, _ = model.encoder.backward(e_tape, dx[:, TFEAT_DIM + model.traj_dim:])
    grads = model.zero_grads()
    s_enc, s_head, _ = model.grad_slices()
    grads[s_enc] = g_enc
    grads[s_head] = g_head
    return loss, grads, draws


def regression_loss(model, obs, tau1):
    """Deterministic head: MSE between f_reg(e) and the expert trajectory."""
    obs = np.asarray(obs, dtype=float)
    tau1 = np.asarray(tau1, dtype=float).reshape(len(obs), -1)
    B = len(obs)
    e, e_tape = model.encode(obs)
    pred, h_tape = model.head.forward(e)
    model.head_evals += B
    diff = pred - tau1
    loss = float(np.sum(diff * diff)) / B
    dv = 2.0 * diff / B
    g_head, dx = model.head.backward(h_tape, dv)
    g_enc, _ = model.encoder.backward(e_tape, dx)
    grads = model.zero_grads()
    s_enc, s_head, _ = model.grad_slices()
    grads[s_enc] = g_enc
    grads[s_head] = g_head
    return loss, grads


def critic_loss(model, obs, trajs, targets):
    """MSE of critic scores against the selection targets."""
    obs = np.asarray(obs, dtype=float)
    trajs = np.asarray(trajs, dtype=float).reshape(len(obs), -1)
    targets = np.asarray(targets, dtype=float)
    B = len(obs)
    e, e_tape = model.encode(obs)
    s, c_tape = model.critic_score(trajs, e)
    diff = s - targets
    loss = float(np.sum(diff * diff)) / B
    ds = (2.0 * diff / B)[:, None]
    g_critic, dx = model.critic.backward(c_tape, ds)
    g_enc, _ = model.encoder.backward(e_tape, dx[:, model.traj_dim:])
    grads = model.zero_grads()
    s_enc, _, s_critic = model.grad_slices()
    grads[s_enc] = g_enc
    grads[s_critic] = g_critic
    return loss, grads


# --- sampling ----------------------------------------------------------------


def euler_integrate(field, tau0, K):
    """Plain Euler: tau_{k+1} = tau_k + (1/K) field(k/K, tau_k)."""
    tau = np.asarray(tau0, dtype=float).copy()
    for k in range(K):
        tau = tau + field(k / K, tau) / K
    return tau


def sample_euler(model: ModelHandle, e, K, tau0):
    """Transport tau0 through the learned velocity field with K Euler steps.

    e: (B, embed) embedding shared by all rows of tau0 or matched per-row.
    """
    tau = np.asarray(tau0, dtype=float).copy()
    B = tau.shape[0]
    eb = np.broadcast_to(e, (B, e.shape[-1]))
    for k in range(K):
        v, _ = model.head_velocity(k / K, tau, eb)
        tau = tau + v / K
        if not np.all(np.isfinite(tau)):
            raise NonFiniteStateError(f"non-finite trajectory at Euler step {k + 1}")
    return tau


def sample_ddpm(model: ModelHandle, e, rng, n, return_chain=False):
    """Reverse the noising chain from tau_K ~ N(0,I); no noise at the final step.

    return_chain also yields the chain start and the per-step noises z_k
    (k = K..2), which make the sample recomputable under new parameters.
    """
    _, alpha, abar, sigma = model.schedule
    K = model.config.K
    start = rng.standard_normal((n, model.traj_dim))
    zs = np.zeros((max(K - 1, 0), n, model.traj_dim))
    tau = start.copy()
    eb = np.broadcast_to(e, (n, e.shape[-1]))
    for k in range(K, 0, -1):
        eps_hat, _ = model.head_velocity(k / K, tau, eb)
        tau = (tau - (1.0 - alpha[k - 1]) / np.sqrt(1.0 - abar[k - 1]) * eps_hat) \
            / np.sqrt(alpha[k - 1])
        if k > 1:
            z = rng.standard_normal(tau.shape)
            zs[K - k] = z
            tau = tau + sigma[k - 1] * z
        if not np.all(np.isfinite(tau)):
            raise NonFiniteStateError(f"non-finite trajectory at reverse step {k}")
    if return_chain:
        return tau, start, zs
    return tau


def ddpm_reverse_step(tau_k, eps_hat, k, schedule, z=None):
    """One reverse diffusion step (vectorized); z=None means no noise term."""
    _, alpha, abar, sigma = schedule
    out = (tau_k - (1.0 - alpha[k - 1]) / np.sqrt(1.0 - abar[k - 1]) * eps_hat) \
        / np.sqrt(alpha[k - 1])
    if z is not None:
        out = out + sigma[k - 1] * z
    return out


def project_feasible(traj):
    """Clamp consecutive waypoint spacing (incl. from the origin) to the
    per-0.5 s reach. Operates in normalized units on (..., H, 2)."""
    traj = np.asarray(traj, dtype=float).copy()
    limit = MAX_STEP_M / NORM_SCALE
    prev = np.zeros(traj.shape[:-2] + (2,))
    for h in range(traj.shape[-2]):
        d = traj[..., h, :] - prev
        norm = np.maximum(np.sqrt(np.sum(d * d, axis=-1, keepdims=True)), 1e-12)
        scale = np.minimum(1.0, limit / norm)
        traj[..., h, :] = prev + d * scale
        prev = traj[..., h, :]
    return traj


def generate_candidates(model: ModelHandle, obs_vec, M, K, rng):
    """M trajectories + critic scores, sorted by score (desc, ties to lower index).

    Returns (order, raw (M,H,2), projected (M,H,2), scores (M,), tau0 (M,D),
    chains). raw/projected are in normalized robot-frame units; tau0 is the
    latent that produced each candidate; chains holds the ddpm per-step
    noises (None for other heads).
    """
    obs = np.asarray(obs_vec, dtype=float).reshape(1, -1)
    e, _ = model.encode(obs)
    chains = None
    if model.head_kind == HeadKind.REGRESSION:
        out, _ = model.head.forward(e)
        model.head_evals += 1
        raw = np.repeat(out, M, axis=0)
        tau0 = np.zeros((M, model.traj_dim))
    elif model.head_kind == HeadKind.DDPM:
        raw, tau0, chains = sample_ddpm(model, e, rng, M, return_chain=True)
    else:
        tau0 = rng.standard_normal((M, model.traj_dim))
        raw = sample_euler(model, e, K, tau0)
    proj = project_feasible(raw.reshape(M, model.horizon, 2))
    scores, _ = model.critic_score(proj.reshape(M, -1), np.broadcast_to(e, (M, e.shape[-1])))
    order = sorted(range(M), key=lambda i: (-scores[i], i))
    return order, raw.reshape(M, model.horizon, 2), proj, scores, tau0, chains


def critic_target(traj_world, goal_xy, robot_xy, circles, rects, ped_circles):
    """Selection target: -(endpoint->goal distance) - 5 if the rolled-out
    polyline (robot disk) hits any obstacle or pedestrian disk."""
    pts = [np.asarray(robot_xy, dtype=float)] + [np.asarray(p, dtype=float) for p in traj_world]
    collide = False
    all_circles = list(circles) + [(p[0], p[1], r) for p, r in ped_circles]
    for i in range(len(pts) - 1):
        if not geo.segment_clear(pts[i], pts[i + 1], all_circles, rects, ROBOT_RADIUS):
            collide = True
            break
    score = -COLLISION_PENALTY if collide else 0.0
    if goal_xy is not None:
        score -= float(np.hypot(pts[-1][0] - goal_xy[0], pts[-1][1] - goal_xy[1]))
    return score


# --- frames and tracking ------------------------------------------------------


def traj_to_world(traj_norm, pose):
    """Normalized robot-frame waypoints -> world-frame points (H, 2)."""
    x, y, th = pose
    c, s = math.cos(th), math.sin(th)
    pts = np.asarray(traj_norm, dtype=float).reshape(-1, 2) * NORM_SCALE
    wx = x + c * pts[:, 0] - s * pts[:, 1]
    wy = y + s * pts[:, 0] + c * pts[:, 1]
    return np.stack([wx, wy], axis=1)


def trajs_to_world_batch(trajs_norm, poses):
    """(B, H, 2) normalized robot-frame trajectories -> world frame, per-row pose."""
    trajs = np.asarray(trajs_norm, dtype=float) * NORM_SCALE
    poses = np.asarray(poses, dtype=float)
    c = np.cos(poses[:, 2])[:, None]
    s = np.sin(poses[:, 2])[:, None]
    wx = poses[:, 0:1] + c * trajs[:, :, 0] - s * trajs[:, :, 1]
    wy = poses[:, 1:2] + s * trajs[:, :, 0] + c * trajs[:, :, 1]
    return np.stack([wx, wy], axis=2)


def world_to_traj(points_world, pose):
    """World-frame points -> normalized robot-frame trajectory (H, 2)."""
    x, y, th = pose
    c, s = math.cos(th), math.sin(th)
    pts = np.asarray(points_world, dtype=float).reshape(-1, 2)
    dx = pts[:, 0] - x
    dy = pts[:, 1] - y
    rx = c * dx + s * dy
    ry = -s * dx + c * dy
    return np.stack([rx, ry], axis=1) / NORM_SCALE


def trajectory_to_command(traj_world, pose):
    """Pure pursuit: chase the first waypoint beyond the lookahead radius,
    scanning forward from the nearest waypoint so passed ones are skipped."""
    x, y, th = pose
    pts = np.asarray(traj_world, dtype=float).reshape(-1, 2)
    dists = np.hypot(pts[:, 0] - x, pts[:, 1] - y)
    target = pts[-1]
    for k in range(int(np.argmin(dists)), len(pts)):
        if dists[k] > LOOKAHEAD:
            target = pts[k]
            break
    dist = math.hypot(target[0] - x, target[1] - y)
    if dist < 0.05:
        return 0.0, 0.0
    err = geo.wrap_angle(math.atan2(target[1] - y, target[0] - x) - th)
    w = float(np.clip(HEADING_GAIN * err, -ROBOT_WMAX, ROBOT_WMAX))
    v = float(ROBOT_VMAX * np.clip(math.cos(err), 0.0, 1.0))
    if abs(err) > math.pi / 3.0:
        # creep through hard turns: a pure pivot at the 1 rad/s cap can take
        # > 2 s, which the stuck detector would (rightly) flag
        v = max(v, 0.12 * ROBOT_VMAX)
    return v, w


def observation_vector(depth_frames, goal_frames):
    """Stack the last F (depth, goal) frames into the encoder input."""
    parts = []
    for d, g in zip(depth_frames, goal_frames):
        gn = np.asarray(g, dtype=float)
        n = float(np.hypot(*gn))
        if n > GOAL_CLIP:
            gn = gn * (GOAL_CLIP / n)
        parts.append(np.concatenate([np.asarray(d, dtype=float) / MAX_RANGE, gn / GOAL_CLIP]))
    return np.concatenate(parts)
