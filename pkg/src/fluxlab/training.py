"""Two-stage training: imitation on simulator experts, then GRPO fine-tuning.

Stage 1 trains the selected head (and the critic) on (observation, future
trajectory) pairs relabeled from A*-tracked rollouts in static scenes.

Stage 2 runs on-policy rollouts in dynamic tasks with Gaussian exploration
around the selected candidate (std 0.1 in normalized units), computes
episode-level normalized advantages from whole-episode discounted returns,
and takes one clipped policy-gradient step per update. The importance ratio
uses closed-form Gaussian action densities whose mean is the policy's own
(recomputable) sample.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .episodes import EpisodeSpec, Task, gen_episodes
from .net import AdamW, add_grads, flatten
from .policy import (HeadKind, ModelHandle, TFEAT_DIM, cfm_loss, critic_loss,
                     ddpm_loss, project_feasible, regression_loss, rf_loss,
                     sample_euler, trajs_to_world_batch, world_to_traj,
                     make_flow_draws, make_ddpm_draws)
from .rewards import discounted_returns, normalize_advantages
from .runner import (ACTION_SIGMA, LOGP_CONST, REPLAN_EVERY, ExpertPolicy,
                     ModelPolicy, gaussian_logp, run_episode)
from .scenes import gen_scene
from .seeding import stream_rng
from .world import Outcome

log = logging.getLogger(__name__)


class NonFiniteRatioError(Exception):
    """All importance ratios in an update were non-finite."""


# --- stage 1: expert data ----------------------------------------------------


def gen_expert_dataset(scenes, n_samples, seed, max_episodes=2000):
    """(observation, future-trajectory) pairs from A*-tracked PointNav rollouts.

    Labels are hindsight: the poses actually visited 0.5..4.0 s after each
    decision, expressed in that decision's robot frame (normalized). Episodes
    that fail to reach the goal are dropped.
    """
    obs_rows, tau_rows, pose_rows, goal_rows, scene_rows = [], [], [], [], []
    ep_idx = 0
    while len(obs_rows) < n_samples and ep_idx < max_episodes:
        specs = gen_episodes(scenes, Task.POINTNAV, 1, seed=int(seed) + 7919 * ep_idx)
        spec = specs[0]
        scene = next(s for s in scenes if s.name == spec.scene_name)
        policy = ExpertPolicy(scene, spec.goal)
        res = run_episode(scene, spec, policy, collect_frames=True)
        ep_idx += 1
        if res.outcome != Outcome.SUCCESS:
            continue
        poses = res.poses
        horizon_steps = REPLAN_EVERY * np.arange(1, 9)
        for obs_vec, pose, step_idx in res.frames:
            idx = np.minimum(step_idx + horizon_steps, len(poses) - 1)
            pts = np.array([poses[i][:2] for i in idx])
            tau = world_to_traj(pts, pose)
            obs_rows.append(obs_vec)
            tau_rows.append(tau)
            pose_rows.append(pose)
            goal_rows.append(spec.goal)
            scene_rows.append(spec.scene_name)
            if len(obs_rows) >= n_samples:
                break
    if len(obs_rows) < n_samples:
        log.warning("expert dataset short: %d/%d samples", len(obs_rows), n_samples)
    return {
        "obs": np.asarray(obs_rows),
        "tau": np.asarray(tau_rows),
        "pose": np.asarray(pose_rows),
        "goal": np.asarray(goal_rows),
        "scene": np.asarray(scene_rows),
    }


def save_dataset(path, dataset):
    np.savez_compressed(path, **dataset)


def load_dataset(path):
    with np.load(path, allow_pickle=False) as z:
        return {k: z[k] for k in z.files}


# --- stage 1: imitation epoch -------------------------------------------------


def _batch_collides(trajs_world, starts, circles, rects, radius=None, samples_per_seg=6):
    """Vectorized disk-sweep collision test for (B, H, 2) world trajectories."""
    if radius is None:
        from .scenes import ROBOT_RADIUS
        radius = ROBOT_RADIUS
    B, H, _ = trajs_world.shape
    pts = np.concatenate([starts[:, None, :], trajs_world], axis=1)  # (B, H+1, 2)
    ts = np.linspace(0.0, 1.0, samples_per_seg)
    seg = pts[:, 1:, None, :] * ts[None, None, :, None] \
        + pts[:, :-1, None, :] * (1.0 - ts[None, None, :, None])
    seg = seg.reshape(B, -1, 2)
    hit = np.zeros(B, dtype=bool)
    for cx, cy, r in circles:
        d2 = (seg[:, :, 0] - cx) ** 2 + (seg[:, :, 1] - cy) ** 2
        hit |= np.any(d2 < (r + radius) ** 2, axis=1)
    for rx0, ry0, rx1, ry1 in rects:
        dx = np.maximum(np.maximum(rx0 - seg[:, :, 0], 0.0), seg[:, :, 0] - rx1)
        dy = np.maximum(np.maximum(ry0 - seg[:, :, 1], 0.0), seg[:, :, 1] - ry1)
        hit |= np.any(dx * dx + dy * dy < radius * radius, axis=1)
    return hit


HEAD_LOSSES = {
    HeadKind.RF: rf_loss,
    HeadKind.CFM: cfm_loss,
    HeadKind.DDPM: ddpm_loss,
}


def make_epoch_draws(model, n, rng, critic_samples=2):
    """Per-sample frozen randomness for one epoch: head-loss draws plus the
    latents for critic-candidate sampling. Keyed by dataset index, so the
    epoch-mean loss is invariant to batch order."""
    if model.head_kind == HeadKind.DDPM:
        head = make_ddpm_draws(rng, n, model.config.K, model.traj_dim)
    elif model.head_kind == HeadKind.REGRESSION:
        head = {}
    else:
        head = make_flow_draws(rng, n, model.traj_dim)
    crit = rng.standard_normal((n, critic_samples, model.traj_dim))
    return {"head": head, "critic_tau0": crit}


def il_epoch(model: ModelHandle, dataset, scenes_by_name, rng, optimizer=None,
             lr=5e-5, batch_size=64, critic_samples=2, draws=None):
    """One pass over the expert dataset: head loss + critic loss per batch.

    Returns sample-weighted mean losses. With lr=0 (or optimizer None) the
    pass is read-only.
    """
    n = len(dataset["obs"])
    if draws is None:
        draws = make_epoch_draws(model, n, rng, critic_samples)
    order = rng.permutation(n)
    head_sum = 0.0
    critic_sum = 0.0
    for lo in range(0, n, batch_size):
        idx = order[lo:lo + batch_size]
        obs = dataset["obs"][idx]
        tau1 = dataset["tau"][idx].reshape(len(idx), -1)
        if model.head_kind == HeadKind.REGRESSION:
            h_loss, h_grads = regression_loss(model, obs, tau1)
        else:
            sub = {k: v[idx] for k, v in draws["head"].items()}
            h_loss, h_grads, _ = HEAD_LOSSES[model.head_kind](model, obs, tau1, draws=sub)
        c_loss, c_grads = _critic_batch(model, dataset, idx, scenes_by_name,
                                        draws["critic_tau0"][idx])
        head_sum += h_loss * len(idx)
        critic_sum += c_loss * len(idx)
        if optimizer is not None and lr > 0.0:
            grads = add_grads(h_grads, c_grads)
            optimizer.step(model.params(), grads, lr)
    return {"head_loss": head_sum / n, "critic_loss": critic_sum / n}


def _critic_batch(model, dataset, idx, scenes_by_name, tau0_sets):
    """Critic regression on the expert trajectory plus fresh head samples."""
    obs = dataset["obs"][idx]
    B = len(idx)
    S = tau0_sets.shape[1]
    e, _ = model.encode(obs)
    cand_rows = [dataset["tau"][idx].reshape(B, -1)]
    for s in range(S):
        if model.head_kind == HeadKind.REGRESSION:
            out, _ = model.head.forward(e)
            model.head_evals += B
            cand_rows.append(out)
        elif model.head_kind == HeadKind.DDPM:
            # deterministic chain from the frozen latent (no per-step noise)
            _, alpha, abar, _ = model.schedule
            K = model.config.K
            tau = tau0_sets[:, s, :].copy()
            for k in range(K, 0, -1):
                eps_hat, _ = model.head_velocity(k / K, tau, e)
                tau = (tau - (1 - alpha[k - 1]) / np.sqrt(1 - abar[k - 1]) * eps_hat) \
                    / np.sqrt(alpha[k - 1])
            cand_rows.append(tau)
        else:
            cand_rows.append(sample_euler(model, e, model.config.K, tau0_sets[:, s, :]))
    poses = dataset["pose"][idx]
    goals = dataset["goal"][idx]
    names = dataset["scene"][idx]
    scene_groups = {}
    for b in range(B):
        scene_groups.setdefault(str(names[b]), []).append(b)
    all_obs = []
    all_trajs = []
    targets = []
    for cand in cand_rows:
        proj = project_feasible(cand.reshape(B, model.horizon, 2))
        world = trajs_to_world_batch(proj, poses)
        hit = np.zeros(B, dtype=bool)
        for name, rows in scene_groups.items():
            scene = scenes_by_name[name]
            hit[rows] = _batch_collides(world[rows], poses[rows][:, :2],
                                        scene.circles, scene.rects)
        dist = np.hypot(world[:, -1, 0] - goals[:, 0], world[:, -1, 1] - goals[:, 1])
        targets.append(-dist - 5.0 * hit)
        all_obs.append(obs)
        all_trajs.append(proj.reshape(B, -1))
    return critic_loss(model, np.concatenate(all_obs), np.concatenate(all_trajs),
                       np.concatenate(targets))


def train_il(model: ModelHandle, dataset, scenes, epochs=30, lr=5e-5,
             batch_size=64, seed=0, log_rows=None, lr_schedule=None):
    """Stage-1 driver: `epochs` imitation passes with AdamW.

    lr_schedule: optional list of (n_epochs, lr) phases overriding (epochs,
    lr); the tail phases settle the head before closed-loop evaluation.
    """
    scenes_by_name = {s.name: s for s in scenes}
    optimizer = AdamW(model.params())
    phases = lr_schedule or [(epochs, lr)]
    history = []
    ep = 0
    for n_ep, phase_lr in phases:
        for _ in range(n_ep):
            rng = stream_rng(seed, "train", ep)
            stats = il_epoch(model, dataset, scenes_by_name, rng,
                             optimizer=optimizer, lr=phase_lr,
                             batch_size=batch_size)
            history.append(stats)
            if log_rows is not None:
                log_rows.append({"epoch": ep, **stats})
            log.info("il epoch %d: head %.5f critic %.5f", ep,
                     stats["head_loss"], stats["critic_loss"])
            ep += 1
    return history


# --- stage 2: GRPO ------------------------------------------------------------


@dataclass
class RolloutBatch:
    """Flattened per-decision records spanning >= 1 complete episodes."""
    obs: np.ndarray            # (B, obs_dim)
    tau0: np.ndarray           # (B, traj_dim)
    chains: np.ndarray | None  # (B, K-1, traj_dim) ddpm noises, else None
    actions: np.ndarray        # (B, traj_dim)
    logp_behavior: np.ndarray  # (B,)
    returns: np.ndarray        # (B,)
    advantages: np.ndarray     # (B,)
    episode_bounds: list = field(default_factory=list)  # (start, end) per episode


def build_rollout_batch(results, gamma=0.99) -> RolloutBatch:
    obs, tau0, chains, acts, logp, G_all, adv_all, bounds = [], [], [], [], [], [], [], []
    pos = 0
    for res in results:
        if not res.decisions:
            continue
        rewards = [d.reward.total for d in res.decisions]
        G = discounted_returns(rewards, gamma)
        A = normalize_advantages(G)
        for d, g, a in zip(res.decisions, G, A):
            obs.append(d.obs_vec)
            tau0.append(d.tau0)
            chains.append(d.noise_chain)
            acts.append(d.action)
            logp.append(d.logp_behavior)
            G_all.append(g)
            adv_all.append(a)
        bounds.append((pos, pos + len(res.decisions)))
        pos += len(res.decisions)
    chains_arr = None
    if chains and chains[0] is not None:
        chains_arr = np.asarray(chains)
    return RolloutBatch(
        obs=np.asarray(obs), tau0=np.asarray(tau0), chains=chains_arr,
        actions=np.asarray(acts), logp_behavior=np.asarray(logp),
        returns=np.asarray(G_all), advantages=np.asarray(adv_all),
        episode_bounds=bounds)


def recompute_means(model: ModelHandle, obs, tau0, chains=None):
    """Differentiable recompute of the policy mean for recorded latents.

    Returns (mu (B, traj_dim), cache) where cache supports means_backward.
    """
    e, e_tape = model.encode(obs)
    B = len(obs)
    kind = model.head_kind
    if kind == HeadKind.REGRESSION:
        out, tape = model.head.forward(e)
        model.head_evals += B
        return out, ("reg", e_tape, [tape])
    if kind == HeadKind.DDPM:
        _, alpha, abar, _sig = model.schedule
        K = model.config.K
        tau = np.asarray(tau0, dtype=float).copy()
        tapes = []
        for k in range(K, 0, -1):
            eps_hat, tape = model.head_velocity(k / K, tau, e)
            a_k = 1.0 / np.sqrt(alpha[k - 1])
            b_k = -(1.0 - alpha[k - 1]) / (np.sqrt(1.0 - abar[k - 1]) * np.sqrt(alpha[k - 1]))
            tapes.append((tape, a_k, b_k))
            tau = a_k * tau + b_k * eps_hat
            if k > 1:
                sigma_k = model.schedule[3][k - 1]
                tau = tau + sigma_k * chains[:, K - k, :]
        return tau, ("ddpm", e_tape, tapes)
    K = model.config.K
    tau = np.asarray(tau0, dtype=float).copy()
    tapes = []
    for k in range(K):
        v, tape = model.head_velocity(k / K, tau, e)
        tapes.append(tape)
        tau = tau + v / K
    return tau, ("flow", e_tape, tapes)


def means_backward(model: ModelHandle, cache, dmu):
    """Backprop dL/dmu through the recompute chain; returns full-model grads."""
    kind, e_tape, tapes = cache
    D = model.traj_dim
    grads = model.zero_grads()
    s_enc, s_head, _ = model.grad_slices()
    if kind == "reg":
        g_head, de = model.head.backward(tapes[0], dmu)
        grads[s_head] = g_head
        g_enc, _ = model.encoder.backward(e_tape, de)
        grads[s_enc] = g_enc
        return grads
    head_acc = None
    de_acc = None
    dtau = np.asarray(dmu, dtype=float)
    if kind == "ddpm":
        for tape, a_k, b_k in reversed(tapes):
            dv = b_k * dtau
            g_head, dx = model.head.backward(tape, dv)
            head_acc = g_head if head_acc is None else add_grads(head_acc, g_head)
            de = dx[:, TFEAT_DIM + D:]
            de_acc = de if de_acc is None else de_acc + de
            dtau = a_k * dtau + dx[:, TFEAT_DIM:TFEAT_DIM + D]
    else:
        K = len(tapes)
        for tape in reversed(tapes):
            dv = dtau / K
            g_head, dx = model.head.backward(tape, dv)
            head_acc = g_head if head_acc is None else add_grads(head_acc, g_head)
            de = dx[:, TFEAT_DIM + D:]
            de_acc = de if de_acc is None else de_acc + de
            dtau = dtau + dx[:, TFEAT_DIM:TFEAT_DIM + D]
    grads[s_head] = head_acc
    g_enc, _ = model.encoder.backward(e_tape, de_acc)
    grads[s_enc] = g_enc
    return grads


def grpo_objective(model: ModelHandle, batch: RolloutBatch, eps=0.2,
                   sigma=ACTION_SIGMA):
    """Clipped surrogate loss, its gradients, and update statistics.

    Non-finite ratios are masked out and counted rather than failing the
    update.
    """
    mu, cache = recompute_means(model, batch.obs, batch.tau0, batch.chains)
    diff = batch.actions - mu
    logp_now = -0.5 * np.sum(diff * diff, axis=1) / (sigma * sigma) + LOGP_CONST
    with np.errstate(over="ignore"):
        rho = np.exp(logp_now - batch.logp_behavior)
    valid = np.isfinite(rho)
    n_masked = int(np.count_nonzero(~valid))
    if not np.any(valid):
        raise NonFiniteRatioError("every importance ratio was non-finite")
    adv = batch.advantages
    rho_c = np.clip(rho, 1.0 - eps, 1.0 + eps)
    unclipped = rho * adv
    clipped = rho_c * adv
    surrogate = np.where(unclipped <= clipped, unclipped, clipped)
    n_valid = int(np.count_nonzero(valid))
    loss = -float(np.sum(np.where(valid, surrogate, 0.0))) / n_valid
    # gradient flows only where the unclipped branch is active;
    # dL/dmu = (-adv * rho / N) * dlogp/dmu with dlogp/dmu = (a - mu) / sigma^2
    active = valid & (unclipped <= clipped)
    coef = np.where(active, -adv * rho / n_valid, 0.0)
    dmu = coef[:, None] * (diff / (sigma * sigma))
    grads = means_backward(model, cache, dmu)
    stats = {"loss": loss, "mean_ratio": float(np.mean(rho[valid])),
             "clip_fraction": float(np.mean(~active[valid])),
             "masked": n_masked,
             "mean_abs_adv": float(np.mean(np.abs(adv)))}
    return loss, grads, stats


def grpo_update(model: ModelHandle, batch: RolloutBatch, optimizer: AdamW,
                eps=0.2, lr=5e-6, sigma=ACTION_SIGMA):
    """One optimizer step on the clipped objective. Critic stays frozen."""
    loss, grads, stats = grpo_objective(model, batch, eps=eps, sigma=sigma)
    _, _, s_critic = model.grad_slices()
    for g in grads[s_critic]:
        g[...] = 0.0
    optimizer.step(model.params(), grads, lr)
    return stats


def fit_head(model: ModelHandle, obs, tau1, epochs, lr, batch_size=32, seed=0,
             lr_schedule=None):
    """Train just the policy head (+ encoder) on (obs, tau) pairs.

    Used by the toy diagnostics where there is no scene for critic targets.
    Returns per-epoch mean head losses.
    """
    obs = np.asarray(obs, dtype=float)
    tau1 = np.asarray(tau1, dtype=float).reshape(len(obs), -1)
    optimizer = AdamW(model.params())
    n = len(obs)
    losses = []
    phases = lr_schedule or [(epochs, lr)]
    ep = 0
    for n_ep, phase_lr in phases:
        for _ in range(n_ep):
            rng = stream_rng(seed, "train", ep, 0xA)
            order = rng.permutation(n)
            if model.head_kind == HeadKind.DDPM:
                draws = make_ddpm_draws(rng, n, model.config.K, model.traj_dim)
            elif model.head_kind != HeadKind.REGRESSION:
                draws = make_flow_draws(rng, n, model.traj_dim)
            total = 0.0
            for lo in range(0, n, batch_size):
                idx = order[lo:lo + batch_size]
                if model.head_kind == HeadKind.REGRESSION:
                    loss, grads = regression_loss(model, obs[idx], tau1[idx])
                else:
                    sub = {k: v[idx] for k, v in draws.items()}
                    loss, grads, _ = HEAD_LOSSES[model.head_kind](
                        model, obs[idx], tau1[idx], draws=sub)
                total += loss * len(idx)
                optimizer.step(model.params(), grads, phase_lr)
            losses.append(total / n)
            ep += 1
    return losses


STAGE2_TASKS = (Task.SOCIALNAV, Task.DYN_POINTNAV, Task.DYN_EXPLORATION)


def train_rl(model: ModelHandle, scenes, *, updates=100, episodes_per_update=16,
             lr=5e-6, eps=0.2, gamma=0.99, seed=0, tasks=STAGE2_TASKS,
             task_weights=None, M=None, K=None, sigma=ACTION_SIGMA,
             log_rows=None, episode_cb=None):
    """Stage-2 driver: on-policy rollouts -> episode advantages -> one
    clipped-gradient step per update."""
    optimizer = AdamW(model.params())
    policy = ModelPolicy(model, M=M, K=K, explore_sigma=sigma)
    scenes_by_name = {s.name: s for s in scenes}
    weights = None
    if task_weights is not None:
        weights = np.asarray(task_weights, dtype=float)
        weights = weights / weights.sum()
    history = []
    for upd in range(updates):
        rng = stream_rng(seed, "train", upd, 0xF)
        results = []
        for i in range(episodes_per_update):
            if weights is None:
                task = tasks[int(rng.integers(len(tasks)))]
            else:
                task = tasks[int(rng.choice(len(tasks), p=weights))]
            ep_seed = int(rng.integers(2 ** 62))
            spec = gen_episodes(scenes, task, 1, seed=ep_seed)[0]
            scene = scenes_by_name[spec.scene_name]
            res = run_episode(scene, spec, policy, collect_decisions=True)
            results.append(res)
            if episode_cb is not None:
                episode_cb(res)
        batch = build_rollout_batch(results, gamma)
        stats = grpo_update(model, batch, optimizer, eps=eps, lr=lr, sigma=sigma)
        stats["update"] = upd
        stats["mean_return"] = float(np.mean([r.reward_total for r in results]))
        stats["success_rate"] = float(np.mean([r.success for r in results]))
        history.append(stats)
        if log_rows is not None:
            log_rows.append(stats)
        log.info("grpo update %d: loss %.4f return %.2f sr %.2f", upd,
                 stats["loss"], stats["mean_return"], stats["success_rate"])
    return history
