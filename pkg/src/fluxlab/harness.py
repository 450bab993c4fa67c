"""Benchmark orchestration: batch evaluation, artifact emission, sweeps.

Episodes are independent given their specs, so evaluation may fan out over a
process pool; results are reduced in episode order, which keeps every output
byte-identical for any worker count.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time

import numpy as np

from . import __version__
from .episodes import EpisodeSpec
from .metrics import EpisodeMetrics, MetricsReport
from .policy import ModelHandle, generate_candidates
from .runner import ModelPolicy, run_episode
from .scenes import Scene

_POOL_STATE = {}


def _worker_init(model_spec, arrays, scenes_payload, M, K):
    from .scenes import Scene as _S
    model = ModelHandle(model_spec["head"], obs_dim=model_spec["obs_dim"],
                        seed=0, K=model_spec["K"], M=model_spec["M"])
    model.load_named(arrays)  # float64 pass-through: bit-identical to serial
    _POOL_STATE["model"] = model
    _POOL_STATE["scenes"] = {d["name"]: _S.from_dict(d) for d in scenes_payload}
    _POOL_STATE["M"] = M
    _POOL_STATE["K"] = K


def _worker_eval(args):
    idx, spec_dict, log_path = args
    spec = EpisodeSpec.from_dict(spec_dict)
    scene = _POOL_STATE["scenes"][spec.scene_name]
    policy = ModelPolicy(_POOL_STATE["model"], M=_POOL_STATE["M"], K=_POOL_STATE["K"])
    return idx, _run_one(scene, spec, policy, idx, log_path)


def _run_one(scene, spec, policy, idx, log_path, meta=None):
    if log_path:
        with open(log_path, "w") as fh:
            res = run_episode(scene, spec, policy, log_fh=fh, meta=meta)
    else:
        res = run_episode(scene, spec, policy)
    return EpisodeMetrics(
        episode=idx, task=spec.task.value, scene=spec.scene_name,
        outcome=res.outcome.name, success=res.success, time=res.time,
        path_len=res.path_len, shortest=spec.shortest_path_len, spl=res.spl,
        sc=res.sc, coll=res.coll, min_dist=res.min_dist, ea=res.ea,
        reward_total=res.reward_total)


def evaluate(model: ModelHandle, scenes, specs, M=None, K=None, workers=1,
             log_dir=None, meta=None) -> MetricsReport:
    """Run every episode and collect a MetricsReport (episode order preserved)."""
    scenes_by_name = {s.name: s for s in scenes}
    M = M if M is not None else model.config.M
    K = K if K is not None else model.config.K
    report = MetricsReport()
    log_path = None
    if workers > 1 and len(specs) > 1:
        from multiprocessing import Pool
        spec_info = {"head": model.head_kind.value, "M": M, "K": K,
                     "obs_dim": model.obs_dim}
        payload = [s.to_dict() for s in scenes]
        jobs = []
        for i, spec in enumerate(specs):
            lp = os.path.join(log_dir, f"episode_{i:05d}.jsonl") if log_dir else None
            jobs.append((i, spec.to_dict(), lp))
        with Pool(workers, initializer=_worker_init,
                  initargs=(spec_info, model.named_params(), payload, M, K)) as pool:
            rows = pool.map(_worker_eval, jobs)
        for _, row in sorted(rows, key=lambda r: r[0]):
            report.add(row)
        return report
    policy = ModelPolicy(model, M=M, K=K)
    for i, spec in enumerate(specs):
        lp = os.path.join(log_dir, f"episode_{i:05d}.jsonl") if log_dir else None
        report.add(_run_one(scenes_by_name[spec.scene_name], spec, policy, i, lp,
                            meta=meta))
    return report


_CSV_FIELDS = ["episode", "task", "scene", "outcome", "success", "time", "path_len",
               "shortest", "spl", "sc", "coll", "min_dist", "ea", "reward_total"]


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_metrics_csv(report: MetricsReport, path, meta):
    """One row per episode plus an aggregate row; leading comment embeds
    version/config/seed so artifacts stay traceable."""
    agg = report.aggregate()
    buf = io.StringIO()
    buf.write(f"# fluxlab {meta.get('version', __version__)}"
              f" config={meta.get('config_hash', '-')} seed={meta.get('seed', '-')}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_CSV_FIELDS)
    for r in report.rows:
        w.writerow([_fmt(getattr(r, f)) for f in _CSV_FIELDS])
    w.writerow(["aggregate", "-", "-", "-", _fmt(agg.get("sr", 0.0)),
                _fmt(agg.get("et", 0.0)), _fmt(agg.get("s_tl", 0.0)), "-",
                _fmt(agg.get("spl", 0.0)), _fmt(agg.get("sc", 0.0)),
                _fmt(agg.get("coll", 0.0)), _fmt(agg.get("min_dist", 0.0)),
                _fmt(agg.get("ea", 0.0)), "-"])
    with open(path, "w") as f:
        f.write(buf.getvalue())


def write_metrics_json(report: MetricsReport, path, meta):
    import json
    agg = report.aggregate()
    agg = {k: (None if isinstance(v, float) and math.isinf(v) else v)
           for k, v in agg.items()}
    payload = {"meta": meta, "aggregate": agg,
               "episodes": [{f: getattr(r, f) for f in _CSV_FIELDS} for r in report.rows]}
    for row in payload["episodes"]:
        if isinstance(row["min_dist"], float) and math.isinf(row["min_dist"]):
            row["min_dist"] = None
    with open(path, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)


def sweep_grid(model, scenes, specs, Ms, Ks, workers=1):
    """(M, K) sensitivity grid; returns rows of aggregate metrics per cell."""
    rows = []
    for M in Ms:
        for K in Ks:
            report = evaluate(model, scenes, specs, M=M, K=K, workers=workers)
            agg = report.aggregate()
            rows.append({"M": M, "K": K, "sr": agg["sr"], "spl": agg["spl"],
                         "sc": agg["sc"], "coll": agg["coll"], "n": agg["n"]})
    return rows


def latency_table(model, obs_vec, Ks, M=16, repeats=30, rng=None):
    """Wall-clock and exact NFE per inference (M candidates) for each K."""
    rng = rng or np.random.default_rng(0)
    rows = []
    for K in Ks:
        generate_candidates(model, obs_vec, M, K, rng)  # warm-up
        before = model.head_evals
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            generate_candidates(model, obs_vec, M, K, rng)
            times.append(time.perf_counter() - t0)
        evals = model.head_evals - before
        nfe_per_candidate = evals / (repeats * M)
        rows.append({"K": K, "M": M, "wall_ms": 1000.0 * float(np.median(times)),
                     "nfe_per_candidate": nfe_per_candidate,
                     "nfe_per_inference": evals / repeats})
    return rows


def write_rows_csv(rows, path, meta, fields=None):
    if not rows:
        fields = fields or []
    fields = fields or list(rows[0].keys())
    buf = io.StringIO()
    buf.write(f"# fluxlab {meta.get('version', __version__)}"
              f" config={meta.get('config_hash', '-')} seed={meta.get('seed', '-')}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r.get(f, "")) for f in fields])
    with open(path, "w") as f:
        f.write(buf.getvalue())
