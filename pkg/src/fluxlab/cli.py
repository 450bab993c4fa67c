"""Command-line interface.

Subcommands: gen-scenes, gen-episodes, gen-experts, train-il, train-rl,
eval, sweep, plot, replay. Exit codes: 0 ok, 1 config error, 2 runtime
failure, 3 threshold failure in `eval --assert`.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, artifact_meta, load_config
from .episodes import EpisodeSpec, Task, gen_episodes
from .harness import (evaluate, latency_table, sweep_grid, write_metrics_csv,
                      write_metrics_json, write_rows_csv)
from .metrics import coverage_from_records, path_length_from_records, social_metrics_from_records
from .policy import ModelHandle
from .runner import read_log, records_for_metrics
from .scenes import gen_scene, load_scenes, save_scenes, structured_eval_scenes

log = logging.getLogger("fluxlab")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_THRESHOLD = 3


def _workers(args):
    if getattr(args, "workers", None):
        return int(args.workers)
    return int(os.environ.get("FLUXLAB_WORKERS", "1"))


def _load_cfg(args) -> ExperimentConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = int(args.seed)
    if getattr(args, "out", None):
        overrides["out"] = args.out
    return load_config(getattr(args, "config", None), overrides)


def _outdir(cfg, args):
    out = getattr(args, "out", None) or cfg["out"]
    os.makedirs(out, exist_ok=True)
    return out


def cmd_gen_scenes(args):
    cfg = _load_cfg(args)
    seed = cfg["seed"]
    if args.kind == "eval":
        scenes = structured_eval_scenes()
    else:
        scenes = [gen_scene(seed * 1000 + i, name=f"train-{seed}-{i}",
                            size=args.size, n_circles=(args.min_clutter, args.max_clutter))
                  for i in range(args.count)]
    save_scenes(scenes, args.out)
    print(f"wrote {len(scenes)} scenes -> {args.out}")
    return EXIT_OK


def cmd_gen_episodes(args):
    cfg = _load_cfg(args)
    scenes = load_scenes(cfg["scenes"])
    task = Task(args.task or cfg["task"])
    count = args.count or cfg["episodes"]
    specs = gen_episodes(scenes, task, count, cfg["seed"])
    payload = {"meta": artifact_meta(cfg), "episodes": [s.to_dict() for s in specs]}
    with open(args.out, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
    print(f"wrote {len(specs)} {task.value} episodes -> {args.out}")
    return EXIT_OK


def cmd_gen_experts(args):
    from .training import gen_expert_dataset, save_dataset
    cfg = _load_cfg(args)
    scenes = load_scenes(cfg["scenes"])
    n = args.count or cfg["stage1"]["expert_trajectories"]
    dataset = gen_expert_dataset(scenes, n, cfg["seed"])
    save_dataset(args.out, dataset)
    print(f"wrote {len(dataset['obs'])} expert samples -> {args.out}")
    return EXIT_OK


def cmd_train_il(args):
    from .training import load_dataset, train_il
    cfg = _load_cfg(args)
    out = _outdir(cfg, args)
    scenes = load_scenes(cfg["scenes"])
    dataset = load_dataset(args.experts)
    model = ModelHandle(cfg["head"], seed=cfg["seed"], M=cfg["M"],
                        K=None if cfg["head"] == "ddpm" else cfg["K"])
    rows = []
    train_il(model, dataset, scenes, epochs=cfg["stage1"]["epochs"],
             lr=cfg["stage1"]["lr"], batch_size=cfg["stage1"]["batch_size"],
             seed=cfg["seed"], log_rows=rows)
    ckpt = os.path.join(out, "model_il.ckpt")
    model.save(ckpt, {"head": cfg["head"], "seed": cfg["seed"], "stage": "il",
                      "steps": len(rows), "config_hash": cfg.hash,
                      "M": cfg["M"], "K": model.config.K, "obs_dim": model.obs_dim,
                      "version": __version__})
    write_rows_csv(rows, os.path.join(out, "train_il.csv"), artifact_meta(cfg),
                   fields=["epoch", "head_loss", "critic_loss"])
    print(f"stage-1 done: {ckpt}")
    return EXIT_OK


def cmd_train_rl(args):
    from .training import train_rl
    cfg = _load_cfg(args)
    out = _outdir(cfg, args)
    scenes = load_scenes(cfg["scenes"])
    model, _ = ModelHandle.load(args.ckpt)
    s2 = cfg["stage2"]
    rows = []
    train_rl(model, scenes, updates=int(s2["updates"]),
             episodes_per_update=int(s2["episodes_per_update"]), lr=s2["lr"],
             eps=s2["eps"], gamma=s2["gamma"], seed=cfg["seed"],
             tasks=tuple(Task(t) for t in s2["tasks"]),
             task_weights=s2.get("task_weights"), M=cfg["M"], K=cfg["K"],
             sigma=s2["sigma"], log_rows=rows)
    ckpt = os.path.join(out, "model_rl.ckpt")
    model.save(ckpt, {"head": model.head_kind.value, "seed": cfg["seed"],
                      "stage": "rl", "steps": int(s2["updates"]),
                      "config_hash": cfg.hash, "M": cfg["M"], "K": model.config.K,
                      "obs_dim": model.obs_dim, "version": __version__})
    write_rows_csv(rows, os.path.join(out, "train_rl.csv"), artifact_meta(cfg),
                   fields=["update", "loss", "mean_return", "success_rate",
                           "mean_ratio", "clip_fraction", "masked", "mean_abs_adv"])
    print(f"stage-2 done: {ckpt}")
    return EXIT_OK


def cmd_eval(args):
    cfg = _load_cfg(args)
    out = _outdir(cfg, args)
    scenes = load_scenes(cfg["eval_scenes"] or cfg["scenes"])
    model, _ = ModelHandle.load(args.ckpt)
    with open(args.episodes) as f:
        specs = [EpisodeSpec.from_dict(d) for d in json.load(f)["episodes"]]
    log_dir = None
    if args.logs:
        log_dir = os.path.join(out, "logs")
        os.makedirs(log_dir, exist_ok=True)
    meta = artifact_meta(cfg)
    report = evaluate(model, scenes, specs, M=cfg["M"], K=cfg["K"],
                      workers=_workers(args), log_dir=log_dir, meta=meta)
    write_metrics_csv(report, os.path.join(out, "metrics.csv"), meta)
    write_metrics_json(report, os.path.join(out, "metrics.json"), meta)
    agg = report.aggregate()
    print(json.dumps({k: agg[k] for k in sorted(agg)}, default=str))
    if args.do_assert:
        th = cfg.get("assert_thresholds", {})
        fails = []
        for key, bound in th.items():
            metric, kind = key.rsplit("_", 1)
            val = agg.get(metric)
            if val is None:
                fails.append(f"unknown metric {metric}")
            elif kind == "min" and val < bound:
                fails.append(f"{metric}={val:.4f} < {bound}")
            elif kind == "max" and val > bound:
                fails.append(f"{metric}={val:.4f} > {bound}")
        if fails:
            print("ASSERT FAIL: " + "; ".join(fails), file=sys.stderr)
            return EXIT_THRESHOLD
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load_cfg(args)
    out = _outdir(cfg, args)
    model, _ = ModelHandle.load(args.ckpt)
    meta = artifact_meta(cfg)
    if args.latency:
        rng = np.random.default_rng(cfg["seed"])
        obs = rng.uniform(0.2, 1.0, model.obs_dim)
        Ks = [int(k) for k in args.K.split(",")]
        rows = latency_table(model, obs, Ks, M=cfg["M"], repeats=args.repeats)
        write_rows_csv(rows, os.path.join(out, "latency.csv"), meta,
                       fields=["K", "M", "wall_ms", "nfe_per_candidate",
                               "nfe_per_inference"])
        print(json.dumps(rows))
        return EXIT_OK
    scenes = load_scenes(cfg["eval_scenes"] or cfg["scenes"])
    with open(args.episodes) as f:
        specs = [EpisodeSpec.from_dict(d) for d in json.load(f)["episodes"]]
    Ms = [int(m) for m in args.M.split(",")]
    Ks = [int(k) for k in args.K.split(",")]
    rows = sweep_grid(model, scenes, specs, Ms, Ks, workers=_workers(args))
    write_rows_csv(rows, os.path.join(out, "sweep.csv"), meta,
                   fields=["M", "K", "sr", "spl", "sc", "coll", "n"])
    from .plots import sweep_chart
    sweep_chart(rows, os.path.join(out, "sweep.svg"))
    print(f"sweep grid {len(Ms)}x{len(Ks)} -> {out}")
    return EXIT_OK


def cmd_plot(args):
    from . import plots
    if args.kind == "line":
        plots.line_chart(args.csv, args.out, args.x, args.y.split(","))
    elif args.kind == "bar":
        plots.bar_chart(args.csv, args.out, args.x, args.y)
    else:
        rows = plots.read_csv_rows(args.csv)
        plots.sweep_chart(rows, args.out, metric=args.y)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_replay(args):
    meta, steps, end = read_log(args.log)
    if meta is None or end is None:
        print("log is missing meta/end records", file=sys.stderr)
        return EXIT_RUNTIME
    scenes = load_scenes(args.scenes)
    scene = next(s for s in scenes if s.name == meta["scene"])
    recs = records_for_metrics(steps)
    sc, coll, min_dist = social_metrics_from_records(recs, meta["n_pedestrians"])
    path_len = path_length_from_records(recs, meta["start"][:2])
    got = {"sc": sc, "coll": coll, "min_dist": min_dist, "path_len": path_len,
           "time": steps[-1]["t"] if steps else 0.0}
    if meta["task"] in ("Exploration", "DynExploration"):
        et, ea = coverage_from_records(recs, scene)
        got["ea"] = ea
    from .metrics import compute_spl
    if meta["task"] in ("PointNav", "SocialNav", "DynPointNav") \
            and meta["shortest_path_len"] > 0:
        got["spl"] = compute_spl(end["outcome"] == "SUCCESS",
                                 meta["shortest_path_len"], path_len)
    logged = end["metrics"]
    mismatch = {k: (got[k], logged[k]) for k in got
                if not _close_exact(got[k], logged[k])}
    if args.out:
        from .plots import replay_figure
        replay_figure(meta, steps, scene, args.out)
    if mismatch:
        print(f"REPLAY MISMATCH: {mismatch}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps({"replay_ok": True, **{k: got[k] for k in sorted(got)}}))
    return EXIT_OK


def _close_exact(a, b):
    if isinstance(a, float) and isinstance(b, float):
        if math.isinf(a) or math.isinf(b):
            return a == b
        return a == b
    return a == b


def build_parser():
    p = argparse.ArgumentParser(prog="fluxlab",
                                description="flow-based navigation policy lab")
    p.add_argument("--version", action="version", version=f"fluxlab {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=None)

    sp = sub.add_parser("gen-scenes", help="write a scene set JSON")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--kind", choices=["train", "eval"], default="train")
    sp.add_argument("--count", type=int, default=20)
    sp.add_argument("--size", type=float, default=12.0)
    sp.add_argument("--min-clutter", type=int, default=3)
    sp.add_argument("--max-clutter", type=int, default=7)
    sp.set_defaults(fn=cmd_gen_scenes)

    sp = sub.add_parser("gen-episodes", help="write an episode list JSON")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--task", default=None)
    sp.add_argument("--count", type=int, default=None)
    sp.set_defaults(fn=cmd_gen_episodes)

    sp = sub.add_parser("gen-experts", help="generate the expert dataset (npz)")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--count", type=int, default=None)
    sp.set_defaults(fn=cmd_gen_experts)

    sp = sub.add_parser("train-il", help="stage-1 imitation learning")
    common(sp)
    sp.add_argument("--experts", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_train_il)

    sp = sub.add_parser("train-rl", help="stage-2 GRPO fine-tuning")
    common(sp)
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_train_rl)

    sp = sub.add_parser("eval", help="run a benchmark evaluation")
    common(sp)
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--episodes", required=True)
    sp.add_argument("--out", default=None)
    sp.add_argument("--logs", action="store_true", help="write per-episode JSONL logs")
    sp.add_argument("--assert", dest="do_assert", action="store_true",
                    help="exit 3 if config assert_thresholds are violated")
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("sweep", help="(M, K) sensitivity grid or --latency table")
    common(sp)
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--episodes", default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--M", default="1,2,4,8,16,32")
    sp.add_argument("--K", default="1,2,4,6,8")
    sp.add_argument("--latency", action="store_true")
    sp.add_argument("--repeats", type=int, default=30)
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("plot", help="render an SVG chart from a CSV")
    sp.add_argument("--csv", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--kind", choices=["line", "bar", "sweep"], default="line")
    sp.add_argument("--x", default="epoch")
    sp.add_argument("--y", default="head_loss")
    sp.set_defaults(fn=cmd_plot)

    sp = sub.add_parser("replay", help="verify + render an episode log")
    sp.add_argument("--log", required=True)
    sp.add_argument("--scenes", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(fn=cmd_replay)

    return p


def main(argv=None):
    logging.basicConfig(level=os.environ.get("FLUXLAB_LOGLEVEL", "WARNING"))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - CLI boundary
        log.exception("runtime failure")
        print(f"runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
