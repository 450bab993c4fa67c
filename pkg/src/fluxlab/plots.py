"""SVG figure emission for sweeps, training curves and episode replays."""

from __future__ import annotations

import csv
import json

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "fluxlab"

import matplotlib.pyplot as plt
from matplotlib.patches import Circle, Rectangle

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def read_csv_rows(path):
    with open(path) as f:
        lines = [ln for ln in f if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def line_chart(path_csv, out_svg, x, ys, title=""):
    rows = read_csv_rows(path_csv)
    rows = [r for r in rows if r.get(x, "").replace(".", "").replace("-", "").isdigit()
            or _is_float(r.get(x, ""))]
    xs = [float(r[x]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for yname in ys:
        ax.plot(xs, [float(r[yname]) for r in rows], marker="o", label=yname)
    ax.set_xlabel(x)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_svg, **_SAVE_KW)
    plt.close(fig)


def bar_chart(path_csv, out_svg, x, y, title=""):
    rows = read_csv_rows(path_csv)
    labels = [r[x] for r in rows]
    vals = [float(r[y]) for r in rows if _is_float(r[y])]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(vals)), vals)
    ax.set_xticks(range(len(vals)))
    ax.set_xticklabels(labels[:len(vals)], rotation=30, ha="right")
    ax.set_ylabel(y)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_svg, **_SAVE_KW)
    plt.close(fig)


def sweep_chart(rows, out_svg, metric="sr"):
    """One line per candidate count M across sampling steps K."""
    by_m = {}
    for r in rows:
        by_m.setdefault(int(r["M"]), []).append((int(r["K"]), float(r[metric])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for M in sorted(by_m):
        pts = sorted(by_m[M])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"M={M}")
    ax.set_xlabel("sampling steps K")
    ax.set_ylabel(metric)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_svg, **_SAVE_KW)
    plt.close(fig)


def _is_float(s):
    try:
        float(s)
        return True
    except (TypeError, ValueError):
        return False


def replay_figure(meta, steps, scene, out_svg):
    """Scene + robot path + pedestrian paths from a parsed episode log."""
    fig, ax = plt.subplots(figsize=(6, 6))
    xmin, ymin, xmax, ymax = scene.bounds
    ax.add_patch(Rectangle((xmin, ymin), xmax - xmin, ymax - ymin,
                           fill=False, edgecolor="k"))
    for cx, cy, r in scene.circles:
        ax.add_patch(Circle((cx, cy), r, color="0.55"))
    for rx0, ry0, rx1, ry1 in scene.rects:
        ax.add_patch(Rectangle((rx0, ry0), rx1 - rx0, ry1 - ry0, color="0.55"))
    n_peds = len(steps[0]["peds"]) if steps else 0
    for j in range(n_peds):
        ax.plot([s["peds"][j][0] for s in steps], [s["peds"][j][1] for s in steps],
                lw=0.8, alpha=0.6)
    ax.plot([s["robot"][0] for s in steps], [s["robot"][1] for s in steps],
            "b-", lw=1.8, label="robot")
    if meta.get("start"):
        ax.plot(meta["start"][0], meta["start"][1], "bs", ms=7)
    if meta.get("goal"):
        ax.plot(meta["goal"][0], meta["goal"][1], "g*", ms=14)
    ax.set_aspect("equal")
    ax.set_xlim(xmin - 0.5, xmax + 0.5)
    ax.set_ylim(ymin - 0.5, ymax + 0.5)
    ax.set_title(f"{meta.get('task', '?')} on {meta.get('scene', '?')}")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_svg, **_SAVE_KW)
    plt.close(fig)


def candidates_figure(scene, pose, cands_world, scores, selected, goal, out_svg):
    """Qualitative view: M candidates shaded by critic score, winner bold."""
    import numpy as np
    fig, ax = plt.subplots(figsize=(6, 6))
    xmin, ymin, xmax, ymax = scene.bounds
    ax.add_patch(Rectangle((xmin, ymin), xmax - xmin, ymax - ymin,
                           fill=False, edgecolor="k"))
    for cx, cy, r in scene.circles:
        ax.add_patch(Circle((cx, cy), r, color="0.55"))
    for rx0, ry0, rx1, ry1 in scene.rects:
        ax.add_patch(Rectangle((rx0, ry0), rx1 - rx0, ry1 - ry0, color="0.55"))
    s = np.asarray(scores, dtype=float)
    rank = (s - s.min()) / (s.ptp() + 1e-12)
    for m, traj in enumerate(cands_world):
        xs = [pose[0]] + [p[0] for p in traj]
        ys = [pose[1]] + [p[1] for p in traj]
        if m == selected:
            ax.plot(xs, ys, color="tab:blue", lw=2.5, zorder=5)
        else:
            ax.plot(xs, ys, color=plt.cm.viridis(rank[m]), lw=0.9, alpha=0.75)
    if goal is not None:
        ax.plot(goal[0], goal[1], "g*", ms=14)
    ax.plot(pose[0], pose[1], "bs", ms=7)
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(out_svg, **_SAVE_KW)
    plt.close(fig)
