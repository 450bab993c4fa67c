"""Independent reference implementations used only to check the package.

Everything here is deliberately brute-force and shares no code with the
implementations under test.
"""

from __future__ import annotations

import heapq
import math

import numpy as np


def dijkstra_grid_cost(blocked, start, goal):
    """Full-relaxation Dijkstra over an 8-connected boolean grid.

    Returns the optimal cost in cell units or math.inf.
    """
    nx, ny = blocked.shape
    dist = {start: 0.0}
    heap = [(0.0, start)]
    done = set()
    moves = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
             (1, 1, math.sqrt(2)), (1, -1, math.sqrt(2)),
             (-1, 1, math.sqrt(2)), (-1, -1, math.sqrt(2))]
    while heap:
        d, cur = heapq.heappop(heap)
        if cur in done:
            continue
        done.add(cur)
        if cur == goal:
            return d
        for dx, dy, w in moves:
            nxt = (cur[0] + dx, cur[1] + dy)
            if not (0 <= nxt[0] < nx and 0 <= nxt[1] < ny):
                continue
            if blocked[nxt]:
                continue
            nd = d + w
            if nd < dist.get(nxt, math.inf):
                dist[nxt] = nd
                heapq.heappush(heap, (nd, nxt))
    return math.inf


def ray_circle_closed_form(origin, angle, center, radius):
    """First nonnegative ray-circle intersection distance, or inf."""
    ox, oy = origin
    dx, dy = math.cos(angle), math.sin(angle)
    fx, fy = ox - center[0], oy - center[1]
    b = 2 * (fx * dx + fy * dy)
    c = fx * fx + fy * fy - radius * radius
    disc = b * b - 4 * c
    if disc < 0:
        return math.inf
    sq = math.sqrt(disc)
    t0 = (-b - sq) / 2
    t1 = (-b + sq) / 2
    if t0 >= 0:
        return t0
    if t1 >= 0:
        return 0.0
    return math.inf


def ray_segment(origin, angle, a, b):
    """Ray vs segment intersection distance, or inf."""
    ox, oy = origin
    dx, dy = math.cos(angle), math.sin(angle)
    ex, ey = b[0] - a[0], b[1] - a[1]
    denom = dx * ey - dy * ex
    if abs(denom) < 1e-15:
        return math.inf
    t = ((a[0] - ox) * ey - (a[1] - oy) * ex) / denom
    u = ((a[0] - ox) * dy - (a[1] - oy) * dx) / denom
    if t >= 0 and 0 <= u <= 1:
        return t
    return math.inf


def finite_difference_grad(f, theta, h=1e-4):
    """Central finite differences of scalar f at flat parameter vector theta."""
    theta = np.asarray(theta, dtype=float)
    g = np.zeros_like(theta)
    for i in range(theta.size):
        tp = theta.copy()
        tp[i] += h
        tm = theta.copy()
        tm[i] -= h
        g[i] = (f(tp) - f(tm)) / (2 * h)
    return g


def grad_close(analytic, numeric, rtol=1e-4, floor=1e-8):
    """Relative agreement per coordinate, skipping near-zero entries."""
    analytic = np.asarray(analytic, dtype=float).ravel()
    numeric = np.asarray(numeric, dtype=float).ravel()
    mask = (np.abs(analytic) >= floor) | (np.abs(numeric) >= floor)
    if not np.any(mask):
        return True
    denom = np.maximum(np.abs(analytic[mask]), np.abs(numeric[mask]))
    rel = np.abs(analytic[mask] - numeric[mask]) / denom
    return float(np.max(rel)) < rtol


def capsule_cell_count(p0, p1, sense_r, cell):
    """Cells (by center) covered by the capsule swept from p0 to p1."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    lo = np.minimum(p0, p1) - sense_r - cell
    hi = np.maximum(p0, p1) + sense_r + cell
    i0 = int(math.floor(lo[0] / cell))
    i1 = int(math.ceil(hi[0] / cell))
    j0 = int(math.floor(lo[1] / cell))
    j1 = int(math.ceil(hi[1] / cell))
    seg = p1 - p0
    L2 = float(seg @ seg)
    count = 0
    for i in range(i0, i1 + 1):
        for j in range(j0, j1 + 1):
            c = np.array([(i + 0.5) * cell, (j + 0.5) * cell])
            if L2 < 1e-12:
                d = float(np.hypot(*(c - p0)))
            else:
                t = float(np.clip((c - p0) @ seg / L2, 0.0, 1.0))
                d = float(np.hypot(*(p0 + t * seg - c)))
            if d <= sense_r:
                count += 1
    return count
