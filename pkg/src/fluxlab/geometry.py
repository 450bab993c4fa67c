"""Planar geometry kernels: ray casts, overlap resolution, time-to-collision.

Everything works on plain floats / numpy arrays; shapes are circles
(cx, cy, r), axis-aligned rectangles (xmin, ymin, xmax, ymax) and the world
bounds rectangle. All distances in meters.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "ray_circle",
    "ray_rect",
    "ray_bounds_inside",
    "raycast_distances",
    "point_rect_distance",
    "point_in_rect",
    "segment_clear",
    "time_to_collision",
    "resolve_circle_static",
    "wrap_angle",
]


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a), 2.0 * np.pi)


def ray_circle(origin, dirs, center, radius):
    """Distance along each unit direction to a circle, inf where missed.

    dirs: (R, 2) unit vectors. Returns (R,) array of nonnegative hit
    distances (first intersection with t >= 0; origin inside gives the exit
    distance's entry t clamped at 0).
    """
    d = np.asarray(center, dtype=float) - np.asarray(origin, dtype=float)
    b = dirs @ d  # projection of center onto each ray
    c = float(d @ d) - radius * radius
    disc = b * b - c
    t = np.full(dirs.shape[0], np.inf)
    hit = disc >= 0.0
    if not np.any(hit):
        return t
    sq = np.sqrt(disc[hit])
    t0 = b[hit] - sq
    t1 = b[hit] + sq
    near = np.where(t0 >= 0.0, t0, np.where(t1 >= 0.0, 0.0, np.inf))
    t[hit] = near
    return t


def ray_rect(origin, dirs, rect):
    """Distance along each unit direction to an AABB, inf where missed (slab test)."""
    ox, oy = float(origin[0]), float(origin[1])
    xmin, ymin, xmax, ymax = rect
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_x = 1.0 / dirs[:, 0]
        inv_y = 1.0 / dirs[:, 1]
        tx1 = (xmin - ox) * inv_x
        tx2 = (xmax - ox) * inv_x
        ty1 = (ymin - oy) * inv_y
        ty2 = (ymax - oy) * inv_y
    # axis-parallel rays: slab is all of R when inside the band, empty otherwise
    par_x = dirs[:, 0] == 0.0
    if np.any(par_x):
        inside = (xmin <= ox) & (ox <= xmax)
        tx1 = np.where(par_x, np.where(inside, -np.inf, np.inf), tx1)
        tx2 = np.where(par_x, np.inf, tx2)
    par_y = dirs[:, 1] == 0.0
    if np.any(par_y):
        inside = (ymin <= oy) & (oy <= ymax)
        ty1 = np.where(par_y, np.where(inside, -np.inf, np.inf), ty1)
        ty2 = np.where(par_y, np.inf, ty2)
    tmin = np.maximum(np.minimum(tx1, tx2), np.minimum(ty1, ty2))
    tmax = np.minimum(np.maximum(tx1, tx2), np.maximum(ty1, ty2))
    t = np.where((tmax >= tmin) & (tmax >= 0.0), np.maximum(tmin, 0.0), np.inf)
    return t


def ray_bounds_inside(origin, dirs, bounds):
    """Distance to exit the bounds rectangle from an interior origin."""
    ox, oy = float(origin[0]), float(origin[1])
    xmin, ymin, xmax, ymax = bounds
    t = np.full(dirs.shape[0], np.inf)
    dx = dirs[:, 0]
    dy = dirs[:, 1]
    with np.errstate(divide="ignore"):
        tx = np.where(dx > 0, (xmax - ox) / dx, np.where(dx < 0, (xmin - ox) / dx, np.inf))
        ty = np.where(dy > 0, (ymax - oy) / dy, np.where(dy < 0, (ymin - oy) / dy, np.inf))
    t = np.minimum(tx, ty)
    return np.maximum(t, 0.0)


def raycast_distances(origin, angles, circles, rects, bounds, max_range):
    """Min hit distance per ray over circles, rects and the bounds walls.

    circles: (n, 3) array of (cx, cy, r); rects: (m, 4). Clamped to
    (0, max_range].
    """
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    best = ray_bounds_inside(origin, dirs, bounds)
    for cx, cy, r in circles:
        best = np.minimum(best, ray_circle(origin, dirs, (cx, cy), r))
    for rect in rects:
        best = np.minimum(best, ray_rect(origin, dirs, rect))
    return np.minimum(best, max_range)


def point_rect_distance(p, rect):
    """Distance from a point to an AABB (0 inside)."""
    dx = max(rect[0] - p[0], 0.0, p[0] - rect[2])
    dy = max(rect[1] - p[1], 0.0, p[1] - rect[3])
    return math.hypot(dx, dy)


def point_in_rect(p, rect):
    return rect[0] <= p[0] <= rect[2] and rect[1] <= p[1] <= rect[3]


def segment_clear(a, b, circles, rects, radius, step=0.05):
    """True if a disk of given radius can slide along segment a->b without
    touching any obstacle. Sampled test at `step` spacing (includes endpoints).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = max(2, int(math.ceil(float(np.hypot(*(b - a))) / step)) + 1)
    ts = np.linspace(0.0, 1.0, n)
    pts = a[None, :] + ts[:, None] * (b - a)[None, :]
    for cx, cy, r in circles:
        d2 = (pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2
        if np.any(d2 < (r + radius) ** 2):
            return False
    for xmin, ymin, xmax, ymax in rects:
        ddx = np.maximum(np.maximum(xmin - pts[:, 0], 0.0), pts[:, 0] - xmax)
        ddy = np.maximum(np.maximum(ymin - pts[:, 1], 0.0), pts[:, 1] - ymax)
        if np.any(ddx * ddx + ddy * ddy < radius * radius):
            return False
    return True


def time_to_collision(rel_pos, rel_vel, radius_sum):
    """First t >= 0 with ||rel_pos + rel_vel * t|| = radius_sum, else inf.

    Overlapping bodies return 0. Supports rel_pos/rel_vel batched along the
    leading axes with the last axis = 2 (broadcast against each other).
    """
    rel_pos = np.asarray(rel_pos, dtype=float)
    rel_vel = np.asarray(rel_vel, dtype=float)
    px, py = rel_pos[..., 0], rel_pos[..., 1]
    vx, vy = rel_vel[..., 0], rel_vel[..., 1]
    c = px * px + py * py - radius_sum * radius_sum
    a = vx * vx + vy * vy
    b = 2.0 * (px * vx + py * vy)
    disc = b * b - 4.0 * a * c
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(np.where(disc >= 0.0, disc, 0.0))
        t = (-b - sq) / (2.0 * a)
    hit = (disc >= 0.0) & (a > 0.0) & (t >= 0.0)
    out = np.where(c <= 0.0, 0.0, np.where(hit, t, np.inf))
    return out if out.ndim else float(out)


def resolve_circle_static(p, radius, circles, rects, bounds):
    """Push a disk center out of static circles/rects and inside the bounds.

    Returns the corrected center. One pass; callers iterate to convergence.
    """
    x, y = float(p[0]), float(p[1])
    xmin, ymin, xmax, ymax = bounds
    x = min(max(x, xmin + radius), xmax - radius)
    y = min(max(y, ymin + radius), ymax - radius)
    for cx, cy, r in circles:
        dx = x - cx
        dy = y - cy
        d = math.hypot(dx, dy)
        need = r + radius
        if d < need:
            if d < 1e-12:
                dx, dy, d = 1.0, 0.0, 1.0
            x = cx + dx / d * need
            y = cy + dy / d * need
    for rect in rects:
        rx0, ry0, rx1, ry1 = rect
        qx = min(max(x, rx0), rx1)
        qy = min(max(y, ry0), ry1)
        dx = x - qx
        dy = y - qy
        d = math.hypot(dx, dy)
        if d >= radius:
            continue
        if d > 1e-12:
            x = qx + dx / d * radius
            y = qy + dy / d * radius
        else:
            # center inside the rect: exit through the nearest face
            gaps = (x - rx0, rx1 - x, y - ry0, ry1 - y)
            k = int(np.argmin(gaps))
            if k == 0:
                x = rx0 - radius
            elif k == 1:
                x = rx1 + radius
            elif k == 2:
                y = ry0 - radius
            else:
                y = ry1 + radius
    return x, y
