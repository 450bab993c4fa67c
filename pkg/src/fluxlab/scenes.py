"""Scene definitions: bounds, static obstacles, pedestrian routes.

Scenes are plain data; JSON on disk. Two families:
  * procedural cluttered rooms (training / held-out eval splits), and
  * six fixed structured scenes for benchmark evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .seeding import stream_rng

# Body radii are chosen so contact (0.4 m center distance) sits just inside
# the 0.45 m intimate-space threshold: intrusions are real, countable events
# rather than being geometrically impossible under zero-penetration contact.
ROBOT_RADIUS = 0.2
PED_RADIUS = 0.2


@dataclass
class Scene:
    name: str
    bounds: tuple  # (xmin, ymin, xmax, ymax)
    circles: list = field(default_factory=list)  # [(cx, cy, r), ...]
    rects: list = field(default_factory=list)  # [(xmin, ymin, xmax, ymax), ...]
    ped_routes: list = field(default_factory=list)  # [[(x, y) * 3], ...]

    def circles_array(self):
        return np.asarray(self.circles, dtype=float).reshape(-1, 3)

    def rects_array(self):
        return np.asarray(self.rects, dtype=float).reshape(-1, 4)

    def free_area(self, cell=0.5):
        """Total area of free cells (cell centers outside all obstacles)."""
        xs, ys = free_cell_centers(self, cell)
        return float(xs.size) * cell * cell

    def to_dict(self):
        return {
            "name": self.name,
            "bounds": list(self.bounds),
            "circles": [list(c) for c in self.circles],
            "rects": [list(r) for r in self.rects],
            "ped_routes": [[list(p) for p in route] for route in self.ped_routes],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            name=d["name"],
            bounds=tuple(d["bounds"]),
            circles=[tuple(c) for c in d.get("circles", [])],
            rects=[tuple(r) for r in d.get("rects", [])],
            ped_routes=[[tuple(p) for p in route] for route in d.get("ped_routes", [])],
        )


def free_cell_centers(scene: Scene, cell=0.5):
    """Centers of grid cells whose center is inside bounds and outside obstacles."""
    xmin, ymin, xmax, ymax = scene.bounds
    nx = int(np.floor((xmax - xmin) / cell))
    ny = int(np.floor((ymax - ymin) / cell))
    cx = xmin + (np.arange(nx) + 0.5) * cell
    cy = ymin + (np.arange(ny) + 0.5) * cell
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    free = np.ones(gx.shape, dtype=bool)
    for ox, oy, r in scene.circles:
        free &= (gx - ox) ** 2 + (gy - oy) ** 2 > r * r
    for rx0, ry0, rx1, ry1 in scene.rects:
        free &= ~((gx >= rx0) & (gx <= rx1) & (gy >= ry0) & (gy <= ry1))
    return gx[free], gy[free]


def point_free(scene: Scene, p, radius):
    """True if a disk at p clears every obstacle and the bounds."""
    x, y = p
    xmin, ymin, xmax, ymax = scene.bounds
    if not (xmin + radius <= x <= xmax - radius and ymin + radius <= y <= ymax - radius):
        return False
    for cx, cy, r in scene.circles:
        if (x - cx) ** 2 + (y - cy) ** 2 < (r + radius) ** 2:
            return False
    for rx0, ry0, rx1, ry1 in scene.rects:
        dx = max(rx0 - x, 0.0, x - rx1)
        dy = max(ry0 - y, 0.0, y - ry1)
        if dx * dx + dy * dy < radius * radius:
            return False
    return True


def gen_scene(seed, name=None, size=12.0, n_circles=(3, 7), n_rects=(2, 5),
              circle_r=(0.25, 0.6), rect_side=(0.5, 1.6), n_walls=(0, 2),
              wall_len=(2.0, 5.0), wall_thick=(0.3, 0.6)):
    """Procedural cluttered room: random circles, boxes and wall segments.

    Obstacles keep a 1.2 m clear margin from the room walls so the perimeter
    stays navigable. Wall segments (long thin rects, axis-aligned) create the
    doorway / corridor geometry the structured eval scenes are built from.
    Deterministic in the seed.
    """
    rng = stream_rng(seed, "scene")
    margin = 1.2
    scene = Scene(name=name or f"room-{seed}", bounds=(0.0, 0.0, size, size))
    nc = int(rng.integers(n_circles[0], n_circles[1] + 1))
    nr = int(rng.integers(n_rects[0], n_rects[1] + 1))
    nw = int(rng.integers(n_walls[0], n_walls[1] + 1))
    for _ in range(nc):
        r = float(rng.uniform(*circle_r))
        cx = float(rng.uniform(margin + r, size - margin - r))
        cy = float(rng.uniform(margin + r, size - margin - r))
        scene.circles.append((cx, cy, r))
    for _ in range(nr):
        w = float(rng.uniform(*rect_side))
        h = float(rng.uniform(*rect_side))
        x0 = float(rng.uniform(margin, size - margin - w))
        y0 = float(rng.uniform(margin, size - margin - h))
        scene.rects.append((x0, y0, x0 + w, y0 + h))
    for _ in range(nw):
        length = float(rng.uniform(*wall_len))
        thick = float(rng.uniform(*wall_thick))
        w, h = (length, thick) if rng.integers(2) else (thick, length)
        x0 = float(rng.uniform(margin, size - margin - w))
        y0 = float(rng.uniform(margin, size - margin - h))
        scene.rects.append((x0, y0, x0 + w, y0 + h))
    return scene


def structured_eval_scenes():
    """Six fixed hand-authored scenes for benchmark evaluation."""
    s = 12.0
    scenes = []

    sc = Scene("eval-pillar-hall", (0, 0, s, s))
    for i in range(3):
        for j in range(3):
            sc.circles.append((3.0 + 3.0 * i, 3.0 + 3.0 * j, 0.4))
    scenes.append(sc)

    sc = Scene("eval-corridor", (0, 0, s, s))
    sc.rects = [(0.0, 4.2, 7.5, 4.8), (4.5, 7.2, 12.0, 7.8)]
    scenes.append(sc)

    sc = Scene("eval-rooms", (0, 0, s, s))
    # cross wall with two doorways
    sc.rects = [
        (5.7, 0.0, 6.3, 4.4), (5.7, 6.0, 6.3, 12.0),
        (0.0, 5.7, 2.6, 6.3), (4.2, 5.7, 7.8, 6.3), (9.4, 5.7, 12.0, 6.3),
    ]
    scenes.append(sc)

    sc = Scene("eval-plaza", (0, 0, s, s))
    sc.circles = [(6.0, 6.0, 1.1)]
    sc.rects = [(1.5, 1.5, 2.5, 2.5), (9.5, 9.5, 10.5, 10.5)]
    scenes.append(sc)

    sc = Scene("eval-lshape", (0, 0, s, s))
    sc.rects = [(6.5, 0.0, 12.0, 5.5)]
    sc.circles = [(3.0, 8.5, 0.5), (9.0, 9.0, 0.5)]
    scenes.append(sc)

    sc = Scene("eval-scatter", (0, 0, s, s))
    sc.circles = [(2.5, 3.0, 0.45), (5.0, 8.5, 0.5), (8.5, 2.8, 0.4),
                  (9.3, 6.4, 0.45), (4.2, 5.2, 0.35)]
    sc.rects = [(6.2, 9.0, 7.4, 10.2), (1.2, 9.6, 2.4, 10.4)]
    scenes.append(sc)

    return scenes


def save_scenes(scenes, path):
    with open(path, "w") as f:
        json.dump({"scenes": [sc.to_dict() for sc in scenes]}, f, indent=1, sort_keys=True)


def load_scenes(path):
    with open(path) as f:
        data = json.load(f)
    return [Scene.from_dict(d) for d in data["scenes"]]
