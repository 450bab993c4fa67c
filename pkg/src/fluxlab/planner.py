"""Global path planning: 8-connected A* on a 0.25 m occupancy grid.

The grid is rasterized from the scene's obstacles, dilated by the agent
radius. A* with the octile heuristic returns a grid-optimal path; a
line-of-sight shortcut pass then smooths it (never lengthens). Exact grid
costs stay available for oracle comparisons.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from .scenes import Scene

CELL = 0.25

# 8-connected moves and their costs
_MOVES = [(1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
          (1, 1, math.sqrt(2.0)), (1, -1, math.sqrt(2.0)),
          (-1, 1, math.sqrt(2.0)), (-1, -1, math.sqrt(2.0))]


class UnreachableError(Exception):
    """No collision-free grid path exists between the endpoints."""


class OccupancyGrid:
    """Boolean occupancy over the scene bounds; True = blocked for a disk agent."""

    def __init__(self, scene: Scene, radius: float, cell: float = CELL):
        self.cell = cell
        self.origin = (scene.bounds[0], scene.bounds[1])
        nx = max(1, int(round((scene.bounds[2] - scene.bounds[0]) / cell)))
        ny = max(1, int(round((scene.bounds[3] - scene.bounds[1]) / cell)))
        self.nx, self.ny = nx, ny
        cx = self.origin[0] + (np.arange(nx) + 0.5) * cell
        cy = self.origin[1] + (np.arange(ny) + 0.5) * cell
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        blocked = np.zeros((nx, ny), dtype=bool)
        for ox, oy, r in scene.circles:
            blocked |= (gx - ox) ** 2 + (gy - oy) ** 2 < (r + radius) ** 2
        for rx0, ry0, rx1, ry1 in scene.rects:
            dx = np.maximum(np.maximum(rx0 - gx, 0.0), gx - rx1)
            dy = np.maximum(np.maximum(ry0 - gy, 0.0), gy - ry1)
            blocked |= dx * dx + dy * dy < radius * radius
        # keep the dilated wall band blocked
        xmin, ymin, xmax, ymax = scene.bounds
        blocked |= (gx < xmin + radius) | (gx > xmax - radius)
        blocked |= (gy < ymin + radius) | (gy > ymax - radius)
        self.blocked = blocked
        self._xs, self._ys = cx, cy

    def cell_of(self, p):
        i = int(np.clip(np.floor((p[0] - self.origin[0]) / self.cell), 0, self.nx - 1))
        j = int(np.clip(np.floor((p[1] - self.origin[1]) / self.cell), 0, self.ny - 1))
        return i, j

    def center_of(self, ij):
        return (self._xs[ij[0]], self._ys[ij[1]])

    def is_free(self, ij):
        return not self.blocked[ij[0], ij[1]]

    def segment_free(self, a, b):
        """All cells touched by sampling a->b at half-cell spacing are free."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        n = max(2, int(math.ceil(float(np.hypot(*(b - a))) / (self.cell * 0.5))) + 1)
        for t in np.linspace(0.0, 1.0, n):
            if not self.is_free(self.cell_of(a + t * (b - a))):
                return False
        return True


def _octile(a, b):
    dx = abs(a[0] - b[0])
    dy = abs(a[1] - b[1])
    return (dx + dy) + (math.sqrt(2.0) - 2.0) * min(dx, dy)


def astar_cells(grid: OccupancyGrid, start, goal):
    """Grid-optimal 8-connected A* path (list of cells) and its cost.

    Raises UnreachableError if either endpoint cell is blocked or no path
    exists.
    """
    if not grid.is_free(start) or not grid.is_free(goal):
        raise UnreachableError(f"blocked endpoint {start}->{goal}")
    nx, ny = grid.nx, grid.ny
    blocked = grid.blocked
    g = np.full((nx, ny), np.inf)
    g[start] = 0.0
    came = {}
    closed = np.zeros((nx, ny), dtype=bool)
    heap = [(_octile(start, goal), 0.0, start)]
    while heap:
        f, gc, cur = heapq.heappop(heap)
        if closed[cur]:
            continue
        closed[cur] = True
        if cur == goal:
            path = [cur]
            while cur in came:
                cur = came[cur]
                path.append(cur)
            path.reverse()
            return path, float(g[goal])
        ci, cj = cur
        for di, dj, w in _MOVES:
            ni, nj = ci + di, cj + dj
            if ni < 0 or nj < 0 or ni >= nx or nj >= ny or blocked[ni, nj] or closed[ni, nj]:
                continue
            cand = gc + w
            if cand < g[ni, nj]:
                g[ni, nj] = cand
                came[(ni, nj)] = cur
                heapq.heappush(heap, (cand + _octile((ni, nj), goal), cand, (ni, nj)))
    raise UnreachableError(f"no path {start}->{goal}")


def smooth_path(grid: OccupancyGrid, points):
    """Greedy line-of-sight shortcutting; output length <= input length."""
    if len(points) <= 2:
        return list(points)
    out = [points[0]]
    i = 0
    while i < len(points) - 1:
        j = len(points) - 1
        while j > i + 1 and not grid.segment_free(points[i], points[j]):
            j -= 1
        out.append(points[j])
        i = j
    return out


def plan_global(scene: Scene, start, goal, radius, grid: OccupancyGrid | None = None,
                smooth: bool = True):
    """Collision-free polyline start->goal for a disk agent.

    Endpoints are kept exact; interior waypoints come from the smoothed grid
    path. Raises UnreachableError when no grid path exists.
    """
    if grid is None:
        grid = OccupancyGrid(scene, radius)
    s = grid.cell_of(start)
    t = grid.cell_of(goal)
    cells, _ = astar_cells(grid, s, t)
    pts = [tuple(map(float, start))] + [grid.center_of(c) for c in cells[1:-1]] + [tuple(map(float, goal))]
    if smooth:
        pts = smooth_path(grid, pts)
    return pts


def grid_path_cost(scene: Scene, start, goal, radius, grid: OccupancyGrid | None = None):
    """Grid-optimal cost in meters (A* cost scaled by the cell size)."""
    if grid is None:
        grid = OccupancyGrid(scene, radius)
    _, cost = astar_cells(grid, grid.cell_of(start), grid.cell_of(goal))
    return cost * grid.cell


def path_length(points):
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return 0.0
    return float(np.sum(np.hypot(*(pts[1:] - pts[:-1]).T)))
