"""Weighted A* over a weight map.

The grid is 8-connected.  Moving between neighbouring cells costs the step's
euclidean length (1 or sqrt 2) times the mean of the two cell weights, so edge
costs are symmetric and the cheapest route from A to B is also the cheapest
from B to A.  The heuristic ``euclidean * w_safe`` never overestimates because
no cell weighs less than ``w_safe``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from safenav.errors import PlanningError, UnreachableGoalError

SQRT2 = math.sqrt(2.0)

# (dx, dy) in a fixed order; tie-breaking is done by the heap, not by this order
_NEIGHBOURS = np.array(
    [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)], dtype=np.int64
)


@dataclass(frozen=True)
class PixelPath:
    cells: list[tuple[int, int]]
    total_cost: float
    total_length_m: float

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def start(self) -> tuple[int, int]:
        return self.cells[0]

    @property
    def goal(self) -> tuple[int, int]:
        return self.cells[-1]

    def points(self) -> np.ndarray:
        """Cells as an (N, 2) float array of (x, y)."""
        return np.asarray(self.cells, dtype=np.float64).reshape(-1, 2)


def _step_length(a, b) -> float:
    dx, dy = abs(b[0] - a[0]), abs(b[1] - a[1])
    if max(dx, dy) != 1:
        raise PlanningError(f"cells {a} and {b} are not 8-neighbours")
    return SQRT2 if dx and dy else 1.0


def step_cost(wmap, from_cell, to_cell) -> float:
    """Cost of one move between 8-neighbours: length times mean endpoint weight."""
    length = _step_length(from_cell, to_cell)
    w = wmap.weights
    return length * (w[from_cell[1], from_cell[0]] + w[to_cell[1], to_cell[0]]) * 0.5


def validate_path(wmap, cells) -> None:
    if not cells:
        raise PlanningError("empty path")
    seen = set()
    for c in cells:
        if not (0 <= c[0] < wmap.weights.shape[1] and 0 <= c[1] < wmap.weights.shape[0]):
            raise PlanningError(f"cell {c} outside the map")
        if c in seen:
            raise PlanningError(f"cell {c} visited twice")
        seen.add(c)
    for a, b in zip(cells, cells[1:]):
        _step_length(a, b)


def path_cost(wmap, path: PixelPath | list) -> float:
    cells = path.cells if isinstance(path, PixelPath) else list(path)
    validate_path(wmap, cells)
    total = 0.0
    for a, b in zip(cells, cells[1:]):
        total += step_cost(wmap, a, b)
    return total


def path_length_px(cells) -> float:
    total = 0.0
    for a, b in zip(cells, cells[1:]):
        total += SQRT2 if (a[0] != b[0] and a[1] != b[1]) else 1.0
    return total


@njit(cache=True, inline="always")
def _before(f, h, ix, a, b):
    """Heap order: lower f, then lower h, then lower cell index."""
    if f[a] != f[b]:
        return f[a] < f[b]
    if h[a] != h[b]:
        return h[a] < h[b]
    return ix[a] < ix[b]


@njit(cache=True)
def _swap(f, h, ix, a, b):
    f[a], f[b] = f[b], f[a]
    h[a], h[b] = h[b], h[a]
    ix[a], ix[b] = ix[b], ix[a]


@njit(cache=True)
def _push(f, h, ix, size, fv, hv, iv):
    i = size
    f[i], h[i], ix[i] = fv, hv, iv
    while i > 0:
        up = (i - 1) >> 2
        if not _before(f, h, ix, i, up):
            break
        _swap(f, h, ix, i, up)
        i = up
    return size + 1


@njit(cache=True)
def _pop(f, h, ix, size):
    """Remove the root; returns the new size (the caller reads the root first)."""
    size -= 1
    f[0], h[0], ix[0] = f[size], h[size], ix[size]
    i = 0
    while True:
        first = 4 * i + 1
        if first >= size:
            break
        best = first
        for c in range(first + 1, min(first + 4, size)):
            if _before(f, h, ix, c, best):
                best = c
        if not _before(f, h, ix, best, i):
            break
        _swap(f, h, ix, i, best)
        i = best
    return size


@njit(cache=True)
def _astar(weights, sx, sy, gx, gy, h_scale, neighbours):
    height, width = weights.shape
    n = height * width
    g = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    closed = np.zeros(n, dtype=np.bool_)
    hcell = np.full(n, -1.0)  # heuristic, computed on first touch
    # array-backed 4-ary heap with lazy deletion; a cell is pushed at most 8 times
    cap = 8 * n + 1
    hf = np.empty(cap)
    hh = np.empty(cap)
    hi = np.empty(cap, dtype=np.int64)
    start = sy * width + sx
    goal = gy * width + gx
    g[start] = 0.0
    h0 = math.hypot(sx - gx, sy - gy) * h_scale
    size = _push(hf, hh, hi, 0, h0, h0, start)
    sqrt2 = math.sqrt(2.0)
    while size > 0:
        u = hi[0]
        size = _pop(hf, hh, hi, size)
        if closed[u]:
            continue
        closed[u] = True
        if u == goal:
            break
        uy = u // width
        ux = u - uy * width
        gu = g[u]
        wu = weights[uy, ux]
        for k in range(neighbours.shape[0]):
            vx = ux + neighbours[k, 0]
            vy = uy + neighbours[k, 1]
            if vx < 0 or vy < 0 or vx >= width or vy >= height:
                continue
            v = vy * width + vx
            if closed[v]:
                continue
            length = sqrt2 if (neighbours[k, 0] != 0 and neighbours[k, 1] != 0) else 1.0
            ng = gu + length * (wu + weights[vy, vx]) * 0.5
            if ng < g[v]:
                g[v] = ng
                parent[v] = u
                hv = hcell[v]
                if hv < 0:
                    hv = math.hypot(vx - gx, vy - gy) * h_scale
                    hcell[v] = hv
                size = _push(hf, hh, hi, size, ng + hv, hv, v)
    return parent, closed[goal], g[goal]


def plan_path(wmap, start, goal, h_scale: float | None = None) -> PixelPath:
    """Minimum-cost 8-connected path from ``start`` to ``goal`` (cells as ``(x, y)``).

    ``wmap`` is anything with a 2-D ``weights`` array, a ``config`` carrying
    ``w_safe`` and a ``gsd``: a :class:`~safenav.mapbuild.WeightMap` or a
    dynamically re-weighted map.  Among equal ``f`` the node with the lower
    heuristic is expanded first, then the lower row-major index.
    """
    weights = np.ascontiguousarray(wmap.weights, dtype=np.float64)
    height, width = weights.shape
    start = (int(start[0]), int(start[1]))
    goal = (int(goal[0]), int(goal[1]))
    for name, c in (("start", start), ("goal", goal)):
        if not (0 <= c[0] < width and 0 <= c[1] < height):
            raise PlanningError(f"{name} cell {c} outside the {width}x{height} map")
    if h_scale is None:
        h_scale = wmap.config.w_safe
    parent, reached, cost = _astar(weights, start[0], start[1], goal[0], goal[1], float(h_scale), _NEIGHBOURS)
    if not reached:
        raise UnreachableGoalError(f"no path from {start} to {goal}")
    cells = []
    u = goal[1] * width + goal[0]
    while u != -1:
        cells.append((int(u % width), int(u // width)))
        u = parent[u]
    cells.reverse()
    # g accumulates step costs from the start in path order, exactly as path_cost does
    return PixelPath(cells, float(cost), path_length_px(cells) * wmap.gsd)


def _segment_distance(p, a, b) -> float:
    ax, ay = a
    bx, by = b
    px, py = p
    vx, vy = bx - ax, by - ay
    seg2 = vx * vx + vy * vy
    if seg2 == 0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * vx + (py - ay) * vy) / seg2))
    return math.hypot(px - ax - t * vx, py - ay - t * vy)


def simplify_to_waypoints(path: PixelPath | list, tolerance_px: float) -> list[tuple[int, int]]:
    """Douglas-Peucker simplification keeping both endpoints.

    Every dropped cell lies within ``tolerance_px`` of the simplified polyline.
    """
    if tolerance_px < 0:
        raise ValueError("tolerance must be non-negative")
    cells = list(path.cells if isinstance(path, PixelPath) else path)
    if len(cells) <= 2:
        return cells
    keep = [False] * len(cells)
    keep[0] = keep[-1] = True
    stack = [(0, len(cells) - 1)]
    while stack:
        lo, hi = stack.pop()
        worst, worst_d = -1, -1.0
        for i in range(lo + 1, hi):
            d = _segment_distance(cells[i], cells[lo], cells[hi])
            if d > worst_d:
                worst, worst_d = i, d
        if worst_d > tolerance_px:
            keep[worst] = True
            stack.append((lo, worst))
            stack.append((worst, hi))
    return [c for c, k in zip(cells, keep) if k]


def max_deviation(cells, simplified) -> float:
    """Largest distance from any original cell to the simplified polyline."""
    if len(simplified) == 1:
        return max(math.hypot(c[0] - simplified[0][0], c[1] - simplified[0][1]) for c in cells)
    return max(
        min(_segment_distance(c, a, b) for a, b in zip(simplified, simplified[1:])) for c in cells
    )
