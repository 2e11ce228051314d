"""Shared helpers: small weight maps and an independent shortest-path oracle."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from safenav.geodesy import GeoAnchor, GeoPoint
from safenav.mapbuild import LandUse, WeightConfig, class_to_weights

TESTS = Path(__file__).resolve().parent
FIXTURES = TESTS / "fixtures"
sys.path.insert(0, str(FIXTURES))

DAYTON = GeoPoint(39.78, -84.09)


def make_map(classes, gsd=1.0, center=DAYTON, config=None):
    classes = np.asarray(classes, dtype=np.uint8)
    return class_to_weights(classes, config or WeightConfig(), GeoAnchor(center, gsd))


def uniform_map(width, height, cls=LandUse.NEUTRAL, gsd=1.0):
    return make_map(np.full((height, width), cls, dtype=np.uint8), gsd)


def random_classes(rng, size=64, patches=12):
    """Neutral background with random rectangular Danger and Safe patches."""
    classes = np.full((size, size), LandUse.NEUTRAL, dtype=np.uint8)
    for _ in range(patches):
        x0, y0 = rng.integers(0, size, 2)
        w, h = rng.integers(2, size // 3, 2)
        classes[y0 : y0 + h, x0 : x0 + w] = rng.choice([LandUse.DANGER, LandUse.SAFE])
    return classes


def dijkstra_cost(weights, start, goal):
    """Cheapest 8-connected cost with scipy's Dijkstra over an explicit edge list.

    Edge weights are built here from scratch (length times mean endpoint
    weight) and share no code with the planner.
    """
    weights = np.asarray(weights, dtype=np.float64)
    h, w = weights.shape
    idx = np.arange(h * w).reshape(h, w)
    rows, cols, vals = [], [], []
    for dx, dy in [(1, 0), (0, 1), (1, 1), (1, -1)]:
        ys = slice(max(0, -dy), h - max(0, dy))
        xs = slice(0, w - dx)
        ys2 = slice(max(0, dy), h - max(0, -dy) if dy < 0 else h)
        xs2 = slice(dx, w)
        a, b = idx[ys, xs].ravel(), idx[ys2, xs2].ravel()
        length = math.sqrt(dx * dx + dy * dy)
        c = length * (weights[ys, xs].ravel() + weights[ys2, xs2].ravel()) / 2
        rows += [a, b]
        cols += [b, a]
        vals += [c, c]
    g = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(h * w, h * w)).tocsr()
    d = dijkstra(g, indices=start[1] * w + start[0])
    return float(d[goal[1] * w + goal[0]])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def fixture_tiles():
    return FIXTURES / "tiles"


# ---- acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

ACCEPTANCE: dict[int, str] = {}


def record(number, ok, detail):
    ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE[number])
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
