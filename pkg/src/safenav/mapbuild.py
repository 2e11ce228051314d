"""Geo-registered land-use weight maps.

A weight map is built from styled map layers: tiles are requested on a GPS grid
whose neighbours differ by a pure translation, registered against each other
with zero-normalised cross-correlation, pasted into one mosaic and finally
classified into three land-use classes which carry the traversal weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
from PIL import Image

from safenav.errors import FlatImageError, RasterError
from safenav.geodesy import (
    EARTH_RADIUS_M,
    GeoAnchor,
    GeoPoint,
    PixelOffset,
    gps_to_pixel_offset,
    pixel_offset_to_gps,
)
from safenav.tiles import fetch_tile

FEATURE_THRESHOLD = 128
DEFAULT_SEARCH_RADIUS = 32
MIN_OVERLAP_PX = 32


class LandUse(IntEnum):
    DANGER = 0
    NEUTRAL = 1
    SAFE = 2


@dataclass(frozen=True)
class WeightConfig:
    w_danger: float = 100.0
    w_neutral: float = 20.0
    w_safe: float = 5.0

    def __post_init__(self) -> None:
        if not 0 < self.w_safe <= self.w_neutral <= self.w_danger:
            raise ValueError(
                f"weights must satisfy 0 < safe <= neutral <= danger, got "
                f"{self.w_safe}, {self.w_neutral}, {self.w_danger}"
            )

    def lookup(self) -> np.ndarray:
        """Weight per class value, indexable by a class raster."""
        table = np.empty(len(LandUse))
        table[LandUse.DANGER] = self.w_danger
        table[LandUse.NEUTRAL] = self.w_neutral
        table[LandUse.SAFE] = self.w_safe
        return table


def raster_center(width: int, height: int) -> tuple[int, int]:
    """Pixel that carries a raster's anchor GPS position."""
    return width // 2, height // 2


@dataclass(frozen=True, eq=False)
class WeightMap:
    """Per-pixel traversal weights plus the land-use classes they came from.

    Cells are addressed as ``(x, y)``; arrays are indexed ``[y, x]``.  The anchor
    GPS point sits on pixel ``(width // 2, height // 2)``.
    """

    anchor: GeoAnchor
    classes: np.ndarray
    weights: np.ndarray
    config: WeightConfig = field(default_factory=WeightConfig)

    def __post_init__(self) -> None:
        if self.classes.ndim != 2 or self.classes.shape != self.weights.shape:
            raise RasterError("class and weight rasters must be 2-D with equal shape")
        if not np.all(self.weights > 0):
            raise ValueError("all weights must be positive")
        self.classes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def width(self) -> int:
        return self.classes.shape[1]

    @property
    def height(self) -> int:
        return self.classes.shape[0]

    @property
    def gsd(self) -> float:
        return self.anchor.gsd

    @property
    def center_px(self) -> tuple[int, int]:
        return raster_center(self.width, self.height)

    def contains(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def cell_to_gps(self, cell) -> GeoPoint:
        cx, cy = self.center_px
        return pixel_offset_to_gps(self.anchor, (cell[0] - cx, cell[1] - cy))

    def gps_to_px(self, point: GeoPoint) -> tuple[float, float]:
        off = gps_to_pixel_offset(self.anchor, point)
        cx, cy = self.center_px
        return cx + off.dx, cy + off.dy

    def gps_to_cell(self, point: GeoPoint) -> tuple[int, int]:
        x, y = self.gps_to_px(point)
        return int(round(x)), int(round(y))


# --------------------------------------------------------------------------
# Tile grid


@dataclass(frozen=True)
class TileGrid:
    """Row-major grid of tile centres covering a bounding box.

    ``origin`` is anchored on the bounding box's top-left corner and ``offsets``
    are the pixel offsets of every centre from it, so that the whole grid lives
    in one pixel frame.  Pixel ``tile_px // 2`` of a tile carries its centre.
    """

    centers: list[GeoPoint]
    offsets: list[PixelOffset]
    rows: int
    cols: int
    tile_px: int
    overlap_px: int
    origin: GeoAnchor

    @property
    def gsd(self) -> float:
        return self.origin.gsd

    @property
    def step_px(self) -> int:
        return self.tile_px - self.overlap_px

    @property
    def mosaic_size(self) -> tuple[int, int]:
        return (
            self.tile_px + (self.cols - 1) * self.step_px,
            self.tile_px + (self.rows - 1) * self.step_px,
        )

    def mosaic_origin_offset(self) -> tuple[float, float]:
        """Offset of mosaic pixel (0, 0) from the grid origin."""
        first = self.offsets[0]
        half = self.tile_px // 2
        return first.dx - half, first.dy - half


def _tiles_along(extent: float, tile_px: int, step: int) -> int:
    if extent <= tile_px:
        return 1
    return int(math.ceil((extent - tile_px) / step - 1e-9)) + 1


def plan_tile_grid(
    top_left: GeoPoint,
    bottom_right: GeoPoint,
    gsd: float,
    tile_px: int,
    overlap_px: int | None = None,
    earth_radius: float = EARTH_RADIUS_M,
) -> TileGrid:
    """Tile centres covering the box, neighbours overlapping by ``overlap_px``.

    ``overlap_px`` defaults to 10 % of the tile edge.  The grid is centred on the
    box so any excess coverage is split evenly between opposite sides.
    """
    if overlap_px is None:
        overlap_px = tile_px // 10
    if tile_px < 1 or not 0 <= overlap_px < tile_px:
        raise ValueError("need tile_px >= 1 and 0 <= overlap_px < tile_px")
    origin = GeoAnchor(top_left, gsd, earth_radius)
    extent = gps_to_pixel_offset(origin, bottom_right)
    if extent.dx <= 0 or extent.dy <= 0:
        raise ValueError("bounding box is degenerate or top-left is not north-west of bottom-right")
    step = tile_px - overlap_px
    cols = _tiles_along(extent.dx, tile_px, step)
    rows = _tiles_along(extent.dy, tile_px, step)
    margin_x = (tile_px + (cols - 1) * step - extent.dx) / 2
    margin_y = (tile_px + (rows - 1) * step - extent.dy) / 2
    half = tile_px // 2
    offsets, centers = [], []
    for j in range(rows):
        for i in range(cols):
            off = PixelOffset(-margin_x + half + i * step, -margin_y + half + j * step)
            offsets.append(off)
            centers.append(pixel_offset_to_gps(origin, off))
    return TileGrid(centers, offsets, rows, cols, tile_px, overlap_px, origin)


# --------------------------------------------------------------------------
# Normalised cross-correlation


def to_gray(raster: np.ndarray) -> np.ndarray:
    """Luminance of an 8-bit raster as float64 (ITU-R 601 weights)."""
    a = np.asarray(raster)
    if a.ndim == 2:
        return a.astype(np.float64)
    if a.ndim == 3 and a.shape[2] in (3, 4):
        return a[..., :3].astype(np.float64) @ np.array([0.299, 0.587, 0.114])
    raise RasterError(f"unsupported raster shape {a.shape}")


def _correlate(fa: np.ndarray, fb: np.ndarray, shape) -> np.ndarray:
    return np.fft.irfft2(fa * np.conj(fb), s=shape)


def _zncc_window(ref: np.ndarray, cand: np.ndarray, center: tuple[int, int], radius: int):
    """ZNCC for every shift within ``radius`` of ``center``.

    A shift ``(dx, dy)`` pairs ``cand[y, x]`` with ``ref[y - dy, x - dx]``.
    Returns ``(scores, dxs, dys)`` with ``scores[iy, ix]`` for shift
    ``(dxs[ix], dys[iy])``; degenerate overlaps score ``-inf``.
    """
    hr, wr = ref.shape
    hc, wc = cand.shape
    cx, cy = center
    dxs = np.arange(cx - radius, cx + radius + 1)
    dys = np.arange(cy - radius, cy + radius + 1)
    ow = np.minimum(wc, wr + dxs) - np.maximum(0, dxs)
    oh = np.minimum(hc, hr + dys) - np.maximum(0, dys)
    if ow.min() < MIN_OVERLAP_PX or oh.min() < MIN_OVERLAP_PX:
        raise RasterError(f"overlap below {MIN_OVERLAP_PX} px for some tested shift")

    # centring on the global means keeps the sums of squares well conditioned
    r = ref - ref.mean()
    c = cand - cand.mean()
    shape = (hr + hc, wr + wc)
    fr, fr2, fmr = (np.fft.rfft2(a, s=shape) for a in (r, r * r, np.ones_like(r)))
    fc, fc2, fmc = (np.fft.rfft2(a, s=shape) for a in (c, c * c, np.ones_like(c)))
    rows = dys % shape[0]
    cols = dxs % shape[1]
    pick = np.ix_(rows, cols)
    n = np.rint(_correlate(fmc, fmr, shape)[pick])
    s_c = _correlate(fc, fmr, shape)[pick]
    s_r = _correlate(fmc, fr, shape)[pick]
    s_cc = _correlate(fc2, fmr, shape)[pick]
    s_rr = _correlate(fmc, fr2, shape)[pick]
    s_cr = _correlate(fc, fr, shape)[pick]
    var_c = s_cc - s_c * s_c / n
    var_r = s_rr - s_r * s_r / n
    num = s_cr - s_c * s_r / n
    valid = (var_c > 1e-9 * n) & (var_r > 1e-9 * n)
    scores = np.full(n.shape, -np.inf)
    scores[valid] = num[valid] / np.sqrt(var_c[valid] * var_r[valid])
    return scores, dxs, dys


def zncc_at(ref: np.ndarray, cand: np.ndarray, dx: int, dy: int) -> float:
    """Direct ZNCC of the overlap for a single shift (same pairing as the search)."""
    hr, wr = ref.shape
    hc, wc = cand.shape
    x0, x1 = max(0, dx), min(wc, wr + dx)
    y0, y1 = max(0, dy), min(hc, hr + dy)
    if x1 - x0 < 1 or y1 - y0 < 1:
        raise RasterError("shift leaves no overlap")
    a = cand[y0:y1, x0:x1]
    b = ref[y0 - dy : y1 - dy, x0 - dx : x1 - dx]
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float((a * a).sum()) * float((b * b).sum()))
    if den == 0.0:
        raise FlatImageError("zero variance in the overlap")
    return float((a * b).sum()) / den


def _best_shift(ref, cand, center, radius) -> tuple[tuple[int, int], float]:
    ref = to_gray(ref)
    cand = to_gray(cand)
    if ref.std() == 0 or cand.std() == 0:
        raise FlatImageError("normalised cross-correlation undefined on a flat raster")
    scores, dxs, dys = _zncc_window(ref, cand, center, radius)
    if not np.isfinite(scores).any():
        raise FlatImageError("zero variance in the overlap for every tested shift")
    # FFT sums carry round-off; settle the winner with exact scores on the top few
    order = np.argsort(scores, axis=None, kind="stable")[::-1][:4]
    best, best_score = None, -np.inf
    for flat in order:
        iy, ix = np.unravel_index(flat, scores.shape)
        if not np.isfinite(scores[iy, ix]):
            continue
        shift = (int(dxs[ix]), int(dys[iy]))
        try:
            s = zncc_at(ref, cand, *shift)
        except FlatImageError:
            continue
        if s > best_score:
            best, best_score = shift, s
    if best is None:
        raise FlatImageError("zero variance in the overlap for every tested shift")
    return best, min(1.0, max(-1.0, best_score))


def ncc_align(reference, candidate, search_radius: int = DEFAULT_SEARCH_RADIUS) -> tuple[PixelOffset, float]:
    """Integer translation of ``candidate`` relative to ``reference``.

    The returned ``(dx, dy)`` satisfies ``candidate[y, x] ~ reference[y - dy, x - dx]``,
    i.e. it is how far the content moved.  The score is the maximal ZNCC.
    """
    (dx, dy), score = _best_shift(reference, candidate, (0, 0), search_radius)
    return PixelOffset(dx, dy), score


# --------------------------------------------------------------------------
# Stitching


def _check_tiles(grid: TileGrid, tiles) -> list[np.ndarray]:
    tiles = [np.asarray(t) for t in tiles]
    if len(tiles) != grid.rows * grid.cols:
        raise RasterError(f"expected {grid.rows * grid.cols} tiles, got {len(tiles)}")
    for t in tiles:
        if t.shape[:2] != (grid.tile_px, grid.tile_px):
            raise RasterError(f"tile shape {t.shape} does not match tile_px={grid.tile_px}")
        if t.shape[2:] != tiles[0].shape[2:]:
            raise RasterError("tiles have mixed channel counts")
    return tiles


def _neighbour_offset(prev, cur, step: int, overlap: int, radius: int, horizontal: bool) -> tuple[int, int]:
    """Offset of ``cur``'s origin relative to ``prev``'s origin."""
    if not horizontal:
        (oy, ox) = _neighbour_offset(prev.T, cur.T, step, overlap, radius, True)
        return ox, oy
    # only the strips that can overlap take part; shifts are in strip coordinates
    x0 = max(0, step - radius)
    ref = prev[:, x0:]
    cand = cur[:, : min(cur.shape[1], overlap + radius)]
    (dx, dy), _ = _best_shift(ref, cand, (x0 - step, 0), radius)
    return x0 - dx, -dy


def register_tiles(grid: TileGrid, tiles, search_radius: int = DEFAULT_SEARCH_RADIUS) -> list[tuple[int, int]]:
    """Mosaic position (top-left pixel) of every tile.

    Nominal positions follow the grid step; each tile is corrected by the NCC
    residual against its left neighbour (or the tile above for the first column).
    When the overlap is too thin to search, nominal positions are kept.
    """
    tiles = [to_gray(t) for t in _check_tiles(grid, tiles)]
    step, overlap = grid.step_px, grid.overlap_px
    radius = min(search_radius, overlap - MIN_OVERLAP_PX)
    positions: list[tuple[int, int]] = []
    for j in range(grid.rows):
        for i in range(grid.cols):
            k = j * grid.cols + i
            if k == 0:
                positions.append((0, 0))
                continue
            horizontal = i > 0
            prev_k = k - 1 if horizontal else k - grid.cols
            px, py = positions[prev_k]
            if radius < 0:
                ox, oy = (step, 0) if horizontal else (0, step)
            else:
                ox, oy = _neighbour_offset(tiles[prev_k], tiles[k], step, overlap, radius, horizontal)
            positions.append((px + ox, py + oy))
    return positions


def stitch(
    grid: TileGrid,
    tiles,
    positions: list[tuple[int, int]] | None = None,
    search_radius: int = DEFAULT_SEARCH_RADIUS,
) -> tuple[np.ndarray, GeoAnchor]:
    """Paste row-major tiles into one mosaic; later tiles win where they overlap.

    ``positions`` may come from :func:`register_tiles` run on another layer
    (styled road/structure layers are often too sparse to register on their own).
    """
    tiles = _check_tiles(grid, tiles)
    if positions is None:
        positions = register_tiles(grid, tiles, search_radius)
    width, height = grid.mosaic_size
    mosaic = np.zeros((height, width) + tiles[0].shape[2:], dtype=tiles[0].dtype)
    t = grid.tile_px
    for (px, py), tile in zip(positions, tiles):
        x0, y0 = max(0, px), max(0, py)
        x1, y1 = min(width, px + t), min(height, py + t)
        if x1 <= x0 or y1 <= y0:
            continue
        mosaic[y0:y1, x0:x1] = tile[y0 - py : y1 - py, x0 - px : x1 - px]
    ox, oy = grid.mosaic_origin_offset()
    cx, cy = raster_center(width, height)
    center = pixel_offset_to_gps(grid.origin, (ox + cx, oy + cy))
    return mosaic, GeoAnchor(center, grid.gsd, grid.origin.earth_radius)


# --------------------------------------------------------------------------
# Land use and weights


def feature_mask(layer) -> np.ndarray:
    """Pixels where a styled layer draws a feature (dark on light)."""
    return to_gray(layer) < FEATURE_THRESHOLD


def classify_landuse(road_layer, structure_layer) -> np.ndarray:
    """Class raster: roads are Danger, else structures are Safe, else Neutral."""
    roads = feature_mask(road_layer)
    structures = feature_mask(structure_layer)
    if roads.shape != structures.shape:
        raise RasterError(f"layer shapes differ: {roads.shape} vs {structures.shape}")
    classes = np.full(roads.shape, LandUse.NEUTRAL, dtype=np.uint8)
    classes[structures] = LandUse.SAFE
    classes[roads] = LandUse.DANGER
    return classes


def class_to_weights(classes: np.ndarray, config: WeightConfig, anchor: GeoAnchor) -> WeightMap:
    classes = np.array(classes, dtype=np.uint8)
    if classes.ndim != 2 or classes.size == 0:
        raise RasterError("class raster must be a non-empty 2-D array")
    if classes.max() > max(LandUse):
        raise RasterError(f"unknown class value {int(classes.max())}")
    return WeightMap(anchor, classes, config.lookup()[classes], config)


def build_weight_map(
    provider,
    top_left: GeoPoint,
    bottom_right: GeoPoint,
    zoom: int,
    gsd: float,
    tile_px: int,
    overlap_px: int | None = None,
    config: WeightConfig | None = None,
    search_radius: int = DEFAULT_SEARCH_RADIUS,
) -> WeightMap:
    """Fetch, register, stitch and classify every layer over the bounding box.

    Registration runs on the textured satellite layer and the road and
    structure layers are pasted at the same positions.
    """
    grid = plan_tile_grid(top_left, bottom_right, gsd, tile_px, overlap_px)
    layers = {
        name: [fetch_tile(provider, c, zoom, name) for c in grid.centers]
        for name in ("satellite", "roads", "structures")
    }
    positions = register_tiles(grid, layers["satellite"], search_radius)
    roads, anchor = stitch(grid, layers["roads"], positions)
    structures, _ = stitch(grid, layers["structures"], positions)
    return class_to_weights(classify_landuse(roads, structures), config or WeightConfig(), anchor)


# --------------------------------------------------------------------------
# On-disk format: <stem>.pgm (P5 class raster) + <stem>.json (metadata)


def weight_map_paths(stem) -> tuple[Path, Path]:
    stem = Path(stem)
    if stem.suffix in (".pgm", ".json"):
        stem = stem.with_suffix("")
    return stem.with_suffix(".pgm"), stem.with_suffix(".json")


def save_weight_map(wm: WeightMap, stem) -> tuple[Path, Path]:
    pgm, meta = weight_map_paths(stem)
    pgm.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(wm.classes), mode="L").save(pgm, format="PPM")
    doc = {
        "center_lat": wm.anchor.center.lat,
        "center_lon": wm.anchor.center.lon,
        "gsd_m_per_px": wm.anchor.gsd,
        "width": wm.width,
        "height": wm.height,
        "weights": {
            "danger": wm.config.w_danger,
            "neutral": wm.config.w_neutral,
            "safe": wm.config.w_safe,
        },
    }
    if wm.anchor.earth_radius != EARTH_RADIUS_M:
        doc["earth_radius_m"] = wm.anchor.earth_radius
    meta.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return pgm, meta


def load_weight_map(stem) -> WeightMap:
    pgm, meta = weight_map_paths(stem)
    doc = json.loads(meta.read_text(encoding="utf-8"))
    with Image.open(pgm) as im:
        if im.mode != "L":
            raise RasterError(f"{pgm}: expected 8-bit grayscale PGM, got mode {im.mode}")
        classes = np.array(im, dtype=np.uint8)
    if classes.shape != (doc["height"], doc["width"]):
        raise RasterError(f"{pgm}: raster is {classes.shape[::-1]}, metadata says {doc['width']}x{doc['height']}")
    w = doc["weights"]
    config = WeightConfig(w_danger=w["danger"], w_neutral=w["neutral"], w_safe=w["safe"])
    anchor = GeoAnchor(
        GeoPoint(doc["center_lat"], doc["center_lon"]),
        doc["gsd_m_per_px"],
        doc.get("earth_radius_m", EARTH_RADIUS_M),
    )
    return class_to_weights(classes, config, anchor)
