"""Tile providers and raster decoding.

Layers are requested as styled static-map images: ``satellite`` imagery, a
``roads`` layer drawing only roads, and a ``structures`` layer drawing only
buildings and water.  Features are drawn black on a light background.
"""

from __future__ import annotations

import hashlib
import io
import math
import json
import urllib.parse
import urllib.request
from pathlib import Path
from typing import Protocol

import numpy as np
from PIL import Image, UnidentifiedImageError

from safenav.errors import MissingFixtureError, ProviderError, RasterError
from safenav.geodesy import GeoPoint

LAYERS = ("satellite", "roads", "structures")

STATIC_MAP_URL = "http://maps.googleapis.com/maps/api/staticmap"

# ground metres per pixel at the equator for web-mercator zoom 0 (256 px world)
MERCATOR_GSD_ZOOM0 = 156543.03392804097

# Style strings selecting each layer on the static-map endpoint.
LAYER_STYLES = {
    "satellite": [
        "feature:poi|visibility:off",
        "feature:road|element:labels|visibility:off",
        "feature:transit|visibility:off",
        "element:labels|visibility:off",
    ],
    "roads": [
        "visibility:off",
        "feature:road|visibility:on",
        "element:labels|visibility:off",
        "element:geometry|color:0x000000",
    ],
    "structures": [
        "visibility:off",
        "feature:landscape|visibility:on",
        "feature:landscape|element:labels|visibility:off",
        "feature:water|visibility:on|color:0x000000",
        "feature:landscape.natural|visibility:off",
    ],
}


class TileProvider(Protocol):
    def get(self, center: GeoPoint, zoom: int, layer: str) -> bytes:
        """Encoded image bytes for one tile."""


def decode_raster(data: bytes) -> np.ndarray:
    """8-bit gray (H, W) or RGB (H, W, 3) array from PNG/PGM bytes."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode not in ("L", "RGB"):
                im = im.convert("L" if im.mode in ("1", "LA") else "RGB")
            return np.array(im, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise RasterError(f"malformed image data: {exc}") from exc


def read_raster(path) -> np.ndarray:
    return decode_raster(Path(path).read_bytes())


def write_raster(path, raster: np.ndarray) -> None:
    a = np.asarray(raster, dtype=np.uint8)
    fmt = "PPM" if Path(path).suffix.lower() in (".pgm", ".ppm") else "PNG"
    Image.fromarray(a).save(path, format=fmt)


def mercator_gsd(lat: float, zoom: int, scale: int = 1) -> float:
    """Ground sample distance (m/px) of a web-mercator tile at latitude ``lat``."""
    return MERCATOR_GSD_ZOOM0 * math.cos(math.radians(lat)) / (2**zoom * scale)


def tile_key(center: GeoPoint, zoom: int, layer: str) -> str:
    return f"{center.lat:.7f},{center.lon:.7f},{zoom},{layer}"


class FixtureTileProvider:
    """Offline provider backed by a directory with an ``index.json`` manifest.

    Manifest entries: ``{"lat", "lon", "zoom", "layer", "file", "sha256"}``; the
    checksum is of the file bytes and is verified on every read.
    """

    def __init__(self, root):
        self.root = Path(root)
        try:
            doc = json.loads((self.root / "index.json").read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ProviderError(f"no fixture manifest in {self.root}") from exc
        self.entries = {
            tile_key(GeoPoint(e["lat"], e["lon"]), e["zoom"], e["layer"]): e for e in doc["tiles"]
        }

    def get(self, center: GeoPoint, zoom: int, layer: str) -> bytes:
        entry = self.entries.get(tile_key(center, zoom, layer))
        if entry is None:
            raise MissingFixtureError(f"no fixture tile for {tile_key(center, zoom, layer)}")
        data = (self.root / entry["file"]).read_bytes()
        if "sha256" in entry and hashlib.sha256(data).hexdigest() != entry["sha256"]:
            raise ProviderError(f"checksum mismatch for fixture {entry['file']}")
        return data


class StaticMapProvider:
    """HTTP static-map client.  Not used by the test suite."""

    def __init__(self, size_px: int = 640, scale: int = 2, key: str | None = None, timeout: float = 30.0):
        self.size_px = size_px
        self.scale = scale
        self.key = key
        self.timeout = timeout

    def url(self, center: GeoPoint, zoom: int, layer: str) -> str:
        if layer not in LAYERS:
            raise ValueError(f"unknown layer {layer!r}")
        params = [
            ("center", f"{center.lat:.6f},{center.lon:.6f}"),
            ("zoom", str(zoom)),
            ("format", "png32"),
            ("sensor", "false"),
            ("size", f"{self.size_px}x{self.size_px}"),
            ("scale", str(self.scale)),
            ("maptype", "satellite" if layer == "satellite" else "roadmap"),
        ]
        params += [("style", s) for s in LAYER_STYLES[layer]]
        if self.key:
            params.append(("key", self.key))
        return STATIC_MAP_URL + "?" + urllib.parse.urlencode(params, safe=",|:")

    def get(self, center: GeoPoint, zoom: int, layer: str) -> bytes:
        try:
            with urllib.request.urlopen(self.url(center, zoom, layer), timeout=self.timeout) as resp:
                return resp.read()
        except OSError as exc:
            raise ProviderError(f"tile request failed: {exc}") from exc


def fetch_tile(provider: TileProvider, center: GeoPoint, zoom: int, layer: str) -> np.ndarray:
    if layer not in LAYERS:
        raise ValueError(f"unknown layer {layer!r}; expected one of {LAYERS}")
    return decode_raster(provider.get(center, zoom, layer))
