"""Regenerate the offline tile fixtures (deterministic; run from any directory).

A 512 x 512 px world at zoom 19 is cut into a 2 x 2 grid of 288 px tiles that
overlap by 64 px.  Each tile is stored once per layer and listed in
``tiles/index.json`` with its SHA-256.
"""

import hashlib
import json
from pathlib import Path

import numpy as np
from PIL import Image, ImageFilter

from safenav.geodesy import GeoAnchor, GeoPoint, pixel_offset_to_gps
from safenav.mapbuild import plan_tile_grid
from safenav.tiles import mercator_gsd

HERE = Path(__file__).resolve().parent
TOP_LEFT = GeoPoint(39.7800, -84.0900)
ZOOM = 19
WORLD_PX = 512
TILE_PX = 288
OVERLAP_PX = 64


def world_layers(seed: int = 7):
    rng = np.random.default_rng(seed)
    noise = Image.fromarray(rng.integers(0, 256, (WORLD_PX, WORLD_PX), dtype=np.uint8))
    satellite = np.array(noise.filter(ImageFilter.GaussianBlur(3)), dtype=np.float64)
    satellite = np.clip((satellite - satellite.mean()) * 6 + 128, 0, 255).astype(np.uint8)
    roads = np.full((WORLD_PX, WORLD_PX), 255, dtype=np.uint8)
    roads[232:272, :] = 0
    roads[:, 300:336] = 0
    structures = np.full((WORLD_PX, WORLD_PX), 255, dtype=np.uint8)
    for x0, y0, x1, y1 in [(40, 40, 200, 180), (360, 60, 480, 200), (60, 320, 240, 470), (380, 300, 500, 440)]:
        structures[y0:y1, x0:x1] = 0
    structures[250:256, 100:140] = 0  # under the road: roads win
    return {"satellite": satellite, "roads": roads, "structures": structures}


def grid():
    gsd = mercator_gsd(TOP_LEFT.lat, ZOOM)
    bottom_right = pixel_offset_to_gps(GeoAnchor(TOP_LEFT, gsd), (WORLD_PX, WORLD_PX))
    return plan_tile_grid(TOP_LEFT, bottom_right, gsd, TILE_PX, OVERLAP_PX), bottom_right


def main() -> None:
    g, _ = grid()
    out = HERE / "tiles"
    out.mkdir(exist_ok=True)
    entries = []
    for name, world in world_layers().items():
        for k, center in enumerate(g.centers):
            j, i = divmod(k, g.cols)
            x0, y0 = i * g.step_px, j * g.step_px
            tile = world[y0 : y0 + TILE_PX, x0 : x0 + TILE_PX]
            fname = f"{name}_{j}_{i}.png"
            Image.fromarray(tile).save(out / fname, format="PNG", optimize=False)
            data = (out / fname).read_bytes()
            entries.append(
                {"lat": center.lat, "lon": center.lon, "zoom": ZOOM, "layer": name, "file": fname,
                 "sha256": hashlib.sha256(data).hexdigest()}
            )
    (out / "index.json").write_text(json.dumps({"tiles": entries}, indent=1) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
