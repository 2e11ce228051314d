"""``safenav`` command line: build maps, plan missions, simulate and compare flights.

Exit codes: 0 on success, 2 when the inputs are unusable (missing files, bad
values, endpoints off the map), 1 for anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from safenav.errors import SafeNavError
from safenav.geodesy import GeoAnchor, GeoPoint
from safenav.mapbuild import (
    WeightConfig,
    build_weight_map,
    class_to_weights,
    classify_landuse,
    load_weight_map,
    save_weight_map,
)
from safenav.planner import plan_path, simplify_to_waypoints
from safenav.scenario import BUNDLED_CITIES, bundled_scenario, generate_scenario, load_scenario, save_scenario
from safenav.simulator import MODES, histogram_csv, run_mission
from safenav.tiles import FixtureTileProvider, StaticMapProvider, mercator_gsd, read_raster
from safenav.waypoints import export_waypoints

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2
UNDEFINED = "\u2014"  # printed where a ratio has no value


class InputError(SafeNavError):
    """Bad command-line input."""


def _latlon(text: str) -> GeoPoint:
    try:
        lat, lon = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LAT,LON, got {text!r}") from None
    return GeoPoint(lat, lon)


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _weight_config(args) -> WeightConfig:
    return WeightConfig(args.w_danger, args.w_neutral, args.w_safe)


# --------------------------------------------------------------------------
# build-map


def cmd_build_map(args) -> int:
    config = _weight_config(args)
    if args.roads or args.structures:
        if not (args.roads and args.structures and args.center and args.gsd):
            raise InputError("layer input needs --roads, --structures, --center and --gsd")
        for p in (args.roads, args.structures):
            if not Path(p).is_file():
                raise InputError(f"layer file not found: {p}")
        classes = classify_landuse(read_raster(args.roads), read_raster(args.structures))
        wm = class_to_weights(classes, config, GeoAnchor(args.center, args.gsd))
    else:
        if not (args.top_left and args.bottom_right and args.zoom is not None):
            raise InputError("tile input needs --top-left, --bottom-right and --zoom")
        if args.fixtures:
            provider = FixtureTileProvider(args.fixtures)
        else:
            provider = StaticMapProvider(size_px=args.tile_px // args.scale, scale=args.scale, key=args.api_key)
        gsd = args.gsd or mercator_gsd(args.top_left.lat, args.zoom, args.scale)
        wm = build_weight_map(
            provider, args.top_left, args.bottom_right, args.zoom, gsd, args.tile_px, args.overlap_px, config
        )
    pgm, meta = save_weight_map(wm, args.out)
    counts = {name: int((wm.weights == w).sum()) for name, w in
              (("danger", config.w_danger), ("neutral", config.w_neutral), ("safe", config.w_safe))}
    print(f"wrote {pgm} and {meta}: {wm.width}x{wm.height} px at {wm.gsd:.6g} m/px")
    print("cells " + " ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


# --------------------------------------------------------------------------
# plan


def cmd_plan(args) -> int:
    wm = load_weight_map(args.map)
    start, goal = wm.gps_to_cell(args.start), wm.gps_to_cell(args.goal)
    for name, c in (("start", start), ("goal", goal)):
        if not wm.contains(c):
            raise InputError(f"{name} {c} lies outside the {wm.width}x{wm.height} map")
    path = plan_path(wm, start, goal)
    waypoints = simplify_to_waypoints(path, args.tolerance_px)
    straight_m = math.hypot(goal[0] - start[0], goal[1] - start[1]) * wm.gsd
    ratio = path.total_length_m / straight_m if straight_m > 0 else 1.0
    for fmt, out in (("kml", args.kml), ("txt", args.txt)):
        if out:
            text = export_waypoints(waypoints, wm, args.altitude, args.velocity, fmt, args.acceptance_radius)
            Path(out).write_text(text, encoding="utf-8")
    print(f"path cost {path.total_cost:.6f}")
    print(f"path length {path.total_length_m:.3f} m (straight {straight_m:.3f} m)")
    print(f"overhead ratio {ratio:.4f}")
    print(f"waypoints {len(waypoints)} (from {len(path)} cells)")
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate / compare


def _scenario_from_args(args):
    if getattr(args, "bundled", None):
        try:
            scenario = bundled_scenario(args.bundled)
        except KeyError as exc:
            raise InputError(str(exc.args[0])) from None
    elif args.scenario:
        if not Path(args.scenario).is_file():
            raise InputError(f"scenario file not found: {args.scenario}")
        scenario = load_scenario(args.scenario)
    else:
        raise InputError("give a scenario file or --bundled NAME")
    changes = {}
    if args.alpha is not None:
        changes["alpha"] = args.alpha
    if args.velocities:
        changes["velocities"] = args.velocities
    if args.fps is not None:
        changes["fps"] = args.fps
    inflation = {k: v for k, v in (
        ("safety_margin_s", args.safety_margin), ("delta_s", args.delta),
        ("sigma_x_scale", args.sigma_x_scale), ("peak_multiplier", args.peak),
    ) if v is not None}
    if inflation:
        changes["inflation"] = replace(scenario.inflation, **inflation)
    camera = {k: v for k, v in (("hfov_deg", args.hfov), ("altitude_m", args.altitude)) if v is not None}
    if camera:
        changes["camera"] = replace(scenario.camera, **camera)
    scenario = replace(scenario, **changes)
    scenario.validate()
    return scenario


def cmd_simulate(args) -> int:
    if args.suite:
        return _print_suite()
    scenario = _scenario_from_args(args)
    velocity = args.velocity if args.velocity is not None else scenario.velocities[0]
    report = run_mission(scenario, args.mode or scenario.mode, velocity)
    out = Path(args.out)
    out.write_text(report.to_json(), encoding="utf-8")
    hist = Path(args.histogram) if args.histogram else out.with_name(out.stem + "_histogram.csv")
    hist.write_text(histogram_csv(report.histogram), encoding="utf-8")
    print(f"{report.scenario} {report.mode} at {report.velocity_mps:g} m/s")
    print(f"safety cost {report.safety_cost:.6f} over {report.objects_seen_count} observations")
    print(f"path {report.path_length_m:.1f} m in {report.flight_time_s:.1f} s, {report.replans} replans")
    print(f"wrote {out} and {hist}")
    return EXIT_OK


def _ratio(straight: float, dynamic: float) -> str:
    return UNDEFINED if dynamic == 0 else f"{straight / dynamic:.1f}"


def _table(rows) -> str:
    """Fixed-width table; ``rows[0]`` is the header."""
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(str(c).rjust(w) for c, w in zip(r, widths)) for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _compare_rows(scenario, velocities):
    header = ["scenario", "V m/s"]
    for m in MODES:
        header += [f"{m} seen", f"{m} C_g"]
    header.append("straight/dynamic")
    rows = [header]
    for v in velocities:
        reports = {m: run_mission(scenario, m, v) for m in MODES}
        row = [scenario.name, f"{v:g}"]
        for m in MODES:
            row += [reports[m].objects_seen_count, f"{reports[m].safety_cost:.4f}"]
        row.append(_ratio(reports["straight"].safety_cost, reports["dynamic"].safety_cost))
        rows.append(row)
    return rows


def cmd_compare(args) -> int:
    if args.suite:
        return _print_suite()
    scenario = _scenario_from_args(args)
    print(_table(_compare_rows(scenario, scenario.velocities)))
    return EXIT_OK


def _print_suite() -> int:
    rows = None
    for entry in BUNDLED_CITIES:
        scenario = bundled_scenario(entry.name)
        part = _compare_rows(scenario, scenario.velocities)
        rows = part if rows is None else rows + part[1:]
    print(_table(rows))
    return EXIT_OK


# --------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    if args.bundled:
        try:
            scenario = bundled_scenario(args.bundled)
        except KeyError as exc:
            raise InputError(str(exc.args[0])) from None
    else:
        scenario = generate_scenario(args.seed, name=args.name)
    path = save_scenario(scenario, args.out, args.name or scenario.name)
    print(f"wrote {path}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="safenav", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def weights(p):
        d = WeightConfig()
        p.add_argument("--w-danger", type=float, default=d.w_danger, help="weight of road cells")
        p.add_argument("--w-neutral", type=float, default=d.w_neutral, help="weight of background cells")
        p.add_argument("--w-safe", type=float, default=d.w_safe, help="weight of structure cells")

    p = sub.add_parser("build-map", help="build a PGM+JSON weight map from tiles or layer images")
    p.add_argument("--out", required=True, help="output stem; writes STEM.pgm and STEM.json")
    p.add_argument("--roads", help="stitched road-layer image (features dark on light)")
    p.add_argument("--structures", help="stitched structure-layer image")
    p.add_argument("--center", type=_latlon, help="LAT,LON of the layer images' centre pixel")
    p.add_argument("--gsd", type=float, help="metres per pixel (tile input: derived from --zoom if omitted)")
    p.add_argument("--top-left", type=_latlon, help="LAT,LON of the bounding box's north-west corner")
    p.add_argument("--bottom-right", type=_latlon, help="LAT,LON of the south-east corner")
    p.add_argument("--zoom", type=int, help="tile zoom level")
    p.add_argument("--fixtures", help="directory with an index.json of offline tiles")
    p.add_argument("--api-key", help="static-map API key (online provider only)")
    p.add_argument("--tile-px", type=int, default=640, help="tile edge in pixels")
    p.add_argument("--overlap-px", type=int, help="tile overlap in pixels (default 10%% of the edge)")
    p.add_argument("--scale", type=int, default=1, help="static-map scale factor (2 doubles pixel density)")
    weights(p)
    p.set_defaults(func=cmd_build_map)

    p = sub.add_parser("plan", help="plan a static path and export waypoints")
    p.add_argument("--map", required=True, help="weight-map stem (STEM.pgm + STEM.json)")
    p.add_argument("--start", type=_latlon, required=True, help="LAT,LON")
    p.add_argument("--goal", type=_latlon, required=True, help="LAT,LON")
    p.add_argument("--kml", help="write KML here")
    p.add_argument("--txt", help="write QGC WPL 110 text here")
    p.add_argument("--tolerance-px", type=float, default=1.0, help="waypoint simplification tolerance")
    p.add_argument("--altitude", type=float, default=50.0, help="flight altitude in metres")
    p.add_argument("--velocity", type=float, help="cruise velocity in m/s (KML only)")
    p.add_argument("--acceptance-radius", type=float, default=5.0, help="waypoint acceptance radius in metres")
    p.set_defaults(func=cmd_plan)

    def scenario_args(p):
        p.add_argument("scenario", nargs="?", help="scenario JSON file")
        p.add_argument("--bundled", help=f"bundled scenario: {', '.join(e.name for e in BUNDLED_CITIES)}")
        p.add_argument("--suite", action="store_true", help="run the whole bundled suite and print a table")
        p.add_argument("--alpha", type=float, help="safety cost scale")
        p.add_argument("--velocities", type=_floats, help="comma-separated UAV velocities in m/s")
        p.add_argument("--fps", type=float, help="replay frame rate")
        p.add_argument("--safety-margin", type=float, help="seconds of object travel in the along-track spread")
        p.add_argument("--delta", type=float, help="close-call time gap in seconds")
        p.add_argument("--sigma-x-scale", type=float, help="across-track spread per object width")
        p.add_argument("--peak", type=float, help="peak cost multiplier")
        p.add_argument("--hfov", type=float, help="camera horizontal field of view in degrees")
        p.add_argument("--altitude", type=float, help="flight altitude in metres")

    p = sub.add_parser("simulate", help="fly one mission and write its report")
    scenario_args(p)
    p.add_argument("--mode", choices=MODES, help="override the scenario's mode")
    p.add_argument("--velocity", type=float, help="UAV velocity (default: the scenario's first)")
    p.add_argument("--out", default="report.json", help="report JSON path")
    p.add_argument("--histogram", help="histogram CSV path (default: next to the report)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="all modes at every velocity, as a table")
    scenario_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("generate", help="write a synthetic city scenario to disk")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", help="scenario name and file stem")
    p.add_argument("--bundled", help="write a bundled scenario instead of a seeded one")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SafeNavError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"safenav {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - last-resort handler for the exit-code contract
        print(f"safenav {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
