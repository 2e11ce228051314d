"""Waypoint export for mapping software (KML) and ground control stations (QGC WPL text)."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

DEFAULT_ALTITUDE_M = 50.0
MAX_VELOCITY_MPS = 15.0
DEFAULT_ACCEPTANCE_RADIUS_M = 5.0

KML_NS = "http://www.opengis.net/kml/2.2"
QGC_HEADER = "QGC WPL 110"
MAV_FRAME_GLOBAL_RELATIVE_ALT = 3
MAV_CMD_NAV_WAYPOINT = 16


@dataclass(frozen=True)
class Waypoint:
    lat: float
    lon: float
    altitude_m: float = DEFAULT_ALTITUDE_M
    velocity_mps: float | None = None


@dataclass(frozen=True)
class WaypointList:
    waypoints: list[Waypoint]
    acceptance_radius_m: float = DEFAULT_ACCEPTANCE_RADIUS_M
    max_velocity_mps: float = MAX_VELOCITY_MPS

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise ValueError("a mission needs at least one waypoint")
        for wp in self.waypoints:
            if wp.velocity_mps is not None and not 0 < wp.velocity_mps <= self.max_velocity_mps:
                raise ValueError(f"waypoint velocity {wp.velocity_mps} outside (0, {self.max_velocity_mps}]")

    def __len__(self) -> int:
        return len(self.waypoints)


def cells_to_waypoints(cells, wmap, altitude_m=DEFAULT_ALTITUDE_M, velocity_mps=None, **kwargs) -> WaypointList:
    """Geo-locate raster cells through the map's anchor."""
    if not cells:
        raise ValueError("no cells to export")
    wps = []
    for cell in cells:
        p = wmap.cell_to_gps(cell)
        wps.append(Waypoint(p.lat, p.lon, altitude_m, velocity_mps))
    return WaypointList(wps, **kwargs)


def format_txt(mission: WaypointList) -> str:
    lines = [QGC_HEADER]
    for i, wp in enumerate(mission.waypoints):
        row = [
            str(i),
            "1" if i == 0 else "0",
            str(MAV_FRAME_GLOBAL_RELATIVE_ALT),
            str(MAV_CMD_NAV_WAYPOINT),
            "0", "0", "0", "0",
            f"{wp.lat:.10f}",
            f"{wp.lon:.10f}",
            f"{wp.altitude_m:.3f}",
            "1",
        ]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def parse_txt(text: str) -> WaypointList:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != QGC_HEADER:
        raise ValueError(f"missing {QGC_HEADER!r} header")
    wps = []
    for n, line in enumerate(lines[1:], start=2):
        cols = line.split("\t")
        if len(cols) != 12:
            raise ValueError(f"line {n}: expected 12 tab-separated columns, got {len(cols)}")
        wps.append(Waypoint(float(cols[8]), float(cols[9]), float(cols[10])))
    return WaypointList(wps)


def format_kml(mission: WaypointList, name: str = "mission") -> str:
    ET.register_namespace("", KML_NS)
    q = lambda tag: f"{{{KML_NS}}}{tag}"  # noqa: E731
    root = ET.Element(q("kml"))
    doc = ET.SubElement(root, q("Document"))
    ET.SubElement(doc, q("name")).text = name

    def coord(wp: Waypoint) -> str:
        return f"{wp.lon:.10f},{wp.lat:.10f},{wp.altitude_m:.3f}"

    track = ET.SubElement(doc, q("Placemark"))
    ET.SubElement(track, q("name")).text = "path"
    line = ET.SubElement(track, q("LineString"))
    ET.SubElement(line, q("altitudeMode")).text = "relativeToGround"
    ET.SubElement(line, q("coordinates")).text = " ".join(coord(wp) for wp in mission.waypoints)

    for i, wp in enumerate(mission.waypoints):
        pm = ET.SubElement(doc, q("Placemark"))
        ET.SubElement(pm, q("name")).text = f"WP{i}"
        data = ET.SubElement(pm, q("ExtendedData"))
        extra = {"acceptance_radius_m": f"{mission.acceptance_radius_m:g}"}
        if wp.velocity_mps is not None:
            extra["velocity_mps"] = f"{wp.velocity_mps:g}"
        for key, value in extra.items():
            d = ET.SubElement(data, q("Data"), name=key)
            ET.SubElement(d, q("value")).text = value
        point = ET.SubElement(pm, q("Point"))
        ET.SubElement(point, q("altitudeMode")).text = "relativeToGround"
        ET.SubElement(point, q("coordinates")).text = coord(wp)
    ET.indent(root)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def parse_kml(text: str) -> WaypointList:
    """Waypoints from the per-waypoint Point placemarks of :func:`format_kml` output."""
    root = ET.fromstring(text)
    ns = {"k": KML_NS}
    wps = []
    radius = DEFAULT_ACCEPTANCE_RADIUS_M
    for pm in root.iterfind(".//k:Placemark", ns):
        point = pm.find("k:Point/k:coordinates", ns)
        if point is None:
            continue
        lon, lat, alt = (float(v) for v in point.text.strip().split(","))
        extra = {d.get("name"): d.findtext("k:value", namespaces=ns) for d in pm.iterfind("k:ExtendedData/k:Data", ns)}
        velocity = float(extra["velocity_mps"]) if "velocity_mps" in extra else None
        radius = float(extra.get("acceptance_radius_m", radius))
        wps.append(Waypoint(lat, lon, alt, velocity))
    return WaypointList(wps, acceptance_radius_m=radius)


def export_waypoints(
    cells,
    wmap,
    altitude_m: float = DEFAULT_ALTITUDE_M,
    velocity_mps: float | None = None,
    fmt: str = "txt",
    acceptance_radius_m: float = DEFAULT_ACCEPTANCE_RADIUS_M,
) -> str:
    """File content for the waypoint cells in ``kml`` or ``txt`` format.

    The QGC text rows carry position and altitude only; velocity and the
    acceptance radius travel in the KML ``ExtendedData``.
    """
    mission = cells_to_waypoints(cells, wmap, altitude_m, velocity_mps, acceptance_radius_m=acceptance_radius_m)
    if fmt == "kml":
        return format_kml(mission)
    if fmt == "txt":
        return format_txt(mission)
    raise ValueError(f"unknown waypoint format {fmt!r}")
