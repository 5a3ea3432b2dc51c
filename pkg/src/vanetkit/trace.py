"""GPS trace ingestion, snapshot extraction and planar projection.

Input traces are CSV lines ``vehicle_id,timestamp,lon,lat`` with the
timestamp either in epoch seconds or ISO-8601.  A snapshot freezes every
vehicle at the record closest to a chosen instant and projects the
coordinates to a local planar frame in meters.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone

log = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0


class EmptyDatasetError(ValueError):
    """No valid record survived parsing/filtering."""


class EmptySnapshotError(ValueError):
    """No vehicle has a record inside the requested time window."""


@dataclass(frozen=True)
class GpsRecord:
    vehicle_id: str
    timestamp: float  # seconds since epoch
    lon: float        # degrees
    lat: float        # degrees


@dataclass(frozen=True)
class BoundingBox:
    lon_min: float
    lon_max: float
    lat_min: float
    lat_max: float

    def __post_init__(self):
        if not (self.lon_min < self.lon_max and self.lat_min < self.lat_max):
            raise ValueError(f"degenerate bounding box: {self}")

    def contains(self, lon: float, lat: float) -> bool:
        return (self.lon_min <= lon <= self.lon_max
                and self.lat_min <= lat <= self.lat_max)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.lon_min + self.lon_max) / 2.0,
                (self.lat_min + self.lat_max) / 2.0)


@dataclass
class VehicleSnapshot:
    """Per-vehicle planar positions at one instant.

    ``positions`` maps vehicle_id to (x, y) meters in the local frame
    anchored at ``origin`` (lon0, lat0).
    """

    instant: float
    positions: dict[str, tuple[float, float]]
    origin: tuple[float, float]

    def __len__(self) -> int:
        return len(self.positions)


def project(lon: float, lat: float, origin: tuple[float, float]) -> tuple[float, float]:
    """Equirectangular projection to meters relative to ``origin``.

    x scales longitude by cos(lat0); exact on the reference parallel and
    within <0.1% over a city-sized box, which keeps distances planar and
    spatial indexing trivial.
    """
    lon0, lat0 = origin
    x = EARTH_RADIUS_M * math.radians(lon - lon0) * math.cos(math.radians(lat0))
    y = EARTH_RADIUS_M * math.radians(lat - lat0)
    return x, y


def unproject(x: float, y: float, origin: tuple[float, float]) -> tuple[float, float]:
    """Analytic inverse of :func:`project`."""
    lon0, lat0 = origin
    lon = lon0 + math.degrees(x / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
    lat = lat0 + math.degrees(y / EARTH_RADIUS_M)
    return lon, lat


def _parse_timestamp(token: str) -> float:
    try:
        return float(token)
    except ValueError:
        pass
    dt = datetime.fromisoformat(token.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _parse_line(line: str) -> GpsRecord | None:
    parts = line.split(",")
    if len(parts) != 4:
        return None
    vid, ts_tok, lon_tok, lat_tok = (p.strip() for p in parts)
    if not vid:
        return None
    try:
        ts = _parse_timestamp(ts_tok)
        lon = float(lon_tok)
        lat = float(lat_tok)
    except ValueError:
        return None
    if not (math.isfinite(ts) and math.isfinite(lon) and math.isfinite(lat)):
        return None
    if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
        return None
    return GpsRecord(vid, ts, lon, lat)


def scan_trace(path, bbox: BoundingBox) -> tuple[list[GpsRecord], int]:
    """Read a trace file; returns (in-box records in file order, malformed line count).

    Blank lines are ignored.  Valid records outside ``bbox`` are dropped
    silently; they are not an error.
    """
    records: list[GpsRecord] = []
    malformed = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = _parse_line(line)
            if rec is None:
                malformed += 1
                continue
            if bbox.contains(rec.lon, rec.lat):
                records.append(rec)
    return records, malformed


def parse_trace(path, bbox: BoundingBox) -> list[GpsRecord]:
    """Parse a trace CSV, keeping well-formed records inside ``bbox``.

    Malformed lines are counted and logged as a warning, never fatal.
    Raises :class:`EmptyDatasetError` when nothing valid remains and
    ``OSError`` when the file cannot be read.
    """
    records, malformed = scan_trace(path, bbox)
    if malformed:
        log.warning("%s: skipped %d malformed line(s)", path, malformed)
    if not records:
        raise EmptyDatasetError(f"{path}: no valid record inside {bbox}")
    return records


def snapshot(records: list[GpsRecord], t: float, window: float,
             origin: tuple[float, float] | None = None) -> VehicleSnapshot:
    """Freeze each vehicle at its record nearest to instant ``t``.

    Vehicles without any record within ``|timestamp - t| <= window`` are
    dropped.  Ties on distance-to-t go to the earlier record, then file
    order.  ``origin`` defaults to the centroid of the selected records.
    """
    if window <= 0:
        raise ValueError("window must be > 0")
    best: dict[str, tuple[float, float, int, GpsRecord]] = {}
    for idx, rec in enumerate(records):
        dt = abs(rec.timestamp - t)
        if dt > window:
            continue
        key = (dt, rec.timestamp, idx)
        cur = best.get(rec.vehicle_id)
        if cur is None or key < cur[:3]:
            best[rec.vehicle_id] = (*key, rec)
    if not best:
        raise EmptySnapshotError(f"no vehicle has a record within {window}s of t={t}")
    chosen = [entry[3] for entry in best.values()]
    if origin is None:
        origin = (sum(r.lon for r in chosen) / len(chosen),
                  sum(r.lat for r in chosen) / len(chosen))
    positions = {r.vehicle_id: project(r.lon, r.lat, origin) for r in chosen}
    return VehicleSnapshot(instant=t, positions=positions, origin=origin)


def snapshot_to_csv(snap: VehicleSnapshot) -> str:
    lines = ["vehicle_id,x,y"]
    for vid in sorted(snap.positions):
        x, y = snap.positions[vid]
        lines.append(f"{vid},{x!r},{y!r}")
    return "\n".join(lines) + "\n"


def snapshot_to_json(snap: VehicleSnapshot) -> str:
    doc = {
        "instant": snap.instant,
        "origin": list(snap.origin),
        "positions": {vid: list(snap.positions[vid]) for vid in sorted(snap.positions)},
    }
    return json.dumps(doc, sort_keys=True, indent=1)


def snapshot_from_json(text: str) -> VehicleSnapshot:
    doc = json.loads(text)
    return VehicleSnapshot(
        instant=float(doc["instant"]),
        positions={vid: (float(xy[0]), float(xy[1]))
                   for vid, xy in doc["positions"].items()},
        origin=(float(doc["origin"][0]), float(doc["origin"][1])),
    )
