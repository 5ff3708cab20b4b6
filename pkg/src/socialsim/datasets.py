"""Ingestion of external tables into the canonical line-delimited form.

Three kinds are understood: reference trajectories (check-ins with a
timestamp), POI tables, and per-agent group profiles. Bad rows are rejected
with their 1-based data row number; good rows are normalised and written with
a versioned header.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import InvalidInputError
from .records import iter_jsonl, read_header, write_jsonl
from .world import EPOCH, TICK_MINUTES, Poi, iso_time

KINDS = ("trajectory_reference", "poi_table", "group_profiles")
COORDINATES = ("planar", "geographic")
INCOME_GROUPS = ("high", "low", "other")

# canonical CSV column order per kind
COLUMNS = {
    "trajectory_reference": ("agent_id", "timestamp", "poi_id", "poi_category", "x", "y"),
    "poi_table": ("id", "category", "x", "y"),
    "group_profiles": ("agent_id", "income_group"),
}
GEO_ALIASES = {"lat": "x", "lon": "y", "latitude": "x", "longitude": "y", "lng": "y"}


@dataclass
class DatasetManifest:
    kind: str
    path: str
    coordinates: str
    record_count: int
    source: str | None = None
    rejected: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown dataset kind {self.kind!r}")
        if self.coordinates not in COORDINATES:
            raise InvalidInputError(f"unknown coordinate system {self.coordinates!r}")

    @property
    def rejected_count(self) -> int:
        return len(self.rejected)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        manifest = cls(**doc)
        found = read_header(manifest.path).get("schema", "").split(".", 1)[-1]
        if found != manifest.kind:
            raise InvalidInputError(f"manifest declares {manifest.kind} but {manifest.path} holds {found}")
        return manifest


def _num(v: str) -> float:
    x = float(v)
    if not math.isfinite(x):
        raise ValueError("non-finite number")
    return x


def _coords(row: Mapping[str, str], coordinates: str) -> tuple[float, float]:
    x, y = _num(row["x"]), _num(row["y"])
    if coordinates == "geographic" and not (-90 <= x <= 90 and -180 <= y <= 180):
        raise ValueError(f"latitude/longitude out of range: {x}, {y}")
    return round(x, 6), round(y, 6)


def _tick(timestamp: str) -> int:
    try:
        when = datetime.fromisoformat(timestamp)
    except (TypeError, ValueError):
        raise ValueError(f"malformed timestamp {timestamp!r}") from None
    if when.tzinfo is not None:
        when = when.replace(tzinfo=None)
    minutes = (when - EPOCH).total_seconds() / 60
    if minutes < 0:
        raise ValueError(f"timestamp {timestamp} precedes the simulation epoch")
    return int(minutes // TICK_MINUTES)


def _read_rows(path: Path) -> tuple[list[str], list[dict]]:
    if path.suffix in (".jsonl", ".ndjson"):
        rows = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
        rows = [{k: "" if v is None else str(v) for k, v in r.items()} for r in rows]
        return (list(rows[0]) if rows else []), rows
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        return list(reader.fieldnames or []), rows


def _normalise_columns(fields: list[str], rows: list[dict], coordinates: str) -> list[dict]:
    if coordinates != "geographic":
        return rows
    out = []
    for r in rows:
        out.append({GEO_ALIASES.get(k, k): v for k, v in r.items()})
    return out


def _convert(kind: str, row: Mapping[str, str], coordinates: str) -> dict:
    missing = [c for c in COLUMNS[kind] if not (row.get(c) or "").strip()]
    if missing:
        raise ValueError(f"missing mandatory field(s): {', '.join(missing)}")
    if kind == "poi_table":
        x, y = _coords(row, coordinates)
        return {"id": row["id"].strip(), "category": row["category"].strip(), "x": x, "y": y}
    if kind == "group_profiles":
        group = row["income_group"].strip().lower()
        if group not in INCOME_GROUPS:
            raise ValueError(f"unknown income group {group!r}")
        return {"agent_id": row["agent_id"].strip(), "income_group": group}
    x, y = _coords(row, coordinates)
    tick = _tick(row["timestamp"].strip())
    return {
        "agent_id": row["agent_id"].strip(),
        "tick": tick,
        "time": iso_time(tick),
        "poi_id": row["poi_id"].strip(),
        "poi_category": row["poi_category"].strip(),
        "location": [x, y],
        "in_transit": False,
        "activated_need": None,
        "action_id": None,
        "category": None,
    }


def _key(kind: str, rec: Mapping[str, Any]) -> tuple:
    if kind == "trajectory_reference":
        return (rec["agent_id"], rec["tick"])
    if kind == "poi_table":
        return (rec["id"],)
    return (rec["agent_id"],)


def ingest(
    path: str | Path,
    kind: str,
    out_path: str | Path | None = None,
    *,
    coordinates: str = "planar",
) -> DatasetManifest:
    """Validate a CSV or JSONL table and write its canonical form.

    Rows missing mandatory fields, with malformed values, or duplicating an
    earlier key are rejected; the manifest lists each with its row number.
    """
    if kind not in KINDS:
        raise InvalidInputError(f"unknown dataset kind {kind!r}; expected one of {KINDS}")
    if coordinates not in COORDINATES:
        raise InvalidInputError(f"unknown coordinate system {coordinates!r}")
    src = Path(path)
    if not src.exists():
        raise InvalidInputError(f"dataset not found: {src}")
    fields, rows = _read_rows(src)
    rows = _normalise_columns(fields, rows, coordinates)
    out = Path(out_path) if out_path is not None else src.with_suffix(".canonical.jsonl")
    good, rejected, seen = [], [], set()
    for i, row in enumerate(rows, 1):
        try:
            rec = _convert(kind, row, coordinates)
        except (ValueError, KeyError) as exc:
            rejected.append({"row": i, "reason": str(exc)})
            continue
        key = _key(kind, rec)
        if key in seen:
            rejected.append({"row": i, "reason": f"duplicate key {key}"})
            continue
        seen.add(key)
        good.append(rec)
    good.sort(key=lambda r: _key(kind, r))
    write_jsonl(out, kind, good, coordinates=coordinates)
    manifest = DatasetManifest(kind, str(out), coordinates, len(good), str(src), rejected)
    manifest.save(out.with_name(out.name + ".manifest.json"))
    return manifest


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def export(canonical_path: str | Path, out_csv: str | Path) -> int:
    """Write a canonical file back out as CSV in canonical column order."""
    head = read_header(canonical_path)
    kind = head["schema"].split(".", 1)[1]
    if kind not in KINDS:
        raise InvalidInputError(f"{canonical_path} is not an ingested dataset ({kind})")
    n = 0
    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS[kind])
        for rec in iter_jsonl(canonical_path, kind):
            if kind == "trajectory_reference":
                row = [rec["agent_id"], rec["time"], rec["poi_id"], rec["poi_category"], *rec["location"]]
            else:
                row = [rec[c] for c in COLUMNS[kind]]
            w.writerow([_fmt(v) for v in row])
            n += 1
    return n


def read_pois(path: str | Path) -> list[Poi]:
    """POIs from a canonical file, or directly from a CSV table."""
    path = Path(path)
    if path.suffix == ".csv":
        _, rows = _read_rows(path)
        recs = []
        for i, r in enumerate(rows, 1):
            try:
                recs.append(_convert("poi_table", r, "planar"))
            except (ValueError, KeyError) as exc:
                raise InvalidInputError(f"{path} row {i}: {exc}") from None
    else:
        recs = list(iter_jsonl(path, "poi_table"))
    return [Poi(r["id"], r["category"], float(r["x"]), float(r["y"])) for r in recs]


def read_reference(path: str | Path) -> list[dict]:
    return list(iter_jsonl(path, "trajectory_reference"))


def read_groups(path: str | Path) -> dict[str, str]:
    return {r["agent_id"]: r["income_group"] for r in iter_jsonl(path, "group_profiles")}


def load_manifests(paths: Iterable[str | Path]) -> dict[str, DatasetManifest]:
    out = {}
    for p in paths:
        m = DatasetManifest.load(p)
        out[m.kind] = m
    return out
