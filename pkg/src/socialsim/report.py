"""Metric reports for run directories and paired ablations, plus agent-day replay."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .datasets import DatasetManifest, read_groups, read_reference
from .engine import OUTPUT_FILES
from .errors import InvalidInputError
from .experiment import ABLATION_MANIFEST, RUN_MANIFEST, read_manifest
from .metrics import (
    MetricReport,
    evaluate,
    extract_trips,
    mobility_ratio_trend,
    radius_of_gyration,
    social_trips,
    trajectories_from_records,
    visit_shares,
)
from .records import dumps, read_jsonl
from .world import TICKS_PER_DAY, iso_time

REPORT_JSON = "report.json"
REPORT_CSV = "metrics.csv"
COMPARISON_JSON = "comparison.json"
COMPARISON_CSV = "comparison.csv"


@dataclass
class RunData:
    path: Path
    manifest: dict
    trajectories: list[dict]
    decisions: list[dict]

    @property
    def label(self) -> str:
        return self.manifest.get("label", self.path.name)

    @property
    def geographic(self) -> bool:
        return self.manifest.get("coordinates") == "geographic"

    @property
    def profiles(self) -> dict[str, dict]:
        return {p["id"]: p for p in self.manifest.get("profiles", [])}

    def memory(self) -> list[dict]:
        path = self.path / OUTPUT_FILES["memory"]
        return read_jsonl(path, "memory") if path.exists() else []


def load_run(run_dir: str | Path) -> RunData:
    run_dir = Path(run_dir)
    if not (run_dir / RUN_MANIFEST).exists():
        raise InvalidInputError(f"{run_dir} is not a run directory (no {RUN_MANIFEST})")
    manifest = read_manifest(run_dir / RUN_MANIFEST, "run")
    try:
        traj = read_jsonl(run_dir / OUTPUT_FILES["trajectory"], "trajectory")
        dec = read_jsonl(run_dir / OUTPUT_FILES["decision"], "decision")
    except FileNotFoundError as exc:
        raise InvalidInputError(f"incomplete run directory {run_dir}: {exc.filename} missing") from None
    return RunData(run_dir, manifest, traj, dec)


def reference_from(manifests: Iterable[DatasetManifest], social: Mapping[str, float] | None = None) -> dict:
    """Reference inputs for :func:`~socialsim.metrics.evaluate` from ingested datasets."""
    by_kind = {m.kind: m for m in manifests}
    ref: dict[str, Any] = {}
    if "trajectory_reference" in by_kind:
        ref["trajectories"] = read_reference(by_kind["trajectory_reference"].path)
    if "group_profiles" in by_kind and "trajectories" in ref:
        groups = read_groups(by_kind["group_profiles"].path)
        geo = by_kind["trajectory_reference"].coordinates == "geographic"
        trajs = trajectories_from_records(ref["trajectories"], geo)
        members: dict[str, list[str]] = {}
        for aid, g in groups.items():
            members.setdefault(g, []).append(aid)
        ref["group_shares"] = {g: visit_shares(trajs, ids) for g, ids in sorted(members.items())}
    if social:
        ref["social"] = dict(social)
    return ref


def evaluate_run(run: RunData | str | Path, reference: Mapping[str, Any] | None = None) -> MetricReport:
    run = run if isinstance(run, RunData) else load_run(run)
    return evaluate(run.trajectories, run.decisions, run.profiles, reference, label=run.label, geographic=run.geographic)


def _finite(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, Mapping):
        return {k: _finite(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_finite(x) for x in v]
    return v


def flatten(report: MetricReport) -> list[tuple[str, str, Any]]:
    """``(metric, field, value)`` rows; nested fields are dotted, divergences get their own row."""
    rows = []

    def walk(metric: str, prefix: str, node: Any) -> None:
        if isinstance(node, Mapping):
            for k in node:
                walk(metric, f"{prefix}.{k}" if prefix else str(k), node[k])
        elif isinstance(node, (list, tuple)):
            for i, x in enumerate(node):
                walk(metric, f"{prefix}.{i}", x)
        else:
            rows.append((metric, prefix, _finite(node)))

    for e in report.entries:
        walk(e.name, "", e.generated)
        if e.reference is not None:
            walk(e.name, "reference", e.reference)
        if e.divergence is not None:
            rows.append((e.name, "jsd", e.divergence))
    return rows


def _csv_value(v: Any) -> str:
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def write_report(report: MetricReport, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": out / REPORT_JSON, "csv": out / REPORT_CSV}
    doc = {"schema": "socialsim.report", "version": "1.0", **_finite(report.to_dict())}
    paths["json"].write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with open(paths["csv"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("metric", "field", "value"))
        for m, f, v in flatten(report):
            w.writerow((m, f, _csv_value(v)))
    return paths


def comparison(reports: Sequence[MetricReport]) -> dict:
    """Side-by-side table keyed by ``metric.field`` with one column per run label."""
    labels = [r.label for r in reports]
    table: dict[str, dict[str, Any]] = {}
    for r in reports:
        for m, f, v in flatten(r):
            table.setdefault(f"{m}.{f}", {})[r.label] = v
    return {"labels": labels, "rows": [{"key": k, **{lab: table[k].get(lab) for lab in labels}} for k in table]}


def write_comparison(table: Mapping[str, Any], out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    paths = {"json": out / COMPARISON_JSON, "csv": out / COMPARISON_CSV}
    paths["json"].write_text(json.dumps({"schema": "socialsim.comparison", "version": "1.0", **table},
                                        indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with open(paths["csv"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("key", *table["labels"]))
        for row in table["rows"]:
            w.writerow((row["key"], *(_csv_value(row[lab]) for lab in table["labels"])))
    return paths


def _legend(ax) -> None:
    if ax.get_legend_handles_labels()[0]:
        ax.legend()


def plot_runs(runs: Sequence[RunData], out_dir: str | Path, reference: Mapping[str, Any] | None = None) -> dict[str, Path]:
    """Radius distribution, social-trip distance CDF and weekly mobility trend, one line per run."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:  # pragma: no cover - depends on the install
        raise InvalidInputError("plots need matplotlib (pip install socialsim[plot])") from exc
    import numpy as np

    out = Path(out_dir)
    series = [(r.label, trajectories_from_records(r.trajectories, r.geographic), r.decisions) for r in runs]
    if reference and reference.get("trajectories"):
        series.append(("reference", trajectories_from_records(reference["trajectories"]), None))
    paths = {}

    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.logspace(-1, 2, 21)
    for label, trajs, _ in series:
        rg = [radius_of_gyration(t) for t in trajs.values() if any(p.poi_id for p in t.points)]
        ax.hist(np.clip(rg, bins[0], bins[-1]), bins=bins, histtype="step", density=True, label=label)
    ax.set_xscale("log")
    ax.set_xlabel("radius of gyration (km)")
    ax.set_ylabel("density")
    _legend(ax)
    paths["distribution"] = out / "radius_distribution.png"
    fig.savefig(paths["distribution"], dpi=100, bbox_inches="tight")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, trajs, dec in series:
        if dec is None:
            continue
        d = np.sort([t.distance_km for t in social_trips(extract_trips(trajs, dec))])
        if d.size:
            ax.step(d, np.arange(1, d.size + 1) / d.size, where="post", label=label)
    ax.set_xlabel("social trip distance (km)")
    ax.set_ylabel("cumulative share")
    _legend(ax)
    paths["cdf"] = out / "social_trip_cdf.png"
    fig.savefig(paths["cdf"], dpi=100, bbox_inches="tight")
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, trajs, _ in series:
        try:
            ratios = mobility_ratio_trend(trajs)
        except InvalidInputError:
            continue
        ax.plot(range(1, len(ratios) + 1), ratios, marker="o", label=label)
    ax.set_xlabel("week")
    ax.set_ylabel("mobility ratio")
    _legend(ax)
    paths["trend"] = out / "weekly_trend.png"
    fig.savefig(paths["trend"], dpi=100, bbox_inches="tight")
    plt.close(fig)
    return paths


def evaluate_path(
    path: str | Path,
    reference: Mapping[str, Any] | None = None,
    out_dir: str | Path | None = None,
    *,
    plots: bool = False,
) -> dict:
    """Evaluate a run directory or an ablation directory (or its manifest file).

    Returns ``{"reports": {label: MetricReport}, "paths": {...}}``.
    """
    path = Path(path)
    if path.is_file() and path.name == ABLATION_MANIFEST:
        path = path.parent
    if (path / ABLATION_MANIFEST).exists():
        manifest = read_manifest(path / ABLATION_MANIFEST, "ablation")
        runs = [load_run(path / r["dir"]) for r in manifest["runs"]]
    else:
        manifest = None
        runs = [load_run(path)]
    out = Path(out_dir) if out_dir is not None else path
    out.mkdir(parents=True, exist_ok=True)
    reports, paths = {}, {}
    for run in runs:
        rep = evaluate_run(run, reference)
        reports[run.label] = rep
        target = out / run.label if manifest is not None else out
        paths[run.label] = write_report(rep, target)
    if manifest is not None:
        paths["comparison"] = write_comparison(comparison(list(reports.values())), out)
    if plots:
        paths["plots"] = plot_runs(runs, out, reference)
    return {"reports": reports, "paths": paths, "paired": manifest is not None}


# ------------------------------------------------------------------ replay

@dataclass
class ReplayEntry:
    tick: int
    time: str
    kind: str  # "tick" for a decision record, "memory" for a node written that day
    text: str


def _describe_tick(d: Mapping[str, Any], traj: Mapping[str, Any] | None) -> str:
    where = "in transit" if traj and traj.get("in_transit") else f"at {traj.get('poi_id')} ({traj.get('poi_category')})" if traj else "?"
    top = sorted(d["needs"].items(), key=lambda kv: -kv[1])[:2]
    parts = [where, "needs " + ", ".join(f"{k}={v:.2f}" for k, v in top)]
    if d.get("activated_need"):
        parts.append(f"activated {d['activated_need']}")
    if d.get("events"):
        parts.append("perceived: " + "; ".join(d["events"]))
    if d.get("planned"):
        if d.get("chosen"):
            score = f" (intention {d['intention']:.3f})" if d.get("intention") is not None else ""
            parts.append(f"chose {d['chosen']}{score} from {len(d.get('candidates') or [])} options")
        elif d.get("routine"):
            parts.append(f"routine {d['routine']}")
    if d.get("outcome"):
        parts.append(f"outcome: {d['outcome']}")
    if d.get("memory_writes"):
        parts.append(f"{len(d['memory_writes'])} memory writes")
    if d.get("warnings"):
        parts.append("warnings: " + "; ".join(d["warnings"]))
    return " | ".join(parts)


def replay(run_dir: str | Path, agent_id: str, day: int) -> list[ReplayEntry]:
    """One entry per decision record of the agent-day plus one per memory node written that day."""
    run = load_run(run_dir)
    known = {p["id"] for p in run.manifest.get("profiles", [])} or {d["agent_id"] for d in run.decisions}
    if agent_id not in known:
        raise InvalidInputError(f"unknown agent {agent_id!r}")
    if day < 0:
        raise InvalidInputError("day must be >= 0")
    lo, hi = day * TICKS_PER_DAY, (day + 1) * TICKS_PER_DAY
    traj = {r["tick"]: r for r in run.trajectories if r["agent_id"] == agent_id and lo <= r["tick"] < hi}
    entries = [
        ReplayEntry(d["tick"], d["time"], "tick", _describe_tick(d, traj.get(d["tick"])))
        for d in run.decisions
        if d["agent_id"] == agent_id and lo <= d["tick"] < hi
    ]
    if not entries:
        raise InvalidInputError(f"no records for agent {agent_id} on day {day}")
    for m in run.memory():
        if m["agent_id"] == agent_id and lo <= m["timestamp"] < hi:
            entries.append(ReplayEntry(m["timestamp"], iso_time(m["timestamp"]), "memory",
                                       f"[{m['store']}] {m['content']}"))
    entries.sort(key=lambda e: (e.tick, e.kind != "tick"))
    return entries


def format_replay(entries: Sequence[ReplayEntry]) -> str:
    lines = []
    for e in entries:
        label = "" if e.kind == "tick" else "memory: "
        lines.append(f"{e.time[11:16]} t={e.tick:<5} {label}{e.text}")
    return "\n".join(lines) + "\n"


def dump_entries(entries: Sequence[ReplayEntry]) -> str:
    return "".join(dumps(vars(e)) + "\n" for e in entries)
