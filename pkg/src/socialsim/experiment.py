"""Runs driven by a validated config: single simulations and paired ablations.

A run directory holds the four record files, a ``run.json`` manifest (the
resolved config, seeds and agent profiles) and daily checkpoints. An ablation
directory holds one run directory per variant plus ``ablation.json``, which
pairs every variant with the full model.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Iterable, Mapping

from .cognition import CognitionBackend
from .cognition.oracle import OracleBackend
from .config import RunConfig
from .engine import OUTPUT_FILES, RunResult, Simulation
from .errors import ConfigError, InvalidInputError
from .records import SCHEMA_PREFIX, SCHEMA_VERSION, check_header
from .world import load_world

RUN_MANIFEST = "run.json"
ABLATION_MANIFEST = "ablation.json"
AXES = {"M": "disable_motivation", "P": "disable_planning", "L": "disable_learning"}


def make_backend(cfg: RunConfig, environ: Mapping[str, str] | None = None) -> CognitionBackend:
    """Oracle by default. The remote backend reads only credentials from the environment."""
    if cfg.backend.kind == "oracle":
        return OracleBackend(cfg.backend_seed)
    from .cognition.remote import ENV_API_KEY, ENV_BASE_URL, ENV_MODEL, RemoteBackend

    env = os.environ if environ is None else environ
    base = cfg.backend.base_url or env.get(ENV_BASE_URL)
    model = cfg.backend.model or env.get(ENV_MODEL)
    if not base or not model:
        raise ConfigError("remote backend needs backend.base_url and backend.model",
                          ["backend: base_url and model are required for kind=remote"])
    return RemoteBackend(base, model, env.get(ENV_API_KEY), timeout=cfg.backend.timeout)


def _write_json(path: Path, doc: Mapping[str, Any]) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)


def read_manifest(path: str | Path, kind: str) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read {kind} manifest {path}: {exc}") from None
    check_header(doc, kind)
    return doc


def run_manifest(cfg: RunConfig, world) -> dict:
    return {
        "schema": SCHEMA_PREFIX + "run",
        "version": SCHEMA_VERSION,
        "label": cfg.ablation.label,
        "seed": cfg.seed,
        "backend_seed": cfg.backend_seed,
        "n_ticks": cfg.n_ticks,
        "coordinates": "geographic" if world.geographic else "planar",
        "outputs": dict(OUTPUT_FILES),
        "config": cfg.to_dict(),
        "profiles": [world.agents[aid].profile.to_dict() for aid in world.agent_ids],
    }


def simulate(
    cfg: RunConfig,
    output_dir: str | Path | None = None,
    *,
    backend: CognitionBackend | None = None,
    keep_records: bool = False,
) -> RunResult:
    out = Path(output_dir if output_dir is not None else cfg.output.dir)
    world = load_world(cfg)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / RUN_MANIFEST, run_manifest(cfg, world))
    sim = Simulation(
        world,
        backend or make_backend(cfg),
        out,
        mode=cfg.execution.mode,
        workers=cfg.execution.workers,
        checkpoint_every_days=cfg.output.checkpoint_every_days,
        keep_records=keep_records,
        meta={"label": cfg.ablation.label, "seed": cfg.seed},
    )
    return sim.run(cfg.n_ticks)


def resume(output_dir: str | Path, *, backend: CognitionBackend | None = None) -> RunResult:
    """Continue an interrupted run from its newest checkpoint up to the configured length."""
    from .config import parse_config

    out = Path(output_dir)
    manifest = read_manifest(out / RUN_MANIFEST, "run")
    cfg = parse_config(manifest["config"])
    sim = Simulation.resume(out, backend or make_backend(cfg), mode=cfg.execution.mode,
                            workers=cfg.execution.workers,
                            checkpoint_every_days=cfg.output.checkpoint_every_days)
    return sim.run(max(0, cfg.n_ticks - sim.world.clock), resume=True)


def parse_axes(axes: str | Iterable[str]) -> list[str]:
    items = [a for a in (axes.replace(",", "") if isinstance(axes, str) else axes)]
    bad = sorted(set(items) - set(AXES))
    if bad:
        raise ConfigError(f"unknown ablation axes {bad}; choose from M, P, L", [f"axes: unknown {bad}"])
    if not items:
        raise ConfigError("at least one ablation axis is required", ["axes: empty"])
    return sorted(set(items), key="MPL".index)


def ablate(cfg: RunConfig, axes: str | Iterable[str], output_dir: str | Path | None = None) -> dict:
    """Full model plus one run per axis, all on the same seeds. Returns the paired manifest."""
    order = parse_axes(axes)
    out = Path(output_dir if output_dir is not None else cfg.output.dir)
    base = cfg.with_overrides(**{f"ablation.{flag}": False for flag in AXES.values()})
    variants = [base] + [base.with_overrides(**{f"ablation.{AXES[a]}": True}) for a in order]
    runs = []
    for v in variants:
        label = v.ablation.label
        simulate(v, out / label)
        runs.append({"label": label, "dir": label, "seed": v.seed, "backend_seed": v.backend_seed,
                     "ablation": v.ablation.model_dump(mode="json")})
    manifest = {
        "schema": SCHEMA_PREFIX + "ablation",
        "version": SCHEMA_VERSION,
        "axes": order,
        "runs": runs,
        "pairs": [{"full": "full", "ablation": r["label"], "seed": r["seed"], "backend_seed": r["backend_seed"]}
                  for r in runs[1:]],
    }
    _write_json(out / ABLATION_MANIFEST, manifest)
    return manifest
