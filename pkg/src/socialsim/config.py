"""Run configuration: a single YAML (or JSON) document validated before any run."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Any, Literal, Mapping

import yaml
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .motivation import DEFAULT_NEEDS, NeedTier

_HHMM = re.compile(r"^([01]\d|2[0-3]):(00|30)$")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PoiConfig(_Strict):
    id: str
    category: str
    x: float
    y: float


class SyntheticCity(_Strict):
    n_pois: int = Field(50, ge=2)
    size_km: float = Field(20.0, gt=0)


class WorldConfig(_Strict):
    pois: list[PoiConfig] | None = None
    dataset: str | None = None
    synthetic: SyntheticCity | None = None
    coordinates: Literal["planar", "geographic"] = "planar"

    @model_validator(mode="after")
    def _one_source(self):
        given = [s for s in ("pois", "dataset", "synthetic") if getattr(self, s) is not None]
        if len(given) != 1:
            raise ValueError(f"exactly one of pois, dataset, synthetic is required (got {given or 'none'})")
        if self.pois is not None:
            ids = [p.id for p in self.pois]
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            if dupes:
                raise ValueError(f"duplicate POI ids: {dupes}")
        return self


class WeightsConfig(_Strict):
    attitude: float = Field(1 / 3, ge=0)
    norm: float = Field(1 / 3, ge=0)
    control: float = Field(1 / 3, ge=0)

    @model_validator(mode="after")
    def _positive(self):
        if self.attitude + self.norm + self.control <= 0:
            raise ValueError("TPB weights must have a positive sum")
        return self


class ProfileConfig(_Strict):
    id: str
    name: str
    age: int = Field(35, ge=0, le=120)
    health_status: str = "good"
    income_group: Literal["high", "low", "other"] = "other"
    home_poi: str
    work_poi: str | None = None
    social_ties: list[str] = []
    tpb_weights: WeightsConfig | None = None


class GeneratorConfig(_Strict):
    count: int = Field(20, ge=0)
    seed: int | None = None
    income_mix: dict[Literal["high", "low", "other"], float] = {"high": 0.5, "low": 0.5}
    ties_per_agent: int = Field(3, ge=0)
    employed_fraction: float = Field(1.0, ge=0, le=1)

    @field_validator("income_mix")
    @classmethod
    def _mix(cls, v):
        if not v or any(w < 0 for w in v.values()) or sum(v.values()) <= 0:
            raise ValueError("income_mix needs nonnegative weights with a positive sum")
        return v


class AgentsConfig(_Strict):
    profiles: list[ProfileConfig] | None = None
    generator: GeneratorConfig | None = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.profiles is None) == (self.generator is None):
            raise ValueError("exactly one of profiles, generator is required")
        if self.profiles is not None:
            ids = [p.id for p in self.profiles]
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            if dupes:
                raise ValueError(f"duplicate agent ids: {dupes}")
        return self


class NeedConfig(_Strict):
    tier: str
    cap: float = Field(1.0, gt=0)
    growth: float = Field(0.0, ge=0)
    threshold: float = Field(0.6, ge=0)
    initial: float | None = Field(None, ge=0)

    @field_validator("tier")
    @classmethod
    def _tier(cls, v):
        NeedTier.parse(v)
        return NeedTier.parse(v).name.lower()

    @model_validator(mode="after")
    def _growth_physio(self):
        if self.growth and NeedTier.parse(self.tier) is not NeedTier.PHYSIOLOGICAL:
            raise ValueError("growth is only allowed for physiological needs")
        if self.initial is not None and self.initial > self.cap:
            raise ValueError("initial value exceeds cap")
        return self


def _default_needs() -> dict[str, NeedConfig]:
    return {
        k: NeedConfig(tier=s.tier.name.lower(), cap=s.cap, growth=s.growth, threshold=s.threshold, initial=s.initial)
        for k, s in DEFAULT_NEEDS.items()
    }


class BackendConfig(_Strict):
    kind: Literal["oracle", "remote"] = "oracle"
    seed: int | None = None
    base_url: str | None = None
    model: str | None = None
    timeout: float = Field(60.0, gt=0)


class AblationConfig(_Strict):
    disable_motivation: bool = False
    disable_planning: bool = False
    disable_learning: bool = False
    random_need_probability: float = Field(0.25, ge=0, le=1)

    @property
    def label(self) -> str:
        off = [a for a, f in (("M", self.disable_motivation), ("P", self.disable_planning), ("L", self.disable_learning)) if f]
        return "full" if not off else "wo" + "".join(off)


class RestrictionStage(_Strict):
    start_day: int = Field(ge=0)
    level: float = Field(ge=0, le=1)


class EventConfig(_Strict):
    day: int = Field(ge=0)
    time: str = "09:00"
    description: str
    topic: str | None = None
    agents: list[str] | None = None

    @field_validator("time")
    @classmethod
    def _time(cls, v):
        if not _HHMM.match(v):
            raise ValueError("time must be HH:MM on a 30-minute boundary")
        return v


class RulesConfig(_Strict):
    speed_kmh: float = Field(20.0, gt=0)
    closure_failure: float = Field(0.3, ge=0, le=1)
    remote_failure: dict[Literal["high", "low", "other"], float] = {"high": 0.05, "low": 0.7, "other": 0.2}
    isolation_every: int = Field(4, ge=1)
    abstraction: bool = True


class OutputConfig(_Strict):
    dir: str = "runs/default"
    transcript: Literal["off", "summary", "full"] = "summary"
    checkpoint_every_days: int = Field(1, ge=1)


class ExecutionConfig(_Strict):
    mode: Literal["sequential", "concurrent"] = "sequential"
    workers: int = Field(4, ge=1)


class RunConfig(_Strict):
    seed: int = 0
    days: int | None = Field(None, ge=0)
    ticks: int | None = Field(None, ge=0)
    world: WorldConfig
    agents: AgentsConfig
    needs: dict[str, NeedConfig] = Field(default_factory=_default_needs)
    tpb_weights: WeightsConfig = WeightsConfig()
    backend: BackendConfig = BackendConfig()
    ablation: AblationConfig = AblationConfig()
    restrictions: list[RestrictionStage] = []
    events: list[EventConfig] = []
    satisfaction: dict[str, dict[str, float]] = {"eat": {"hunger": 0.6}, "sleep": {"fatigue": 1.0}, "rest": {"fatigue": 0.15}}
    rules: RulesConfig = RulesConfig()
    output: OutputConfig = OutputConfig()
    execution: ExecutionConfig = ExecutionConfig()
    _base_dir: str | None = PrivateAttr(None)

    @model_validator(mode="after")
    def _consistency(self):
        if self.days is not None and self.ticks is not None:
            raise ValueError("give days or ticks, not both")
        for cat, entry in self.satisfaction.items():
            for need, v in entry.items():
                if need not in self.needs:
                    raise ValueError(f"satisfaction[{cat}] names unknown need {need!r}")
                if NeedTier.parse(self.needs[need].tier) is not NeedTier.PHYSIOLOGICAL:
                    raise ValueError(f"satisfaction[{cat}] may only reduce physiological needs")
                if v < 0:
                    raise ValueError(f"satisfaction[{cat}][{need}] must be nonnegative")
        days = [s.start_day for s in self.restrictions]
        if days != sorted(days) or len(set(days)) != len(days):
            raise ValueError("restriction stages must have strictly increasing start_day")
        return self

    @property
    def n_ticks(self) -> int:
        if self.ticks is not None:
            return self.ticks
        return 48 * (self.days if self.days is not None else 7)

    @property
    def backend_seed(self) -> int:
        return self.seed if self.backend.seed is None else self.backend.seed

    def to_dict(self) -> dict:
        return self.model_dump(mode="json", exclude_none=True)

    def dump_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def with_overrides(self, **changes: Any) -> "RunConfig":
        """Copy with dotted-path overrides, e.g. ``{"ablation.disable_learning": True}``; revalidated."""
        data = self.model_dump(mode="json", exclude_none=True)
        for path, value in changes.items():
            if path in ("days", "ticks"):
                # the run length is given one way or the other
                data.pop("ticks" if path == "days" else "days", None)
            node = data
            *parents, leaf = path.split(".")
            for p in parents:
                node = node.setdefault(p, {})
            node[leaf] = value
        return parse_config(data, base_dir=self._base_dir)


def _format_errors(exc: ValidationError) -> list[str]:
    return [f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in exc.errors()]


def parse_config(data: Mapping[str, Any], *, base_dir: str | Path | None = None) -> RunConfig:
    """Validate a mapping; relative dataset paths resolve against ``base_dir``."""
    if not isinstance(data, Mapping):
        raise ConfigError("config must be a mapping", ["<root>: expected a mapping"])
    try:
        cfg = RunConfig.model_validate(dict(data))
    except ValidationError as exc:
        errors = _format_errors(exc)
        raise ConfigError("invalid config:\n  " + "\n  ".join(errors), errors) from None
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    if cfg.world.dataset is not None:
        path = Path(cfg.world.dataset)
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise ConfigError(f"world.dataset: path does not exist: {path}", [f"world.dataset: path does not exist: {path}"])
        cfg.world.dataset = str(path)
    cfg._base_dir = str(base)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", [f"<file>: {exc}"]) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}", [f"<file>: {exc}"]) from None
    return parse_config(data or {}, base_dir=path.parent)
