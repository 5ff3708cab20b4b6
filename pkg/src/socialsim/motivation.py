"""Layered need dynamics.

Physiological needs follow a drive-reduction update (they accumulate on their
own and fall when an action satisfies them); higher tiers move only in response
to appraised events. All values live in ``[0, cap]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import InvalidInputError

DEFAULT_THRESHOLD = 0.6


class NeedTier(enum.IntEnum):
    """Maslow tiers, ordered lowest to highest."""

    PHYSIOLOGICAL = 0
    SAFETY = 1
    SOCIAL = 2
    ESTEEM = 3
    SELF_ACTUALIZATION = 4

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")

    @classmethod
    def parse(cls, value: "str | int | NeedTier") -> "NeedTier":
        if isinstance(value, NeedTier):
            return value
        if isinstance(value, int):
            return cls(value)
        key = str(value).strip().upper().replace("-", "_").replace(" ", "_")
        try:
            return cls[key]
        except KeyError:
            raise InvalidInputError(f"unknown need tier {value!r}") from None


@dataclass(frozen=True)
class NeedSpec:
    """Configuration of a single need."""

    tier: NeedTier
    cap: float = 1.0
    growth: float = 0.0
    threshold: float = DEFAULT_THRESHOLD
    initial: float | None = None


# Hunger saturates in roughly ten simulated hours at 30-minute ticks.
DEFAULT_NEEDS: dict[str, NeedSpec] = {
    "hunger": NeedSpec(NeedTier.PHYSIOLOGICAL, growth=0.05),
    "fatigue": NeedSpec(NeedTier.PHYSIOLOGICAL, growth=0.03),
    "safety": NeedSpec(NeedTier.SAFETY, initial=0.2),
    "social": NeedSpec(NeedTier.SOCIAL, initial=0.5),
    "esteem": NeedSpec(NeedTier.ESTEEM, initial=0.3),
    "self_actualization": NeedSpec(NeedTier.SELF_ACTUALIZATION, initial=0.2),
}


@dataclass(frozen=True)
class NeedState:
    """Per-agent need vector. Instances are immutable; updates return copies."""

    values: Mapping[str, float]
    caps: Mapping[str, float]
    growth: Mapping[str, float]
    tier_of: Mapping[str, NeedTier]

    def __post_init__(self):
        ids = set(self.values)
        if set(self.caps) != ids or set(self.tier_of) != ids:
            raise InvalidInputError("values, caps and tier_of must cover the same needs")
        for need, value in self.values.items():
            if not 0.0 <= value <= self.caps[need]:
                raise InvalidInputError(f"{need}={value} outside [0, {self.caps[need]}]")
        for need in self.growth:
            if self.tier_of.get(need) is not NeedTier.PHYSIOLOGICAL:
                raise InvalidInputError(f"growth defined for non-physiological need {need!r}")

    @classmethod
    def from_specs(cls, specs: Mapping[str, NeedSpec], values: Mapping[str, float] | None = None) -> "NeedState":
        values = dict(values or {})
        resolved = {}
        for need, spec in specs.items():
            v = values.get(need, spec.initial if spec.initial is not None else 0.0)
            resolved[need] = _clamp(float(v), spec.cap)
        return cls(
            values=resolved,
            caps={n: s.cap for n, s in specs.items()},
            growth={n: s.growth for n, s in specs.items() if s.tier is NeedTier.PHYSIOLOGICAL},
            tier_of={n: s.tier for n, s in specs.items()},
        )

    def __getitem__(self, need: str) -> float:
        return self.values[need]

    def needs_in(self, tier: NeedTier) -> list[str]:
        return sorted(n for n, t in self.tier_of.items() if t is tier)

    @property
    def physiological(self) -> list[str]:
        return self.needs_in(NeedTier.PHYSIOLOGICAL)

    def with_values(self, updates: Mapping[str, float]) -> "NeedState":
        merged = dict(self.values)
        merged.update(updates)
        return NeedState(merged, self.caps, self.growth, self.tier_of)

    def snapshot(self) -> dict[str, float]:
        return {k: self.values[k] for k in sorted(self.values)}


@dataclass(frozen=True)
class EventRecord:
    kind: str  # "active" | "passive"
    description: str
    timestamp: int
    source: str = "environment"
    tags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("active", "passive"):
            raise InvalidInputError(f"event kind must be active or passive, got {self.kind!r}")
        if self.timestamp < 0:
            raise InvalidInputError("event timestamp must be a valid tick")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "description": self.description,
            "timestamp": self.timestamp,
            "source": self.source,
            "tags": list(self.tags),
        }


@dataclass(frozen=True)
class EventAppraisal:
    """Signed need deltas attributed to one event."""

    event: EventRecord | None
    deltas: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class SatisfactionDelta:
    """Nonnegative reductions produced by the previous tick's completed action."""

    deltas: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for need, d in self.deltas.items():
            if d < 0:
                raise InvalidInputError(f"satisfaction for {need!r} must be >= 0, got {d}")

    def __add__(self, other: "SatisfactionDelta") -> "SatisfactionDelta":
        merged = dict(self.deltas)
        for k, v in other.deltas.items():
            merged[k] = merged.get(k, 0.0) + v
        return SatisfactionDelta(merged)

    def __bool__(self) -> bool:
        return any(self.deltas.values())


def _clamp(value: float, cap: float) -> float:
    return max(0.0, min(cap, value))


def step_physiological(state: NeedState, satisfied: SatisfactionDelta | Mapping[str, float] | None = None) -> NeedState:
    """Advance physiological needs by one tick.

    ``N_t = clamp(N_{t-1} + growth - satisfied, 0, cap)``; other tiers are
    returned untouched.
    """
    deltas = _deltas_of(satisfied)
    physio = set(state.physiological)
    for need, value in deltas.items():
        if need not in physio:
            raise InvalidInputError(f"satisfaction references non-physiological or unknown need {need!r}")
        if value < 0:
            raise InvalidInputError(f"satisfaction for {need!r} must be >= 0")
    updates = {
        need: _clamp(state.values[need] + state.growth.get(need, 0.0) - deltas.get(need, 0.0), state.caps[need])
        for need in physio
    }
    return state.with_values(updates)


def apply_event_appraisals(
    state: NeedState,
    active: Iterable[EventAppraisal] = (),
    passive: Iterable[EventAppraisal] = (),
    *,
    allow_physiological: bool = False,
) -> NeedState:
    """Sum appraised event deltas into subjective needs, clamping the total.

    Deltas may be negative. Clamping happens once on the summed value, not per
    delta. Physiological needs are rejected unless ``allow_physiological`` is set,
    which exists only for replaying backend appraisals that already report them.
    """
    totals: dict[str, float] = {}
    for appraisal in (*active, *passive):
        for need, delta in appraisal.deltas.items():
            tier = state.tier_of.get(need)
            if tier is None:
                raise InvalidInputError(f"appraisal references unknown need {need!r}")
            if tier is NeedTier.PHYSIOLOGICAL and not allow_physiological:
                raise InvalidInputError(f"physiological need {need!r} cannot be changed by events")
            totals[need] = totals.get(need, 0.0) + delta
    if not totals:
        return state
    return state.with_values({n: _clamp(state.values[n] + d, state.caps[n]) for n, d in totals.items()})


def activated_need(state: NeedState, thresholds: Mapping[str, float] | None = None) -> str | None:
    """The single need driving behaviour this tick, or ``None``.

    Lowest tier wins; within a tier the higher value wins, then the
    lexicographically smaller id.
    """
    best_key = None
    best = None
    for need, value in state.values.items():
        thr = DEFAULT_THRESHOLD if thresholds is None else thresholds[need]
        if value < thr:
            continue
        key = (int(state.tier_of[need]), -value, need)
        if best_key is None or key < best_key:
            best_key, best = key, need
    return best


def thresholds_of(specs: Mapping[str, NeedSpec]) -> dict[str, float]:
    return {n: s.threshold for n, s in specs.items()}


def _deltas_of(satisfied) -> Mapping[str, float]:
    if satisfied is None:
        return {}
    if isinstance(satisfied, SatisfactionDelta):
        return satisfied.deltas
    return satisfied
