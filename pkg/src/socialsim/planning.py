"""Need-to-action pipeline scored with the theory of planned behaviour.

An activated need yields candidate goals; each candidate is scored on
attitude, subjective norm and perceived control; the weighted sum is the
intention and the argmax is grounded into executable steps.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Container, Iterable, Mapping, Sequence

from .cognition import CognitionBackend, _warn, call
from .errors import CognitionError, ContractViolation, InvalidInputError
from .motivation import SatisfactionDelta

PHYSICAL = "physical"
REMOTE = "remote"
DEFAULT_MAX_CANDIDATES = 5

DEFAULT_SATISFACTION: dict[str, dict[str, float]] = {
    "eat": {"hunger": 0.6},
    "sleep": {"fatigue": 1.0},
    "rest": {"fatigue": 0.15},
}


@dataclass(frozen=True)
class BehaviorCandidate:
    id: str
    description: str
    target_poi: str | None = None
    modality: str = REMOTE
    category: str = "other"

    def __post_init__(self):
        if not self.description:
            raise InvalidInputError("candidate description must be non-empty")
        if self.modality not in (PHYSICAL, REMOTE):
            raise InvalidInputError(f"unknown modality {self.modality!r}")
        if self.modality == PHYSICAL and not self.target_poi:
            raise InvalidInputError("physical candidates need a target_poi")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "description": self.description,
            "target_poi": self.target_poi,
            "modality": self.modality,
            "category": self.category,
        }


REST_IN_PLACE = BehaviorCandidate("rest_in_place", "Rest in place", None, REMOTE, "idle")


@dataclass(frozen=True)
class TpbScores:
    attitude: float
    norm: float
    control: float
    rationale: str = "uninformed prior"

    def __post_init__(self):
        for name in ("attitude", "norm", "control"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0 or math.isnan(v):
                raise InvalidInputError(f"{name}={v} outside [0, 1]")

    def to_dict(self) -> dict:
        return {"attitude": self.attitude, "norm": self.norm, "control": self.control, "rationale": self.rationale}


@dataclass(frozen=True)
class TpbWeights:
    w_att: float = 1 / 3
    w_norm: float = 1 / 3
    w_ctrl: float = 1 / 3

    def __post_init__(self):
        ws = (self.w_att, self.w_norm, self.w_ctrl)
        if any(w < 0 or math.isnan(w) for w in ws) or sum(ws) <= 0:
            raise InvalidInputError("TPB weights must be nonnegative with a positive sum")

    def scaled(self, factor: float) -> "TpbWeights":
        return TpbWeights(self.w_att * factor, self.w_norm * factor, self.w_ctrl * factor)

    def to_dict(self) -> dict:
        return {"attitude": self.w_att, "norm": self.w_norm, "control": self.w_ctrl}


@dataclass(frozen=True)
class Intention:
    candidate: BehaviorCandidate
    score: float
    index: int = 0


@dataclass(frozen=True)
class ActionStep:
    verb: str
    target: str | None = None
    duration: int = 1

    def __post_init__(self):
        if self.duration < 1:
            raise InvalidInputError("step duration must be >= 1 tick")

    def to_dict(self) -> dict:
        return {"verb": self.verb, "target": self.target, "duration": self.duration}


@dataclass(frozen=True)
class ActionSequence:
    steps: tuple[ActionStep, ...]
    satisfies: SatisfactionDelta = field(default_factory=SatisfactionDelta)

    def __post_init__(self):
        if not self.steps:
            raise InvalidInputError("action sequence must have at least one step")

    @property
    def duration(self) -> int:
        return sum(s.duration for s in self.steps)

    def to_dict(self) -> dict:
        return {"steps": [s.to_dict() for s in self.steps], "satisfies": dict(self.satisfies.deltas)}


def fallback_sequence() -> ActionSequence:
    return ActionSequence((ActionStep("rest", None, 1),))


# ---------------------------------------------------------------- candidates

_VENUE_WORDS = {
    "restaurant": "restaurant",
    "cafe": "cafe",
    "coffee": "cafe",
    "grocery": "grocery",
    "supermarket": "grocery",
    "park": "park",
    "gym": "gym",
    "library": "library",
    "mall": "commerce",
    "shop": "commerce",
    "office": "workplace",
    "work": "workplace",
}
_REMOTE_WORDS = ("order", "delivery", "call", "online", "remote", "message", "video", "text ")
_CATEGORY_WORDS = (
    (("eat", "food", "cook", "dinner", "lunch", "breakfast", "meal", "restaurant", "snack"), "eat"),
    (("sleep", "bed", "nap"), "sleep"),
    (("rest", "relax"), "rest"),
    (("friend", "social", "meet", "call", "chat", "visit"), "social"),
    (("work", "office", "job"), "work"),
    (("supplies", "safe", "stock"), "safety"),
    (("park", "read", "library", "gym", "explore", "learn"), "leisure"),
)


def candidate_from_text(text: str, index: int, context: Mapping[str, Any]) -> BehaviorCandidate:
    """Best-effort structuring of a free-text candidate from a remote backend."""
    low = text.lower()
    category = next((cat for words, cat in _CATEGORY_WORDS if any(w in low for w in words)), "other")
    profile = context.get("profile") or {}
    nearby = context.get("nearby") or {}
    target = None
    if "home" in low and not any(w in low for w in _REMOTE_WORDS):
        target = profile.get("home_poi")
    else:
        for word, poi_cat in _VENUE_WORDS.items():
            if re.search(rf"\b{word}", low):
                if poi_cat == "workplace":
                    target = profile.get("work_poi")
                elif nearby.get(poi_cat):
                    target = nearby[poi_cat][0]["poi_id"]
                break
    remote = any(w in low for w in _REMOTE_WORDS) or target is None or target == context.get("location")
    return BehaviorCandidate(
        id=f"c{index}",
        description=text,
        target_poi=None if remote else target,
        modality=REMOTE if remote else PHYSICAL,
        category=category,
    )


def parse_candidates(items: Sequence[Any], context: Mapping[str, Any], limit: int) -> list[BehaviorCandidate]:
    out: list[BehaviorCandidate] = []
    seen: set[str] = set()
    for i, item in enumerate(items):
        try:
            if isinstance(item, str):
                cand = candidate_from_text(item, i, context)
            else:
                target = item.get("target_poi")
                modality = item.get("modality") or (PHYSICAL if target else REMOTE)
                cand = BehaviorCandidate(
                    id=item.get("id") or f"c{i}",
                    description=item["action"],
                    target_poi=target if modality == PHYSICAL else None,
                    modality=modality,
                    category=item.get("category") or "other",
                )
        except InvalidInputError:
            continue
        if cand.id in seen:
            cand = BehaviorCandidate(f"{cand.id}_{i}", cand.description, cand.target_poi, cand.modality, cand.category)
        seen.add(cand.id)
        out.append(cand)
        if len(out) >= limit:
            break
    return out


def generate_candidates(
    need: str,
    context: Mapping[str, Any],
    backend: CognitionBackend,
    *,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
    need_description: str | None = None,
    retries: int = 1,
) -> list[BehaviorCandidate]:
    """Candidate goals for the activated ``need``; never empty.

    Backend failures are retried; if nothing usable comes back the agent
    falls back to resting in place.
    """
    if need is None:
        raise ContractViolation("generate_candidates requires an activated need")
    ctx = {"need": need, "need_description": need_description or need.replace("_", " "), **context}
    try:
        response = call(backend, "generate_candidates", ctx, key=(need,), retries=retries)
        items = response.structured or []
    except CognitionError:
        items = []
    candidates = parse_candidates(items, context, max_candidates)
    if not candidates:
        _warn(backend, f"generate_candidates: no usable candidates for {need}; resting in place")
        return [REST_IN_PLACE]
    return candidates


# ------------------------------------------------------------------- scoring

def score_candidate(
    candidate: BehaviorCandidate,
    context: Mapping[str, Any],
    backend: CognitionBackend,
    *,
    memory_results: Sequence[str] | None = None,
    memory_hits: Sequence[Mapping[str, Any]] | None = None,
    memory_query: str | None = None,
) -> TpbScores:
    """Attitude, norm and control for one candidate, each in ``[0, 1]``.

    Out-of-range backend values arrive already clamped and flagged by the
    conformance layer. Unusable output yields the uninformed prior.
    """
    ctx = {
        "action_description": candidate.description,
        "candidate": candidate.to_dict(),
        "memory_hits": list(memory_hits or []),
        **context,
    }
    try:
        response = call(
            backend,
            "score_candidates",
            ctx,
            memory_results=list(memory_results or []),
            memory_queries=[memory_query] if memory_query else None,
            key=(candidate.id,),
        )
    except CognitionError:
        response = None
    if response is None or response.structured is None:
        return TpbScores(0.5, 0.5, 0.5, "backend unavailable; uninformed prior")
    rows = response.structured
    row = next((r for r in rows if r["action"] == candidate.description), rows[0])
    rationale = (row.get("reasoning") or "").strip() or "scored without stated reasoning"
    if not response.conforming:
        rationale += " [clamped]"
    return TpbScores(
        _unit(row["attitude"]), _unit(row["subjective_norm"]), _unit(row["perceived_control"]), rationale
    )


def _unit(v: float) -> float:
    return min(1.0, max(0.0, float(v)))


def restrict_control(scores: TpbScores, candidate: BehaviorCandidate, level: float) -> TpbScores:
    """Scale perceived control of travel-requiring candidates by ``1 - level``."""
    if candidate.modality != PHYSICAL or level <= 0:
        return scores
    return TpbScores(scores.attitude, scores.norm, scores.control * (1.0 - min(1.0, level)), scores.rationale)


def intention_score(scores: TpbScores, weights: TpbWeights) -> float:
    return weights.w_att * scores.attitude + weights.w_norm * scores.norm + weights.w_ctrl * scores.control


def select_action(
    candidates: Sequence[tuple[BehaviorCandidate, TpbScores]], weights: TpbWeights
) -> Intention:
    """Argmax of intention; ties go to the earliest candidate."""
    if not candidates:
        raise ContractViolation("select_action needs at least one candidate")
    best_i, best = 0, None
    for i, (cand, scores) in enumerate(candidates):
        s = intention_score(scores, weights)
        if best is None or s > best:
            best_i, best = i, s
    return Intention(candidates[best_i][0], best, best_i)


# ----------------------------------------------------------------- grounding

def satisfaction_for(category: str, table: Mapping[str, Mapping[str, float]], physiological: Iterable[str]) -> SatisfactionDelta:
    entry = table.get(category)
    if entry is None:
        entry = table.get(category.split("_", 1)[0], {})
    allowed = set(physiological)
    return SatisfactionDelta({k: float(v) for k, v in entry.items() if k in allowed})


def _parse_steps(items: Sequence[Any], candidate: BehaviorCandidate, context: Mapping[str, Any]) -> list[ActionStep]:
    profile = context.get("profile") or {}
    steps = []
    for i, item in enumerate(items):
        if isinstance(item, str):
            low = item.lower()
            target = None
            if "return home" in low or "go home" in low:
                target = profile.get("home_poi")
            elif "leave office" in low:
                target = None
            elif i == len(items) - 1:
                target = candidate.target_poi
            steps.append(ActionStep(item, target, 1))
        else:
            steps.append(ActionStep(item["verb"], item.get("target"), int(item.get("duration", 1))))
    return steps


def ground_action(
    intention: Intention,
    context: Mapping[str, Any],
    backend: CognitionBackend,
    *,
    known_pois: Container[str],
    satisfaction_table: Mapping[str, Mapping[str, float]] = DEFAULT_SATISFACTION,
    physiological: Iterable[str] = ("hunger", "fatigue"),
) -> ActionSequence:
    """Executable steps for the chosen candidate.

    Unresolvable targets trigger one relaxed re-grounding, then the in-place
    fallback. The choice itself is never revisited.
    """
    cand = intention.candidate
    satisfies = satisfaction_for(cand.category, satisfaction_table, physiological)
    if cand is REST_IN_PLACE or cand.category == "idle":
        return ActionSequence((ActionStep("rest", None, 1),), satisfies)
    for relaxed in (False, True):
        ctx = {"best_action": cand.description, "candidate": cand.to_dict(), "relaxed": relaxed, **context}
        try:
            response = call(backend, "action_sequence", ctx, key=(cand.id, relaxed), retries=0 if relaxed else 1)
        except CognitionError:
            continue
        if response.structured is None:
            continue
        try:
            steps = _parse_steps(response.structured, cand, context)
        except InvalidInputError:
            continue
        if relaxed:
            steps = [s if s.target is None or s.target in known_pois else ActionStep(s.verb, None, s.duration) for s in steps]
        if steps and all(s.target is None or s.target in known_pois for s in steps):
            return ActionSequence(tuple(steps), satisfies)
        _warn(backend, f"action_sequence: unresolvable target for {cand.id}; relaxed={relaxed}")
    return ActionSequence((ActionStep("rest", None, 1),), SatisfactionDelta())
