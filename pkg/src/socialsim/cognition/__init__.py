"""Cognition backends and the operations that consult them.

Every call goes through :func:`call`, which validates the structured output
against the template schema, clamps out-of-range scores, and retries once on
nonconforming output before the caller falls back to defaults.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from ..errors import CognitionError
from ..motivation import EventAppraisal, EventRecord, NeedState, NeedTier
from .prompts import (
    TEMPLATE_NAMES,
    PromptTemplate,
    conform,
    extract_json,
    get_template,
    load_templates,
    render_prompt,
)

log = logging.getLogger("socialsim.cognition")

BASIC_NEED_DEFAULTS = {"hunger": 0.3, "fatigue": 0.2}
HIGH_NEED_PRIOR = 0.5


@dataclass(frozen=True)
class CognitionRequest:
    template: str
    context: Mapping[str, Any]
    memory_results: Sequence[str] | None = None
    memory_queries: Sequence[str] | None = None
    key: tuple = ()


@dataclass
class CognitionResponse:
    structured: Any
    raw: str
    conforming: bool
    issues: list[str] = field(default_factory=list)


def response_from_raw(template: str, raw: str) -> CognitionResponse:
    try:
        doc = extract_json(raw)
    except ValueError as exc:
        return CognitionResponse(None, raw, False, [str(exc)])
    result = conform(template, doc)
    return CognitionResponse(result.structured, raw, result.conforming, result.issues)


class CognitionBackend(ABC):
    """Anything that can answer a :class:`CognitionRequest`."""

    @abstractmethod
    def respond(self, request: CognitionRequest) -> CognitionResponse:
        ...

    def close(self) -> None:
        pass


class CognitionSession(CognitionBackend):
    """Per agent-tick view of a backend.

    Stamps request keys with the agent and tick so seeded backends stay
    order-independent, and buffers transcript entries plus warnings so they
    can be flushed at the tick barrier in a deterministic order.
    """

    def __init__(self, backend: CognitionBackend, agent_id: str, tick: int, transcript: str = "summary"):
        self.backend = backend
        self.agent_id = agent_id
        self.tick = tick
        self.transcript_mode = transcript
        self.entries: list[dict] = []
        self.warnings: list[str] = []

    def respond(self, request: CognitionRequest) -> CognitionResponse:
        stamped = CognitionRequest(
            request.template,
            request.context,
            request.memory_results,
            request.memory_queries,
            (self.agent_id, self.tick, request.template, *request.key),
        )
        response = self.backend.respond(stamped)
        if self.transcript_mode != "off":
            entry = {
                "agent_id": self.agent_id,
                "tick": self.tick,
                "template": request.template,
                "key": [str(k) for k in request.key],
                "conforming": response.conforming,
                "issues": list(response.issues),
            }
            if self.transcript_mode == "full":
                entry["prompt"] = render_prompt(
                    request.template, _renderable(request), request.memory_results, request.memory_queries
                )
                entry["raw"] = response.raw
            self.entries.append(entry)
        return response

    def warn(self, message: str) -> None:
        self.warnings.append(message)
        log.warning("%s@%d: %s", self.agent_id, self.tick, message)


def _renderable(request: CognitionRequest) -> Mapping[str, Any]:
    """Context with defaults for any placeholder the caller left out."""
    tpl = get_template(request.template)
    ctx = dict(request.context)
    for var in tpl.placeholders:
        if var not in ctx and var != tpl.retrieval_variable:
            ctx[var] = ""
    if tpl.retrieval_variable and tpl.retrieval_variable not in ctx and request.memory_results is None:
        ctx[tpl.retrieval_variable] = "(no relevant memories)"
    return ctx


def _warn(backend: CognitionBackend, message: str) -> None:
    if isinstance(backend, CognitionSession):
        backend.warn(message)
    else:
        log.warning(message)


def call(
    backend: CognitionBackend,
    template: str,
    context: Mapping[str, Any],
    *,
    memory_results: Sequence[str] | None = None,
    memory_queries: Sequence[str] | None = None,
    key: tuple = (),
    retries: int = 1,
) -> CognitionResponse:
    """Issue a request, retrying on failure or unusable output.

    Returns the last response; ``structured`` is ``None`` if every attempt was
    unusable. Raises :class:`CognitionError` only if every attempt raised.
    """
    last: CognitionResponse | None = None
    error: CognitionError | None = None
    for attempt in range(retries + 1):
        request = CognitionRequest(template, context, memory_results, memory_queries, (*key, attempt) if attempt else key)
        try:
            response = backend.respond(request)
        except CognitionError as exc:
            error = exc
            _warn(backend, f"{template}: backend failure ({exc}); attempt {attempt + 1}")
            continue
        last = response
        if response.structured is not None:
            if not response.conforming:
                _warn(backend, f"{template}: nonconforming output repaired: {'; '.join(response.issues)}")
            return response
        _warn(backend, f"{template}: unusable output: {'; '.join(response.issues)}")
    if last is None:
        raise error or CognitionError(f"{template}: no response")
    return last


def profile_context(profile: Any) -> dict:
    if profile is None:
        return {}
    if isinstance(profile, Mapping):
        return dict(profile)
    return profile.to_dict()


def init_basic_needs(profile: Any, environment: Mapping[str, Any], backend: CognitionBackend) -> dict[str, float]:
    """Initial hunger and fatigue in ``[0, 1]``; config defaults if the backend never conforms."""
    prof = profile_context(profile)
    ctx = {
        "name": prof.get("name", ""),
        "age": prof.get("age", ""),
        "health_status": prof.get("health_status", ""),
        "current_time": environment.get("current_time", ""),
        "weather": environment.get("weather", ""),
        "profile": prof,
        "environment": dict(environment),
    }
    try:
        response = call(backend, "init_basic_needs", ctx)
    except CognitionError:
        return dict(BASIC_NEED_DEFAULTS)
    if response.structured is None:
        _warn(backend, "init_basic_needs: falling back to defaults")
        return dict(BASIC_NEED_DEFAULTS)
    return {k: float(response.structured[k]) for k in ("hunger", "fatigue")}


def init_high_level_needs(
    profile: Any,
    retrieved: Sequence[str] | None,
    backend: CognitionBackend,
) -> dict[str, Any]:
    """High-level need estimates keyed by need id plus ``reasoning``.

    Keys such as ``social_need`` are mapped to need ids by dropping the
    ``_need`` suffix.
    """
    prof = profile_context(profile)
    ctx = {"profile": prof}
    try:
        response = call(backend, "init_high_level_needs", ctx, memory_results=list(retrieved or []))
    except CognitionError:
        response = None
    if response is None or response.structured is None:
        return {"social": HIGH_NEED_PRIOR, "reasoning": "no usable estimate; using prior"}
    out: dict[str, Any] = {}
    for key, value in response.structured.items():
        if key == "reasoning":
            continue
        out[key[: -len("_need")] if key.endswith("_need") else key] = float(value)
    out["reasoning"] = response.structured["reasoning"]
    return out


def need_key(need: str, state: NeedState) -> str:
    """Map a backend key (``social_need``) onto a need id (``social``)."""
    if need in state.values:
        return need
    if need.endswith("_need") and need[:-5] in state.values:
        return need[:-5]
    return need


def appraise_events(
    current_needs: NeedState,
    active: Sequence[EventRecord],
    passive: Sequence[EventRecord],
    memory: Sequence[str] | None,
    backend: CognitionBackend,
    *,
    context: Mapping[str, Any] | None = None,
    subjective_only: bool = True,
) -> list[EventAppraisal]:
    """Ask the backend how events change the agent's needs.

    The result holds a single appraisal whose deltas are
    ``updated - current``, so applying it reproduces the backend's reported
    update. Per-event deltas that disagree with that total are logged and
    ignored. With ``subjective_only`` physiological entries are dropped.
    """
    if not active and not passive:
        return []
    snapshot = current_needs.snapshot()
    ctx = {
        "current_needs": snapshot,
        "active_events": [e.description for e in active],
        "passive_events": [e.description for e in passive],
        "events": [e.to_dict() for e in (*active, *passive)],
        **(context or {}),
    }
    try:
        response = call(backend, "update_needs", ctx, memory_results=list(memory or []))
    except CognitionError:
        return []
    if response.structured is None:
        return []
    updated = {need_key(k, current_needs): float(v) for k, v in response.structured["updated_needs"].items()}
    deltas: dict[str, float] = {}
    for need, value in updated.items():
        if need not in current_needs.values:
            _warn(backend, f"update_needs: unknown need {need!r} ignored")
            continue
        if subjective_only and current_needs.tier_of[need] is NeedTier.PHYSIOLOGICAL:
            continue
        value = min(value, current_needs.caps[need])
        delta = value - current_needs.values[need]
        if delta != 0.0:
            deltas[need] = delta
    per_event = response.structured.get("event_deltas")
    if per_event:
        summed: dict[str, float] = {}
        for item in per_event:
            for k, v in item["deltas"].items():
                k = need_key(k, current_needs)
                summed[k] = summed.get(k, 0.0) + float(v)
        for need, delta in deltas.items():
            expected = min(current_needs.caps[need], max(0.0, current_needs.values[need] + summed.get(need, 0.0)))
            if abs(expected - updated[need]) > 1e-6:
                _warn(backend, f"update_needs: inconsistent arithmetic for {need}; using updated - current")
                break
    if not deltas:
        return []
    anchor = (passive or active)[0]
    return [EventAppraisal(anchor, deltas)]


def generate_thoughts(
    profile: Any,
    event: EventRecord | str,
    memory: Sequence[str] | None,
    backend: CognitionBackend,
    *,
    context: Mapping[str, Any] | None = None,
) -> dict[str, str]:
    desc = event.description if isinstance(event, EventRecord) else str(event)
    ctx = {"profile": profile_context(profile), "event_description": desc, **(context or {})}
    fallback = {"thoughts": f"{desc}.", "attitude": "Neutral.", "reflection": "Nothing to change."}
    try:
        response = call(backend, "agent_thoughts", ctx, memory_results=list(memory or []))
    except CognitionError:
        return fallback
    if response.structured is None:
        return fallback
    return {k: response.structured[k] for k in ("thoughts", "attitude", "reflection")}


def update_emotion(
    current_emotion: str,
    recent_events: Sequence[str],
    memory: Sequence[str] | None,
    backend: CognitionBackend,
    *,
    context: Mapping[str, Any] | None = None,
) -> dict[str, str]:
    ctx = {"current_emotion": current_emotion, "recent_events": list(recent_events), **(context or {})}
    try:
        response = call(backend, "update_emotion", ctx, memory_results=list(memory or []))
    except CognitionError:
        response = None
    if response is None or response.structured is None:
        return {"updated_emotion": current_emotion, "reasoning": "no usable update"}
    return {
        "updated_emotion": response.structured["updated_emotion"],
        "reasoning": response.structured.get("reasoning") or "no reasoning given",
    }


def structure_experiences(events: Sequence[Mapping[str, Any]], backend: CognitionBackend) -> list[dict[str, str]]:
    try:
        response = call(backend, "structure_experiences", {"events": list(events)})
    except CognitionError:
        return []
    return list(response.structured or [])


__all__ = [
    "TEMPLATE_NAMES",
    "CognitionBackend",
    "CognitionRequest",
    "CognitionResponse",
    "CognitionSession",
    "PromptTemplate",
    "appraise_events",
    "call",
    "generate_thoughts",
    "get_template",
    "init_basic_needs",
    "init_high_level_needs",
    "load_templates",
    "render_prompt",
    "response_from_raw",
    "structure_experiences",
    "update_emotion",
]
