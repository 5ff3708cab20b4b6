"""Prompt templates, rendering and structured-output conformance."""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Mapping, Sequence

import jsonschema

from ..errors import RenderError

PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")
QUERY_LINE = re.compile(r"^\[Memory Query\]: .*$", re.MULTILINE)
RESULT_LINE = re.compile(r"^\[Memory Retrieval Result\]: \{([A-Za-z_][A-Za-z0-9_]*)\}", re.MULTILINE)

_UNIT = {"type": "number", "minimum": 0, "maximum": 1}
_TEXT = {"type": "string", "minLength": 1}

SCHEMAS: dict[str, dict] = {
    "init_basic_needs": {
        "type": "object",
        "properties": {"hunger": _UNIT, "fatigue": _UNIT},
        "required": ["hunger", "fatigue"],
    },
    "init_high_level_needs": {
        "type": "object",
        "properties": {"social_need": _UNIT, "reasoning": _TEXT},
        "patternProperties": {"^[a-z_]+_need$": _UNIT},
        "required": ["social_need", "reasoning"],
    },
    "update_needs": {
        "type": "object",
        "properties": {
            "updated_needs": {"type": "object", "additionalProperties": _UNIT},
            "reasoning": {"type": "string"},
            "event_deltas": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "event": {"type": "string"},
                        "deltas": {"type": "object", "additionalProperties": {"type": "number"}},
                    },
                    "required": ["deltas"],
                },
            },
        },
        "required": ["updated_needs"],
    },
    "generate_candidates": {
        "type": "array",
        "minItems": 1,
        "items": {
            "anyOf": [
                _TEXT,
                {
                    "type": "object",
                    "properties": {
                        "action": _TEXT,
                        "id": {"type": "string"},
                        "target_poi": {"type": ["string", "null"]},
                        "modality": {"enum": ["physical", "remote"]},
                        "category": {"type": "string"},
                    },
                    "required": ["action"],
                },
            ]
        },
    },
    "score_candidates": {
        "type": "array",
        "minItems": 1,
        "items": {
            "type": "object",
            "properties": {
                "action": _TEXT,
                "attitude": _UNIT,
                "subjective_norm": _UNIT,
                "perceived_control": _UNIT,
                "reasoning": {"type": "string"},
            },
            "required": ["action", "attitude", "subjective_norm", "perceived_control"],
        },
    },
    "action_sequence": {
        "type": "array",
        "minItems": 1,
        "items": {
            "anyOf": [
                _TEXT,
                {
                    "type": "object",
                    "properties": {
                        "verb": _TEXT,
                        "target": {"type": ["string", "null"]},
                        "duration": {"type": "integer", "minimum": 1},
                    },
                    "required": ["verb"],
                },
            ]
        },
    },
    "agent_thoughts": {
        "type": "object",
        "properties": {"thoughts": _TEXT, "attitude": _TEXT, "reflection": _TEXT},
        "required": ["thoughts", "attitude", "reflection"],
    },
    "update_emotion": {
        "type": "object",
        "properties": {"updated_emotion": _TEXT, "reasoning": {"type": "string"}},
        "required": ["updated_emotion"],
    },
    "structure_experiences": {
        "type": "array",
        "items": {
            "type": "object",
            "properties": {"event": _TEXT, "emotion": {"type": "string"}, "outcome": {"type": "string"}},
            "required": ["event", "emotion", "outcome"],
        },
    },
    "memory_queries": {"type": "array", "minItems": 1, "items": _TEXT},
    "abstract_strategies": {
        "type": "object",
        "patternProperties": {r"^strategy_\d+$": _TEXT},
        "additionalProperties": False,
        "minProperties": 1,
    },
}

TEMPLATE_NAMES: tuple[str, ...] = tuple(SCHEMAS)


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    expected_schema: dict = field(default_factory=dict, compare=False)

    @property
    def placeholders(self) -> list[str]:
        seen: list[str] = []
        for match in PLACEHOLDER.finditer(self.body):
            if match.group(1) not in seen:
                seen.append(match.group(1))
        return seen

    @property
    def retrieval_variable(self) -> str | None:
        m = RESULT_LINE.search(self.body)
        return m.group(1) if m else None

    @property
    def has_memory_query(self) -> bool:
        return QUERY_LINE.search(self.body) is not None


@lru_cache(maxsize=None)
def load_templates() -> dict[str, PromptTemplate]:
    pkg = resources.files(__package__) / "templates"
    out = {}
    for name in TEMPLATE_NAMES:
        body = (pkg / f"{name}.txt").read_text(encoding="utf-8")
        out[name] = PromptTemplate(name, body, SCHEMAS[name])
    return out


def get_template(name: str) -> PromptTemplate:
    try:
        return load_templates()[name]
    except KeyError:
        raise KeyError(f"unknown prompt template {name!r}") from None


def format_value(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        return repr(round(value, 6))
    if isinstance(value, int):
        return str(value)
    return json.dumps(value, ensure_ascii=False, sort_keys=True, default=str)


def format_memory_results(results: Sequence[str] | None) -> str:
    if not results:
        return "(no relevant memories)"
    return " | ".join(results)


def render_prompt(
    template: PromptTemplate | str,
    context: Mapping[str, Any],
    memory_results: Sequence[str] | None = None,
    memory_queries: Sequence[str] | None = None,
) -> str:
    """Substitute ``{variable}`` placeholders and fill the memory blocks.

    The retrieval placeholder may come from ``context`` or, if absent there,
    from ``memory_results``. ``memory_queries`` replaces the question text of
    every ``[Memory Query]`` line.
    """
    if isinstance(template, str):
        template = get_template(template)
    values = dict(context)
    rvar = template.retrieval_variable
    if rvar is not None and rvar not in values and memory_results is not None:
        values[rvar] = format_memory_results(memory_results)

    def sub(match: re.Match) -> str:
        var = match.group(1)
        if var not in values:
            raise RenderError(var, template.name)
        return format_value(values[var])

    text = PLACEHOLDER.sub(sub, template.body)
    if memory_queries:
        question = " ".join(q.strip() for q in memory_queries)
        text = QUERY_LINE.sub(lambda _m: f"[Memory Query]: {question}", text)
    return text


@dataclass
class Conformance:
    structured: Any
    conforming: bool
    issues: list[str]


_JSON_START = re.compile(r"[\[{]")


def extract_json(raw: str) -> Any:
    """Parse the first JSON document embedded in ``raw``."""
    raw = raw.strip()
    fence = re.search(r"```(?:json)?\s*(.*?)```", raw, re.DOTALL)
    if fence:
        raw = fence.group(1).strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        pass
    decoder = json.JSONDecoder()
    for m in _JSON_START.finditer(raw):
        try:
            doc, _ = decoder.raw_decode(raw[m.start():])
            return doc
        except json.JSONDecodeError:
            continue
    raise ValueError("no JSON document found")


@lru_cache(maxsize=None)
def _validator(name: str) -> jsonschema.Draft7Validator:
    return jsonschema.Draft7Validator(SCHEMAS[name])


def conform(name: str, document: Any) -> Conformance:
    """Validate ``document`` against the template schema.

    Range violations on unit-interval fields are clamped and flagged; any other
    schema violation makes the document unusable (``structured is None``).
    """
    validator = _validator(name)
    errors = list(validator.iter_errors(document))
    if not errors:
        return Conformance(document, True, [])
    fixable = [e for e in errors if e.validator in ("minimum", "maximum") and e.schema == _UNIT]
    if len(fixable) != len(errors):
        msgs = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        return Conformance(None, False, msgs)
    fixed = copy.deepcopy(document)
    issues = []
    for e in fixable:
        path = list(e.absolute_path)
        value = e.instance
        clamped = min(1.0, max(0.0, float(value)))
        _set_path(fixed, path, clamped)
        issues.append(f"{'/'.join(map(str, path))}: {value} clamped to {clamped}")
    if list(validator.iter_errors(fixed)):
        msgs = [e.message for e in validator.iter_errors(fixed)]
        return Conformance(None, False, msgs)
    return Conformance(fixed, False, issues)


def _set_path(doc: Any, path: list, value: Any) -> None:
    target = doc
    for key in path[:-1]:
        target = target[key]
    target[path[-1]] = value
