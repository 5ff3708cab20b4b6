"""Client for a generic chat-completion endpoint."""

from __future__ import annotations

import json
import os
from typing import Any, Mapping

import httpx

from ..errors import CognitionError, ConfigError
from . import CognitionBackend, CognitionRequest, CognitionResponse, _renderable, response_from_raw
from .prompts import get_template, render_prompt

ENV_BASE_URL = "SOCIALSIM_API_BASE"
ENV_MODEL = "SOCIALSIM_MODEL"
ENV_API_KEY = "SOCIALSIM_API_KEY"

SYSTEM_PROMPT = (
    "You are the inner voice of a simulated person in a social simulation. "
    "Reply with a single JSON document shaped like the example output and nothing else."
)

# Situation keys forwarded as an environment block when the template does not use them.
CONTEXT_KEYS = (
    "profile", "time", "weather", "location", "location_category", "needs", "nearby", "ties",
    "restriction_level", "candidate", "distance_km", "memories", "events",
)


class RemoteBackend(CognitionBackend):
    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        *,
        timeout: float = 60.0,
        temperature: float = 0.0,
        transport: httpx.BaseTransport | None = None,
    ):
        if not base_url or not model:
            raise ConfigError("remote backend needs a base URL and a model name")
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.temperature = temperature
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    @classmethod
    def from_env(cls, environ: Mapping[str, str] | None = None, **kwargs) -> "RemoteBackend":
        env = os.environ if environ is None else environ
        missing = [k for k in (ENV_BASE_URL, ENV_MODEL) if not env.get(k)]
        if missing:
            raise ConfigError(f"remote backend requires environment variables: {', '.join(missing)}")
        return cls(env[ENV_BASE_URL], env[ENV_MODEL], env.get(ENV_API_KEY), **kwargs)

    def messages(self, request: CognitionRequest) -> list[dict]:
        tpl = get_template(request.template)
        prompt = render_prompt(tpl, _renderable(request), request.memory_results, request.memory_queries)
        msgs = [{"role": "system", "content": SYSTEM_PROMPT}, {"role": "user", "content": prompt}]
        extra = {k: request.context[k] for k in CONTEXT_KEYS if k in request.context and k not in tpl.placeholders}
        if extra:
            msgs.append({
                "role": "user",
                "content": "Environment Context:\n" + json.dumps(extra, ensure_ascii=False, sort_keys=True, default=str),
            })
        return msgs

    def respond(self, request: CognitionRequest) -> CognitionResponse:
        payload: dict[str, Any] = {
            "model": self.model,
            "messages": self.messages(request),
            "temperature": self.temperature,
        }
        try:
            resp = self._client.post(f"{self.base_url}/chat/completions", json=payload)
            resp.raise_for_status()
            body = resp.json()
            content = body["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
            raise CognitionError(f"remote backend request failed: {exc}") from exc
        return response_from_raw(request.template, content)

    def close(self) -> None:
        self._client.close()
