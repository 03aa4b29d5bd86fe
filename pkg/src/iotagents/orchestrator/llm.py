"""Thin client for an external chat-completion endpoint with rule fallback."""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources

import httpx

ENV_URL = "IOTAGENTS_LLM_URL"
ENV_KEY = "IOTAGENTS_LLM_KEY"
ENV_MODEL = "IOTAGENTS_LLM_MODEL"

DEFAULT_TIMEOUT_S = 30.0
MAX_RETRIES = 1


class LlmUnavailable(RuntimeError):
    """Endpoint unset, unreachable, or returned something unusable."""


@dataclass
class LlmLimits:
    timeout_s: float = DEFAULT_TIMEOUT_S
    max_tokens: int = 512


def endpoint_from_env() -> str | None:
    return os.environ.get(ENV_URL) or None


def llm_complete(prompt: str, limits: LlmLimits | None = None,
                 endpoint: str | None = None) -> str:
    """One chat-completion call; raises LlmUnavailable on any failure.

    Callers must validate the returned text themselves; nothing coming
    back from the endpoint is trusted.
    """
    limits = limits or LlmLimits()
    url = endpoint or endpoint_from_env()
    if not url:
        raise LlmUnavailable("no completion endpoint configured")
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(ENV_KEY)
    if key:
        headers["Authorization"] = f"Bearer {key}"
    body = {
        "model": os.environ.get(ENV_MODEL, "default"),
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0,
        "max_tokens": limits.max_tokens,
    }
    last_error: Exception | None = None
    for _ in range(1 + MAX_RETRIES):
        try:
            response = httpx.post(url, json=body, headers=headers,
                                  timeout=limits.timeout_s)
            if response.status_code // 100 != 2:
                last_error = LlmUnavailable(
                    f"endpoint returned HTTP {response.status_code}"
                )
                continue
            data = response.json()
            return str(data["choices"][0]["message"]["content"])
        except LlmUnavailable as exc:
            last_error = exc
        except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
            last_error = exc
    raise LlmUnavailable(f"completion failed: {last_error}")


def prompt_template(name: str) -> str:
    return resources.files("iotagents.orchestrator").joinpath(
        f"prompts/{name}.txt"
    ).read_text(encoding="utf-8")
