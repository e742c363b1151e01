"""LLM clients: fixture-replay mock and an OpenAI-style chat endpoint."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .ledger import TokenLedger, estimate_tokens
from .providers import ProviderError, call_with_retries, post_json


class FixtureMissingError(ProviderError):
    def __init__(self, key: str) -> None:
        super().__init__(f"no mock fixture for request {key}", retryable=False)
        self.key = key


@dataclass(frozen=True)
class LlmSpec:
    kind: str = "mock"
    fixtures: str | None = None
    endpoint: str | None = None
    model: str | None = None
    temperature: float = 0.0
    token_env: str = "TEXTGRAPH_LLM_API_KEY"


class LLM(Protocol):
    ledger: TokenLedger

    def complete(self, prompt: str, *, system: str | None = None) -> str: ...


def request_hash(prompt: str, system: str | None = None) -> str:
    """Stable key of one completion request; mock fixtures are filed under it."""
    blob = json.dumps({"system": system or "", "prompt": prompt}, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class MockLLM:
    """Replays canned responses keyed by :func:`request_hash`.

    A fixture directory holds one ``<hash>.txt`` file per request whose
    content is the raw response text.  Token usage is estimated from the
    character counts of the request and the response.
    """

    def __init__(self, fixtures: dict[str, str] | None = None, ledger: TokenLedger | None = None) -> None:
        self.fixtures: dict[str, str] = dict(fixtures or {})
        self.ledger = ledger if ledger is not None else TokenLedger()
        self.calls = 0

    @classmethod
    def from_dir(cls, path: str | Path, ledger: TokenLedger | None = None) -> MockLLM:
        root = Path(path)
        fixtures = {}
        if root.exists():
            for f in sorted(root.glob("*.txt")):
                fixtures[f.stem] = f.read_text(encoding="utf-8")
        return cls(fixtures, ledger)

    def add(self, prompt: str, response: str, *, system: str | None = None) -> str:
        key = request_hash(prompt, system)
        self.fixtures[key] = response
        return key

    def save(self, path: str | Path) -> None:
        root = Path(path)
        root.mkdir(parents=True, exist_ok=True)
        for key in sorted(self.fixtures):
            (root / f"{key}.txt").write_text(self.fixtures[key], encoding="utf-8")

    def complete(self, prompt: str, *, system: str | None = None) -> str:
        self.calls += 1
        key = request_hash(prompt, system)
        try:
            response = self.fixtures[key]
        except KeyError:
            raise FixtureMissingError(key) from None
        self.ledger.record("prompt", estimate_tokens((system or "") + prompt))
        self.ledger.record("completion", estimate_tokens(response))
        return response


class RemoteLLM:
    """Chat-completions client (``{model, messages, temperature}`` -> ``choices[0].message.content``)."""

    def __init__(self, spec: LlmSpec, ledger: TokenLedger | None = None,
                 attempts: int = 3, base_delay: float = 0.5) -> None:
        endpoint = spec.endpoint or os.environ.get("TEXTGRAPH_LLM_ENDPOINT")
        if not endpoint:
            raise ValueError("remote LLM needs an endpoint (config or TEXTGRAPH_LLM_ENDPOINT)")
        self.endpoint = endpoint
        self.model = spec.model or os.environ.get("TEXTGRAPH_LLM_MODEL", "")
        self.temperature = spec.temperature
        self.token_env = spec.token_env
        self.ledger = ledger if ledger is not None else TokenLedger()
        self.attempts = attempts
        self.base_delay = base_delay

    def complete(self, prompt: str, *, system: str | None = None) -> str:
        messages = []
        if system:
            messages.append({"role": "system", "content": system})
        messages.append({"role": "user", "content": prompt})
        payload = {"model": self.model, "messages": messages, "temperature": self.temperature}
        data = call_with_retries(lambda: post_json(self.endpoint, payload, self.token_env),
                                 self.attempts, self.base_delay)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise ProviderError("completion response lacks choices[0].message.content") from None
        usage = data.get("usage") or {}
        self.ledger.record("prompt", int(usage.get("prompt_tokens", estimate_tokens((system or "") + prompt))))
        self.ledger.record("completion", int(usage.get("completion_tokens", estimate_tokens(content))))
        return content


def make_llm(spec: LlmSpec, ledger: TokenLedger | None = None) -> MockLLM | RemoteLLM:
    if spec.kind == "mock":
        if spec.fixtures is None:
            return MockLLM(ledger=ledger)
        return MockLLM.from_dir(spec.fixtures, ledger)
    if spec.kind == "remote":
        return RemoteLLM(spec, ledger)
    raise ValueError(f"unknown LLM kind {spec.kind!r}")
