"""Token accounting shared by every provider call."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

KINDS = ("embedding", "prompt", "completion")


def estimate_tokens(text: str) -> int:
    """Deterministic stand-in for a tokenizer: one token per four characters."""
    return math.ceil(len(text) / 4)


@dataclass
class TokenLedger:
    embedding_tokens: int = 0
    llm_prompt_tokens: int = 0
    llm_completion_tokens: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def total(self) -> int:
        return self.embedding_tokens + self.llm_prompt_tokens + self.llm_completion_tokens

    def record(self, kind: str, count: int) -> None:
        if kind not in KINDS:
            raise ValueError(f"unknown token kind {kind!r}; expected one of {KINDS}")
        if count < 0:
            raise ValueError(f"token count must be non-negative, got {count}")
        attr = {"embedding": "embedding_tokens", "prompt": "llm_prompt_tokens",
                "completion": "llm_completion_tokens"}[kind]
        with self._lock:
            setattr(self, attr, getattr(self, attr) + int(count))

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return {
                "embedding": self.embedding_tokens,
                "llm_prompt": self.llm_prompt_tokens,
                "llm_completion": self.llm_completion_tokens,
                "total": self.embedding_tokens + self.llm_prompt_tokens + self.llm_completion_tokens,
            }


def record_tokens(ledger: TokenLedger, kind: str, count: int) -> None:
    ledger.record(kind, count)


def combined_snapshot(*ledgers: TokenLedger) -> dict[str, int]:
    """Column sums over distinct ledgers (a ledger shared by several providers counts once)."""
    distinct: list[TokenLedger] = []
    for led in ledgers:
        if not any(led is seen for seen in distinct):
            distinct.append(led)
    total = TokenLedger()
    for led in distinct:
        snap = led.snapshot()
        total.record("embedding", snap["embedding"])
        total.record("prompt", snap["llm_prompt"])
        total.record("completion", snap["llm_completion"])
    return total.snapshot()
