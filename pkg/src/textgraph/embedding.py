"""Embedding providers, cosine similarity and exact top-k search."""

from __future__ import annotations

import hashlib
import math
import os
import string
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .kb import KnowledgeBase
from .ledger import TokenLedger, estimate_tokens
from .providers import ProviderError, call_with_retries, post_json


class DimensionMismatchError(ProviderError):
    def __init__(self, got: int, expected: int) -> None:
        super().__init__(f"embedding has {got} values, expected {expected}", retryable=False)


@dataclass(frozen=True)
class EmbedderSpec:
    kind: str = "mock"
    dim: int = 1024
    seed: int = 0
    endpoint: str | None = None
    model: str | None = None
    # name of the environment variable holding the bearer token
    token_env: str = "TEXTGRAPH_EMBED_API_KEY"

    def to_dict(self) -> dict:
        # the token itself is never persisted, only where to find it
        return {"kind": self.kind, "dim": self.dim, "seed": self.seed,
                "endpoint": self.endpoint, "model": self.model, "token_env": self.token_env}


class Embedder(Protocol):
    dim: int
    ledger: TokenLedger

    def embed(self, text: str) -> np.ndarray: ...


def _tokens(text: str) -> list[str]:
    toks = [t.strip(string.punctuation).lower() for t in text.split()]
    toks = [t for t in toks if t]
    return toks or [text.strip()]


class MockEmbedder:
    """Signed feature hashing of whitespace tokens, L2-normalised.

    Texts that share words get a positive cosine, which lets fixtures
    engineer similarity orderings by word overlap.  Tokens are lowercased and
    stripped of surrounding punctuation first.
    """

    def __init__(self, dim: int = 1024, seed: int = 0, ledger: TokenLedger | None = None) -> None:
        self.dim = dim
        self.seed = seed
        self.ledger = ledger if ledger is not None else TokenLedger()

    def _slot(self, token: str) -> tuple[int, float]:
        digest = hashlib.blake2b(f"{self.seed}\x00{token}".encode("utf-8"), digest_size=8).digest()
        value = int.from_bytes(digest, "little")
        return value % self.dim, (1.0 if (value >> 63) & 1 == 0 else -1.0)

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        vec = np.zeros(self.dim)
        for tok in _tokens(text):
            idx, sign = self._slot(tok)
            vec[idx] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        self.ledger.record("embedding", estimate_tokens(text))
        return vec


class RemoteEmbedder:
    """HTTP embedding client: POST ``{model, input: [text]}``.

    Expects ``{"embedding": [...], "usage": {"tokens": n}}`` back (``embedding``
    may also be a list of vectors, one per input).
    """

    def __init__(self, spec: EmbedderSpec, ledger: TokenLedger | None = None,
                 attempts: int = 3, base_delay: float = 0.5) -> None:
        endpoint = spec.endpoint or os.environ.get("TEXTGRAPH_EMBED_ENDPOINT")
        if not endpoint:
            raise ValueError("remote embedder needs an endpoint (config or TEXTGRAPH_EMBED_ENDPOINT)")
        self.endpoint = endpoint
        self.model = spec.model or os.environ.get("TEXTGRAPH_EMBED_MODEL", "")
        self.token_env = spec.token_env
        self.dim = spec.dim
        self.ledger = ledger if ledger is not None else TokenLedger()
        self.attempts = attempts
        self.base_delay = base_delay

    def embed_many(self, texts: list[str]) -> list[np.ndarray]:
        payload = {"model": self.model, "input": list(texts)}
        data = call_with_retries(lambda: post_json(self.endpoint, payload, self.token_env),
                                 self.attempts, self.base_delay)
        raw = data.get("embedding", data.get("embeddings"))
        if raw is None:
            raise ProviderError("embedding response lacks 'embedding'")
        if raw and not isinstance(raw[0], list):
            raw = [raw]
        if len(raw) != len(texts):
            raise ProviderError(f"got {len(raw)} embeddings for {len(texts)} inputs")
        out = []
        for values in raw:
            if len(values) != self.dim:
                raise DimensionMismatchError(len(values), self.dim)
            out.append(np.asarray(values, dtype=np.float64))
        usage = data.get("usage") or {}
        self.ledger.record("embedding", int(usage.get("tokens", sum(estimate_tokens(t) for t in texts))))
        return out

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("cannot embed empty text")
        return self.embed_many([text])[0]


def make_embedder(spec: EmbedderSpec, ledger: TokenLedger | None = None) -> MockEmbedder | RemoteEmbedder:
    if spec.kind == "mock":
        return MockEmbedder(spec.dim, spec.seed, ledger)
    if spec.kind == "remote":
        return RemoteEmbedder(spec, ledger)
    raise ValueError(f"unknown embedder kind {spec.kind!r}")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; 0.0 when either side is the zero vector."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return max(-1.0, min(1.0, float(np.dot(u, v)) / (nu * nv)))


def _topk(kb: KnowledgeBase, kind: str, q_vec: np.ndarray, k: int) -> list[tuple[str, float]]:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    ids, mat, norms = kb.matrix(kind)
    if not ids:
        return []
    q = np.asarray(q_vec, dtype=np.float64)
    if q.shape != (mat.shape[1],):
        raise ValueError(f"query vector length {q.size} != {mat.shape[1]}")
    qn = math.sqrt(float(np.dot(q, q)))
    denom = norms * qn
    dots = mat @ q
    scores = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
    scores = np.clip(scores, -1.0, 1.0)
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    return [(ids[i], float(scores[i])) for i in order[:k]]


def topk_chunks(kb: KnowledgeBase, q_vec: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Exhaustive top-k chunks by cosine; ties broken by chunk id."""
    kb.chunk_reads += 1
    return _topk(kb, "chunk", q_vec, k)


def topk_entities(kb: KnowledgeBase, q_vec: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Exhaustive top-k entities by cosine; ties broken by entity id."""
    kb.graph_reads += 1
    return _topk(kb, "entity", q_vec, k)
