"""End-to-end query: dual-channel retrieval, synergy, context consolidation, answer."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .config import PipelineConfig
from .embedding import topk_chunks
from .extraction import QueryEntityCache, extract_query_entities
from .kb import KnowledgeBase
from .prompts import answer_prompt
from .search import Path, beam_search, select_seed_entities
from .synergy import (
    ScoredChunk, ScoredPath, bridge_orphans, confirm_paths, orphan_entities, recommend_chunks,
    rerank_chunks, vote_counts,
)

logger = logging.getLogger(__name__)

FLOAT_DIGITS = 10


@dataclass
class RetrievalResult:
    query: str
    q_vec: np.ndarray
    query_entities: list[str]
    seed_entities: list[str]
    c_initial: list[tuple[str, float]]
    chunks_final: list[ScoredChunk]
    paths_final: list[ScoredPath]
    bridge_paths: list[Path]
    p_initial: list[Path] = field(default_factory=list)
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return _rounded({
            "query": self.query,
            "query_entities": self.query_entities,
            "seed_entities": self.seed_entities,
            "c_initial": [{"chunk_id": c, "sim": s} for c, s in self.c_initial],
            "chunks_final": [c.to_dict() for c in self.chunks_final],
            "paths_final": [p.to_dict() for p in self.paths_final],
            "bridge_paths": [p.to_dict() for p in self.bridge_paths],
            "diagnostics": self.diagnostics,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _rounded(obj: Any) -> Any:
    if isinstance(obj, float):
        value = round(obj, FLOAT_DIGITS)
        return 0.0 if value == 0 else value
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    return obj


def retrieve(kb: KnowledgeBase, query: str, config: PipelineConfig | None, llm, embedder,
             cache: QueryEntityCache | None = None) -> RetrievalResult:
    """Run both retrieval channels and the synergy stage for one query.

    An embedding failure for the query itself propagates.  Failure to
    extract query entities, or extracting none, leaves the graph channel
    empty and the result falls back to pure similarity ranking.
    """
    config = config or PipelineConfig()
    messages: list[str] = []
    query_entities = extract_query_entities(llm, cache, query, messages)
    q_vec = embedder.embed(query)

    # text channel
    c_initial = topk_chunks(kb, q_vec, config.chunk_top_k)

    # graph channel
    seeds: list[str] = []
    p_initial: list[Path] = []
    memory: dict = {}
    trace: list = []
    if query_entities:
        seeds = select_seed_entities(kb, embedder, query_entities, q_vec, config.seeds)
        p_initial, memory = beam_search(kb, q_vec, seeds, config.beam, trace=trace)
    else:
        messages.append("no query entities; graph channel skipped")

    syn = config.synergy
    if config.rerank and memory:
        votes = vote_counts(kb, memory)
        recommended = recommend_chunks(kb, memory, syn.k_r, votes)
        ranked = rerank_chunks(c_initial, recommended, syn.alpha, votes=votes, kb=kb, q_vec=q_vec)
    else:
        ranked = rerank_chunks(c_initial, [], 1.0)
    chunks_final = ranked[:config.chunk_top_k]

    confirmed = confirm_paths(kb, p_initial, c_initial, syn.epsilon, syn, q_vec, seeds)
    paths_final = confirmed[:config.path_top_k]

    c_ids = [c for c, _ in c_initial]
    orphans = orphan_entities(kb, c_ids, p_initial) if memory else set()
    reads_before = kb.graph_reads
    bridges = bridge_orphans(kb, c_ids, p_initial, memory, syn.k_o) if config.bridging else []
    bridge_reads = kb.graph_reads - reads_before

    diagnostics = {
        "nodes_explored": max(0, len(trace) - len(seeds)),
        "memory_size": len(memory),
        "orphans_found": len(orphans),
        "orphans_in_memory": sum(1 for e in orphans if e in memory),
        "bridge_graph_reads": bridge_reads,
        "messages": messages,
    }
    return RetrievalResult(query, q_vec, query_entities, seeds, c_initial, chunks_final, paths_final,
                           bridges, p_initial, diagnostics)


@dataclass(frozen=True)
class ConsolidatedContext:
    prompt: str
    path_lines: tuple[str, ...]
    bridge_lines: tuple[str, ...]
    evidence_lines: tuple[str, ...]


def format_path(kb: KnowledgeBase, path: Path) -> str:
    """``E1 --(kw1, kw2)--> E2 --(kw)--> E3``"""
    parts = [path.entity_ids[0]]
    for rid, nxt in zip(path.relation_ids, path.entity_ids[1:]):
        rel = kb.relations[tuple(rid)]
        label = ", ".join(rel.keywords) or "related to"
        parts.append(f"--({label})--> {nxt}")
    return " ".join(parts)


def consolidate_context(kb: KnowledgeBase, result: RetrievalResult) -> ConsolidatedContext:
    path_lines = tuple(f"[Path {i}: {format_path(kb, sp.path)}]"
                       for i, sp in enumerate(result.paths_final, start=1))
    bridge_lines = tuple(f"[Bridge {i}: {format_path(kb, p)}]"
                         for i, p in enumerate(result.bridge_paths, start=1))
    evidence_lines = []
    for i, sc in enumerate(result.chunks_final, start=1):
        chunk = kb.chunks[sc.chunk_id]
        text = " ".join(chunk.text.split())
        evidence_lines.append(f'[Evidence {i} (Source: {chunk.doc_id}): "{text}"]')

    path_block = "\n".join(path_lines) if path_lines else "(none)"
    if bridge_lines:
        path_block += "\nSupporting metadata (bridge paths):\n" + "\n".join(bridge_lines)
    evidence_block = "\n".join(evidence_lines) if evidence_lines else "(none)"
    prompt = answer_prompt(path_block, evidence_block, result.query)
    return ConsolidatedContext(prompt, path_lines, bridge_lines, tuple(evidence_lines))


def generate_answer(llm, context: ConsolidatedContext) -> str:
    return llm.complete(context.prompt)
