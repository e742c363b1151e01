"""Semantic beam search over the entity graph with a visited-node memory."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import BeamConfig, SeedConfig
from .embedding import cosine, topk_entities
from .kb import KnowledgeBase, RelationId


@dataclass(frozen=True)
class Path:
    entity_ids: tuple[str, ...]
    relation_ids: tuple[RelationId, ...] = ()
    score: float = 1.0

    def __post_init__(self) -> None:
        if not self.entity_ids:
            raise ValueError("a path needs at least one entity")
        if len(self.relation_ids) != len(self.entity_ids) - 1:
            raise ValueError("a path needs one relation per hop")

    @property
    def last(self) -> str:
        return self.entity_ids[-1]

    def __len__(self) -> int:
        return len(self.entity_ids)

    def extend(self, entity_id: str, rid: RelationId, score: float) -> Path:
        return Path(self.entity_ids + (entity_id,), self.relation_ids + (tuple(rid),), score)

    def to_dict(self) -> dict:
        return {"entities": list(self.entity_ids), "relations": [list(r) for r in self.relation_ids],
                "score": self.score}


@dataclass(frozen=True)
class MemoryEntry:
    path: Path
    score: float


# entity id -> best (score, path) observed while searching
VisitedMemory = dict[str, MemoryEntry]


def beam_key(path: Path) -> tuple:
    """SelectTopK order: score desc, last entity asc, shorter first, then entity sequence."""
    return (-path.score, path.last, len(path), path.entity_ids)


def select_seed_entities(kb: KnowledgeBase, embedder, query_entities: Sequence[str], q_vec: np.ndarray,
                         config: SeedConfig | None = None) -> list[str]:
    """Map extracted query entity strings onto graph entities.

    Each string contributes its ``per_entity_top_k`` nearest entities with
    cosine at least ``min_similarity``.  If nothing qualifies, the
    ``fallback_top_k`` entities nearest to the query vector are used.
    """
    config = config or SeedConfig()
    if not kb.entities:
        return []
    seeds: set[str] = set()
    for text in query_entities:
        if not text.strip():
            continue
        vec = embedder.embed(text)
        for eid, score in topk_entities(kb, vec, config.per_entity_top_k):
            if score >= config.min_similarity:
                seeds.add(eid)
    if not seeds:
        seeds = {eid for eid, _ in topk_entities(kb, q_vec, config.fallback_top_k)}
    return sorted(seeds)


def beam_search(
    kb: KnowledgeBase,
    q_vec: np.ndarray,
    seeds: Sequence[str],
    config: BeamConfig | None = None,
    trace: list[tuple[str, float, Path]] | None = None,
) -> tuple[list[Path], VisitedMemory]:
    """Expand paths from ``seeds`` for up to ``max_depth`` hops keeping the best ``beam_width``.

    Every expanded node is recorded in the memory with the best similarity it
    was ever reached with, whether or not its path survives pruning.  When a
    depth yields no candidates the previous beam is returned.  ``trace``, if
    given, receives one ``(entity, score, path)`` entry per memory update
    opportunity (seed initialisation and every candidate expansion).
    """
    config = config or BeamConfig()
    if not seeds:
        return [], {}
    memory: VisitedMemory = {}
    beam: list[Path] = []
    for eid in sorted(set(seeds)):
        path = Path((eid,), (), 1.0)
        beam.append(path)
        memory[eid] = MemoryEntry(path, 1.0)
        if trace is not None:
            trace.append((eid, 1.0, path))

    sims: dict[str, float] = {}
    for _ in range(config.max_depth):
        candidates: list[Path] = []
        for path in beam:
            on_path = set(path.entity_ids)
            for nb, rid in kb.neighbors(path.last, config.max_neighbors):
                if nb in on_path:
                    continue
                sim = sims.get(nb)
                if sim is None:
                    sim = sims[nb] = cosine(kb.entity_vector(nb), q_vec)
                new = path.extend(nb, rid, sim)
                if trace is not None:
                    trace.append((nb, sim, new))
                seen = memory.get(nb)
                if seen is None or sim > seen.score:
                    memory[nb] = MemoryEntry(new, sim)
                candidates.append(new)
        if not candidates:
            break
        candidates.sort(key=beam_key)
        beam = candidates[:config.beam_width]
    return beam, memory
