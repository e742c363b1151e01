"""Graph-to-text re-ranking, text-to-graph path confirmation and orphan bridging."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .config import SynergyConfig
from .embedding import cosine
from .kb import KnowledgeBase
from .search import Path, VisitedMemory


@dataclass(frozen=True)
class ScoredChunk:
    chunk_id: str
    sim: float
    rec: int
    score_final: float

    def to_dict(self) -> dict:
        return {"chunk_id": self.chunk_id, "sim": self.sim, "rec": self.rec, "score_final": self.score_final}


@dataclass(frozen=True)
class ScoredPath:
    path: Path
    score_base: float
    confirmations: int
    score_conf: float

    def to_dict(self) -> dict:
        return {"path": self.path.to_dict(), "score_base": self.score_base,
                "confirmations": self.confirmations, "score_conf": self.score_conf}


# -- graph -> text ---------------------------------------------------------

def vote_counts(kb: KnowledgeBase, memory: VisitedMemory) -> Counter[str]:
    """Number of distinct visited entities citing each chunk as a source."""
    votes: Counter[str] = Counter()
    for eid in memory:
        for cid in kb.entity(eid).source_chunk_ids:
            votes[cid] += 1
    return votes


def recommend_chunks(kb: KnowledgeBase, memory: VisitedMemory, k_r: int,
                     votes: Mapping[str, int] | None = None) -> list[tuple[str, int]]:
    if k_r <= 0 or not memory:
        return []
    if votes is None:
        votes = vote_counts(kb, memory)
    ranked = sorted(votes.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(cid, n) for cid, n in ranked[:k_r] if n > 0]


def _minmax(values: Sequence[float]) -> list[float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        return [1.0] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def rerank_chunks(
    c_initial: Sequence[tuple[str, float]],
    recommended: Sequence[tuple[str, int]],
    alpha: float,
    *,
    votes: Mapping[str, int] | None = None,
    kb: KnowledgeBase | None = None,
    q_vec: np.ndarray | None = None,
) -> list[ScoredChunk]:
    """Fuse min-max normalised similarity and vote count over the candidate pool.

    The pool is ``c_initial`` plus the recommended chunks.  Similarities of
    chunks that only arrive by recommendation are computed from ``kb`` and
    ``q_vec``.  Vote counts come from ``votes`` when given (the full tally),
    otherwise from ``recommended``; chunks with no vote count zero.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    sims: dict[str, float] = dict(c_initial)
    for cid, _ in recommended:
        if cid not in sims:
            if kb is None or q_vec is None:
                raise ValueError(f"similarity of recommended chunk {cid!r} needs kb and q_vec")
            sims[cid] = cosine(kb.chunk_vector(cid), q_vec)
    if not sims:
        return []
    tally = dict(recommended) if votes is None else votes
    ids = list(sims)
    sim_vals = [sims[c] for c in ids]
    rec_vals = [int(tally.get(c, 0)) for c in ids]
    n_sim = _minmax(sim_vals)
    n_rec = _minmax([float(r) for r in rec_vals])
    scored = [
        ScoredChunk(cid, s, r, alpha * ns + (1.0 - alpha) * nr)
        for cid, s, r, ns, nr in zip(ids, sim_vals, rec_vals, n_sim, n_rec)
    ]
    scored.sort(key=lambda c: (-c.score_final, c.chunk_id))
    return scored


# -- text -> graph -----------------------------------------------------------

def score_base(kb: KnowledgeBase, path: Path, q_vec: np.ndarray, config: SynergyConfig,
               seeds: Iterable[str] = ()) -> float:
    """Query similarity, seed density and log-damped structural weight of a path.

    mean_e cos(v_e, q) + gamma * |path & seeds| / |path|
      + lambda_e * sum_e log(1 + deg(e)) + lambda_r * sum_r log(1 + weight(r))
    """
    ents = path.entity_ids
    seed_set = set(seeds)
    sim = sum(cosine(kb.entity_vector(e), q_vec) for e in ents) / len(ents)
    density = sum(1 for e in ents if e in seed_set) / len(ents)
    ent_term = sum(math.log1p(kb.entity(e).degree) for e in ents)
    rel_term = sum(math.log1p(kb.relation(r).weight) for r in path.relation_ids)
    return sim + config.gamma * density + config.lambda_e * ent_term + config.lambda_r * rel_term


def text_entities(kb: KnowledgeBase, chunk_ids: Iterable[str]) -> set[str]:
    ents: set[str] = set()
    for cid in chunk_ids:
        ents |= kb.chunk(cid).entity_ids
    return ents


def confirm_paths(kb: KnowledgeBase, paths: Sequence[Path], c_initial: Sequence[str | tuple[str, float]],
                  epsilon: float, config: SynergyConfig, q_vec: np.ndarray,
                  seeds: Iterable[str] = ()) -> list[ScoredPath]:
    """Boost each path by ``epsilon`` per entity it shares with the initial text chunks."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    ids = [c if isinstance(c, str) else c[0] for c in c_initial]
    supported = text_entities(kb, ids)
    seeds = list(seeds)
    out = []
    for path in paths:
        base = score_base(kb, path, q_vec, config, seeds)
        hits = len(set(path.entity_ids) & supported)
        out.append(ScoredPath(path, base, hits, base + epsilon * hits))
    out.sort(key=lambda sp: (-sp.score_conf, sp.path.entity_ids[0], len(sp.path), sp.path.entity_ids))
    return out


def bridge_orphans(kb: KnowledgeBase, c_initial: Sequence[str | tuple[str, float]], p_initial: Sequence[Path],
                   memory: VisitedMemory, k_o: int) -> list[Path]:
    """Replay stored memory paths for entities the text mentions but the beam dropped.

    Orphans are entities of the initial chunks that lie on no initial path.
    Those present in ``memory`` are ranked by memory score (then id) and the
    top ``k_o`` stored paths are returned unchanged.  Only the chunk store is
    read; the graph store is not touched.
    """
    if k_o <= 0 or not memory:
        return []
    ids = [c if isinstance(c, str) else c[0] for c in c_initial]
    in_text = text_entities(kb, ids)
    on_paths = {e for p in p_initial for e in p.entity_ids}
    orphans = [e for e in in_text - on_paths if e in memory]
    orphans.sort(key=lambda e: (-memory[e].score, e))
    return [memory[e].path for e in orphans[:k_o]]


def orphan_entities(kb: KnowledgeBase, c_initial: Sequence[str], p_initial: Sequence[Path]) -> set[str]:
    return text_entities(kb, c_initial) - {e for p in p_initial for e in p.entity_ids}
