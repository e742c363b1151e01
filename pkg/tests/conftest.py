"""Shared builders for hand-made knowledge bases and random graphs."""

from __future__ import annotations

import math

import numpy as np
import pytest

from textgraph.kb import KnowledgeBase
from textgraph.toy import corpus_records, toy_llm
from textgraph.embedding import MockEmbedder
from textgraph.extraction import build_kb


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def make_kb(dim, chunks, entities, relations=(), entity_vecs=None, chunk_vecs=None, rng=None):
    """Build and freeze a KB from plain tables.

    chunks: {chunk_id: text}; entities: {name: [chunk ids]};
    relations: iterable of (a, b) or (a, b, chunk_id[, keywords]).
    Missing vectors are drawn at random from ``rng``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    kb = KnowledgeBase(dim=dim)
    for cid, text in chunks.items():
        doc, ordinal = cid.rsplit("#", 1)
        kb.upsert_chunk(doc, int(ordinal), text)
    for name, cids in entities.items():
        for cid in cids:
            kb.upsert_entity(name, "concept", "", cid)
    first_chunk = next(iter(chunks))
    for rel in relations:
        a, b = rel[0], rel[1]
        cid = rel[2] if len(rel) > 2 else first_chunk
        kws = rel[3] if len(rel) > 3 else ["linked"]
        kb.upsert_relation(a, b, kws, "", cid)
    entity_vecs = entity_vecs or {}
    chunk_vecs = chunk_vecs or {}
    for eid in sorted(kb.entities):
        kb.set_entity_vector(eid, entity_vecs.get(eid, unit(rng.normal(size=dim))))
    for cid in sorted(kb.chunks):
        kb.set_chunk_vector(cid, chunk_vecs.get(cid, unit(rng.normal(size=dim))))
    return kb.freeze()


def random_graph(rng, n_max_nodes=20, m_max_edges=40, dim=8, palette=None):
    """Random simple graph as (nodes, edges, vectors, q_vec).

    With ``palette`` set, node vectors are drawn from that many shared
    directions so that exact score ties are common.
    """
    n = int(rng.integers(2, n_max_nodes + 1))
    nodes = [f"N{i:02d}" for i in range(n)]
    possible = [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]]
    m = int(rng.integers(1, min(m_max_edges, len(possible)) + 1))
    picks = rng.choice(len(possible), size=m, replace=False)
    edges = sorted(possible[i] for i in picks)
    if palette:
        dirs = [unit(rng.normal(size=dim)) for _ in range(palette)]
        vecs = {v: dirs[int(rng.integers(palette))] for v in nodes}
    else:
        vecs = {v: unit(rng.normal(size=dim)) for v in nodes}
    q = unit(rng.normal(size=dim))
    return nodes, edges, vecs, q


def graph_kb(nodes, edges, vecs, dim=8):
    chunks = {"g#0": "graph"}
    return make_kb(dim, chunks, {v: ["g#0"] for v in nodes}, edges, entity_vecs=vecs)


# -- independent oracles --------------------------------------------------------

def oracle_key(score, ents):
    return (-score, ents[-1], len(ents), tuple(ents))


def oracle_beam(adj, sims, seeds, K, D):
    """Level-wise exhaustive oracle: every one-hop simple extension of the beam, sorted, truncated."""
    beam = [(1.0, (s,)) for s in sorted(set(seeds))]
    for _ in range(D):
        cand = []
        for _, ents in beam:
            for nb in sorted(adj[ents[-1]]):
                if nb not in ents:
                    cand.append((sims[nb], ents + (nb,)))
        if not cand:
            break
        cand.sort(key=lambda c: oracle_key(*c))
        beam = cand[:K]
    return beam


def oracle_expansions(adj, sims, seeds, K, D):
    """Every (node, score) the level-wise search touches, seeds included at 1.0."""
    seen = [(s, 1.0) for s in sorted(set(seeds))]
    beam = [(1.0, (s,)) for s in sorted(set(seeds))]
    for _ in range(D):
        cand = []
        for _, ents in beam:
            for nb in sorted(adj[ents[-1]]):
                if nb not in ents:
                    cand.append((sims[nb], ents + (nb,)))
                    seen.append((nb, sims[nb]))
        if not cand:
            break
        cand.sort(key=lambda c: oracle_key(*c))
        beam = cand[:K]
    return seen


def all_simple_paths(adj, seeds, hops):
    """Every simple path with exactly ``hops`` edges starting at a seed."""
    out = []

    def walk(path):
        if len(path) == hops + 1:
            out.append(tuple(path))
            return
        for nb in sorted(adj[path[-1]]):
            if nb not in path:
                walk(path + [nb])

    for s in sorted(set(seeds)):
        walk([s])
    return out


def adjacency(nodes, edges):
    adj = {v: set() for v in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def cos(u, v):
    """Plain cosine, written out the same way the library does so floats agree exactly."""
    return float(np.dot(u, v)) / (math.sqrt(float(np.dot(u, u))) * math.sqrt(float(np.dot(v, v))))


@pytest.fixture(scope="session")
def toy():
    """(kb, llm, embedder) for the bundled toy corpus."""
    llm = toy_llm()
    emb = MockEmbedder()
    kb, _ = build_kb(corpus_records(), llm, emb)
    return kb, llm, emb
