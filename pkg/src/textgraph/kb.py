"""The knowledge base: chunk store, entity/relation graph and the chunk<->entity mapping.

Both directions of the provenance mapping are kept in step on every upsert:
a chunk lists the entities it mentions and every entity lists the chunks it
was extracted from.  Relations are stored once, undirected, under a canonical
``(min, max)`` endpoint key.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

RelationId = tuple[str, str]


class KBError(ValueError):
    """Rejected knowledge-base operation."""


class FrozenKBError(KBError):
    pass


class KBFormatError(KBError):
    """A persisted knowledge base could not be read back."""


def normalize_entity_name(raw: str) -> str:
    """Canonical entity id: trimmed, single-spaced, Title Case.

    Tokens that already carry an uppercase letter after their first character
    (acronyms such as ``RoHS``) and non-ASCII tokens are kept as written.

    >>> normalize_entity_name("abigail  breslin")
    'Abigail Breslin'
    >>> normalize_entity_name("RoHS")
    'RoHS'
    """
    tokens = raw.split()
    if not tokens:
        raise KBError(f"entity name is empty: {raw!r}")
    return " ".join(_title_token(tok) for tok in tokens)


def _title_token(tok: str) -> str:
    if not tok.isascii() or any(ch.isupper() for ch in tok[1:]):
        return tok
    return tok[0].upper() + tok[1:]


def relation_key(a: str, b: str) -> RelationId:
    return (a, b) if a <= b else (b, a)


def chunk_id_for(doc_id: str, ordinal: int) -> str:
    return f"{doc_id}#{ordinal}"


def doc_of(chunk_id: str) -> str:
    return chunk_id.rsplit("#", 1)[0]


@dataclass
class Chunk:
    id: str
    doc_id: str
    ordinal: int
    text: str
    entity_ids: set[str] = field(default_factory=set)

    @property
    def char_count(self) -> int:
        return len(self.text)


@dataclass
class Entity:
    id: str
    category: str
    description: str
    source_chunk_ids: set[str] = field(default_factory=set)
    degree: int = 0


@dataclass
class Relation:
    id: RelationId
    keywords: list[str]
    description: str
    weight: int
    source_chunk_ids: set[str] = field(default_factory=set)

    @property
    def source(self) -> str:
        return self.id[0]

    @property
    def target(self) -> str:
        return self.id[1]

    def other(self, entity_id: str) -> str:
        return self.id[1] if self.id[0] == entity_id else self.id[0]


def _merge_description(existing: str, new: str) -> str:
    parts = [p for p in existing.split("; ") if p]
    for piece in new.split("; "):
        piece = piece.strip()
        if piece and piece not in parts:
            parts.append(piece)
    return "; ".join(parts)


class KnowledgeBase:
    """Chunks, graph and provenance mapping, plus the embedding vectors.

    Mutated only during the build; :meth:`freeze` makes it read-only and
    prepares the matrices used for exhaustive similarity search.  The
    ``graph_reads`` / ``chunk_reads`` counters are incremented by the read
    accessors so callers can assert which stores an operation touched.
    """

    def __init__(self, dim: int = 1024) -> None:
        self.dim = dim
        self.chunks: dict[str, Chunk] = {}
        self.entities: dict[str, Entity] = {}
        self.relations: dict[RelationId, Relation] = {}
        self.doc_index: dict[str, list[str]] = {}
        self.chunk_vectors: dict[str, np.ndarray] = {}
        self.entity_vectors: dict[str, np.ndarray] = {}
        self.meta: dict[str, Any] = {}
        self._adjacency: dict[str, set[RelationId]] = {}
        self._frozen = False
        self._matrices: dict[str, tuple[list[str], np.ndarray, np.ndarray]] = {}
        self.graph_reads = 0
        self.chunk_reads = 0

    # -- build phase -------------------------------------------------------

    def _check_writable(self) -> None:
        if self._frozen:
            raise FrozenKBError("knowledge base is frozen")

    def upsert_chunk(self, doc_id: str, ordinal: int, text: str) -> str:
        self._check_writable()
        if not text or not text.strip():
            raise KBError(f"chunk {doc_id}#{ordinal} has empty text")
        if not doc_id:
            raise KBError("document id is empty")
        cid = chunk_id_for(doc_id, ordinal)
        existing = self.chunks.get(cid)
        if existing is not None:
            if existing.text != text:
                raise KBError(f"chunk {cid} already stored with different text")
            return cid
        self.chunks[cid] = Chunk(cid, doc_id, ordinal, text)
        ids = self.doc_index.setdefault(doc_id, [])
        ids.append(cid)
        ids.sort(key=lambda c: self.chunks[c].ordinal)
        return cid

    def upsert_entity(self, name: str, category: str, description: str, source_chunk: str) -> str:
        self._check_writable()
        eid = normalize_entity_name(name)
        chunk = self.chunks.get(source_chunk)
        if chunk is None:
            raise KBError(f"unknown source chunk {source_chunk!r}")
        entity = self.entities.get(eid)
        if entity is None:
            entity = Entity(eid, category or "other", description.strip())
            self.entities[eid] = entity
            self._adjacency[eid] = set()
        else:
            if entity.category == "other" and category and category != "other":
                entity.category = category
            entity.description = _merge_description(entity.description, description)
        entity.source_chunk_ids.add(source_chunk)
        chunk.entity_ids.add(eid)
        return eid

    def upsert_relation(
        self,
        source_name: str,
        target_name: str,
        keywords: Iterable[str],
        description: str,
        source_chunk: str,
        diagnostics: list[str] | None = None,
    ) -> RelationId | None:
        """Insert or reinforce an undirected relation.

        Missing endpoints become placeholder entities sourced from
        ``source_chunk``.  A self-loop is skipped and reported through
        ``diagnostics`` rather than raised.
        """
        self._check_writable()
        src = normalize_entity_name(source_name)
        dst = normalize_entity_name(target_name)
        if source_chunk not in self.chunks:
            raise KBError(f"unknown source chunk {source_chunk!r}")
        if src == dst:
            msg = f"{source_chunk}: skipped self-loop relation on {src!r}"
            logger.debug(msg)
            if diagnostics is not None:
                diagnostics.append(msg)
            return None
        for name in (src, dst):
            if name not in self.entities:
                self.upsert_entity(name, "other", "", source_chunk)
        rid = relation_key(src, dst)
        keywords = [k.strip() for k in keywords if k and k.strip()]
        rel = self.relations.get(rid)
        if rel is None:
            rel = Relation(rid, list(dict.fromkeys(keywords)), description.strip(), 1, {source_chunk})
            self.relations[rid] = rel
            for name in rid:
                self._adjacency[name].add(rid)
                self.entities[name].degree += 1
        else:
            if source_chunk not in rel.source_chunk_ids:
                rel.source_chunk_ids.add(source_chunk)
                rel.weight += 1
            for k in keywords:
                if k not in rel.keywords:
                    rel.keywords.append(k)
            rel.description = _merge_description(rel.description, description)
        return rid

    def set_chunk_vector(self, chunk_id: str, vec: np.ndarray) -> None:
        self._check_writable()
        self.chunk_vectors[chunk_id] = self._check_vector(vec)

    def set_entity_vector(self, entity_id: str, vec: np.ndarray) -> None:
        self._check_writable()
        self.entity_vectors[entity_id] = self._check_vector(vec)

    def _check_vector(self, vec: np.ndarray) -> np.ndarray:
        arr = np.asarray(vec, dtype=np.float64)
        if arr.shape != (self.dim,):
            raise KBError(f"vector has shape {arr.shape}, knowledge base dimension is {self.dim}")
        return arr

    def freeze(self) -> KnowledgeBase:
        """Make the knowledge base read-only and index its vectors."""
        self._frozen = True
        self._matrices = {}
        for kind, vectors in (("chunk", self.chunk_vectors), ("entity", self.entity_vectors)):
            ids = sorted(vectors)
            if ids:
                mat = np.vstack([vectors[i] for i in ids])
            else:
                mat = np.zeros((0, self.dim))
            self._matrices[kind] = (ids, mat, np.linalg.norm(mat, axis=1))
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def matrix(self, kind: str) -> tuple[list[str], np.ndarray, np.ndarray]:
        if not self._frozen:
            raise KBError("similarity search requires a frozen knowledge base")
        return self._matrices[kind]

    # -- reads ---------------------------------------------------------------

    def chunk(self, chunk_id: str) -> Chunk:
        self.chunk_reads += 1
        try:
            return self.chunks[chunk_id]
        except KeyError:
            raise KBError(f"unknown chunk {chunk_id!r}") from None

    def chunk_vector(self, chunk_id: str) -> np.ndarray:
        self.chunk_reads += 1
        try:
            return self.chunk_vectors[chunk_id]
        except KeyError:
            raise KBError(f"chunk {chunk_id!r} has no embedding") from None

    def entity(self, entity_id: str) -> Entity:
        self.graph_reads += 1
        try:
            return self.entities[entity_id]
        except KeyError:
            raise KBError(f"unknown entity {entity_id!r}") from None

    def entity_vector(self, entity_id: str) -> np.ndarray:
        self.graph_reads += 1
        try:
            return self.entity_vectors[entity_id]
        except KeyError:
            raise KBError(f"entity {entity_id!r} has no embedding") from None

    def relation(self, rid: RelationId) -> Relation:
        self.graph_reads += 1
        try:
            return self.relations[tuple(rid)]
        except KeyError:
            raise KBError(f"unknown relation {rid!r}") from None

    def neighbors(self, entity_id: str, n_max: int = 30) -> list[tuple[str, RelationId]]:
        """Incident neighbours, heaviest relation first, then by entity id."""
        self.graph_reads += 1
        if entity_id not in self.entities:
            raise KBError(f"unknown entity {entity_id!r}")
        pairs = []
        for rid in self._adjacency[entity_id]:
            rel = self.relations[rid]
            pairs.append((-rel.weight, rel.other(entity_id), rid))
        pairs.sort()
        return [(other, rid) for _, other, rid in pairs[:n_max]]

    def degree(self, entity_id: str) -> int:
        return self.entity(entity_id).degree

    def source_documents(self, entity_id: str) -> set[str]:
        """Documents of every chunk the entity was extracted from."""
        entity = self.entity(entity_id)
        return {doc_of(cid) for cid in entity.source_chunk_ids}

    # -- checks --------------------------------------------------------------

    def validate(self) -> list[str]:
        """Full scan of the structural invariants; returns a list of violations."""
        problems = []
        for cid, chunk in self.chunks.items():
            for eid in chunk.entity_ids:
                ent = self.entities.get(eid)
                if ent is None:
                    problems.append(f"chunk {cid} names unknown entity {eid}")
                elif cid not in ent.source_chunk_ids:
                    problems.append(f"entity {eid} does not list chunk {cid}")
        incident: dict[str, int] = {eid: 0 for eid in self.entities}
        for eid, ent in self.entities.items():
            if eid != normalize_entity_name(eid):
                problems.append(f"entity id {eid!r} is not normalized")
            for cid in ent.source_chunk_ids:
                chunk = self.chunks.get(cid)
                if chunk is None:
                    problems.append(f"entity {eid} cites unknown chunk {cid}")
                elif eid not in chunk.entity_ids:
                    problems.append(f"chunk {cid} does not list entity {eid}")
            if not ent.source_chunk_ids:
                problems.append(f"entity {eid} has no source chunk")
        for rid, rel in self.relations.items():
            if rid[0] >= rid[1]:
                problems.append(f"relation {rid} is not canonical")
            if rel.weight != len(rel.source_chunk_ids):
                problems.append(f"relation {rid} weight {rel.weight} != {len(rel.source_chunk_ids)}")
            for name in rid:
                if name not in self.entities:
                    problems.append(f"relation {rid} endpoint {name} missing")
                else:
                    incident[name] += 1
            for cid in rel.source_chunk_ids:
                if cid not in self.chunks:
                    problems.append(f"relation {rid} cites unknown chunk {cid}")
        for eid, count in incident.items():
            if self.entities[eid].degree != count:
                problems.append(f"entity {eid} degree {self.entities[eid].degree} != {count}")
        return problems

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeBase):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.chunks == other.chunks
            and self.entities == other.entities
            and self.relations == other.relations
            and self.doc_index == other.doc_index
            and _vectors_equal(self.chunk_vectors, other.chunk_vectors)
            and _vectors_equal(self.entity_vectors, other.entity_vectors)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return (f"KnowledgeBase(chunks={len(self.chunks)}, entities={len(self.entities)}, "
                f"relations={len(self.relations)}, dim={self.dim})")


def _vectors_equal(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> bool:
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


# -- persistence ------------------------------------------------------------

_FILES = ("chunks", "entities", "relations", "embeddings")


def _dumps(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def save(kb: KnowledgeBase, path: str | Path) -> Path:
    """Write ``kb`` as a directory of sorted JSON-lines files plus ``meta.json``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    chunks = [
        {"id": c.id, "doc_id": c.doc_id, "ordinal": c.ordinal, "text": c.text,
         "entity_ids": sorted(c.entity_ids)}
        for c in (kb.chunks[k] for k in sorted(kb.chunks))
    ]
    entities = [
        {"id": e.id, "category": e.category, "description": e.description,
         "source_chunk_ids": sorted(e.source_chunk_ids)}
        for e in (kb.entities[k] for k in sorted(kb.entities))
    ]
    relations = [
        {"source": r.source, "target": r.target, "keywords": r.keywords,
         "description": r.description, "weight": r.weight,
         "source_chunk_ids": sorted(r.source_chunk_ids)}
        for r in (kb.relations[k] for k in sorted(kb.relations))
    ]
    embeddings = [{"kind": "chunk", "id": k, "vector": kb.chunk_vectors[k].tolist()}
                  for k in sorted(kb.chunk_vectors)]
    embeddings += [{"kind": "entity", "id": k, "vector": kb.entity_vectors[k].tolist()}
                   for k in sorted(kb.entity_vectors)]
    collections = {"chunks": chunks, "entities": entities, "relations": relations,
                   "embeddings": embeddings}
    for name in _FILES:
        lines = "".join(_dumps(rec) + "\n" for rec in collections[name])
        (out / f"{name}.jsonl").write_text(lines, encoding="utf-8")
    meta = dict(kb.meta)
    meta.update({
        "format_version": FORMAT_VERSION,
        "dim": kb.dim,
        "counts": {name: len(collections[name]) for name in _FILES},
    })
    (out / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return out


def _read_records(path: Path, expected: int) -> list[dict[str, Any]]:
    if not path.exists():
        raise KBFormatError(f"{path.name}: file missing")
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.endswith("\n"):
                raise KBFormatError(f"{path.name}:{lineno}: truncated record")
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise KBFormatError(f"{path.name}:{lineno}: malformed record ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise KBFormatError(f"{path.name}:{lineno}: record is not an object")
            records.append(rec)
    if len(records) != expected:
        raise KBFormatError(f"{path.name}: expected {expected} records, found {len(records)}"
                            " (file truncated?)")
    return records


def load(path: str | Path) -> KnowledgeBase:
    """Read a directory written by :func:`save`; the result is frozen."""
    src = Path(path)
    try:
        meta = json.loads((src / "meta.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise KBFormatError(f"{src}: meta.json missing") from None
    except json.JSONDecodeError as exc:
        raise KBFormatError(f"meta.json: malformed ({exc.msg})") from None
    if meta.get("format_version") != FORMAT_VERSION:
        raise KBFormatError(f"meta.json: unsupported format version {meta.get('format_version')!r}")
    kb = KnowledgeBase(dim=int(meta["dim"]))
    kb.meta = {k: v for k, v in meta.items() if k not in ("format_version", "dim", "counts")}
    counts = meta.get("counts", {})
    records = {name: _read_records(src / f"{name}.jsonl", counts.get(name, 0)) for name in _FILES}

    def field_of(name: str, lineno: int, rec: dict[str, Any], key: str) -> Any:
        try:
            return rec[key]
        except KeyError:
            raise KBFormatError(f"{name}.jsonl:{lineno}: missing field {key!r}") from None

    try:
        for i, rec in enumerate(records["chunks"], start=1):
            cid = field_of("chunks", i, rec, "id")
            chunk = Chunk(cid, field_of("chunks", i, rec, "doc_id"), int(field_of("chunks", i, rec, "ordinal")),
                          field_of("chunks", i, rec, "text"), set(field_of("chunks", i, rec, "entity_ids")))
            kb.chunks[cid] = chunk
            kb.doc_index.setdefault(chunk.doc_id, []).append(cid)
        for ids in kb.doc_index.values():
            ids.sort(key=lambda c: kb.chunks[c].ordinal)
        for i, rec in enumerate(records["entities"], start=1):
            eid = field_of("entities", i, rec, "id")
            kb.entities[eid] = Entity(eid, field_of("entities", i, rec, "category"),
                                      field_of("entities", i, rec, "description"),
                                      set(field_of("entities", i, rec, "source_chunk_ids")))
            kb._adjacency[eid] = set()
        for i, rec in enumerate(records["relations"], start=1):
            rid = (field_of("relations", i, rec, "source"), field_of("relations", i, rec, "target"))
            for name in rid:
                if name not in kb.entities:
                    raise KBFormatError(f"relations.jsonl:{i}: unknown endpoint {name!r}")
            kb.relations[rid] = Relation(rid, list(field_of("relations", i, rec, "keywords")),
                                         field_of("relations", i, rec, "description"),
                                         int(field_of("relations", i, rec, "weight")),
                                         set(field_of("relations", i, rec, "source_chunk_ids")))
            for name in rid:
                kb._adjacency[name].add(rid)
                kb.entities[name].degree += 1
        for i, rec in enumerate(records["embeddings"], start=1):
            kind = field_of("embeddings", i, rec, "kind")
            vec = np.asarray(field_of("embeddings", i, rec, "vector"), dtype=np.float64)
            if vec.shape != (kb.dim,):
                raise KBFormatError(f"embeddings.jsonl:{i}: vector length {vec.size} != {kb.dim}")
            target = {"chunk": kb.chunk_vectors, "entity": kb.entity_vectors}.get(kind)
            if target is None:
                raise KBFormatError(f"embeddings.jsonl:{i}: unknown kind {kind!r}")
            target[field_of("embeddings", i, rec, "id")] = vec
    except (TypeError, ValueError) as exc:
        if isinstance(exc, KBFormatError):
            raise
        raise KBFormatError(f"malformed record: {exc}") from None
    return kb.freeze()
