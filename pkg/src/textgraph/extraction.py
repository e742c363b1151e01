"""Ingestion: chunking, LLM extraction of entities/relations, query analysis, KB build."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .config import BuildConfig, PipelineConfig, hyperparameters
from .embedding import EmbedderSpec
from .kb import KBError, KnowledgeBase, normalize_entity_name, save
from .ledger import combined_snapshot
from .prompts import END_SIGNAL, extraction_prompt, query_entity_prompt
from .providers import ProviderError, call_with_retries

logger = logging.getLogger(__name__)

__all__ = [
    "ChunkSpan", "ExtractionRecord", "QueryEntityCache", "BuildReport", "BuildError",
    "chunk_document", "parse_extraction", "extract_knowledge", "normalize_entity_name",
    "extract_query_entities", "build_kb", "read_corpus",
]


@dataclass(frozen=True)
class ChunkSpan:
    doc_id: str
    ordinal: int
    start: int
    text: str


def _word_start(text: str, i: int) -> bool:
    return i == 0 or (i < len(text) and text[i - 1].isspace() and not text[i].isspace())


def chunk_document(doc_id: str, text: str, window: int = 1200, overlap: int = 100) -> list[ChunkSpan]:
    """Split ``text`` into overlapping windows of at most ``window`` characters.

    Each window is cut back to just after a whitespace character; the next
    window starts at the first word boundary at least ``window - overlap``
    characters past the previous start (falling back to the previous end).
    Removing the overlaps and concatenating reproduces ``text``.
    """
    if not window > overlap >= 0:
        raise ValueError(f"need window > overlap >= 0, got window={window} overlap={overlap}")
    n = len(text)
    spans: list[ChunkSpan] = []
    start = 0
    while start < n:
        end = min(start + window, n)
        if end < n:
            cut = next((b for b in range(end, start, -1) if text[b - 1].isspace()), None)
            if cut is not None and cut > start:
                end = cut
        spans.append(ChunkSpan(doc_id, len(spans), start, text[start:end]))
        if end >= n:
            break
        lo = max(end - overlap, start + window - overlap, start + 1)
        nxt = next((b for b in range(lo, end) if _word_start(text, b)), end)
        start = nxt
    return spans


@dataclass(frozen=True)
class ExtractionRecord:
    kind: str
    name: str = ""
    category: str = ""
    desc: str = ""
    source: str = ""
    target: str = ""
    keywords: tuple[str, ...] = ()


def _as_keywords(value: Any) -> tuple[str, ...]:
    if isinstance(value, str):
        return tuple(k.strip() for k in value.split(",") if k.strip())
    if isinstance(value, list):
        out = []
        for item in value:
            if not isinstance(item, str):
                raise ValueError("keywords must be strings")
            out.extend(k.strip() for k in item.split(",") if k.strip())
        return tuple(out)
    raise ValueError("keywords must be a list or a comma-separated string")


def _record_from(obj: Any) -> ExtractionRecord:
    if not isinstance(obj, dict):
        raise ValueError("not a JSON object")
    kind = obj.get("type")
    if kind == "entity":
        name = obj.get("name")
        if not isinstance(name, str) or not name.strip():
            raise ValueError("entity without a name")
        return ExtractionRecord("entity", name=name, category=str(obj.get("category") or "other"),
                                desc=str(obj.get("desc") or ""))
    if kind == "relation":
        src, dst = obj.get("source"), obj.get("target")
        if not isinstance(src, str) or not isinstance(dst, str) or not src.strip() or not dst.strip():
            raise ValueError("relation without source/target")
        return ExtractionRecord("relation", source=src, target=dst, desc=str(obj.get("desc") or ""),
                                keywords=_as_keywords(obj.get("keywords", [])))
    raise ValueError(f"unknown record type {kind!r}")


def parse_extraction(response: str, diagnostics: list[str] | None = None) -> list[ExtractionRecord]:
    """Parse JSON-lines extraction output up to the end signal.

    Malformed lines are skipped and reported; a missing end signal is
    reported but the parsed records are kept.
    """
    diags = diagnostics if diagnostics is not None else []
    records: list[ExtractionRecord] = []
    completed = False
    for lineno, line in enumerate(response.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line == END_SIGNAL:
            completed = True
            break
        if line.startswith("```"):
            continue
        try:
            records.append(_record_from(json.loads(line)))
        except (json.JSONDecodeError, ValueError) as exc:
            diags.append(f"line {lineno}: skipped malformed record ({exc})")
    if not completed:
        diags.append("warning: end signal missing; kept records parsed so far")
    return records


def extract_knowledge(llm, text: str, entity_types: Sequence[str], language: str = "English",
                      diagnostics: list[str] | None = None) -> list[ExtractionRecord]:
    if not text.strip():
        raise ValueError("cannot extract from empty text")
    system, user = extraction_prompt(text, entity_types, language)
    return parse_extraction(llm.complete(user, system=system), diagnostics)


class QueryEntityCache:
    """Query -> extracted entity strings, optionally persisted as JSON."""

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self.entries: dict[str, list[str]] = {}
        if self.path is not None and self.path.exists():
            self.entries = json.loads(self.path.read_text(encoding="utf-8"))

    @staticmethod
    def key(query: str) -> str:
        return hashlib.sha256(query.strip().encode("utf-8")).hexdigest()

    def get(self, query: str) -> list[str] | None:
        hit = self.entries.get(self.key(query))
        return list(hit) if hit is not None else None

    def put(self, query: str, entities: list[str]) -> None:
        self.entries[self.key(query)] = list(entities)

    def save(self) -> None:
        if self.path is not None:
            self.path.write_text(json.dumps(self.entries, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _parse_entity_array(response: str) -> list[str]:
    lo, hi = response.find("["), response.rfind("]")
    if lo < 0 or hi < lo:
        raise ValueError("no JSON array in response")
    items = json.loads(response[lo:hi + 1])
    if not isinstance(items, list) or not all(isinstance(x, str) for x in items):
        raise ValueError("expected a JSON array of strings")
    return [x.strip() for x in items if x.strip()]


def extract_query_entities(llm, cache: QueryEntityCache | None, query: str,
                           diagnostics: list[str] | None = None) -> list[str]:
    """Core entities of ``query``; cached answers skip the LLM entirely.

    Unparseable output or a provider failure yields ``[]`` plus a diagnostic
    and is not cached.
    """
    if cache is not None:
        hit = cache.get(query)
        if hit is not None:
            return hit
    try:
        response = llm.complete(query_entity_prompt(query))
        entities = _parse_entity_array(response)
    except (ProviderError, ValueError) as exc:
        if diagnostics is not None:
            diagnostics.append(f"query entity extraction failed: {exc}")
        return []
    if cache is not None:
        cache.put(query, entities)
    return entities


# -- build ---------------------------------------------------------------------

class BuildError(RuntimeError):
    def __init__(self, message: str, report: BuildReport) -> None:
        super().__init__(message)
        self.report = report


@dataclass
class BuildReport:
    documents: int = 0
    chunks: int = 0
    failures: dict[str, str] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)
    tokens: dict[str, int] = field(default_factory=dict)

    @property
    def success_ratio(self) -> float:
        return 1.0 if self.chunks == 0 else (self.chunks - len(self.failures)) / self.chunks

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def read_corpus(path: str | Path) -> list[dict[str, Any]]:
    """Line-delimited ``{id, title, text}`` records."""
    docs = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if "id" not in rec or "text" not in rec:
                raise ValueError(f"{path}:{lineno}: corpus record needs 'id' and 'text'")
            docs.append({"id": str(rec["id"]), "title": rec.get("title", ""), "text": rec["text"]})
    return docs


def _category(raw: str, entity_types: Sequence[str]) -> str:
    cat = raw.strip().lower()
    return cat if cat in {t.lower() for t in entity_types} else "other"


def build_kb(
    corpus: Iterable[dict[str, Any]],
    llm,
    embedder,
    config: BuildConfig | None = None,
    out: str | Path | None = None,
    *,
    embedder_spec: EmbedderSpec | None = None,
    pipeline_config: PipelineConfig | None = None,
) -> tuple[KnowledgeBase, BuildReport]:
    """Chunk, extract, link and embed a corpus into a frozen knowledge base.

    Extraction calls run on a thread pool; their results are applied to the
    knowledge base in corpus order by this (single) writer, so the output is
    independent of scheduling.  A chunk whose provider call keeps failing or
    whose response yields only malformed lines is recorded as a failure;
    the build is rejected when fewer than ``min_success_ratio`` of chunks
    succeed.
    """
    config = config or BuildConfig()
    report = BuildReport()
    kb = KnowledgeBase(dim=embedder.dim)

    spans: list[ChunkSpan] = []
    for doc in corpus:
        report.documents += 1
        text = doc["text"].strip()
        if config.include_title and doc.get("title"):
            text = f"{doc['title'].strip()}\n{text}"
        for span in chunk_document(doc["id"], text, config.window, config.overlap):
            if span.text.strip():
                spans.append(span)
    chunk_ids = [kb.upsert_chunk(s.doc_id, s.ordinal, s.text) for s in spans]
    report.chunks = len(chunk_ids)

    def work(span: ChunkSpan) -> tuple[list[ExtractionRecord], list[str], str | None]:
        diags: list[str] = []
        try:
            records = call_with_retries(
                lambda: extract_knowledge(llm, span.text, config.entity_types, config.language, diags),
                config.retry_attempts, config.retry_base_delay)
        except ProviderError as exc:
            return [], diags, f"provider failure: {exc}"
        if not records and any("malformed" in d for d in diags):
            return [], diags, "no parseable records in response"
        return records, diags, None

    if spans:
        with ThreadPoolExecutor(max_workers=max(1, config.parallelism)) as pool:
            results = list(pool.map(work, spans))
    else:
        results = []

    for cid, (records, diags, failure) in zip(chunk_ids, results):
        report.diagnostics.extend(f"{cid}: {d}" for d in diags)
        if failure is not None:
            report.failures[cid] = failure
            continue
        for rec in records:
            try:
                if rec.kind == "entity":
                    kb.upsert_entity(rec.name, _category(rec.category, config.entity_types), rec.desc, cid)
                else:
                    kb.upsert_relation(rec.source, rec.target, rec.keywords, rec.desc, cid,
                                       diagnostics=report.diagnostics)
            except KBError as exc:
                report.diagnostics.append(f"{cid}: rejected record ({exc})")

    if report.success_ratio < config.min_success_ratio:
        report.tokens = combined_snapshot(llm.ledger, embedder.ledger)
        raise BuildError(
            f"only {report.success_ratio:.0%} of chunks extracted (need {config.min_success_ratio:.0%})", report)

    for cid in sorted(kb.chunks):
        kb.set_chunk_vector(cid, embedder.embed(kb.chunks[cid].text))
    for eid in sorted(kb.entities):
        ent = kb.entities[eid]
        text = eid
        if config.entity_embedding == "name_description" and ent.description:
            text = f"{eid}: {ent.description}"
        kb.set_entity_vector(eid, embedder.embed(text))

    report.tokens = combined_snapshot(llm.ledger, embedder.ledger)
    spec = embedder_spec or EmbedderSpec(kind="mock" if type(embedder).__name__ == "MockEmbedder" else "remote",
                                         dim=embedder.dim, seed=getattr(embedder, "seed", 0))
    build_cfg = asdict(config)
    build_cfg["entity_types"] = list(config.entity_types)
    kb.meta = {
        "embedder": spec.to_dict(),
        "build": build_cfg,
        "hyperparameters": hyperparameters(pipeline_config or PipelineConfig(), kb.dim),
    }
    kb.freeze()
    if out is not None:
        save(kb, out)
        Path(out, "build_report.json").write_text(
            json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return kb, report
