"""Provenance-mapped retrieval metrics, LLM judging and report emission."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Any, Iterable, Sequence

from .config import PipelineConfig, with_param
from .extraction import QueryEntityCache
from .kb import KnowledgeBase
from .ledger import combined_snapshot
from .pipeline import RetrievalResult, consolidate_context, generate_answer, retrieve
from .prompts import JUDGE_SYSTEM, judge_payload
from .providers import ProviderError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QAItem:
    id: str
    question: str
    gold_answer: str
    aliases: tuple[str, ...] = ()
    gold_support_docs: frozenset[str] = frozenset()


def read_qa(path: str | FsPath) -> list[QAItem]:
    """Line-delimited ``{id, question, answer, aliases[], gold_support_docs[]}`` records."""
    items = []
    with FsPath(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                items.append(QAItem(str(rec["id"]), rec["question"], rec.get("answer", ""),
                                    tuple(rec.get("aliases", [])), frozenset(rec.get("gold_support_docs", []))))
    return items


def write_qa(items: Iterable[QAItem], path: str | FsPath) -> None:
    lines = []
    for it in items:
        lines.append(json.dumps({"id": it.id, "question": it.question, "answer": it.gold_answer,
                                 "aliases": list(it.aliases),
                                 "gold_support_docs": sorted(it.gold_support_docs)},
                                ensure_ascii=False, sort_keys=True))
    FsPath(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


# -- dataset adapters ---------------------------------------------------------

def _add_doc(corpus: dict[str, dict[str, Any]], title: str, text: str) -> str:
    doc_id, n = title, 1
    while doc_id in corpus and corpus[doc_id]["text"] != text:
        n += 1
        doc_id = f"{title} ({n})"
    corpus.setdefault(doc_id, {"id": doc_id, "title": title, "text": text})
    return doc_id


def from_musique(records: Iterable[dict[str, Any]]) -> tuple[list[dict[str, Any]], list[QAItem]]:
    """MuSiQue-Ans items -> (corpus, QA items); each titled paragraph is one document."""
    corpus: dict[str, dict[str, Any]] = {}
    items = []
    for rec in records:
        gold = set()
        for para in rec["paragraphs"]:
            doc_id = _add_doc(corpus, para["title"], para["paragraph_text"])
            if para.get("is_supporting"):
                gold.add(doc_id)
        items.append(QAItem(str(rec["id"]), rec["question"], rec.get("answer", ""),
                            tuple(rec.get("answer_aliases", [])), frozenset(gold)))
    return list(corpus.values()), items


def from_hotpotqa(records: Iterable[dict[str, Any]]) -> tuple[list[dict[str, Any]], list[QAItem]]:
    """HotpotQA distractor items -> (corpus, QA items); supports are the titles in supporting_facts."""
    corpus: dict[str, dict[str, Any]] = {}
    items = []
    for rec in records:
        ids = {}
        for title, sentences in rec["context"]:
            ids[title] = _add_doc(corpus, title, "".join(sentences))
        gold = {ids[title] for title, _ in rec["supporting_facts"] if title in ids}
        items.append(QAItem(str(rec["_id"]), rec["question"], rec.get("answer", ""), (), frozenset(gold)))
    return list(corpus.values()), items


# -- metrics ---------------------------------------------------------------

def provenance_docs(kb: KnowledgeBase, result: RetrievalResult) -> set[str]:
    """Documents of the final chunks plus source documents of every path entity."""
    docs = {kb.chunks[c.chunk_id].doc_id for c in result.chunks_final}
    entities = {e for sp in result.paths_final for e in sp.path.entity_ids}
    entities |= {e for p in result.bridge_paths for e in p.entity_ids}
    for eid in sorted(entities):
        docs |= kb.source_documents(eid)
    return docs


@dataclass(frozen=True)
class RetrievalScores:
    hit: bool
    recall: float
    precision: float
    f1: float


def retrieval_metrics(d_ret: set[str] | frozenset[str], gold_docs: set[str] | frozenset[str]) -> RetrievalScores:
    if not gold_docs:
        raise ValueError("gold supporting documents must be non-empty")
    found = len(set(d_ret) & set(gold_docs))
    recall = found / len(gold_docs)
    precision = found / len(d_ret) if d_ret else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return RetrievalScores(set(gold_docs) <= set(d_ret), recall, precision, f1)


@dataclass(frozen=True)
class JudgeVerdict:
    is_correct: bool
    reason: str = ""


def parse_verdict(response: str) -> JudgeVerdict | None:
    lo, hi = response.find("{"), response.rfind("}")
    if lo < 0 or hi < lo:
        return None
    try:
        obj = json.loads(response[lo:hi + 1])
    except json.JSONDecodeError:
        return None
    if not isinstance(obj, dict) or not isinstance(obj.get("is_correct"), bool):
        return None
    return JudgeVerdict(obj["is_correct"], str(obj.get("reason", "")))


def judge_answer(judge_llm, question: str, generated: str, gold: str, aliases: Sequence[str]) -> JudgeVerdict | None:
    """Ask the judge model for a verdict; ``None`` means it abstained (unparseable output)."""
    response = judge_llm.complete(judge_payload(question, generated, gold, aliases), system=JUDGE_SYSTEM)
    return parse_verdict(response)


# -- runs --------------------------------------------------------------------

@dataclass
class ItemRecord:
    id: str
    d_ret: list[str]
    hit: bool
    recall: float
    precision: float
    f1: float
    answer: str | None = None
    judged_correct: bool | None = None
    judge_reason: str | None = None
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        out = {"id": self.id, "d_ret": self.d_ret, "hit": self.hit, "recall": self.recall,
               "precision": self.precision, "f1": self.f1}
        for key in ("answer", "judged_correct", "judge_reason", "error"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


@dataclass
class EvalReport:
    records: list[ItemRecord]
    generated: bool
    tokens: dict[str, int] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.records)

    def _mean(self, attr: str) -> float:
        return sum(getattr(r, attr) for r in self.records) / self.n if self.records else 0.0

    @property
    def strict_hit_rate(self) -> float:
        return sum(r.hit for r in self.records) / self.n if self.records else 0.0

    @property
    def mean_recall(self) -> float:
        return self._mean("recall")

    @property
    def mean_precision(self) -> float:
        return self._mean("precision")

    @property
    def support_f1(self) -> float:
        return self._mean("f1")

    @property
    def judged(self) -> list[ItemRecord]:
        return [r for r in self.records if r.judged_correct is not None]

    @property
    def judge_accuracy(self) -> float | None:
        if not self.generated:
            return None
        judged = self.judged
        return sum(r.judged_correct for r in judged) / len(judged) if judged else 0.0

    @property
    def abstentions(self) -> int:
        return sum(1 for r in self.records if r.judge_reason == "abstained")

    def aggregates(self) -> dict[str, Any]:
        agg: dict[str, Any] = {
            "queries": self.n,
            "strict_hit_rate": self.strict_hit_rate,
            "recall": self.mean_recall,
            "precision": self.mean_precision,
            "support_f1": self.support_f1,
        }
        if self.generated:
            agg.update({"judge_accuracy": self.judge_accuracy, "judged": len(self.judged),
                        "abstentions": self.abstentions,
                        "generation_failures": sum(1 for r in self.records if r.error)})
        return agg

    def to_dict(self) -> dict[str, Any]:
        return {"aggregates": self.aggregates(), "tokens": self.tokens, "config": self.config,
                "records": [r.to_dict() for r in self.records]}

    def table(self, label: str = "system") -> str:
        return format_table([(label, self)])

    def write(self, out_dir: str | FsPath, label: str = "system") -> FsPath:
        out = FsPath(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "records.jsonl").write_text(
            "".join(json.dumps(r.to_dict(), sort_keys=True, ensure_ascii=False) + "\n" for r in self.records),
            encoding="utf-8")
        summary = {"aggregates": self.aggregates(), "tokens": self.tokens, "config": self.config}
        (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        (out / "table.txt").write_text(self.table(label), encoding="utf-8")
        return out


COLUMNS = ("Strict Hit Rate (%)", "Recall (%)", "Precision (%)", "Support F1 (%)", "LLM Judge Acc (%)")


def format_table(rows: Sequence[tuple[str, EvalReport]]) -> str:
    """Fixed-width table with the retrieval and judge columns, one row per report."""
    width = max([len("Method")] + [len(label) for label, _ in rows])
    header = f"{'Method':<{width}} | " + " | ".join(COLUMNS)
    lines = [header, "-" * len(header)]
    for label, rep in rows:
        vals = [rep.strict_hit_rate, rep.mean_recall, rep.mean_precision, rep.support_f1]
        cells = [f"{100 * v:.2f}".rjust(len(col)) for v, col in zip(vals, COLUMNS)]
        acc = rep.judge_accuracy
        cells.append(("-" if acc is None else f"{100 * acc:.2f}").rjust(len(COLUMNS[-1])))
        lines.append(f"{label:<{width}} | " + " | ".join(cells))
    return "\n".join(lines) + "\n"


def evaluate_item(kb: KnowledgeBase, item: QAItem, config: PipelineConfig, llm, embedder,
                  cache: QueryEntityCache | None = None, generate: bool = False,
                  judge_llm=None) -> ItemRecord:
    try:
        result = retrieve(kb, item.question, config, llm, embedder, cache)
    except (ProviderError, ValueError) as exc:
        # retrieval failed outright: counts as a miss, never dropped from the denominator
        scores = retrieval_metrics(set(), item.gold_support_docs)
        return ItemRecord(item.id, [], scores.hit, scores.recall, scores.precision, scores.f1,
                          error=f"retrieval failed: {exc}")
    d_ret = provenance_docs(kb, result)
    scores = retrieval_metrics(d_ret, item.gold_support_docs)
    rec = ItemRecord(item.id, sorted(d_ret), scores.hit, scores.recall, scores.precision, scores.f1)
    if not generate:
        return rec
    try:
        rec.answer = generate_answer(llm, consolidate_context(kb, result))
    except ProviderError as exc:
        rec.error = f"generation failed: {exc}"
        return rec
    if judge_llm is None:
        return rec
    try:
        verdict = judge_answer(judge_llm, item.question, rec.answer, item.gold_answer, item.aliases)
    except ProviderError as exc:
        rec.error = f"judge failed: {exc}"
        return rec
    if verdict is None:
        rec.judge_reason = "abstained"
    else:
        rec.judged_correct = verdict.is_correct
        rec.judge_reason = verdict.reason
    return rec


def run_eval(kb: KnowledgeBase, items: Sequence[QAItem], config: PipelineConfig | None, llm, embedder,
             cache: QueryEntityCache | None = None, generate: bool = False, judge_llm=None) -> EvalReport:
    """Retrieve (and optionally answer and judge) every item, then aggregate."""
    config = config or PipelineConfig()
    ledgers = [llm.ledger, embedder.ledger] + ([judge_llm.ledger] if judge_llm is not None else [])
    before = combined_snapshot(*ledgers)
    records = [evaluate_item(kb, it, config, llm, embedder, cache, generate, judge_llm) for it in items]
    after = combined_snapshot(*ledgers)
    tokens = {k: after[k] - before[k] for k in after}
    return EvalReport(records, generate, tokens, config.to_dict())


def run_sweep(kb: KnowledgeBase, items: Sequence[QAItem], config: PipelineConfig, param: str,
              values: Sequence[Any], llm, embedder, cache: QueryEntityCache | None = None) -> list[tuple[str, EvalReport]]:
    """Re-run retrieval evaluation once per value of one hyperparameter."""
    rows = []
    for value in values:
        cfg = with_param(config, param, value)
        rows.append((f"{param}={value}", run_eval(kb, items, cfg, llm, embedder, cache)))
    return rows
