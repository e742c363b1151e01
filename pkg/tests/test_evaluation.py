import json
import threading
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from textgraph.evaluation import (
    EvalReport, ItemRecord, QAItem, format_table, from_hotpotqa, from_musique, judge_answer, parse_verdict,
    provenance_docs, read_qa, retrieval_metrics, run_eval, run_sweep, write_qa,
)
from textgraph.extraction import QueryEntityCache
from textgraph.ledger import TokenLedger, combined_snapshot, estimate_tokens, record_tokens
from textgraph.llm import MockLLM, request_hash
from textgraph.pipeline import consolidate_context, retrieve
from textgraph.prompts import JUDGE_SYSTEM, judge_payload
from textgraph.search import Path
from textgraph.synergy import ScoredPath
from textgraph.toy import BRIDGE_QUERY, QUESTIONS, add_answer_fixtures, qa_items, toy_config, toy_llm

# D_ret of each toy item under the toy configuration, traced by hand from the
# final chunks plus the source documents of every path and bridge entity
TOY_D_RET = {
    "q1": {"Abigail Breslin", "Caro Jones", "Janie Jones (film)", "Madison Jones", "Mel Gibson",
           "Shirley Jones", "Signs (film)", "The Clash"},
    "q2": {"Abigail Breslin", "Janie Jones (film)", "Madison Jones", "Shirley Jones", "Signs (film)", "The Clash"},
    "q3": {"Abigail Breslin", "Caro Jones", "Janie Jones (film)", "Mel Gibson", "Signs (film)"},
    "q4": {"Abigail Breslin", "Janie Jones (film)", "Mel Gibson", "Signs (film)", "The Clash"},
}
# (hit, recall, precision, f1) as exact fractions
TOY_METRICS = {
    "q1": (True, Fraction(1), Fraction(2, 8), Fraction(2, 5)),
    "q2": (True, Fraction(1), Fraction(1, 6), Fraction(2, 7)),
    "q3": (True, Fraction(1), Fraction(2, 5), Fraction(4, 7)),
    "q4": (True, Fraction(1), Fraction(1, 5), Fraction(1, 3)),
}


# -- metrics ----------------------------------------------------------------------

@pytest.mark.parametrize("d_ret, gold, expected", [
    ({"a", "b"}, {"a", "b"}, (True, 1.0, 1.0, 1.0)),
    ({"a", "b", "c", "d"}, {"a", "b"}, (True, 1.0, 0.5, 2 / 3)),
    ({"c"}, {"a", "b"}, (False, 0.0, 0.0, 0.0)),
    (set(), {"a"}, (False, 0.0, 0.0, 0.0)),
    ({"a", "c"}, {"a", "b"}, (False, 0.5, 0.5, 0.5)),
])
def test_metric_examples(d_ret, gold, expected):
    s = retrieval_metrics(d_ret, gold)
    assert s.hit == expected[0]
    for got, want in zip((s.recall, s.precision, s.f1), expected[1:]):
        assert abs(got - want) <= 1e-12


def test_empty_gold_rejected():
    with pytest.raises(ValueError):
        retrieval_metrics({"a"}, set())


DOCS = st.sets(st.sampled_from("abcdefg"), max_size=7)


@given(DOCS, DOCS.filter(bool))
def test_metric_identities(d_ret, gold):
    s = retrieval_metrics(d_ret, gold)
    if s.precision + s.recall > 0:
        assert abs(s.f1 - 2 * s.precision * s.recall / (s.precision + s.recall)) <= 1e-12
    if s.hit:
        assert s.recall == 1.0
    assert 0 <= s.f1 <= 1


def test_toy_provenance_and_metrics(toy):
    kb, llm, emb = toy
    for item in qa_items():
        d_ret = provenance_docs(kb, retrieve(kb, item.question, toy_config(), llm, emb))
        assert d_ret == TOY_D_RET[item.id]
        s = retrieval_metrics(d_ret, item.gold_support_docs)
        hit, r, p, f1 = TOY_METRICS[item.id]
        assert s.hit == hit
        assert abs(s.recall - float(r)) <= 1e-12 and abs(s.precision - float(p)) <= 1e-12
        assert abs(s.f1 - float(f1)) <= 1e-12


def test_run_eval_aggregates_match_hand_means(toy):
    kb, llm, emb = toy
    report = run_eval(kb, qa_items(), toy_config(), llm, emb)
    n = len(TOY_METRICS)
    assert report.strict_hit_rate == sum(m[0] for m in TOY_METRICS.values()) / n
    for attr, idx in (("mean_recall", 1), ("mean_precision", 2), ("support_f1", 3)):
        assert abs(getattr(report, attr) - float(sum(m[idx] for m in TOY_METRICS.values()) / n)) <= 1e-12
    assert report.judge_accuracy is None
    assert all(r.answer is None and r.judged_correct is None for r in report.records)
    assert "judge_accuracy" not in report.aggregates()
    # query analysis is the only LLM traffic without generation; a warm cache removes it
    cache = QueryEntityCache()
    run_eval(kb, qa_items(), toy_config(), llm, emb, cache)
    warm = run_eval(kb, qa_items(), toy_config(), llm, emb, cache)
    assert warm.tokens["llm_prompt"] == warm.tokens["llm_completion"] == 0 and warm.tokens["embedding"] > 0


def test_provenance_union_contract(toy):
    kb, llm, emb = toy
    res = retrieve(kb, BRIDGE_QUERY, toy_config(), llm, emb)
    chunk_docs = {kb.chunks[c.chunk_id].doc_id for c in res.chunks_final}
    res.paths_final, res.bridge_paths = [], []
    assert provenance_docs(kb, res) == chunk_docs
    res.paths_final = [ScoredPath(Path(("Joe Strummer",)), 0, 0, 0)]
    assert provenance_docs(kb, res) == chunk_docs | {"The Clash"}


def test_bridge_adds_uncovered_document(toy):
    kb, llm, emb = toy
    res = retrieve(kb, BRIDGE_QUERY, toy_config(), llm, emb)
    covered = {kb.chunks[c.chunk_id].doc_id for c in res.chunks_final}
    covered |= {d for sp in res.paths_final for e in sp.path.entity_ids for d in kb.source_documents(e)}
    assert "Abigail Breslin" not in covered
    assert "Abigail Breslin" in provenance_docs(kb, res)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(["Joe Strummer", "Texas", "Braveheart", "Oklahoma", "London", "Signs"]),
                min_size=1, max_size=3, unique=True))
def test_adding_a_path_never_shrinks_d_ret(toy, ents):
    kb, llm, emb = toy
    res = retrieve(kb, BRIDGE_QUERY, toy_config(), llm, emb)
    before = provenance_docs(kb, res)
    res.bridge_paths = res.bridge_paths + [Path((e,)) for e in ents]
    assert before <= provenance_docs(kb, res)


# -- judging --------------------------------------------------------------------

def test_parse_verdict():
    v = parse_verdict('{"is_correct": true, "reason": "exact match"}')
    assert (v.is_correct, v.reason) == (True, "exact match")
    assert parse_verdict('```json\n{"is_correct": false}\n```').is_correct is False
    assert parse_verdict('{"reason": "no field"}') is None
    assert parse_verdict('{"is_correct": "yes"}') is None
    assert parse_verdict("not json") is None


def test_judge_alias_fixture():
    judge = MockLLM()
    payload = judge_payload("Where was Abigail Breslin born?", "NYC", "New York City", ["NYC"])
    assert json.loads(payload)["aliases"] == ["NYC"]
    judge.add(payload, '{"is_correct": true, "reason": "alias"}', system=JUDGE_SYSTEM)
    v = judge_answer(judge, "Where was Abigail Breslin born?", "NYC", "New York City", ["NYC"])
    assert v.is_correct and v.reason == "alias"


def answered_llm(kb, emb, drop=None):
    llm = toy_llm()
    add_answer_fixtures(llm, kb, [toy_config()], emb)
    if drop is not None:
        question = next(q for qid, q, *_ in QUESTIONS if qid == drop)
        ctx = consolidate_context(kb, retrieve(kb, question, toy_config(), llm, emb))
        del llm.fixtures[request_hash(ctx.prompt)]
    return llm


def test_generation_failure_only_leaves_judge_denominator(toy):
    kb, _, emb = toy
    llm = answered_llm(kb, emb, drop="q3")
    report = run_eval(kb, qa_items(), toy_config(), llm, emb, generate=True, judge_llm=llm)
    assert report.n == 4 and len(report.judged) == 3
    assert report.judge_accuracy == 1.0
    failed = next(r for r in report.records if r.id == "q3")
    assert failed.error.startswith("generation failed") and failed.hit
    agg = report.aggregates()
    assert agg["queries"] == 4 and agg["judged"] == 3 and agg["generation_failures"] == 1
    assert report.strict_hit_rate == 1.0


def test_judge_abstention_is_counted_apart(toy):
    kb, _, emb = toy
    llm = answered_llm(kb, emb)
    judge = MockLLM()
    for qid, q, a, aliases, _, _ in QUESTIONS:
        verdict = "I am not sure." if qid == "q2" else json.dumps({"is_correct": qid != "q4", "reason": "r"})
        judge.add(judge_payload(q, a, a, aliases), verdict, system=JUDGE_SYSTEM)
    report = run_eval(kb, qa_items(), toy_config(), llm, emb, generate=True, judge_llm=judge)
    assert report.abstentions == 1 and len(report.judged) == 3
    assert report.judge_accuracy == pytest.approx(2 / 3)
    assert report.tokens["llm_prompt"] > 0


def test_report_is_deterministic(toy, tmp_path):
    kb, _, emb = toy
    outs = []
    for name in ("a", "b"):
        llm = answered_llm(kb, emb)
        report = run_eval(kb, qa_items(), toy_config(), llm, emb, generate=True, judge_llm=llm)
        outs.append(report.write(tmp_path / name))
    for f in ("records.jsonl", "summary.json", "table.txt"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()


def test_table_layout():
    rep = EvalReport([ItemRecord("x", ["a"], True, 1.0, 0.5, 2 / 3)], generated=False)
    lines = format_table([("full", rep), ("w/o bridging", rep)]).splitlines()
    assert lines[0].startswith("Method       | Strict Hit Rate (%) | Recall (%)")
    assert "100.00" in lines[2] and "66.67" in lines[2] and lines[2].rstrip().endswith("-")
    assert len({len(line) for line in lines}) == 1


def test_run_sweep_labels(toy):
    kb, llm, emb = toy
    rows = run_sweep(kb, qa_items(), toy_config(), "alpha", [0.0, 1.0], llm, emb)
    assert [label for label, _ in rows] == ["alpha=0.0", "alpha=1.0"]
    assert rows[1][1].config["synergy"]["alpha"] == 1.0


# -- QA files and adapters -----------------------------------------------------------

def test_qa_round_trip(tmp_path):
    items = qa_items()
    write_qa(items, tmp_path / "qa.jsonl")
    assert read_qa(tmp_path / "qa.jsonl") == items


def test_from_musique():
    rec = {"id": "2hop_1", "question": "Q?", "answer": "A", "answer_aliases": ["a"], "paragraphs": [
        {"idx": 0, "title": "T1", "paragraph_text": "one", "is_supporting": True},
        {"idx": 1, "title": "T2", "paragraph_text": "two", "is_supporting": False},
        {"idx": 2, "title": "T1", "paragraph_text": "other text", "is_supporting": True},
    ]}
    corpus, items = from_musique([rec])
    assert [d["id"] for d in corpus] == ["T1", "T2", "T1 (2)"]
    assert items[0] == QAItem("2hop_1", "Q?", "A", ("a",), frozenset({"T1", "T1 (2)"}))


def test_from_hotpotqa():
    rec = {"_id": "h1", "question": "Q?", "answer": "yes",
           "context": [["Alpha", ["A one. ", "A two."]], ["Beta", ["B."]]],
           "supporting_facts": [["Alpha", 0], ["Alpha", 1], ["Missing", 0]]}
    corpus, items = from_hotpotqa([rec])
    assert corpus[0] == {"id": "Alpha", "title": "Alpha", "text": "A one. A two."}
    assert items[0].gold_support_docs == frozenset({"Alpha"})


# -- token ledger ---------------------------------------------------------------------

def test_ledger_basics():
    led = TokenLedger()
    assert led.snapshot() == {"embedding": 0, "llm_prompt": 0, "llm_completion": 0, "total": 0}
    record_tokens(led, "prompt", 100)
    record_tokens(led, "prompt", 100)
    assert led.llm_prompt_tokens == 200 and led.total == 200
    with pytest.raises(ValueError):
        record_tokens(led, "prompt", -1)
    with pytest.raises(ValueError):
        record_tokens(led, "other", 1)


@given(st.integers(0, 5000))
def test_mock_estimate_is_ceil_quarter(n):
    assert estimate_tokens("x" * n) == -(-n // 4)


def test_ledger_concurrent_increments():
    led = TokenLedger()

    def work():
        for _ in range(2000):
            led.record("embedding", 1)
            led.record("completion", 2)

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    snap = led.snapshot()
    assert snap["embedding"] == 16000 and snap["llm_completion"] == 32000
    assert snap["total"] == snap["embedding"] + snap["llm_prompt"] + snap["llm_completion"]


def test_combined_snapshot_counts_shared_ledger_once():
    a, b = TokenLedger(), TokenLedger()
    a.record("prompt", 3)
    b.record("embedding", 4)
    assert combined_snapshot(a, b, a)["total"] == 7
