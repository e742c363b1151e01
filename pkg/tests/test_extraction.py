import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from textgraph.config import BuildConfig
from textgraph.embedding import MockEmbedder
from textgraph.extraction import (
    BuildError, QueryEntityCache, build_kb, chunk_document, extract_knowledge, extract_query_entities,
    parse_extraction, read_corpus,
)
from textgraph.kb import save
from textgraph.llm import MockLLM
from textgraph.prompts import END_SIGNAL, extraction_prompt, query_entity_prompt
from textgraph.providers import ProviderError
from textgraph.toy import DOCS, extraction_response


def reconstruct(text, spans):
    """Drop each span's overlap with what is already covered and concatenate."""
    out, covered = "", 0
    for s in spans:
        assert s.start <= covered, "gap between chunks"
        assert text[s.start:s.start + len(s.text)] == s.text
        out += s.text[covered - s.start:]
        covered = s.start + len(s.text)
    return out


# -- chunking --------------------------------------------------------------------

def test_short_text_is_one_chunk():
    text = "word " * 19 + "tail!"
    assert len(text) == 100
    spans = chunk_document("d", text)
    assert [(s.ordinal, s.start, s.text) for s in spans] == [(0, 0, text)]


def test_long_text_two_chunks_at_word_boundary():
    rng = np.random.default_rng(3)
    words = ["".join(rng.choice(list("abcdefgh"), size=int(rng.integers(2, 9)))) for _ in range(400)]
    text = " ".join(words)[:2000]
    spans = chunk_document("d", text, 1200, 100)
    assert len(spans) == 2
    assert all(len(s.text) <= 1200 for s in spans)
    second = spans[1].start
    assert second >= 1100 and text[second - 1].isspace() and not text[second].isspace()
    assert reconstruct(text, spans) == text


def test_empty_text_and_bad_window():
    assert chunk_document("d", "") == []
    with pytest.raises(ValueError):
        chunk_document("d", "abc", 100, 100)


@settings(max_examples=80, deadline=None)
@given(st.text(alphabet="ab \n", max_size=600), st.integers(5, 80), st.integers(0, 20))
def test_chunks_reconstruct_text(text, window, overlap):
    if overlap >= window:
        overlap = window - 1
    spans = chunk_document("d", text, window, overlap)
    assert all(0 < len(s.text) <= window for s in spans)
    assert [s.ordinal for s in spans] == list(range(len(spans)))
    assert reconstruct(text, spans) == text


# -- extraction parsing ------------------------------------------------------------

ENT_A = json.dumps({"type": "entity", "name": "Signs", "category": "work", "desc": "a film"})
ENT_B = json.dumps({"type": "entity", "name": "Mel Gibson", "category": "person", "desc": "an actor"})
REL = json.dumps({"type": "relation", "source": "Signs", "target": "Mel Gibson", "keywords": ["cast"], "desc": "x"})


def test_parse_two_entities_one_relation():
    diags = []
    recs = parse_extraction("\n".join([ENT_A, ENT_B, REL, END_SIGNAL]), diags)
    assert [r.kind for r in recs] == ["entity", "entity", "relation"]
    assert recs[2].keywords == ("cast",) and diags == []


def test_parse_skips_garbage_line():
    diags = []
    recs = parse_extraction("\n".join([ENT_A, "this is not json", ENT_B, END_SIGNAL]), diags)
    assert [r.name for r in recs] == ["Signs", "Mel Gibson"]
    assert len(diags) == 1 and "line 2" in diags[0]


def test_parse_empty_response_warns():
    diags = []
    assert parse_extraction("", diags) == []
    assert len(diags) == 1 and diags[0].startswith("warning")


def test_parse_relation_first_and_stops_at_end_signal():
    recs = parse_extraction("\n".join([REL, ENT_A, END_SIGNAL, ENT_B]))
    assert [r.kind for r in recs] == ["relation", "entity"]


def test_parse_keyword_string_form():
    line = json.dumps({"type": "relation", "source": "a", "target": "b", "keywords": "x, y", "desc": ""})
    assert parse_extraction(line + "\n" + END_SIGNAL)[0].keywords == ("x", "y")


def test_extract_knowledge_renders_prompt():
    llm = MockLLM()
    system, user = extraction_prompt("Signs stars Mel Gibson.", ["work", "person"])
    assert "work, person" in user and END_SIGNAL in system
    llm.add(user, "\n".join([ENT_A, END_SIGNAL]), system=system)
    assert [r.name for r in extract_knowledge(llm, "Signs stars Mel Gibson.", ["work", "person"])] == ["Signs"]
    with pytest.raises(ValueError):
        extract_knowledge(llm, "  ", ["work"])


# -- query entities ------------------------------------------------------------------

@pytest.mark.parametrize("query, response, expected", [
    ("Help me introduce a fighter.", '["fighter"]', ["fighter"]),
    ("What is the relationship between RoHS and peak forward current?",
     '["RoHS", "peak forward current"]', ["RoHS", "peak forward current"]),
    ("Hello, how are you?", "[]", []),
])
def test_query_entity_demonstrations(query, response, expected):
    llm = MockLLM()
    llm.add(query_entity_prompt(query), response)
    cache = QueryEntityCache()
    assert extract_query_entities(llm, cache, query) == expected
    assert cache.get(query) == expected


def test_query_prompt_carries_demonstrations():
    prompt = query_entity_prompt("Q?")
    for demo in ("Help me introduce a fighter.", "RoHS", "Hello, how are you?"):
        assert demo in prompt


def test_query_entities_cache_hit_costs_nothing():
    llm = MockLLM()
    q = "Who was the lead singer of The Clash?"
    llm.add(query_entity_prompt(q), 'Entities: ["The Clash"]')
    cache = QueryEntityCache()
    assert extract_query_entities(llm, cache, q) == ["The Clash"]
    before = llm.ledger.snapshot()
    assert extract_query_entities(llm, cache, q) == ["The Clash"]
    assert llm.ledger.snapshot() == before and llm.calls == 1


def test_query_entities_unparseable_degrades():
    llm = MockLLM()
    llm.add(query_entity_prompt("q"), "no array here")
    diags = []
    cache = QueryEntityCache()
    assert extract_query_entities(llm, cache, "q", diags) == []
    assert len(diags) == 1 and cache.get("q") is None
    # a missing fixture is a provider failure, also degraded
    assert extract_query_entities(MockLLM(), None, "other", diags) == []


def test_query_cache_persists(tmp_path):
    cache = QueryEntityCache(tmp_path / "c.json")
    cache.put("q", ["A"])
    cache.save()
    assert QueryEntityCache(tmp_path / "c.json").get("q") == ["A"]


# -- build -----------------------------------------------------------------------

def two_doc_setup(build=None):
    build = build or BuildConfig()
    docs = [d for d in DOCS if d[0] in ("Signs (film)", "Mel Gibson")]
    corpus = [{"id": d[0], "title": d[0], "text": d[1]} for d in docs]
    llm = MockLLM()
    for doc_id, text, ents, rels in docs:
        system, user = extraction_prompt(f"{doc_id}\n{text}", build.entity_types, build.language)
        llm.add(user, extraction_response(ents, rels), system=system)
    return corpus, llm


def test_build_two_docs_matches_hand_written_kb():
    corpus, llm = two_doc_setup()
    kb, report = build_kb(corpus, llm, MockEmbedder())
    s, m = "Signs (film)#0", "Mel Gibson#0"
    expected_entities = {
        "Signs": {s, m}, "M. Night Shyamalan": {s}, "Mel Gibson": {s, m}, "Joaquin Phoenix": {s},
        "Abigail Breslin": {s}, "Braveheart": {m},
    }
    assert {e: kb.entities[e].source_chunk_ids for e in kb.entities} == expected_entities
    expected_relations = {
        ("M. Night Shyamalan", "Signs"): {s}, ("Mel Gibson", "Signs"): {s, m},
        ("Joaquin Phoenix", "Signs"): {s}, ("Abigail Breslin", "Signs"): {s}, ("Braveheart", "Mel Gibson"): {m},
    }
    assert {r: kb.relations[r].source_chunk_ids for r in kb.relations} == expected_relations
    assert kb.relations[("Mel Gibson", "Signs")].weight == 2
    assert kb.relations[("Mel Gibson", "Signs")].keywords == ["cast", "starred in"]
    assert kb.chunks[s].entity_ids == {e for e, cs in expected_entities.items() if s in cs}
    assert kb.chunks[m].entity_ids == {"Mel Gibson", "Signs", "Braveheart"}
    assert kb.entities["Signs"].degree == 4 and kb.entities["Signs"].category == "work"
    assert kb.validate() == [] and kb.frozen
    assert report.failures == {} and report.chunks == 2
    assert set(kb.entity_vectors) == set(kb.entities) and set(kb.chunk_vectors) == set(kb.chunks)


def test_build_records_every_parsed_record():
    corpus, llm = two_doc_setup()
    kb, _ = build_kb(corpus, llm, MockEmbedder())
    for doc_id, _, ents, rels in DOCS:
        if doc_id not in ("Signs (film)", "Mel Gibson"):
            continue
        assert all(n in kb.entities for n, _, _ in ents)
        assert all(tuple(sorted((a, b))) in kb.relations for a, b, _, _ in rels)


def test_empty_corpus_makes_no_calls():
    llm, emb = MockLLM(), MockEmbedder()
    kb, report = build_kb([], llm, emb)
    assert len(kb.chunks) == 0 and llm.calls == 0 and emb.ledger.total == 0
    assert report.success_ratio == 1.0


def test_garbage_chunk_is_reported(tmp_path):
    corpus, llm = two_doc_setup()
    for i in range(10):
        corpus.append({"id": f"filler {i}", "title": "", "text": f"Filler number {i}."})
        system, user = extraction_prompt(f"Filler number {i}.", BuildConfig().entity_types)
        llm.add(user, END_SIGNAL if i else "%%% garbage %%%\n" + END_SIGNAL, system=system)
    kb, report = build_kb(corpus, llm, MockEmbedder(), out=tmp_path / "kb")
    assert list(report.failures) == ["filler 0#0"]
    assert "Signs" in kb.entities
    saved = json.loads((tmp_path / "kb" / "build_report.json").read_text())
    assert saved["failures"] == {"filler 0#0": "no parseable records in response"}


def test_build_rejected_below_success_ratio():
    corpus, llm = two_doc_setup()
    corpus.append({"id": "missing", "title": "", "text": "No fixture for this one."})
    with pytest.raises(BuildError) as info:
        build_kb(corpus, llm, MockEmbedder(), BuildConfig(retry_base_delay=0))
    assert list(info.value.report.failures) == ["missing#0"]
    assert info.value.report.failures["missing#0"].startswith("provider failure")


class Flaky:
    """Fails with a retryable error a set number of times, then delegates."""

    def __init__(self, inner, failures):
        self.inner, self.failures, self.ledger = inner, failures, inner.ledger

    def complete(self, prompt, *, system=None):
        if self.failures > 0:
            self.failures -= 1
            raise ProviderError("HTTP 500", status=500, retryable=True)
        return self.inner.complete(prompt, system=system)


def test_build_retries_transient_failures():
    corpus, llm = two_doc_setup()
    kb, report = build_kb(corpus, Flaky(llm, 2), MockEmbedder(), BuildConfig(parallelism=1, retry_base_delay=0))
    assert report.failures == {} and "Signs" in kb.entities


def test_parallel_build_is_byte_identical(tmp_path):
    outs = []
    for par in (1, 4):
        corpus, llm = two_doc_setup()
        out = tmp_path / f"p{par}"
        build_kb(corpus, llm, MockEmbedder(), BuildConfig(parallelism=par), out)
        outs.append(out)
    # meta.json records the parallelism setting itself; every data file must agree
    for f in sorted(outs[0].iterdir()):
        if f.name != "meta.json":
            assert f.read_bytes() == (outs[1] / f.name).read_bytes(), f.name


def test_read_corpus(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": 1, "title": "T", "text": "x"}\n\n{"id": "b", "text": "y"}\n')
    assert read_corpus(p) == [{"id": "1", "title": "T", "text": "x"}, {"id": "b", "title": "", "text": "y"}]
    p.write_text('{"title": "T"}\n')
    with pytest.raises(ValueError, match="c.jsonl:1"):
        read_corpus(p)


def test_saved_build_matches_in_memory(tmp_path):
    from textgraph.kb import load
    corpus, llm = two_doc_setup()
    kb, _ = build_kb(corpus, llm, MockEmbedder(), out=tmp_path / "kb")
    assert load(tmp_path / "kb") == kb
    save(kb, tmp_path / "again")
    assert (tmp_path / "again" / "entities.jsonl").read_bytes() == (tmp_path / "kb" / "entities.jsonl").read_bytes()
