"""Bundled toy corpus: two films sharing a cast member, surrounded by "Jones" distractors.

The corpus, QA items and mock fixtures are generated from the tables below
so that builds and queries run fully offline.  Every document fits in a
single chunk, which keeps the extraction fixtures one-per-document.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

from .config import BuildConfig, PipelineConfig
from .embedding import MockEmbedder
from .evaluation import QAItem, write_qa
from .extraction import build_kb, chunk_document
from .llm import MockLLM
from .pipeline import consolidate_context, retrieve
from .prompts import END_SIGNAL, extraction_prompt, judge_payload, query_entity_prompt, JUDGE_SYSTEM

# (doc id, text, entities [(name, category, desc)], relations [(source, target, keywords, desc)])
DOCS = [
    ("Janie Jones (film)",
     "Janie Jones is a 2010 drama film directed by David M. Rosenthal. Abigail Breslin plays the title "
     "character, the daughter of a fading rock musician played by Alessandro Nivola. The film is named "
     "after a song by The Clash.",
     [("Janie Jones", "work", "2010 drama film"),
      ("David M. Rosenthal", "person", "director of Janie Jones"),
      ("Abigail Breslin", "person", "plays the title character in Janie Jones"),
      ("Alessandro Nivola", "person", "plays a fading rock musician in Janie Jones"),
      ("The Clash", "organization", "band whose song gave Janie Jones its name")],
     [("Janie Jones", "David M. Rosenthal", ["directed by"], "Rosenthal directed the film"),
      ("Janie Jones", "Abigail Breslin", ["cast"], "Breslin stars in the film"),
      ("Janie Jones", "Alessandro Nivola", ["cast"], "Nivola stars in the film"),
      ("Janie Jones", "The Clash", ["named after"], "the film is named after a Clash song")]),
    ("Signs (film)",
     "Signs is a 2002 science fiction film written and directed by M. Night Shyamalan. It stars Mel "
     "Gibson, Joaquin Phoenix and Abigail Breslin as a family that finds crop circles in their field.",
     [("Signs", "work", "2002 science fiction film"),
      ("M. Night Shyamalan", "person", "writer and director of Signs"),
      ("Mel Gibson", "person", "lead actor in Signs"),
      ("Joaquin Phoenix", "person", "actor in Signs"),
      ("Abigail Breslin", "person", "child actor in Signs")],
     [("Signs", "M. Night Shyamalan", ["directed by", "written by"], "Shyamalan wrote and directed the film"),
      ("Signs", "Mel Gibson", ["cast"], "Gibson stars in the film"),
      ("Signs", "Joaquin Phoenix", ["cast"], "Phoenix stars in the film"),
      ("Signs", "Abigail Breslin", ["cast"], "Breslin stars in the film")]),
    ("Abigail Breslin",
     "Abigail Breslin is an American performer born in New York City. She received an Academy Award "
     "nomination for Little Miss Sunshine.",
     [("Abigail Breslin", "person", "American performer"),
      ("New York City", "location", "birthplace of Abigail Breslin"),
      ("Little Miss Sunshine", "work", "film that earned Breslin an Academy Award nomination")],
     [("Abigail Breslin", "New York City", ["born in"], "Breslin was born in New York City"),
      ("Abigail Breslin", "Little Miss Sunshine", ["nominated for"], "Breslin was nominated for the film")]),
    ("Caro Jones",
     "Caro Jones is a casting director who had roles in selecting which actress and actor would appear "
     "in the movies shot in Texas.",
     [("Caro Jones", "person", "casting director"),
      ("Texas", "location", "state where the movies were shot")],
     [("Caro Jones", "Texas", ["worked in"], "Jones cast movies shot in Texas")]),
    ("Shirley Jones",
     "Shirley Jones is an American actress and singer who had roles in the movies Oklahoma and The Music Man.",
     [("Shirley Jones", "person", "American actress and singer"),
      ("Oklahoma", "work", "musical film"),
      ("The Music Man", "work", "musical film")],
     [("Shirley Jones", "Oklahoma", ["cast"], "Jones stars in Oklahoma"),
      ("Shirley Jones", "The Music Man", ["cast"], "Jones stars in The Music Man")]),
    ("Madison Jones",
     "Madison Jones is an actress who had small roles in the movies of the early 2000s.",
     [("Madison Jones", "person", "actress")],
     []),
    ("The Clash",
     "The Clash were an English punk rock band formed in London in 1976. Joe Strummer was their lead singer.",
     [("The Clash", "organization", "English punk rock band"),
      ("London", "location", "city where The Clash formed"),
      ("Joe Strummer", "person", "lead singer of The Clash")],
     [("The Clash", "London", ["formed in"], "the band formed in London"),
      ("The Clash", "Joe Strummer", ["lead singer"], "Strummer fronted the band")]),
    ("Mel Gibson",
     "Mel Gibson is an American actor and film director who starred in Signs and directed Braveheart.",
     [("Mel Gibson", "person", "American actor and director"),
      ("Signs", "work", "film starring Gibson"),
      ("Braveheart", "work", "film directed by Gibson")],
     [("Mel Gibson", "Signs", ["starred in"], "Gibson starred in Signs"),
      ("Mel Gibson", "Braveheart", ["directed"], "Gibson directed Braveheart")]),
]

# (id, question, answer, aliases, gold docs, query entities)
QUESTIONS = [
    ("q1", "Which actress had roles in the movies Janie Jones and Signs?", "Abigail Breslin", ["Breslin"],
     ["Janie Jones (film)", "Signs (film)"], ["Janie Jones", "Signs"]),
    ("q2", "Who was the lead singer of The Clash?", "Joe Strummer", [], ["The Clash"], ["The Clash"]),
    ("q3", "Which film directed by M. Night Shyamalan starred Mel Gibson?", "Signs", [],
     ["Signs (film)", "Mel Gibson"], ["M. Night Shyamalan", "Mel Gibson"]),
    ("q4", "Where was Abigail Breslin born?", "New York City", ["NYC"], ["Abigail Breslin"], ["Abigail Breslin"]),
]

BRIDGE_QUERY = QUESTIONS[0][1]


def toy_config() -> PipelineConfig:
    """Default hyperparameters except beam width 1, which makes the search prune the shared cast member."""
    base = PipelineConfig()
    return replace(base, beam=replace(base.beam, beam_width=1))


def corpus_records() -> list[dict[str, str]]:
    return [{"id": doc_id, "title": doc_id, "text": text} for doc_id, text, _, _ in DOCS]


def qa_items() -> list[QAItem]:
    return [QAItem(qid, q, a, tuple(al), frozenset(gold)) for qid, q, a, al, gold, _ in QUESTIONS]


def extraction_response(entities, relations) -> str:
    lines = [json.dumps({"type": "entity", "name": n, "category": c, "desc": d}) for n, c, d in entities]
    lines += [json.dumps({"type": "relation", "source": s, "target": t, "keywords": kw, "desc": d})
              for s, t, kw, d in relations]
    return "\n".join(lines + [END_SIGNAL]) + "\n"


def toy_llm(build: BuildConfig | None = None) -> MockLLM:
    """Mock LLM holding the extraction and query-analysis fixtures."""
    build = build or BuildConfig()
    llm = MockLLM()
    for doc in corpus_records():
        text = f"{doc['title']}\n{doc['text']}" if build.include_title else doc["text"]
        spans = chunk_document(doc["id"], text, build.window, build.overlap)
        if len(spans) != 1:
            raise AssertionError(f"toy document {doc['id']!r} must fit in one chunk")
        _, _, ents, rels = next(d for d in DOCS if d[0] == doc["id"])
        system, user = extraction_prompt(spans[0].text, build.entity_types, build.language)
        llm.add(user, extraction_response(ents, rels), system=system)
    for _, question, _, _, _, q_ents in QUESTIONS:
        llm.add(query_entity_prompt(question), json.dumps(q_ents))
    return llm


def add_answer_fixtures(llm: MockLLM, kb, configs: list[PipelineConfig], embedder=None) -> None:
    """Register answer and judge fixtures for every toy question under each config."""
    embedder = embedder or MockEmbedder(kb.dim)
    for cfg in configs:
        for _, question, answer, aliases, _, _ in QUESTIONS:
            context = consolidate_context(kb, retrieve(kb, question, cfg, llm, embedder))
            llm.add(context.prompt, answer)
            verdict = json.dumps({"is_correct": True, "reason": "matches the gold answer"})
            llm.add(judge_payload(question, answer, answer, aliases), verdict, system=JUDGE_SYSTEM)


def write_toy(out_dir: str | Path) -> dict[str, Path]:
    """Write ``corpus.jsonl``, ``qa.jsonl`` and ``fixtures/`` under ``out_dir``."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    corpus = root / "corpus.jsonl"
    corpus.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in corpus_records()), encoding="utf-8")
    qa = root / "qa.jsonl"
    write_qa(qa_items(), qa)

    llm = toy_llm()
    kb, _ = build_kb(corpus_records(), llm, MockEmbedder())
    add_answer_fixtures(llm, kb, [PipelineConfig(), toy_config()])
    fixtures = root / "fixtures"
    llm.save(fixtures)
    return {"corpus": corpus, "qa": qa, "fixtures": fixtures}
