"""Synthetic corpus with planted 2-hop chains for ablation sanity checks.

Every query names one film.  The film's cast document links it to decoy
crew members whose names share words with the question, so under a narrow
beam they outrank the entities that actually continue the chain.  Two
chain shapes alternate:

* ``bridge``: the film document names its director, whose own document
  holds the answer.  The director is pruned from the beam but mentioned in
  retrieved text, so only orphan bridging recovers the second document.
* ``vote``: a trio of producers is linked to the film through a production
  notes document; a second document about the trio holds the answer.  The
  trio is pruned and never mentioned in retrieved text, so only their
  graph votes can lift the answer document into the final chunks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .config import BuildConfig, PipelineConfig
from .evaluation import QAItem
from .extraction import chunk_document
from .llm import MockLLM
from .prompts import END_SIGNAL, extraction_prompt, query_entity_prompt

CONSONANTS = "bdfgklmnprstvz"
VOWELS = "aeiou"
GENRES = ("drama", "comedy", "western", "thriller", "musical", "documentary")


@dataclass
class SyntheticCorpus:
    documents: list[dict[str, str]]
    items: list[QAItem]
    extractions: dict[str, tuple[list, list]]  # doc id -> (entities, relations)
    query_entities: dict[str, list[str]]
    kinds: dict[str, str]  # item id -> chain shape

    def llm(self, build: BuildConfig | None = None) -> MockLLM:
        """Mock LLM answering every extraction and query-analysis request of this corpus."""
        build = build or BuildConfig()
        llm = MockLLM()
        for doc in self.documents:
            text = f"{doc['title']}\n{doc['text']}" if build.include_title else doc["text"]
            spans = chunk_document(doc["id"], text, build.window, build.overlap)
            ents, rels = self.extractions[doc["id"]]
            for span in spans:
                system, user = extraction_prompt(span.text, build.entity_types, build.language)
                llm.add(user, _response(ents, rels), system=system)
        for item in self.items:
            llm.add(query_entity_prompt(item.question), json.dumps(self.query_entities[item.id]))
        return llm


def _response(entities, relations) -> str:
    lines = [json.dumps({"type": "entity", "name": n, "category": c, "desc": d}) for n, c, d in entities]
    lines += [json.dumps({"type": "relation", "source": s, "target": t, "keywords": kw, "desc": d})
              for s, t, kw, d in relations]
    return "\n".join(lines + [END_SIGNAL]) + "\n"


class _Names:
    """Unique capitalised pseudo-words so planted names never share tokens by accident."""

    def __init__(self, rng: np.random.Generator) -> None:
        self.rng = rng
        self.used: set[str] = set()

    def word(self) -> str:
        while True:
            n = int(self.rng.integers(2, 4))
            w = "".join(self.rng.choice(list(CONSONANTS)) + self.rng.choice(list(VOWELS)) for _ in range(n))
            w = w.capitalize()
            if w not in self.used:
                self.used.add(w)
                return w

    def name(self, parts: int = 2) -> str:
        return " ".join(self.word() for _ in range(parts))


def ablation_config() -> PipelineConfig:
    """Default hyperparameters with the beam narrowed to 3.

    The synthetic graph gives each film only a handful of neighbours, so the
    default width of 20 would never prune anything.
    """
    base = PipelineConfig()
    return replace(base, beam=replace(base.beam, beam_width=3))


def generate(n_queries: int = 60, decoys: int = 4, seed: int = 7) -> SyntheticCorpus:
    rng = np.random.default_rng(seed)
    names = _Names(rng)
    docs: list[dict[str, str]] = []
    extractions: dict[str, tuple[list, list]] = {}
    items: list[QAItem] = []
    q_ents: dict[str, list[str]] = {}
    kinds: dict[str, str] = {}

    def add(doc_id: str, text: str, ents: list, rels: list) -> None:
        docs.append({"id": doc_id, "title": doc_id, "text": text})
        extractions[doc_id] = (ents, rels)

    for i in range(n_queries):
        film = names.name()
        genre = GENRES[int(rng.integers(len(GENRES)))]
        city = names.word()
        qid = f"s{i:03d}"
        kind = "bridge" if i % 2 == 0 else "vote"
        role = "Director" if kind == "bridge" else "Producer"

        crew = [f"{role} {names.word()}" for _ in range(decoys)]
        add(f"{film} crew",
            f"{film} crew list: {', '.join(crew)}.",
            [(film, "work", f"{genre} film")] + [(c, "person", f"crew member on {film}") for c in crew],
            [(film, c, ["crew"], f"{c} worked on {film}") for c in crew])

        if kind == "bridge":
            director = names.name()
            add(film,
                f"{film} is a {genre} film. The director of {film} was {director}, and it premiered at a small festival.",
                [(film, "work", f"{genre} film"), (director, "person", f"director of {film}")],
                [(film, director, ["directed by"], f"{director} directed {film}")])
            add(director,
                f"{director} grew up in {city} before moving abroad to study painting.",
                [(director, "person", "painter and filmmaker"), (city, "location", f"hometown of {director}")],
                [(director, city, ["born in", "grew up in"], f"{director} grew up in {city}")])
            question = f"Where was the director of {film} born?"
            gold = {film, director}
        else:
            trio = [names.name() for _ in range(3)]
            notes = f"{trio[0]} ledger"
            add(film,
                f"{film} is a {genre} film produced by a trio of friends. The film premiered at a small festival.",
                [(film, "work", f"{genre} film")],
                [])
            add(notes,
                f"Archive ledger: {trio[0]}, {trio[1]} and {trio[2]} financed {film} over several "
                f"years, paying for lenses, lamps, reels, costumes and catering out of pocket. Receipts "
                f"kept in cardboard boxes record rented vans, spare batteries, borrowed tripods, "
                f"extension cords, sandwiches, coffee urns, tarpaulins and a generator hired every weekend.",
                [(film, "work", f"{genre} film")] + [(p, "person", f"financier of {film}") for p in trio],
                [(film, p, ["financed by"], f"{p} financed {film}") for p in trio])
            add(f"{trio[0]} collective",
                f"{trio[0]}, {trio[1]} and {trio[2]} later moved to {city} and opened a workshop there.",
                [(p, "person", "workshop founder") for p in trio] + [(city, "location", "workshop city")],
                [(p, city, ["moved to"], f"{p} moved to {city}") for p in trio])
            question = f"In which city did the producer trio of {film} settle?"
            gold = {film, f"{trio[0]} collective"}
        items.append(QAItem(qid, question, city, (), frozenset(gold)))
        q_ents[qid] = [film]
        kinds[qid] = kind
    return SyntheticCorpus(docs, items, extractions, q_ents, kinds)
