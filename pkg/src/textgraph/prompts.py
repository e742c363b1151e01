"""Prompt templates for extraction, query analysis, answering and judging."""

from __future__ import annotations

import json
from typing import Sequence

END_SIGNAL = "<|COMPLETE|>"

EXTRACTION_SYSTEM = """---Role---
You are a Knowledge Graph Specialist responsible for extracting entities and relationships from the input text.

---Instructions---
1. Entity Extraction: Identify clearly defined and meaningful entities.
   - Fields:
     - name: The name of the entity (Title Case).
     - type: Categorize the entity using the provided Entity_types. If none apply, classify as other.
     - description: A concise description based solely on the text.
   - Target Format (JSON Lines):
     {{"type": "entity", "name": "...", "category": "...", "desc": "..."}}
2. Relationship Extraction: Identify direct binary relationships between previously extracted entities.
   - Rule: Decompose complex N-ary relationships into binary pairs.
   - Fields:
     - source / target: The exact names of the source and target entities.
     - keywords: Comma-separated high-level keywords summarizing the relation.
     - description: A concise explanation of the connection.
   - Target Format (JSON Lines):
     {{"type": "relation", "source": "...", "target": "...", "keywords": ["..."], "desc": "..."}}
3. General Rules:
   - Output all entities first, followed by all relationships.
   - Use third-person perspective. Avoid pronouns like 'I', 'you', 'this article'.
   - The entire output must be in {language}. Proper nouns should be retained in their original language.
   - End Signal: Output the literal string {end_signal} on the final line."""

EXTRACTION_INPUT = """---Real Data to be Processed---
<Input>
Entity_types: [{entity_types}]
Text:
{input_text}"""

QUERY_ENTITY_PROMPT = """---Role---
You are a highly intelligent query analysis engine for a Retrieval-Augmented Generation (RAG) system.

---Goal---
Accurately identify and extract key concepts or entities that serve as the core subjects of the user's query.

---Definition of Core Entity---
A core entity is a noun or proper noun with clear referential meaning. It usually belongs to:
- Specific Objects: Person names, locations, organizations, models (e.g., "iPhone 15").
- Abstract Concepts: Technical terms, theories, strategies (e.g., "RoHS directive").
- Broad Themes: The central topic of vague queries (e.g., extract "marketing" from "tell me about marketing").

---Exclusion Criteria (Do NOT Extract)---
1. User Intent Verbs: Words indicating what the user wants to do (e.g., "compare", "find", "list", "describe").
2. Functional Words: Stop words or general nouns acting as sentence structures (e.g., "information", "detail", "introduction").

---Few-Shot Demonstrations---
1. User: "Help me introduce a fighter."
   Output: ["fighter"] (Ignore "introduce")
2. User: "What is the relationship between RoHS and peak forward current?"
   Output: ["RoHS", "peak forward current"]
3. User: "Hello, how are you?"
   Output: [] (No core entities)

---Task---
User Query: "{query}"
Extracted Entities (JSON Format):"""

ANSWER_PROMPT = """---Role---
You are a knowledgeable and logically rigorous AI knowledge assistant.

---Core Instructions---
1. Strict Adherence to Context: Your answer must be completely and solely based on the provided evidence. You are strictly prohibited from using internal prior knowledge.
2. Synthesis & Reasoning:
   - Use Knowledge Graph Paths to establish the logical backbone (relationships between A and B).
   - Use Textual Evidence to fill in specific details (dates, descriptions, attributes).
   - If a logical link is provided in the graph but missing in the text (or vice versa), synthesize them to form a complete chain.
3. Anti-Hallucination: If the provided context does not contain sufficient information to answer the question, explicitly state: "Based on the provided materials, I cannot answer this question."
4. Structure: Organize the response clearly using headings, bullet points, or Markdown tables for comparisons.

---Context Provided---
## Knowledge Graph Paths
{paths}

## Textual Evidence
{evidence}

---Task---
User's Original Question: "{query}"
Your Answer:"""

JUDGE_SYSTEM = """You are an impartial and strict judge evaluating the correctness of a generated answer compared to a gold standard answer. Your task is to determine if the "Generated Answer" contains the correct information specified in the "Gold Answer".

Rules:
1. Answer-Centric Evaluation: Judge solely based on whether the core answer required by the Gold Answer is correctly provided. Additional correct or irrelevant information should not affect the judgement unless it introduces contradictions.
2. Semantic Equivalence: If the generated answer is verbose but clearly contains the correct core entity, fact, or conclusion, mark it as CORRECT.
3. Aliases: Treat any provided aliases of the Gold Answer as equally valid correct answers.
4. Hallucination or Contradiction: If the generated answer contains incorrect facts or conflicts with the Gold Answer, mark it as INCORRECT.
5. Non-Answering: If the generated answer states uncertainty or fails to provide the required answer, mark it as INCORRECT.

Output Format (JSON):
{
  "is_correct": boolean,
  "reason": "Short explanation."
}"""


def extraction_prompt(text: str, entity_types: Sequence[str], language: str = "English") -> tuple[str, str]:
    """Return ``(system, user)`` messages for chunk-level extraction."""
    system = EXTRACTION_SYSTEM.format(language=language, end_signal=END_SIGNAL)
    user = EXTRACTION_INPUT.format(entity_types=", ".join(entity_types), input_text=text)
    return system, user


def query_entity_prompt(query: str) -> str:
    return QUERY_ENTITY_PROMPT.format(query=query)


def answer_prompt(paths: str, evidence: str, query: str) -> str:
    return ANSWER_PROMPT.format(paths=paths, evidence=evidence, query=query)


def judge_payload(question: str, generated: str, gold: str, aliases: Sequence[str]) -> str:
    return json.dumps(
        {"question": question, "gold_answer": gold, "aliases": list(aliases), "generated_answer": generated},
        ensure_ascii=False, indent=2,
    )
