"""
Resurrecting a pruned cast member
=================================

Two films share one actress.  With a beam of width 1 the search drops her,
but her path is still sitting in the visited memory, and the text channel
mentions her.  Bridging replays that stored path without touching the
graph store again.
"""

# %%
# Build the bundled toy knowledge base with mock providers (fully offline).
from dataclasses import replace

from textgraph import MockEmbedder, build_kb, consolidate_context, provenance_docs, retrieve
from textgraph.toy import BRIDGE_QUERY, corpus_records, toy_config, toy_llm

llm = toy_llm()
emb = MockEmbedder()
kb, report = build_kb(corpus_records(), llm, emb)
print(kb, "| build tokens:", report.tokens)

# %%
# Text channel alone: the "Jones" distractors dominate cosine similarity.
cfg = toy_config()
res = retrieve(kb, BRIDGE_QUERY, cfg, llm, emb)
for cid, sim in res.c_initial:
    print(f"{sim:6.3f}  {cid}")

# %%
# Graph votes pull the second film into the final chunks.
for c in res.chunks_final:
    print(f"{c.score_final:6.3f}  sim={c.sim:.3f}  votes={c.rec}  {c.chunk_id}")

# %%
# The surviving beam path never reaches the shared cast member...
for sp in res.paths_final:
    print(" -> ".join(sp.path.entity_ids), f"(conf={sp.score_conf:.3f})")

# %%
# ...but bridging brings her back from memory, at zero graph reads.
for p in res.bridge_paths:
    print("bridge:", " -> ".join(p.entity_ids))
print("graph reads during bridging:", res.diagnostics["bridge_graph_reads"])

# %%
# Her own document only shows up in the retrieved set because of the bridge.
with_bridge = provenance_docs(kb, res)
without = provenance_docs(kb, retrieve(kb, BRIDGE_QUERY, replace(cfg, bridging=False), llm, emb))
print("gained by bridging:", sorted(with_bridge - without))

# %%
# The prompt the answer model would see.
print(consolidate_context(kb, res).prompt)
