"""Dual-channel retrieval over text chunks and an entity graph with bidirectional synergy."""

from .config import BeamConfig, BuildConfig, PipelineConfig, SeedConfig, SynergyConfig
from .embedding import EmbedderSpec, MockEmbedder, RemoteEmbedder, cosine, make_embedder, topk_chunks, topk_entities
from .evaluation import EvalReport, QAItem, provenance_docs, retrieval_metrics, run_eval, run_sweep
from .extraction import BuildError, BuildReport, QueryEntityCache, build_kb, chunk_document
from .kb import KnowledgeBase, load, save
from .ledger import TokenLedger
from .llm import LlmSpec, MockLLM, RemoteLLM, make_llm
from .pipeline import RetrievalResult, consolidate_context, generate_answer, retrieve
from .search import MemoryEntry, Path, beam_search, select_seed_entities
from .synergy import bridge_orphans, confirm_paths, recommend_chunks, rerank_chunks, score_base

__version__ = "0.1.0"

__all__ = [
    "BeamConfig", "BuildConfig", "PipelineConfig", "SeedConfig", "SynergyConfig",
    "EmbedderSpec", "MockEmbedder", "RemoteEmbedder", "cosine", "make_embedder", "topk_chunks", "topk_entities",
    "EvalReport", "QAItem", "provenance_docs", "retrieval_metrics", "run_eval", "run_sweep",
    "BuildError", "BuildReport", "QueryEntityCache", "build_kb", "chunk_document",
    "KnowledgeBase", "load", "save", "TokenLedger", "LlmSpec", "MockLLM", "RemoteLLM", "make_llm",
    "RetrievalResult", "consolidate_context", "generate_answer", "retrieve",
    "MemoryEntry", "Path", "beam_search", "select_seed_entities",
    "bridge_orphans", "confirm_paths", "recommend_chunks", "rerank_chunks", "score_base",
]
