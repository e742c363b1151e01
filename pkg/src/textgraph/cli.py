"""Command line entry point: build-kb, query, eval, sweep, toy and convert."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .config import BuildConfig, PipelineConfig, with_param
from .embedding import EmbedderSpec, make_embedder
from .evaluation import format_table, from_hotpotqa, from_musique, read_qa, run_eval, run_sweep, write_qa
from .extraction import BuildError, QueryEntityCache, build_kb, read_corpus
from .kb import load
from .ledger import TokenLedger
from .llm import LlmSpec, make_llm
from .pipeline import consolidate_context, generate_answer, retrieve
from .providers import ProviderError
from .toy import write_toy

logger = logging.getLogger("textgraph")

# flag -> flat parameter name understood by with_param
HYPER_FLAGS = {
    "alpha": float, "epsilon": float, "gamma": float, "lambda_e": float, "lambda_r": float,
    "k_r": int, "k_o": int, "beam_width": int, "depth": int, "max_neighbors": int,
    "chunk_top_k": int, "path_top_k": int,
}


def _add_llm_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--llm", choices=("mock", "remote"), default="mock")
    p.add_argument("--fixtures", help="mock LLM fixture directory (request hash -> response)")
    p.add_argument("--llm-endpoint")
    p.add_argument("--llm-model")


def _add_hyper_args(p: argparse.ArgumentParser) -> None:
    for name, typ in HYPER_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--no-rerank", action="store_true", help="ablation: skip graph-guided re-ranking")
    p.add_argument("--no-bridging", action="store_true", help="ablation: skip orphan bridging")
    p.add_argument("--cache", help="query-entity cache file (JSON)")


def _config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig()
    for name in HYPER_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            cfg = with_param(cfg, name, value)
    return replace(cfg, rerank=not args.no_rerank, bridging=not args.no_bridging)


def _llm(args: argparse.Namespace, ledger: TokenLedger):
    spec = LlmSpec(kind=args.llm, fixtures=args.fixtures, endpoint=args.llm_endpoint, model=args.llm_model)
    return make_llm(spec, ledger)


def _kb_embedder(kb, ledger: TokenLedger):
    """Re-create the embedder recorded in the KB so queries live in the same space."""
    spec = EmbedderSpec(**kb.meta.get("embedder", {"kind": "mock", "dim": kb.dim}))
    return make_embedder(spec, ledger)


def _read_native(path: str) -> list[dict]:
    """A JSON array or JSON lines, as the MuSiQue and HotpotQA releases ship."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        return json.loads(text)
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def _adapter(fmt: str):
    return from_musique if fmt == "musique" else from_hotpotqa


def _read_corpus(path: str, fmt: str) -> list[dict]:
    if fmt == "jsonl":
        return read_corpus(path)
    corpus, _ = _adapter(fmt)(_read_native(path))
    return corpus


def cmd_build_kb(args: argparse.Namespace) -> int:
    ledger = TokenLedger()
    emb_spec = EmbedderSpec(kind=args.embedder, dim=args.dim, seed=args.seed,
                            endpoint=args.embed_endpoint, model=args.embed_model)
    embedder = make_embedder(emb_spec, ledger)
    llm = _llm(args, ledger)
    build = BuildConfig(window=args.window, overlap=args.overlap, parallelism=args.parallelism,
                        min_success_ratio=args.min_success_ratio)
    corpus = _read_corpus(args.corpus, args.corpus_format)
    try:
        kb, report = build_kb(corpus, llm, embedder, build, args.out, embedder_spec=emb_spec)
    except BuildError as exc:
        print(f"build failed: {exc}", file=sys.stderr)
        for cid, why in sorted(exc.report.failures.items()):
            print(f"  {cid}: {why}", file=sys.stderr)
        return 1
    print(json.dumps({"out": str(args.out), "documents": report.documents, "chunks": len(kb.chunks),
                      "entities": len(kb.entities), "relations": len(kb.relations),
                      "failures": report.failures, "tokens": report.tokens}, sort_keys=True, indent=2))
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    kb = load(args.kb)
    ledger = TokenLedger()
    embedder = _kb_embedder(kb, ledger)
    llm = _llm(args, ledger)
    cfg = _config(args)
    cache = QueryEntityCache(args.cache) if args.cache else None
    result = retrieve(kb, args.question, cfg, llm, embedder, cache)
    if cache is not None:
        cache.save()
    out = {"config": cfg.to_dict(), "result": result.to_dict()}
    context = consolidate_context(kb, result)
    if args.show_context:
        out["context"] = context.prompt
    if not args.no_generate:
        try:
            out["answer"] = generate_answer(llm, context)
        except ProviderError as exc:
            out["answer_error"] = str(exc)
    out["tokens"] = ledger.snapshot()
    print(json.dumps(out, sort_keys=True, indent=2, ensure_ascii=False))
    return 0


def _read_items(args: argparse.Namespace):
    if args.qa_format == "jsonl":
        return read_qa(args.qa)
    _, items = _adapter(args.qa_format)(_read_native(args.qa))
    return items


def cmd_eval(args: argparse.Namespace) -> int:
    kb = load(args.kb)
    ledger = TokenLedger()
    embedder = _kb_embedder(kb, ledger)
    llm = _llm(args, ledger)
    judge = None
    if args.generate and args.judge:
        judge = make_llm(LlmSpec(kind=args.judge, fixtures=args.judge_fixtures or args.fixtures,
                                 endpoint=args.llm_endpoint, model=args.llm_model), ledger)
    cfg = _config(args)
    cache = QueryEntityCache(args.cache) if args.cache else None
    report = run_eval(kb, _read_items(args), cfg, llm, embedder, cache, args.generate, judge)
    if cache is not None:
        cache.save()
    if args.report:
        report.write(args.report)
    sys.stdout.write(report.table())
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.param not in HYPER_FLAGS:
        print(f"unknown parameter {args.param!r}; choose from {', '.join(HYPER_FLAGS)}", file=sys.stderr)
        return 2
    kb = load(args.kb)
    ledger = TokenLedger()
    embedder = _kb_embedder(kb, ledger)
    llm = _llm(args, ledger)
    values = [HYPER_FLAGS[args.param](v) for v in args.values.split(",") if v.strip()]
    rows = run_sweep(kb, _read_items(args), _config(args), args.param, values, llm, embedder)
    table = format_table(rows)
    if args.report:
        out = Path(args.report)
        for label, rep in rows:
            rep.write(out / label.replace("=", "_"), label)
        (out / "sweep.txt").write_text(table, encoding="utf-8")
    sys.stdout.write(table)
    return 0


def cmd_toy(args: argparse.Namespace) -> int:
    paths = write_toy(args.out)
    print(json.dumps({k: str(v) for k, v in paths.items()}, sort_keys=True, indent=2))
    return 0


def cmd_convert(args: argparse.Namespace) -> int:
    corpus, items = _adapter(args.format)(_read_native(args.input))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "corpus.jsonl").write_text(
        "".join(json.dumps(d, sort_keys=True, ensure_ascii=False) + "\n" for d in corpus), encoding="utf-8")
    write_qa(items, out / "qa.jsonl")
    print(json.dumps({"documents": len(corpus), "items": len(items)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="textgraph", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-kb", help="chunk, extract and embed a corpus into a KB directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--corpus-format", choices=("jsonl", "musique", "hotpotqa"), default="jsonl")
    p.add_argument("--out", required=True)
    p.add_argument("--embedder", choices=("mock", "remote"), default="mock")
    p.add_argument("--embed-endpoint")
    p.add_argument("--embed-model")
    p.add_argument("--dim", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0, help="mock embedder hash seed")
    p.add_argument("--window", type=int, default=1200)
    p.add_argument("--overlap", type=int, default=100)
    p.add_argument("--parallelism", type=int, default=4)
    p.add_argument("--min-success-ratio", type=float, default=0.9)
    _add_llm_args(p)
    p.set_defaults(func=cmd_build_kb)

    p = sub.add_parser("query", help="retrieve (and answer) one question")
    p.add_argument("--kb", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--show-context", action="store_true")
    p.add_argument("--no-generate", action="store_true")
    _add_llm_args(p)
    _add_hyper_args(p)
    p.set_defaults(func=cmd_query)

    for name, func, helptext in (("eval", cmd_eval, "evaluate a QA file"),
                                 ("sweep", cmd_sweep, "re-run eval over values of one hyperparameter")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--kb", required=True)
        p.add_argument("--qa", required=True)
        p.add_argument("--qa-format", choices=("jsonl", "musique", "hotpotqa"), default="jsonl")
        p.add_argument("--report", help="output directory for records, summary and table")
        _add_llm_args(p)
        _add_hyper_args(p)
        if name == "eval":
            p.add_argument("--generate", action="store_true", help="generate answers (and judge them)")
            p.add_argument("--no-generate", dest="generate", action="store_false")
            p.add_argument("--judge", choices=("mock", "remote"))
            p.add_argument("--judge-fixtures")
        else:
            p.add_argument("--param", required=True)
            p.add_argument("--values", required=True, help="comma-separated values")
        p.set_defaults(func=func)

    p = sub.add_parser("toy", help="write the bundled toy corpus, QA file and mock fixtures")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("convert", help="convert MuSiQue / HotpotQA native JSON into corpus.jsonl + qa.jsonl")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("musique", "hotpotqa"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ProviderError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
