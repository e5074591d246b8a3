"""Command-line interface: ingest, index, query and eval.

JSON goes to stdout, diagnostics to stderr. Exit codes: 0 success, 2 usage or
validation error, 3 configuration error, 4 provider error, 5 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path as FsPath
from typing import Optional, Sequence

from treecite.config import Config, load_config
from treecite.doctree import parse_html, paths_from_json
from treecite.errors import (
    ConfigError,
    IndexFormatError,
    MalformedEncodingError,
    ProviderError,
)
from treecite.evaluate import judge_citations
from treecite.filtering import candidates_from_results, run_filter
from treecite.index import HttpEmbeddingProvider, MockEmbedder, build_index, load_index, save_index
from treecite.local import Budget
from treecite.providers import (
    HttpGenerativeProvider,
    OverlapJudge,
    ScriptedProvider,
    SelectAllProvider,
    SelectNoneProvider,
)
from treecite.retrieve import results_to_json, retrieve
from treecite.segment import block_leaves, segment_sentences

EXIT_USAGE, EXIT_CONFIG, EXIT_PROVIDER, EXIT_DATA = 2, 3, 4, 5
MANIFEST_VERSION = 1
HTML_SUFFIXES = (".html", ".htm", ".xhtml")

log = logging.getLogger("treecite")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_atomic(path: str, data: str | bytes) -> None:
    raw = data.encode("utf-8") if isinstance(data, str) else data
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".treecite-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(obj, out: Optional[str]) -> None:
    text = dumps(obj)
    if out:
        write_atomic(out, text)
    sys.stdout.write(text)


def make_embedder(cfg: Config):
    kind = cfg.embedding_provider
    limit = cfg.embedding_max_tokens or None
    if kind == "mock":
        return MockEmbedder(cfg.embedding_dim, cfg.seed, limit)
    if kind == "http":
        if not cfg.embedding_endpoint:
            raise ConfigError("embedding_provider 'http' requires embedding_endpoint")
        return HttpEmbeddingProvider(cfg.embedding_endpoint, cfg.embedding_dim, cfg.embedding_api_key or None, max_input_tokens=limit)
    if not kind:
        raise ConfigError("no embedding provider configured (set embedding_provider)")
    raise ConfigError(f"unknown embedding provider {kind!r}")


def _generative(kind: str, endpoint: str, api_key: str, transcript: str, role: str, mocks: dict):
    if kind in mocks:
        return mocks[kind]()
    if kind == "scripted":
        if not transcript:
            raise ConfigError(f"{role}_provider 'scripted' requires {role}_transcript")
        try:
            return ScriptedProvider.load(transcript)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load {role} transcript: {exc}") from None
    if kind == "http":
        if not endpoint:
            raise ConfigError(f"{role}_provider 'http' requires {role}_endpoint")
        return HttpGenerativeProvider(endpoint, api_key or None)
    if not kind:
        raise ConfigError(f"no {role} provider configured (set {role}_provider)")
    raise ConfigError(f"unknown {role} provider {kind!r}")


def make_generator(cfg: Config):
    mocks = {"mock-all": SelectAllProvider, "mock-none": SelectNoneProvider}
    return _generative(cfg.generative_provider, cfg.generative_endpoint, cfg.generative_api_key, cfg.generative_transcript, "generative", mocks)


def make_judge(cfg: Config):
    mocks = {"mock-overlap": OverlapJudge}
    return _generative(cfg.judge_provider, cfg.judge_endpoint, cfg.judge_api_key, cfg.judge_transcript, "judge", mocks)


def read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from None


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _describe(doc) -> dict:
    annotated = segment_sentences(doc)
    return {
        "sentences": len(annotated.content_sentences()),
        "block_leaves": len(block_leaves(annotated.doc)),
    }


def cmd_ingest(args, cfg: Config) -> dict:
    corpus = FsPath(args.corpus_dir)
    if not corpus.is_dir():
        raise DataError(f"corpus directory {corpus} does not exist")
    out_path = args.out or cfg.manifest_path or None
    base = FsPath(out_path).resolve().parent if out_path else FsPath.cwd()
    documents, diagnostics = [], []
    for path in sorted(p for p in corpus.rglob("*") if p.suffix.lower() in HTML_SUFFIXES):
        doc_id = path.relative_to(corpus).as_posix()
        try:
            doc = parse_html(path.read_bytes())
        except (OSError, MalformedEncodingError) as exc:
            diagnostics.append({"file": doc_id, "error": str(exc)})
            print(f"treecite: skipping {doc_id}: {exc}", file=sys.stderr)
            continue
        documents.append({"doc_id": doc_id, "file": doc_id, **_describe(doc)})
    queries = []
    if args.bundles:
        try:
            lines = FsPath(args.bundles).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise DataError(f"cannot read bundles {args.bundles}: {exc}") from None
        for n, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                query = record.get("query") or record.get("question")
                pages = record.get("pages") or record.get("docs") or []
            except (ValueError, AttributeError) as exc:
                diagnostics.append({"file": f"{args.bundles}:{n}", "error": f"bad bundle line: {exc}"})
                continue
            ids = []
            for i, page in enumerate(pages):
                html = page.get("html", "") if isinstance(page, dict) else str(page)
                doc_id = f"bundle-{n}/{page.get('id', i) if isinstance(page, dict) else i}"
                documents.append({"doc_id": doc_id, "html": html, **_describe(parse_html(html))})
                ids.append(doc_id)
            queries.append({"query": query, "doc_ids": ids})
    manifest = {
        "version": MANIFEST_VERSION,
        "corpus_dir": os.path.relpath(corpus.resolve(), base),
        "documents": documents,
        "diagnostics": diagnostics,
    }
    if queries:
        manifest["queries"] = queries
    return manifest


def cmd_index(args, cfg: Config) -> dict:
    provider = make_embedder(cfg)  # configuration errors surface before any work
    out = args.out or cfg.index_path
    if not out:
        raise UsageError("index: an output path is required (--out or index_path)")
    manifest_path = args.manifest or cfg.manifest_path
    manifest = read_json(manifest_path)
    if manifest.get("version") != MANIFEST_VERSION:
        raise DataError(f"unsupported manifest version {manifest.get('version')!r}")
    root = FsPath(manifest_path).resolve().parent / manifest.get("corpus_dir", ".")
    corpus = []
    for entry in manifest.get("documents", []):
        try:
            source = entry["html"] if "html" in entry else (root / entry["file"]).read_bytes()
            corpus.append((entry["doc_id"], parse_html(source)))
        except (OSError, KeyError, MalformedEncodingError) as exc:
            raise DataError(f"cannot load document {entry.get('doc_id')!r}: {exc}") from None
    index = build_index(
        corpus,
        provider,
        policies=cfg.policy_names,
        batch_size=cfg.batch_size,
        parallelism=cfg.parallelism,
        retries=cfg.retries,
    )
    save_index(index, out)
    return {"index": out, "documents": len(index.documents), "entries": len(index)}


def cmd_query(args, cfg: Config) -> dict:
    if not args.query.strip():
        raise UsageError("query must not be empty")
    if cfg.budget <= 0:
        raise UsageError("budget must be positive")
    embedder = make_embedder(cfg)
    generator = make_generator(cfg) if args.filter == "on" else None
    try:
        index = load_index(args.index)
    except OSError as exc:
        raise DataError(f"cannot read index {args.index}: {exc}") from None
    results = retrieve(
        index,
        embedder,
        args.query,
        Budget(cfg.budget),
        initial_k=cfg.k_init,
        fill_threshold=cfg.fill_threshold,
        policies=cfg.policy_names,
    )
    out = {
        "query": args.query,
        "budget": cfg.budget,
        "total_cost": sum(r.cost for r in results),
        "results": results_to_json(results),
    }
    if generator is not None:
        report = run_filter(
            candidates_from_results(index, results),
            args.query,
            generator,
            Budget(cfg.expand_budget),
            concurrency=cfg.concurrency,
            policies=cfg.policy_names,
        )
        out["citations"] = [c.to_json() for c in report.citations]
        out["diagnostics"] = report.diagnostics
        for note in report.diagnostics:
            print(f"treecite: {note}", file=sys.stderr)
    return out


def cmd_eval(args, cfg: Config) -> dict:
    judge = make_judge(cfg)
    data = read_json(args.results)
    runs = data if isinstance(data, list) else [data]
    items = []
    for run in runs:
        query = run.get("query", "")
        if "citations" in run:
            for c in run["citations"]:
                items.append((query, c["doc_id"], c["paths"], c["text"]))
        else:
            for r in run.get("results", []):
                items.append((query, r["doc_id"], r["source_paths"], r["rendered_markdown"]))
    for _, _, paths, _ in items:
        paths_from_json(paths)  # validates the shape
    report = judge_citations(items, judge, concurrency=cfg.concurrency)
    if report.unparseable:
        print(f"treecite: {report.unparseable} verdict(s) could not be read", file=sys.stderr)
    return report.to_json()


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat TOML configuration file")
    common.add_argument("--seed", type=int, help="seed for mock providers")
    common.add_argument("--out", help="also write the JSON output to this file")

    parser = argparse.ArgumentParser(prog="treecite", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse and segment a directory of HTML files")
    p.add_argument("corpus_dir")
    p.add_argument("--bundles", help="JSONL file of {query, pages} bundles")

    p = sub.add_parser("index", parents=[common], help="build the sentence index from a manifest")
    p.add_argument("manifest", nargs="?")

    p = sub.add_parser("query", parents=[common], help="retrieve (and optionally filter) for a query")
    p.add_argument("index")
    p.add_argument("query")
    p.add_argument("--budget", type=int, help="output budget in tokens (default 1000)")
    p.add_argument("--filter", choices=("on", "off"), default="off")
    p.add_argument("--k-init", dest="k_init", type=int, help="initial retrieval prefix size")
    p.add_argument("--expand-budget", dest="expand_budget", type=int, help="per-view expansion budget")

    p = sub.add_parser("eval", parents=[common], help="judge citations from a query output file")
    p.add_argument("results")
    return parser


COMMANDS = {"ingest": cmd_ingest, "index": cmd_index, "query": cmd_query, "eval": cmd_eval}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="treecite: %(message)s", stream=sys.stderr)
    overrides = {"seed": args.seed}
    for name in ("budget", "k_init", "expand_budget"):
        overrides[name] = getattr(args, name, None)
    if args.command == "query" and args.budget is not None and args.budget <= 0:
        print("treecite: --budget must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config, overrides=overrides)
        if args.command == "index" and not (args.manifest or cfg.manifest_path):
            raise UsageError("index: a manifest path is required")
        if args.command == "index" and args.out is None and cfg.index_path:
            args.out = cfg.index_path
        result = COMMANDS[args.command](args, cfg)
        out = None if args.command == "index" else args.out
        emit(result, out)
        return 0
    except UsageError as exc:
        print(f"treecite: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"treecite: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProviderError as exc:
        print(f"treecite: provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (DataError, IndexFormatError, MalformedEncodingError) as exc:
        print(f"treecite: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"treecite: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
