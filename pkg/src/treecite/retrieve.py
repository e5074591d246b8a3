"""Query-time retrieval with document-level aggregation under a budget."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from treecite.context import DEFAULT_POLICIES, ctx_html
from treecite.doctree import PathSet, paths_to_json
from treecite.errors import ProviderError
from treecite.index import IndexEntry, VectorIndex, search
from treecite.local import Budget
from treecite.render import render_markdown

TRUNCATION_MARKER = "[truncated]"


@dataclass(frozen=True)
class AggregatedResult:
    doc_id: str
    merged_seed: PathSet
    ctx_paths: PathSet
    rendered: str
    cost: int
    best_rank: int
    truncated: bool = False

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "best_rank": self.best_rank,
            "cost": self.cost,
            "source_paths": paths_to_json(self.merged_seed),
            "rendered_markdown": self.rendered,
        }


def merge_candidates(hits: Sequence[IndexEntry]) -> list[tuple[str, PathSet, int]]:
    """Group ranked hits by document; ranks are 1-based hit positions.

    Groups come out in order of first appearance, which is best-rank order.
    """
    groups: dict[str, list] = {}
    for rank, hit in enumerate(hits, start=1):
        if hit.doc_id in groups:
            groups[hit.doc_id][0] |= hit.seed
        else:
            groups[hit.doc_id] = [frozenset(hit.seed), rank]
    return [(doc_id, seed, rank) for doc_id, (seed, rank) in groups.items()]


def admit(costs: Sequence[int], limit: int) -> tuple[list[int], bool]:
    """Greedy admission over results in rank order.

    Returns the admitted positions and whether the carve-out applied: a first
    result larger than the whole budget is admitted alone (to be truncated).
    Later results that do not fit are skipped and admission continues.
    """
    if not costs:
        return [], False
    if costs[0] > limit:
        return [0], True
    admitted, total = [], 0
    for i, c in enumerate(costs):
        if total + c <= limit:
            admitted.append(i)
            total += c
    return admitted, False


def truncate_to_budget(text: str, budget: Budget, marker: str = TRUNCATION_MARKER) -> str:
    """Longest whitespace-aligned prefix that, with ``marker`` appended, fits."""
    if budget.cost(text) <= budget.limit:
        return text
    cuts = [i for i in range(len(text)) if text[i].isspace() and (i == 0 or not text[i - 1].isspace())]
    lo, hi = 0, len(cuts) - 1
    best = marker
    while lo <= hi:
        mid = (lo + hi) // 2
        candidate = text[: cuts[mid]].rstrip() + "\n\n" + marker
        if budget.cost(candidate) <= budget.limit:
            best = candidate.lstrip()
            lo = mid + 1
        else:
            hi = mid - 1
    return best


def aggregate(
    index: VectorIndex,
    doc_id: str,
    seed: PathSet,
    best_rank: int,
    budget: Budget,
    policies: Sequence[str] = DEFAULT_POLICIES,
) -> AggregatedResult:
    """Contextualize a merged seed once and render it."""
    doc = index.documents[doc_id].doc
    ctx = ctx_html(doc, seed, policies)
    text = render_markdown(doc, ctx)
    return AggregatedResult(doc_id, seed, ctx, text, budget.cost(text), best_rank)


def embed_query(provider, query: str):
    try:
        vectors = provider.embed([query])
    except ProviderError:
        raise
    except Exception as exc:
        raise ProviderError(f"query embedding failed: {exc}") from exc
    if len(vectors) != 1:
        raise ProviderError("provider returned no vector for the query")
    return vectors[0]


def retrieve(
    index: VectorIndex,
    provider,
    query: str,
    budget: Budget,
    initial_k: int = 8,
    fill_threshold: float = 0.8,
    policies: Sequence[str] = DEFAULT_POLICIES,
) -> list[AggregatedResult]:
    """Ranked, per-document aggregated results whose total cost fits ``budget``.

    The ranked prefix starts at ``initial_k`` hits and doubles while the
    admitted cost stays under ``fill_threshold * budget.limit`` and unseen hits
    remain.
    """
    if budget.limit <= 0:
        raise ValueError("retrieval budget must be positive")
    if initial_k < 1:
        raise ValueError("initial_k must be at least 1")
    n = len(index)
    if n == 0:
        return []
    qvec = embed_query(provider, query)
    k = min(initial_k, n)
    cache: dict[tuple[str, PathSet], AggregatedResult] = {}
    while True:
        hits = [entry for entry, _ in search(index, qvec, k)]
        results = []
        for doc_id, seed, rank in merge_candidates(hits):
            key = (doc_id, seed)
            if key not in cache:
                cache[key] = aggregate(index, doc_id, seed, rank, budget, policies)
            r = cache[key]
            if r.best_rank != rank:
                r = AggregatedResult(r.doc_id, r.merged_seed, r.ctx_paths, r.rendered, r.cost, rank)
            results.append(r)
        chosen, oversize = admit([r.cost for r in results], budget.limit)
        if oversize:
            first = results[0]
            text = truncate_to_budget(first.rendered, budget)
            return [
                AggregatedResult(
                    first.doc_id, first.merged_seed, first.ctx_paths, text,
                    budget.cost(text), first.best_rank, truncated=True,
                )
            ]
        admitted = [results[i] for i in chosen]
        total = sum(r.cost for r in admitted)
        if total < fill_threshold * budget.limit and k < n:
            k = min(2 * k, n)
            continue
        return admitted


def results_to_json(results: Iterable[AggregatedResult]) -> list[dict]:
    return [r.to_json() for r in results]
