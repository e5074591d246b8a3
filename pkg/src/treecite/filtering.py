"""Contextual filtering with a label-based citation protocol.

Every candidate is expanded locally, rendered with its citable units wrapped
in ``<lab_N>`` markers and shown to a generative model, which answers with a
JSON array of opening tags. Each accepted label maps back to the exact path
set that was wrapped.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from treecite.context import DEFAULT_POLICIES, ctx_html
from treecite.doctree import HEADER_LEVELS, Path, PathSet, down, node_at, paths_to_json, text_leaves
from treecite.errors import LabelParseError
from treecite.local import Budget, expand_local
from treecite.prompts import fill, selector_template
from treecite.render import RenderedView, render_labeled, render_markdown
from treecite.segment import AnnotatedDoc, block_leaves

log = logging.getLogger(__name__)

_FENCE = re.compile(r"```[a-zA-Z0-9_-]*")
_TAG = re.compile(r"^\s*<(lab_\d+)>\s*$")
_BARE = re.compile(r"^\s*(lab_\d+)\s*$")


@dataclass(frozen=True)
class Candidate:
    """A subdocument handed to the filter: document, id and seed paths."""

    doc_id: str
    annotated: AnnotatedDoc
    paths: PathSet


@dataclass(frozen=True)
class Citation:
    doc_id: str
    paths: PathSet
    text: str = field(default="", compare=False)

    def to_json(self) -> dict:
        return {"doc_id": self.doc_id, "paths": paths_to_json(self.paths), "text": self.text}


@dataclass
class FilterReport:
    citations: list[Citation]
    diagnostics: list[str] = field(default_factory=list)
    views: list[RenderedView] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Prompt and response handling
# ---------------------------------------------------------------------------


def build_filter_prompt(view: RenderedView, query: str) -> str:
    """Fill the evidence-selector template with the labeled excerpt and query."""
    if not query or not query.strip():
        raise ValueError("query must be a non-empty string")
    if not view.label_map:
        raise ValueError("view has no labels to select from")
    return fill(selector_template(), excerpt_md=view.text, query=query)


def _first_array(raw: str):
    text = _FENCE.sub("", raw)
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\[", text):
        try:
            value, _ = decoder.raw_decode(text, m.start())
        except ValueError:
            continue
        if isinstance(value, list):
            return value
    raise LabelParseError("response contains no JSON array")


def parse_labels(raw: str, known: Iterable[str]) -> tuple[set[str], list]:
    """Accepted labels and the rejected array entries.

    Entries may be opening tags (``"<lab_2>"``) or bare names (``"lab_2"``).

    Raises:
        LabelParseError: when the response holds no JSON array.
    """
    known = set(known)
    accepted, rejected = set(), []
    for item in _first_array(raw):
        m = (_TAG.match(item) or _BARE.match(item)) if isinstance(item, str) else None
        if m and m.group(1) in known:
            accepted.add(m.group(1))
        else:
            rejected.append(item)
    return accepted, rejected


def parse_label_response(raw: str, known: Iterable[str]) -> set[str]:
    return parse_labels(raw, known)[0]


# ---------------------------------------------------------------------------
# Views
# ---------------------------------------------------------------------------


def citable_units(annotated: AnnotatedDoc, P: PathSet) -> list[PathSet]:
    """Sentences inside ``P`` (clipped to ``P``); non-header block leaves
    where no sentence is present."""
    doc = annotated.doc
    units = []
    claimed: set[Path] = set()
    for _, paths in annotated.sentence_units():
        unit = paths & P
        if text_leaves(doc, unit):
            units.append(unit)
            claimed.update(unit)
    for b in block_leaves(doc):
        inner = down(doc, {b})
        if node_at(doc, b).tag in HEADER_LEVELS or inner & claimed:
            continue
        unit = (inner & P) - {b}
        if text_leaves(doc, unit):
            units.append(unit)
    return units


def build_view(
    candidate: Candidate,
    budget: Budget,
    policies: Sequence[str] = DEFAULT_POLICIES,
) -> RenderedView:
    doc = candidate.annotated.doc
    expanded = expand_local(candidate.annotated, candidate.paths, budget, policies)
    units = citable_units(candidate.annotated, expanded)
    return render_labeled(doc, ctx_html(doc, expanded, policies), units, origin=candidate.doc_id)


def _ask(provider, prompt: str, known, retries: int = 1) -> tuple[set[str], list, list[str]]:
    notes = []
    for attempt in range(retries + 1):
        raw = provider.complete(prompt)
        try:
            accepted, rejected = parse_labels(raw, known)
            return accepted, rejected, notes
        except LabelParseError as exc:
            notes.append(f"unparseable response (attempt {attempt + 1}): {exc}")
    return set(), [], notes


def _run_view(candidate, query, provider, budget, policies):
    view = build_view(candidate, budget, policies)
    if not view.label_map:
        return view, [], [f"{candidate.doc_id}: view has no citable units"]
    prompt = build_filter_prompt(view, query)
    try:
        accepted, rejected, notes = _ask(provider, prompt, view.label_map)
    except Exception as exc:  # provider failures skip the view
        return view, [], [f"{candidate.doc_id}: provider failed: {exc}"]
    notes = [f"{candidate.doc_id}: {n}" for n in notes]
    if rejected:
        notes.append(f"{candidate.doc_id}: ignored unknown labels {json.dumps(rejected, ensure_ascii=False)}")
    doc = candidate.annotated.doc
    ordered = sorted(accepted, key=lambda s: int(s.split("_")[1]))
    cites = [
        Citation(
            candidate.doc_id,
            view.label_map[label],
            render_markdown(doc, ctx_html(doc, view.label_map[label], policies)),
        )
        for label in ordered
    ]
    return view, cites, notes


def run_filter(
    candidates: Sequence[Candidate],
    query: str,
    provider,
    budget: Optional[Budget] = None,
    concurrency: int = 4,
    policies: Sequence[str] = DEFAULT_POLICIES,
) -> FilterReport:
    """Filter every candidate view; one provider call per view.

    Views run concurrently up to ``concurrency``; merging happens afterwards
    in candidate order, so the output does not depend on scheduling.
    """
    if not query or not query.strip():
        raise ValueError("query must be a non-empty string")
    budget = budget or Budget(1000)
    for c in candidates:
        if not c.paths:
            raise ValueError(f"candidate {c.doc_id!r} has an empty path set")

    def work(c):
        return _run_view(c, query, provider, budget, policies)

    if concurrency > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            outcomes = list(pool.map(work, candidates))
    else:
        outcomes = [work(c) for c in candidates]

    report = FilterReport([])
    seen = set()
    for view, cites, notes in outcomes:
        report.views.append(view)
        report.diagnostics.extend(notes)
        for cite in cites:
            key = (cite.doc_id, cite.paths)
            if key not in seen:
                seen.add(key)
                report.citations.append(cite)
    for note in report.diagnostics:
        log.info("%s", note)
    return report


def filter_citations(candidates, query, budget, provider, **kwargs) -> list[Citation]:
    return run_filter(candidates, query, provider, budget, **kwargs).citations


def candidates_from_results(index, results) -> list[Candidate]:
    """Turn aggregated retrieval results into filter candidates."""
    return [Candidate(r.doc_id, index.documents[r.doc_id], r.merged_seed) for r in results]
