"""Structure-aware retrieval and citation over HTML document trees."""

from __future__ import annotations

from treecite.context import ctx_headers, ctx_html, ctx_lists, ctx_tables, ctx_title
from treecite.doctree import (
    Element,
    Subdocument,
    Text,
    down,
    link,
    node_at,
    parse_html,
    prune,
    subdoc,
    up,
    valid_paths,
)
from treecite.filtering import Candidate, Citation, build_filter_prompt, filter_citations, run_filter
from treecite.index import MockEmbedder, VectorIndex, build_index, load_index, save_index, search
from treecite.local import Budget, expand_local
from treecite.render import RenderedView, cost, render_labeled, render_markdown
from treecite.retrieve import AggregatedResult, merge_candidates, retrieve
from treecite.segment import AnnotatedDoc, block_leaves, segment_sentences, sent_paths

__version__ = "0.1.0"

__all__ = [
    "AggregatedResult", "AnnotatedDoc", "Budget", "Candidate", "Citation", "Element",
    "MockEmbedder", "RenderedView", "Subdocument", "Text", "VectorIndex",
    "block_leaves", "build_filter_prompt", "build_index", "cost", "ctx_headers", "ctx_html",
    "ctx_lists", "ctx_tables", "ctx_title", "down", "expand_local", "filter_citations",
    "link", "load_index", "merge_candidates", "node_at", "parse_html", "prune",
    "render_labeled", "render_markdown", "retrieve", "run_filter", "save_index", "search",
    "segment_sentences", "sent_paths", "subdoc", "up", "valid_paths",
]
