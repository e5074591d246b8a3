"""Sentence structure on top of parsed HTML.

Sentences are recorded by inserting empty ``sentence-beg`` / ``sentence-end``
elements as siblings of existing content. Nothing is reparented: the only
structural change besides the sentinels is that a text leaf straddling a
sentence boundary is split in two.

Segmentation runs over *regions*: the children of every block leaf, plus each
maximal run of inline children found directly inside a non-leaf container
(for example the label text of a list item that holds a nested list, or bare
text in ``body``). Text inside ``head`` is never segmented.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from treecite.doctree import (
    HEADER_LEVELS,
    INLINE_TAGS,
    SENTENCE_BEGIN,
    SENTENCE_END,
    SENTINEL_TAGS,
    DocNode,
    Element,
    Path,
    PathSet,
    Text,
    descendants,
    node_at,
    preorder,
)
from treecite.errors import SpanMappingError, UnknownSentenceError

BLOCK_LEAF_TAGS = frozenset(
    {
        "p", "li", "td", "th", "h1", "h2", "h3", "h4", "h5", "h6", "blockquote",
        "caption", "div", "dt", "dd", "pre", "figcaption", "address", "summary",
    }
)

Span = tuple[int, int]


class SentenceSplitter(Protocol):
    def __call__(self, text: str) -> list[Span]: ...


# ---------------------------------------------------------------------------
# Default splitter
# ---------------------------------------------------------------------------

_ABBREVIATIONS = frozenset(
    {
        "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "vs", "etc",
        "e.g", "i.e", "inc", "ltd", "co", "corp", "no", "fig", "al", "approx",
        "dept", "est", "gen", "gov", "jan", "feb", "mar", "apr", "jun", "jul",
        "aug", "sep", "sept", "oct", "nov", "dec", "u.s", "u.k", "vol", "ed",
    }
)

_BOUNDARY = re.compile(r"[.!?]+[\"')\]”’]*(?=\s+[\"'(\[“‘]?[A-Z0-9])")
_WORD_BEFORE = re.compile(r"([A-Za-z][A-Za-z.]*)$")


@dataclass(frozen=True)
class RuleSplitter:
    """Terminal punctuation followed by whitespace and a capital, digit or quote.

    A period that ends a known abbreviation or a single-letter initial does not
    end a sentence.
    """

    abbreviations: frozenset = _ABBREVIATIONS

    def __call__(self, text: str) -> list[Span]:
        cuts = []
        for m in _BOUNDARY.finditer(text):
            if text[m.start()] == ".":
                word = _WORD_BEFORE.search(text, 0, m.start())
                if word:
                    token = word.group(1).lower().rstrip(".")
                    if token in self.abbreviations or (len(token) == 1 and token.isalpha()):
                        continue
            cuts.append(m.end())
        spans = []
        start = 0
        for end in cuts + [len(text)]:
            span = _trim(text, start, end)
            if span is not None:
                spans.append(span)
            start = end
        return spans


def _trim(text: str, start: int, end: int) -> Optional[Span]:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    return (start, end) if start < end else None


default_splitter = RuleSplitter()


# ---------------------------------------------------------------------------
# Annotated documents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnotatedDoc:
    """A document with sentinels inserted and the begin paths of its sentences."""

    doc: DocNode
    sentences: tuple[Path, ...]
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def sent_paths(self, b: Path) -> PathSet:
        return sent_paths(self, b)

    def is_header_sentence(self, b: Path) -> bool:
        parent = node_at(self.doc, b[:-1])
        return isinstance(parent, Element) and parent.tag in HEADER_LEVELS

    def content_sentences(self) -> list[Path]:
        """Sentences outside h1-h6; these are the ones indexed and cited."""
        key = "content"
        if key not in self._cache:
            self._cache[key] = [b for b in self.sentences if not self.is_header_sentence(b)]
        return self._cache[key]

    def sentence_units(self) -> list[tuple[Path, PathSet]]:
        """``(begin path, sentence paths)`` for every content sentence."""
        return [(b, sent_paths(self, b)) for b in self.content_sentences()]


def _contains_block(node: DocNode) -> bool:
    if isinstance(node, Text):
        return False
    for child in node.children:
        if isinstance(child, Element) and (child.tag in BLOCK_LEAF_TAGS or _contains_block(child)):
            return True
    return False


def is_block_leaf(node: DocNode) -> bool:
    return isinstance(node, Element) and node.tag in BLOCK_LEAF_TAGS and not _contains_block(node)


def block_leaves(doc: DocNode) -> list[Path]:
    """Paths of block-level elements without block-level descendants, in order."""
    return [p for p in preorder(doc) if is_block_leaf(node_at(doc, p))]


def _is_inline(node: DocNode) -> bool:
    if isinstance(node, Text):
        return True
    if node.tag not in INLINE_TAGS:
        return False
    return all(_is_inline(c) for c in node.children)


def _flat_text(node: DocNode) -> str:
    if isinstance(node, Text):
        return node.content
    if node.tag == "br":
        return "\n"
    return "".join(_flat_text(c) for c in node.children)


def _has_sentinel(node: DocNode) -> bool:
    if isinstance(node, Text):
        return False
    if node.tag in SENTINEL_TAGS:
        return True
    return any(_has_sentinel(c) for c in node.children)


def _check_spans(spans: Sequence[Span], n: int) -> list[Span]:
    out = []
    prev_end = 0
    for span in spans:
        try:
            s, e = int(span[0]), int(span[1])
        except (TypeError, ValueError, IndexError):
            raise SpanMappingError(f"malformed span {span!r}") from None
        if s < 0 or e > n or s > e:
            raise SpanMappingError(f"span ({s}, {e}) is out of range for text of length {n}")
        if s < prev_end:
            raise SpanMappingError(f"span ({s}, {e}) overlaps or precedes the previous span")
        if s < e:
            out.append((s, e))
            prev_end = e
    return out


def _segment_run(children: Sequence[DocNode], splitter: SentenceSplitter) -> list[DocNode]:
    texts = [_flat_text(c) for c in children]
    full = "".join(texts)
    if not full.strip():
        return list(children)
    spans = _check_spans(splitter(full), len(full))
    if not spans:
        return list(children)

    offsets = [0]
    for t in texts:
        offsets.append(offsets[-1] + len(t))

    cuts: list[int] = []
    for s, _ in spans[1:]:
        c = s
        for k, child in enumerate(children):
            if offsets[k] < c < offsets[k + 1] and not isinstance(child, Text):
                c = offsets[k + 1]  # never split an inline element
                break
        prev = cuts[-1] if cuts else 0
        if c <= prev or c >= len(full) or not full[prev:c].strip():
            continue
        cuts.append(c)
    while cuts and not full[cuts[-1]:].strip():
        cuts.pop()

    def pair():
        return [Element(SENTENCE_END), Element(SENTENCE_BEGIN)]

    out: list[DocNode] = [Element(SENTENCE_BEGIN)]
    ci = 0
    for k, child in enumerate(children):
        lo, hi = offsets[k], offsets[k + 1]
        while ci < len(cuts) and cuts[ci] <= lo:
            out.extend(pair())
            ci += 1
        if isinstance(child, Text):
            pos = lo
            while ci < len(cuts) and cuts[ci] < hi:
                out.append(Text(child.content[pos - lo : cuts[ci] - lo]))
                out.extend(pair())
                pos = cuts[ci]
                ci += 1
            out.append(Text(child.content[pos - lo :]) if pos != lo else child)
        else:
            out.append(child)
    out.append(Element(SENTENCE_END))
    return out


def _annotate(node: DocNode, splitter: SentenceSplitter) -> DocNode:
    if isinstance(node, Text) or node.tag == "head":
        return node
    if is_block_leaf(node):
        kids = _segment_run(node.children, splitter)
        return Element(node.tag, node.attrs, tuple(kids))
    kids: list[DocNode] = []
    run: list[DocNode] = []
    for child in node.children:
        if _is_inline(child):
            run.append(child)
            continue
        if run:
            kids.extend(_segment_run(run, splitter))
            run = []
        kids.append(_annotate(child, splitter))
    if run:
        kids.extend(_segment_run(run, splitter))
    return Element(node.tag, node.attrs, tuple(kids))


def _sentence_begins(doc: DocNode) -> tuple[Path, ...]:
    return tuple(
        p
        for p in preorder(doc)
        if isinstance(node_at(doc, p), Element) and node_at(doc, p).tag == SENTENCE_BEGIN
    )


def segment_sentences(doc: DocNode, splitter: Optional[SentenceSplitter] = None) -> AnnotatedDoc:
    """Insert sentinel pairs at sentence boundaries.

    Inline elements are never split; a boundary that falls inside one moves to
    the element's end. A tree that already carries sentinels is returned as is.

    Raises:
        SpanMappingError: if the splitter returns overlapping or out-of-range spans.
    """
    splitter = splitter or default_splitter
    if not _has_sentinel(doc):
        doc = _annotate(doc, splitter)
    return AnnotatedDoc(doc, _sentence_begins(doc))


def sent_paths(annotated: AnnotatedDoc, b: Path) -> PathSet:
    """Paths of the content between the sentinels of sentence ``b``."""
    b = tuple(b)
    cache = annotated._cache.setdefault("sent", {})
    if b in cache:
        return cache[b]
    known = annotated._cache.get("known")
    if known is None:
        known = annotated._cache["known"] = frozenset(annotated.sentences)
    if b not in known:
        raise UnknownSentenceError(f"no sentence begins at {list(b)}")
    parent = node_at(annotated.doc, b[:-1])
    out: set[Path] = set()
    for i in range(b[-1] + 1, len(parent.children)):
        child = parent.children[i]
        if isinstance(child, Element) and child.tag in SENTINEL_TAGS:
            break
        out.update(descendants(annotated.doc, b[:-1] + (i,)))
    result = frozenset(out)
    cache[b] = result
    return result


def strip_sentinels(doc: DocNode) -> DocNode:
    """Remove sentinel elements and re-join text leaves they separated."""
    if isinstance(doc, Text):
        return doc
    kids: list[DocNode] = []
    for child in doc.children:
        if isinstance(child, Element) and child.tag in SENTINEL_TAGS:
            continue
        child = strip_sentinels(child)
        if isinstance(child, Text) and kids and isinstance(kids[-1], Text):
            kids[-1] = Text(kids[-1].content + child.content)
        else:
            kids.append(child)
    return Element(doc.tag, doc.attrs, tuple(kids))


def sentence_text(annotated: AnnotatedDoc, b: Path) -> str:
    parts = []
    for p in sorted(sent_paths(annotated, b)):
        node = node_at(annotated.doc, p)
        if isinstance(node, Text):
            parts.append(node.content)
    return "".join(parts)
