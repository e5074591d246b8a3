"""Markdown rendering of (sub)documents and labeled views.

Rendering works on a materialized tree. :func:`render_markdown` materializes
``(doc, P)`` with :func:`treecite.doctree.materialize` and serializes the
result. :func:`render_labeled` does the same but wraps each citable unit in
``<lab_N>`` / ``</lab_N>`` markers without touching the tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

from treecite.doctree import (
    HEADER_LEVELS,
    INLINE_TAGS,
    SENTINEL_TAGS,
    DocNode,
    Element,
    Path,
    PathSet,
    Text,
    check_paths,
    materialize,
    node_at,
    text_leaves,
)
from treecite.context import row_cells, table_rows
from treecite.errors import OverlapError

Sizer = Callable[[str], int]

# Private-use code points bracket label markers while text is assembled.
_OPEN, _CLOSE, _SEP = "\ue000", "\ue001", "\ue002"
_MARK = re.compile(f"[{_OPEN}{_CLOSE}]\\d+{_SEP}")
_WS_AFTER_OPEN = re.compile(f"({_OPEN}\\d+{_SEP})(\\s+)")
_WS_BEFORE_CLOSE = re.compile(f"(\\s+)({_CLOSE}\\d+{_SEP})")
_WS = re.compile(r"\s+")
_LEADING_OPENS = re.compile(f"(?:{_OPEN}\\d+{_SEP}\\s*)*")
_TRAILING_CLOSES = re.compile(f"(?:\\s*{_CLOSE}\\d+{_SEP})*$")

_SKIP_TAGS = frozenset({"script", "style", "template", "noscript", "meta", "link", "base"})


def whitespace_tokens(text: str) -> int:
    """Default size function: number of whitespace-separated tokens."""
    return len(text.split())


def cost(text: str, sizer: Optional[Sizer] = None) -> int:
    return (sizer or whitespace_tokens)(text)


# ---------------------------------------------------------------------------
# Tree to Markdown
# ---------------------------------------------------------------------------


def _is_block(node: DocNode) -> bool:
    if isinstance(node, Text):
        return False
    if node.tag not in INLINE_TAGS:
        return True
    return any(_is_block(c) for c in node.children)


class _Renderer:
    """Serializes one materialized tree.

    ``on_text`` lets the labeling pass decorate text leaves; it receives the
    node and its default content and returns the string to emit.
    """

    def __init__(self, on_text: Optional[Callable[[Text, str], str]] = None):
        self.on_text = on_text

    # -- inline --
    def inline(self, node: DocNode) -> str:
        if isinstance(node, Text):
            return self.on_text(node, node.content) if self.on_text else node.content
        tag = node.tag
        if tag in SENTINEL_TAGS or tag in _SKIP_TAGS:
            return ""
        if tag == "br":
            return " "
        if tag == "img":
            alt = node.get("alt") or ""
            src = node.get("src")
            return f"![{alt}]({src})" if src else alt
        inner = "".join(self.inline(c) for c in node.children)
        if tag == "a":
            href = node.get("href")
            return _wrap(inner, "[", f"]({href})") if href else inner
        if tag in ("b", "strong"):
            return _wrap(inner, "**", "**")
        if tag in ("i", "em"):
            return _wrap(inner, "*", "*")
        if tag == "code":
            return _wrap(inner, "`", "`")
        return inner

    def inline_block(self, nodes: Sequence[DocNode]) -> str:
        return _squash("".join(self.inline(n) for n in nodes))

    # -- blocks --
    def blocks(self, node: DocNode) -> list[str]:
        if isinstance(node, Text) or not _is_block(node):
            text = self.inline_block([node])
            return [text] if _visible(text) else []
        tag = node.tag
        if tag in SENTINEL_TAGS or tag in _SKIP_TAGS:
            return []
        if tag == "head":
            out = []
            for c in node.children:
                if isinstance(c, Element) and c.tag == "title":
                    out.extend(self.blocks(c))
            return out
        if tag == "title":
            text = self.inline_block(node.children)
            return [f"# {text}"] if _visible(text) else []
        if tag in HEADER_LEVELS:
            text = self.inline_block(node.children)
            return [f"{'#' * HEADER_LEVELS[tag]} {text}"] if _visible(text) else []
        if tag in ("ul", "ol"):
            text = self.list_block(node)
            return [text] if text else []
        if tag == "table":
            text = self.table_block(node)
            return [text] if text else []
        if tag == "pre":
            raw = _move_ws("".join(self.inline(c) for c in node.children)).strip("\n")
            return [f"```\n{raw}\n```"] if _visible(raw) else []
        if tag == "hr":
            return ["---"]
        inner = self.children_blocks(node.children)
        if tag == "blockquote":
            return ["\n".join("> " + line if line else ">" for line in "\n\n".join(inner).split("\n"))] if inner else []
        return inner

    def children_blocks(self, children: Sequence[DocNode]) -> list[str]:
        out: list[str] = []
        run: list[DocNode] = []
        for child in children:
            if _is_block(child):
                if run:
                    text = self.inline_block(run)
                    if _visible(text):
                        out.append(text)
                    run = []
                out.extend(self.blocks(child))
            else:
                run.append(child)
        if run:
            text = self.inline_block(run)
            if _visible(text):
                out.append(text)
        return out

    def list_block(self, node: Element) -> str:
        ordered = node.tag == "ol"
        lines: list[str] = []
        n = 0
        for child in node.children:
            if isinstance(child, Element) and child.tag == "li":
                parts = self.children_blocks(child.children)
                if not parts:
                    continue
                n += 1
                marker = f"{n}. " if ordered else "- "
                body = "\n".join(parts).split("\n")
                indent = " " * len(marker)
                lines.append(marker + body[0])
                lines.extend(indent + line if line else "" for line in body[1:])
            else:
                lines.extend(self.blocks(child))
        return "\n".join(lines)

    def table_block(self, node: Element) -> str:
        rows = []
        for rp in table_rows(node, ()):
            cells = [
                _squash(" ".join(self.children_blocks(node_at(node, c).children))).replace("|", "\\|")
                for c in row_cells(node, rp)
            ]
            if cells:
                rows.append(cells)
        caption = [
            self.inline_block(c.children)
            for c in node.children
            if isinstance(c, Element) and c.tag == "caption"
        ]
        out = [c for c in caption if _visible(c)]
        if rows:
            width = max(len(r) for r in rows)
            lines = []
            for i, r in enumerate(rows):
                r = r + [""] * (width - len(r))
                lines.append("| " + " | ".join(r) + " |")
                if i == 0:
                    lines.append("|" + " --- |" * width)
            out.append("\n".join(lines))
        return "\n\n".join(out)

    def render(self, root: DocNode) -> str:
        return "\n\n".join(self.blocks(root)).strip()


def _wrap(inner: str, left: str, right: str) -> str:
    core = inner.strip()
    if not _visible(core):
        return inner
    lead = inner[: len(inner) - len(inner.lstrip())]
    trail = inner[len(inner.rstrip()) :]
    # Keep label markers that open or close at the edges outside the markup.
    head = _LEADING_OPENS.match(core).group(0)
    tail = _TRAILING_CLOSES.search(core).group(0)
    core = core[len(head) : len(core) - len(tail)]
    head, tail = head + core[: len(core) - len(core.lstrip())], core[len(core.rstrip()) :] + tail
    core = core.strip()
    return f"{lead}{head}{left}{core}{right}{tail}{trail}"


def _visible(text: str) -> bool:
    return bool(_MARK.sub("", text).strip())


def _move_ws(text: str) -> str:
    """Push whitespace outside of label markers."""
    while True:
        moved = _WS_BEFORE_CLOSE.sub(r"\2\1", _WS_AFTER_OPEN.sub(r"\2\1", text))
        if moved == text:
            return text
        text = moved


def _squash(text: str) -> str:
    return _WS.sub(" ", _move_ws(text)).strip()


def render_tree(tree: Optional[DocNode]) -> str:
    """Markdown for an already materialized tree."""
    if tree is None:
        return ""
    return _Renderer().render(tree)


def render_markdown(doc: DocNode, P: Iterable[Path]) -> str:
    """Materialize ``(doc, P)`` and render it. ``P`` is used as given."""
    P = frozenset(P)
    if not P:
        return ""
    check_paths(doc, P)
    return render_tree(materialize(doc, P))


# ---------------------------------------------------------------------------
# Labeled views
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RenderedView:
    """Rendered text plus the source path set behind each label."""

    text: str
    label_map: Mapping[str, PathSet] = field(default_factory=dict)
    origin: Optional[str] = None

    @property
    def labels(self) -> list[str]:
        return list(self.label_map)


def label_name(n: int) -> str:
    return f"lab_{n}"


def strip_labels(text: str) -> str:
    return re.sub(r"</?lab_\d+>", "", text)


def render_labeled(
    doc: DocNode,
    P: Iterable[Path],
    units: Sequence[Iterable[Path]],
    origin: Optional[str] = None,
) -> RenderedView:
    """Render ``(doc, P)`` wrapping each unit's text in ``<lab_N>`` markers.

    Labels are numbered from 1 in document order of each unit's first rendered
    text. Units that render no visible text get no label. ``doc`` may be an
    :class:`~treecite.segment.AnnotatedDoc` or a plain tree.

    Raises:
        OverlapError: if two units share a text leaf.
    """
    doc = getattr(doc, "doc", doc)
    P = frozenset(P)
    units = [frozenset(u) for u in units]
    check_paths(doc, P)
    owner: dict[Path, int] = {}
    for i, unit in enumerate(units):
        check_paths(doc, unit)
        for leaf in text_leaves(doc, unit):
            if leaf in owner:
                raise OverlapError(f"units {owner[leaf]} and {i} share text leaf {list(leaf)}")
            owner[leaf] = i
    if not P:
        return RenderedView("", {}, origin)
    tree = materialize(doc, P)

    # First pass: which leaves are emitted with visible text, in order.
    emitted: list[Path] = []

    def record(node: Text, content: str) -> str:
        if node.origin in owner and content.strip():
            emitted.append(node.origin)
        return content

    _Renderer(record).render(tree)
    first: dict[int, Path] = {}
    last: dict[int, Path] = {}
    for leaf in emitted:
        u = owner[leaf]
        first.setdefault(u, leaf)
        last[u] = leaf
    order = sorted(first, key=lambda u: first[u])
    number = {u: n for n, u in enumerate(order, start=1)}
    opens = {first[u]: number[u] for u in order}
    closes = {last[u]: number[u] for u in order}

    def mark(node: Text, content: str) -> str:
        if not content.strip():
            return content
        if node.origin in opens:
            content = f"{_OPEN}{opens[node.origin]}{_SEP}" + content
        if node.origin in closes:
            content = content + f"{_CLOSE}{closes[node.origin]}{_SEP}"
        return content

    text = _Renderer(mark).render(tree)
    text = re.sub(f"{_OPEN}(\\d+){_SEP}", r"<lab_\1>", text)
    text = re.sub(f"{_CLOSE}(\\d+){_SEP}", r"</lab_\1>", text)
    label_map = {label_name(number[u]): units[u] for u in order}
    return RenderedView(text, label_map, origin)
