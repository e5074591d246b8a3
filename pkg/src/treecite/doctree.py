"""Path-addressable document trees.

A document is an immutable tree of :class:`Text` leaves and :class:`Element`
nodes. Every node is addressed by a *path*, the tuple of 0-based child
indices leading to it from the root; ``()`` is the root. Tuples compare
lexicographically, which coincides with document (pre-)order, so
``sorted(paths)`` is always reading order.

Selections are *path sets* (``frozenset`` of paths). Every operation here is
a pure function over immutable values; trees are only copied when a
selection is materialized by :func:`prune`.
"""

from __future__ import annotations

import bisect
import json
import weakref
from dataclasses import dataclass, field
from html import escape
from html.parser import HTMLParser
from typing import Iterable, Iterator, Optional, Union

from treecite.errors import InvalidPathError, MalformedEncodingError

Path = tuple[int, ...]
PathSet = frozenset  # frozenset[Path]

ROOT: Path = ()

SENTENCE_BEGIN = "sentence-beg"
SENTENCE_END = "sentence-end"
SENTINEL_TAGS = frozenset({SENTENCE_BEGIN, SENTENCE_END})

HEADER_LEVELS = {f"h{i}": i for i in range(1, 7)}

VOID_TAGS = frozenset(
    {
        "area", "base", "br", "col", "embed", "hr", "img", "input", "link",
        "meta", "param", "source", "track", "wbr",
    }
)

INLINE_TAGS = frozenset(
    {
        "a", "abbr", "b", "bdi", "bdo", "br", "cite", "code", "data", "dfn",
        "em", "font", "i", "img", "kbd", "label", "mark", "q", "s", "samp",
        "small", "span", "strike", "strong", "sub", "sup", "time", "tt", "u",
        "var", "wbr",
    }
) | SENTINEL_TAGS

# Dropped together with their content.
_DROPPED_TAGS = frozenset({"script", "style"})
_HEAD_TAGS = frozenset({"title", "meta", "link", "base"})

# Start tags that implicitly close an open <p>.
_CLOSES_P = frozenset(
    {
        "address", "article", "aside", "blockquote", "details", "div", "dl",
        "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3",
        "h4", "h5", "h6", "header", "hr", "li", "main", "menu", "nav", "ol", "p",
        "pre", "section", "table", "ul",
    }
)


@dataclass(frozen=True)
class Text:
    """Leaf carrying a run of character data."""

    content: str
    origin: Optional[Path] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Element:
    """Interior node: a tag, ordered attributes and ordered children.

    ``origin`` is set on nodes produced by :func:`prune` and records the path
    of the corresponding node in the tree that was pruned. It does not take
    part in equality.
    """

    tag: str
    attrs: tuple[tuple[str, str], ...] = ()
    children: tuple["DocNode", ...] = ()
    origin: Optional[Path] = field(default=None, compare=False, repr=False)

    def get(self, name: str, default: Optional[str] = None) -> Optional[str]:
        for key, value in self.attrs:
            if key == name:
                return value
        return default


DocNode = Union[Text, Element]


def is_tag(node: DocNode, *tags: str) -> bool:
    return isinstance(node, Element) and node.tag in tags


def header_level(node: DocNode) -> Optional[int]:
    if isinstance(node, Element):
        return HEADER_LEVELS.get(node.tag)
    return None


# ---------------------------------------------------------------------------
# Per-document lookup tables
# ---------------------------------------------------------------------------


class _Tables:
    __slots__ = ("order", "nodes", "headers")

    def __init__(self, root: DocNode):
        order: list[Path] = []
        nodes: dict[Path, DocNode] = {}
        headers: list[tuple[Path, int]] = []
        stack: list[tuple[Path, DocNode]] = [((), root)]
        while stack:
            path, node = stack.pop()
            order.append(path)
            nodes[path] = node
            if isinstance(node, Element):
                level = HEADER_LEVELS.get(node.tag)
                if level is not None:
                    headers.append((path, level))
                for i in range(len(node.children) - 1, -1, -1):
                    stack.append((path + (i,), node.children[i]))
        self.order = order
        self.nodes = nodes
        self.headers = headers


_TABLES: dict[int, _Tables] = {}


def _tables(doc: DocNode) -> _Tables:
    key = id(doc)
    tables = _TABLES.get(key)
    if tables is None:
        tables = _Tables(doc)
        _TABLES[key] = tables
        weakref.finalize(doc, _TABLES.pop, key, None)
    return tables


def preorder(doc: DocNode) -> list[Path]:
    """All valid paths of ``doc`` in document order."""
    return list(_tables(doc).order)


def headers_in_order(doc: DocNode) -> list[tuple[Path, int]]:
    """``(path, level)`` of every h1-h6 element, in document order."""
    return list(_tables(doc).headers)


# ---------------------------------------------------------------------------
# Paths and completions
# ---------------------------------------------------------------------------


def valid_paths(doc: DocNode) -> PathSet:
    return frozenset(_tables(doc).order)


def node_at(doc: DocNode, path: Iterable[int]) -> DocNode:
    """Return the subtree rooted at ``path``.

    Raises:
        InvalidPathError: if ``path`` does not address a node of ``doc``.
    """
    path = tuple(path)
    try:
        return _tables(doc).nodes[path]
    except KeyError:
        raise InvalidPathError(path) from None


def is_valid(doc: DocNode, path: Path) -> bool:
    return path in _tables(doc).nodes


def check_paths(doc: DocNode, paths: Iterable[Path]) -> None:
    nodes = _tables(doc).nodes
    for p in paths:
        if p not in nodes:
            raise InvalidPathError(p)


def ancestors(path: Path) -> Iterator[Path]:
    """Proper prefixes of ``path``, nearest first."""
    for i in range(len(path) - 1, -1, -1):
        yield path[:i]


def is_prefix(prefix: Path, path: Path) -> bool:
    return len(prefix) <= len(path) and path[: len(prefix)] == prefix


def up(doc: DocNode, paths: Iterable[Path]) -> PathSet:
    """Ancestor completion: add every prefix of every member."""
    out: set[Path] = set()
    for p in paths:
        for i in range(len(p), -1, -1):
            prefix = p[:i]
            if prefix in out:
                break
            out.add(prefix)
    return frozenset(out)


def descendants(doc: DocNode, path: Path) -> list[Path]:
    """``path`` and all paths below it, in document order."""
    order = _tables(doc).order
    start = bisect.bisect_left(order, path)
    n = len(path)
    end = start
    while end < len(order) and order[end][:n] == path:
        end += 1
    return order[start:end]


def down(doc: DocNode, paths: Iterable[Path]) -> PathSet:
    """Descendant completion: add every valid path below every member."""
    out: set[Path] = set()
    for p in sorted(set(paths)):
        if p in out:
            continue
        out.update(descendants(doc, p))
    return frozenset(out)


def link(doc: DocNode, paths: Iterable[Path]) -> PathSet:
    paths = frozenset(paths)
    return up(doc, paths) | down(doc, paths)


def maximal(paths: Iterable[Path]) -> list[Path]:
    """Members that have no proper descendant in the set, in document order."""
    ordered = sorted(set(paths))
    out = []
    for i, p in enumerate(ordered):
        nxt = ordered[i + 1] if i + 1 < len(ordered) else None
        if nxt is None or not is_prefix(p, nxt):
            out.append(p)
    return out


def minimal(paths: Iterable[Path]) -> list[Path]:
    """Members that have no proper ancestor in the set, in document order."""
    out: list[Path] = []
    for p in sorted(set(paths)):
        if out and is_prefix(out[-1], p):
            continue
        out.append(p)
    return out


def container_link(doc: DocNode, paths: Iterable[Path]) -> PathSet:
    """Completion used for materializing views.

    Like :func:`link`, but a member that is an ancestor of another member is
    kept as a bare container: only the deepest selected nodes pull in their
    subtrees. Policies that add list or table scaffolding (``ul``, ``tr``,
    ...) rely on this so that sibling items stay out of the view.
    """
    paths = frozenset(paths)
    return up(doc, paths) | down(doc, maximal(paths))


# ---------------------------------------------------------------------------
# Pruning and subdocuments
# ---------------------------------------------------------------------------


def prune(doc: DocNode, keep: Iterable[Path]) -> Optional[DocNode]:
    """Copy ``doc`` keeping exactly the nodes whose paths are in ``keep``.

    A node survives only if its own path and, transitively, all of its
    ancestors' paths are kept. Returns ``None`` when the root is not kept.
    Every copied node records its source path in ``origin``.
    """
    keep = keep if isinstance(keep, (set, frozenset)) else frozenset(keep)
    if () not in keep:
        return None
    return _prune(doc, (), keep)


def _prune(node: DocNode, path: Path, keep) -> DocNode:
    if isinstance(node, Text):
        return Text(node.content, origin=path)
    kids = []
    for i, child in enumerate(node.children):
        child_path = path + (i,)
        if child_path in keep:
            kids.append(_prune(child, child_path, keep))
    return Element(node.tag, node.attrs, tuple(kids), origin=path)


def subdoc(doc: DocNode, paths: Iterable[Path]) -> DocNode:
    """Smallest well-formed tree containing the selected nodes: prune after link."""
    result = prune(doc, link(doc, paths))
    if result is None:
        raise ValueError("subdoc requires a nonempty path set")
    return result


def materialize(doc: DocNode, paths: Iterable[Path]) -> Optional[DocNode]:
    """Prune ``doc`` to the view selected by ``paths`` (see :func:`container_link`)."""
    return prune(doc, container_link(doc, paths))


def origin_map(tree: DocNode) -> dict[Path, Path]:
    """Map paths of a pruned tree to the source paths they were copied from."""
    out: dict[Path, Path] = {}
    stack: list[tuple[Path, DocNode]] = [((), tree)]
    while stack:
        path, node = stack.pop()
        if node.origin is not None:
            out[path] = node.origin
        if isinstance(node, Element):
            for i, child in enumerate(node.children):
                stack.append((path + (i,), child))
    return out


@dataclass(frozen=True)
class Subdocument:
    """A delayed extraction: a document plus a valid path set.

    Nothing is copied until :meth:`materialize` is called.
    """

    doc_id: str
    doc: DocNode
    paths: PathSet

    def __post_init__(self):
        object.__setattr__(self, "paths", frozenset(self.paths))
        check_paths(self.doc, self.paths)

    def materialize(self) -> DocNode:
        return subdoc(self.doc, self.paths)


# ---------------------------------------------------------------------------
# Text helpers
# ---------------------------------------------------------------------------


def text_of(node: DocNode) -> str:
    """Concatenated character data below ``node`` (sentinels contribute nothing)."""
    if isinstance(node, Text):
        return node.content
    parts: list[str] = []
    stack: list[DocNode] = [node]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Text):
            parts.append(cur.content)
        else:
            stack.extend(reversed(cur.children))
    return "".join(parts)


def text_leaves(doc: DocNode, paths: Iterable[Path]) -> set[Path]:
    """Paths among ``paths`` that address text leaves with visible content."""
    nodes = _tables(doc).nodes
    return {p for p in paths if isinstance(nodes[p], Text) and nodes[p].content.strip()}


# ---------------------------------------------------------------------------
# HTML parsing
# ---------------------------------------------------------------------------


class _Node:
    __slots__ = ("tag", "attrs", "children")

    def __init__(self, tag: str, attrs: list[tuple[str, str]]):
        self.tag = tag
        self.attrs = attrs
        self.children: list = []


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.document = _Node("#document", [])
        self.stack: list[_Node] = [self.document]
        self.skip: Optional[str] = None

    # -- helpers --
    def _close(self, tags, boundary=frozenset()) -> None:
        for i in range(len(self.stack) - 1, 0, -1):
            tag = self.stack[i].tag
            if tag in tags:
                del self.stack[i:]
                return
            if tag in boundary:
                return

    def _append(self, node) -> None:
        kids = self.stack[-1].children
        if isinstance(node, str) and kids and isinstance(kids[-1], str):
            kids[-1] += node
        else:
            kids.append(node)

    # -- HTMLParser callbacks --
    def handle_starttag(self, tag, attrs):
        if self.skip:
            return
        if tag in _DROPPED_TAGS:
            self.skip = tag
            return
        if tag in _CLOSES_P:
            self._close({"p"}, boundary={"table", "td", "th", "li", "button"})
        if tag == "li":
            self._close({"li"}, boundary={"ul", "ol", "table"})
        elif tag in ("dt", "dd"):
            self._close({"dt", "dd"}, boundary={"dl", "table"})
        elif tag == "tr":
            self._close({"tr"}, boundary={"table"})
        elif tag in ("td", "th"):
            self._close({"td", "th"}, boundary={"tr", "table"})
        elif tag in ("thead", "tbody", "tfoot"):
            self._close({"thead", "tbody", "tfoot"}, boundary={"table"})
        elif tag == "option":
            self._close({"option"}, boundary={"select"})
        if tag in HEADER_LEVELS and self.stack[-1].tag in HEADER_LEVELS:
            self.stack.pop()
        seen = set()
        clean = []
        for key, value in attrs:
            if key not in seen:
                seen.add(key)
                clean.append((key, "" if value is None else value))
        node = _Node(tag, clean)
        self._append(node)
        if tag not in VOID_TAGS:
            self.stack.append(node)

    def handle_startendtag(self, tag, attrs):
        if self.skip or tag in _DROPPED_TAGS:
            return
        self._append(_Node(tag, [(k, "" if v is None else v) for k, v in attrs]))

    def handle_endtag(self, tag):
        if self.skip:
            if tag == self.skip:
                self.skip = None
            return
        if tag in VOID_TAGS:
            return
        self._close({tag})

    def handle_data(self, data):
        if not self.skip and data:
            self._append(data)


def _is_inline(raw) -> bool:
    if isinstance(raw, str):
        return bool(raw.strip())
    return raw.tag in INLINE_TAGS


def _freeze(raw: _Node, in_pre: bool = False) -> Element:
    in_pre = in_pre or raw.tag == "pre"
    kids: list[DocNode] = []
    n = len(raw.children)
    for i, child in enumerate(raw.children):
        if isinstance(child, str):
            if not child.strip() and not in_pre:
                prev = raw.children[i - 1] if i > 0 else None
                nxt = raw.children[i + 1] if i + 1 < n else None
                # Keep word separation between two inline neighbours.
                if not (prev is not None and nxt is not None and _is_inline(prev) and _is_inline(nxt)):
                    continue
            kids.append(Text(child))
        else:
            kids.append(_freeze(child, in_pre))
    return Element(raw.tag, tuple(raw.attrs), tuple(kids))


def _normalize(document: _Node) -> _Node:
    top = document.children
    html = next((c for c in top if isinstance(c, _Node) and c.tag == "html"), None)
    if html is None:
        html = _Node("html", [])
        html.children = list(top)
    else:
        html.children = list(html.children) + [c for c in top if c is not html]
    head = next((c for c in html.children if isinstance(c, _Node) and c.tag == "head"), None)
    body = next((c for c in html.children if isinstance(c, _Node) and c.tag == "body"), None)
    loose = [
        c
        for c in html.children
        if c is not head and c is not body and not (isinstance(c, str) and not c.strip())
    ]
    if not loose:
        html.children = [c for c in html.children if c is head or c is body]
        return html
    head_items = [c for c in loose if isinstance(c, _Node) and c.tag in _HEAD_TAGS]
    body_items = [c for c in loose if not (isinstance(c, _Node) and c.tag in _HEAD_TAGS)]
    if head_items:
        if head is None:
            head = _Node("head", [])
        head.children = list(head.children) + head_items
    if body_items:
        if body is None:
            body = _Node("body", [])
            body.children = body_items
        else:
            pos = html.children.index(body)
            before = [c for c in body_items if html.children.index(c) < pos]
            after = [c for c in body_items if html.children.index(c) > pos]
            body.children = before + list(body.children) + after
    html.children = [c for c in (head, body) if c is not None]
    return html


def parse_html(source: Union[bytes, str], encoding: str = "utf-8") -> Element:
    """Parse HTML into a document tree rooted at an ``html`` element.

    Scripts, styles, comments, doctypes and processing instructions are
    dropped; whitespace-only text is dropped except between two inline
    siblings. Malformed markup yields a best-effort tree.

    Raises:
        MalformedEncodingError: if ``source`` is bytes that do not decode.
    """
    if isinstance(source, bytes):
        try:
            text = source.decode(encoding)
        except UnicodeDecodeError as exc:
            raise MalformedEncodingError(f"cannot decode HTML as {encoding}: {exc}") from exc
        except LookupError as exc:
            raise MalformedEncodingError(f"unknown encoding {encoding!r}") from exc
    else:
        text = source
    text = text.lstrip("﻿")
    builder = _TreeBuilder()
    builder.feed(text)
    builder.close()
    return _freeze(_normalize(builder.document))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def to_json(node: DocNode) -> dict:
    if isinstance(node, Text):
        return {"text": node.content}
    return {
        "tag": node.tag,
        "attrs": [list(kv) for kv in node.attrs],
        "children": [to_json(c) for c in node.children],
    }


def from_json(obj: dict) -> DocNode:
    if "text" in obj:
        return Text(obj["text"])
    return Element(
        obj["tag"],
        tuple((k, v) for k, v in obj.get("attrs", [])),
        tuple(from_json(c) for c in obj.get("children", [])),
    )


def paths_to_json(paths: Iterable[Path]) -> list[list[int]]:
    return [list(p) for p in sorted(set(paths))]


def paths_from_json(items: Iterable[Iterable[int]]) -> PathSet:
    return frozenset(tuple(int(i) for i in p) for p in items)


def dumps_tree(node: DocNode) -> str:
    return json.dumps(to_json(node), ensure_ascii=False, sort_keys=True)


def to_html(node: DocNode) -> str:
    """Serialize back to HTML; sentinels are written as ``<sentence-beg/>``."""
    if isinstance(node, Text):
        return escape(node.content, quote=False)
    attrs = "".join(f' {k}="{escape(v)}"' for k, v in node.attrs)
    if node.tag in SENTINEL_TAGS or (node.tag in VOID_TAGS and not node.children):
        return f"<{node.tag}{attrs}/>"
    inner = "".join(to_html(c) for c in node.children)
    return f"<{node.tag}{attrs}>{inner}</{node.tag}>"
