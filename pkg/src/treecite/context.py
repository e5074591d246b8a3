"""Global contextualization policies.

Each policy maps a path set to a larger path set of the same document and is
extensive, monotone and idempotent. Policies only look at paths and tags;
nothing is materialized here.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

from treecite.doctree import (
    DocNode,
    Element,
    Path,
    PathSet,
    Text,
    headers_in_order,
    node_at,
    preorder,
    text_of,
)

LIST_TAGS = frozenset({"ul", "ol"})
CELL_TAGS = frozenset({"td", "th"})

POLICY_NAMES = ("title", "headers", "lists", "tables")
DEFAULT_POLICIES = POLICY_NAMES


def _tag(doc: DocNode, path: Path) -> str | None:
    node = node_at(doc, path)
    return node.tag if isinstance(node, Element) else None


# ---------------------------------------------------------------------------
# Title
# ---------------------------------------------------------------------------


def ctx_title(doc: DocNode) -> PathSet:
    """The document ``<title>`` if it has text, else the first ``<h1>``, else nothing."""
    first_h1 = None
    for p in preorder(doc):
        node = node_at(doc, p)
        if not isinstance(node, Element):
            continue
        if node.tag == "title" and text_of(node).strip():
            return frozenset({p})
        if node.tag == "h1" and first_h1 is None:
            first_h1 = p
    return frozenset({first_h1}) if first_h1 is not None else frozenset()


# ---------------------------------------------------------------------------
# Headers
# ---------------------------------------------------------------------------


def active_headers(doc: DocNode, path: Path) -> list[Path]:
    """Headers in effect just before ``path`` in document order.

    Scanning backwards, a header is kept only if it outranks every header kept
    so far; equal or lower ranks are superseded by the later header.
    """
    out = []
    best = 7
    for hp, level in reversed(headers_in_order(doc)):
        if hp >= path:
            continue
        if level < best:
            out.append(hp)
            best = level
            if best == 1:
                break
    return out


def _is_header(doc: DocNode, path: Path) -> bool:
    tag = _tag(doc, path)
    return tag is not None and tag[0] == "h" and tag[1:].isdigit() and len(tag) == 2


def ctx_headers(doc: DocNode, P: Iterable[Path]) -> PathSet:
    """Add the active headers of every member that is not itself a header."""
    P = frozenset(P)
    out = set(P)
    for p in P:
        if not _is_header(doc, p):
            out.update(active_headers(doc, p))
    return frozenset(out)


# ---------------------------------------------------------------------------
# Lists
# ---------------------------------------------------------------------------


def _leading_children(item: Element) -> list[int]:
    """Indices of children before the first one that is or holds a list."""
    out = []
    for i, child in enumerate(item.children):
        if isinstance(child, Element) and _holds_list(child):
            break
        out.append(i)
    return out


def _holds_list(node: DocNode) -> bool:
    if isinstance(node, Text):
        return False
    if node.tag in LIST_TAGS or node.tag == "li":
        return True
    return any(_holds_list(c) for c in node.children)


def ctx_lists(doc: DocNode, P: Iterable[Path]) -> PathSet:
    """List spines: the chain from the outermost list down to each member,
    plus the label text of every enclosing item above the innermost one."""
    P = frozenset(P)
    out = set(P)
    for p in P:
        tags = [_tag(doc, p[:i]) for i in range(len(p) + 1)]
        in_list = [i for i, t in enumerate(tags) if t in LIST_TAGS or t == "li"]
        if not in_list:
            continue
        out.update(p[:i] for i in range(in_list[0], len(p) + 1))
        items = [i for i, t in enumerate(tags) if t == "li"]
        for depth in items[:-1]:
            item = node_at(doc, p[:depth])
            out.update(p[:depth] + (j,) for j in _leading_children(item))
    return frozenset(out)


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def _table_of_row(doc: DocNode, row: Path) -> Path | None:
    for i in range(len(row) - 1, -1, -1):
        tag = _tag(doc, row[:i])
        if tag == "table":
            return row[:i]
        if tag in CELL_TAGS or tag == "tr":
            return None
    return None


def table_rows(doc: DocNode, table: Path) -> list[Path]:
    """Rows that belong to ``table`` itself (not to a nested table), in order."""
    rows = []
    stack = [table]
    while stack:
        path = stack.pop()
        node = node_at(doc, path)
        for i in range(len(node.children) - 1, -1, -1):
            child = node.children[i]
            if not isinstance(child, Element) or child.tag in ("table", "td", "th"):
                continue
            if child.tag == "tr":
                rows.append(path + (i,))
            else:
                stack.append(path + (i,))
    rows.sort()
    return rows


def row_cells(doc: DocNode, row: Path) -> list[Path]:
    node = node_at(doc, row)
    return [
        row + (i,)
        for i, c in enumerate(node.children)
        if isinstance(c, Element) and c.tag in CELL_TAGS
    ]


def cell_labels(doc: DocNode, cell: Path) -> list[Path]:
    """Row label (leftmost ``th`` of the row) and column label (topmost ``th``
    at the same cell index) of a data cell. Spans are ignored."""
    if _tag(doc, cell) != "td":
        return []
    row = cell[:-1]
    table = _table_of_row(doc, row)
    if table is None:
        return []
    cells = row_cells(doc, row)
    col = cells.index(cell)
    labels = []
    for c in cells:
        if _tag(doc, c) == "th":
            labels.append(c)
            break
    for r in table_rows(doc, table):
        rc = row_cells(doc, r)
        if col < len(rc) and _tag(doc, rc[col]) == "th":
            labels.append(rc[col])
            break
    return labels


def ctx_tables(doc: DocNode, P: Iterable[Path]) -> PathSet:
    """Row and column labels of each selected cell plus the row/table chain."""
    P = frozenset(P)
    out = set(P)
    for p in P:
        for i in range(len(p), 0, -1):
            cell = p[:i]
            if _tag(doc, cell) not in CELL_TAGS or _tag(doc, cell[:-1]) != "tr":
                continue
            table = _table_of_row(doc, cell[:-1])
            if table is None:
                continue
            for target in [cell] + cell_labels(doc, cell):
                out.update(target[:j] for j in range(len(table), len(target) + 1))
    return frozenset(out)


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------

_SEEDED: dict[str, Callable[[DocNode, PathSet], PathSet]] = {
    "headers": ctx_headers,
    "lists": ctx_lists,
    "tables": ctx_tables,
}


def parse_policies(value: str | Sequence[str]) -> tuple[str, ...]:
    names = [s.strip() for s in value.split(",")] if isinstance(value, str) else list(value)
    names = [n for n in names if n]
    unknown = [n for n in names if n not in POLICY_NAMES]
    if unknown:
        raise ValueError(f"unknown contextualization policies: {', '.join(unknown)}")
    return tuple(n for n in POLICY_NAMES if n in names)


def ctx_html(
    doc: DocNode, P: Iterable[Path], policies: Sequence[str] = DEFAULT_POLICIES
) -> PathSet:
    """Union of the enabled policies, iterated until nothing more is added.

    Iterating matters because a path added by one policy (a list spine, a
    table row) can itself have context under another policy.
    """
    current = frozenset(P)
    if "title" in policies:
        current = current | ctx_title(doc)
    seeded = [_SEEDED[n] for n in policies if n in _SEEDED]
    while True:
        nxt = current
        for policy in seeded:
            nxt = nxt | policy(doc, current)
        if nxt == current:
            return current
        current = nxt
