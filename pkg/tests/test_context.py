from __future__ import annotations

import random

import pytest
from hypothesis import given

from treecite.context import (
    active_headers,
    ctx_headers,
    ctx_html,
    ctx_lists,
    ctx_tables,
    ctx_title,
    parse_policies,
)
from treecite.doctree import Element, Text, node_at, parse_html, preorder, valid_paths
from treegen import random_page, trees_with_paths

TINY = "<section><h1>Title</h1><p>First paragraph.</p><p>Second paragraph.</p></section>"
LUNCH = "<ol><li>Lunch<ul><li>Sandwich</li><li>Salad</li></ul></li></ol>"


def find(doc, tag, text=None, nth=0):
    """Path of the nth element with ``tag`` (whose text starts with ``text``)."""
    hits = []
    for p in preorder(doc):
        node = node_at(doc, p)
        if isinstance(node, Element) and node.tag == tag:
            first = next((c.content for c in node.children if isinstance(c, Text)), "")
            if text is None or first.strip().startswith(text):
                hits.append(p)
    return hits[nth]


# -- title -------------------------------------------------------------------------


def test_title_falls_back_to_first_h1():
    assert ctx_title(parse_html(TINY)) == {(0, 0, 0)}


def test_title_element_wins_over_h1():
    doc = parse_html("<head><title>Doc</title></head><body><h1>Heading</h1></body>")
    assert ctx_title(doc) == {find(doc, "title")}


def test_title_absent():
    assert ctx_title(parse_html("<p>x</p>")) == frozenset()


# -- headers ---------------------------------------------------------------------


def _oracle_active(doc, path):
    """Forward scan with a stack: a header pops every open header of equal or lower rank."""
    stack = []
    for p in preorder(doc):
        if p >= path:
            break
        node = node_at(doc, p)
        if isinstance(node, Element) and node.tag in ("h1", "h2", "h3", "h4", "h5", "h6"):
            level = int(node.tag[1])
            stack = [(q, lv) for q, lv in stack if lv < level]
            stack.append((p, level))
    return {q for q, _ in stack}


def test_headers_superseded_by_same_rank():
    doc = parse_html("<h1>A</h1><h2>B</h2><p>x</p><h2>C</h2><p>y</p>")
    y = find(doc, "p", "y")
    out = ctx_headers(doc, {y})
    assert find(doc, "h1") in out and find(doc, "h2", "C") in out
    assert find(doc, "h2", "B") not in out


def test_headers_of_a_header_alone():
    doc = parse_html("<h1>A</h1><h2>B</h2><p>x</p>")
    h1 = find(doc, "h1")
    assert ctx_headers(doc, {h1}) == {h1}
    assert ctx_headers(doc, set()) == frozenset()


@pytest.mark.parametrize("seed", range(40))
def test_active_headers_match_stack_oracle(seed):
    doc = parse_html(random_page(random.Random(seed)))
    for p in preorder(doc):
        assert set(active_headers(doc, p)) == _oracle_active(doc, p)


def test_headers_follow_document_order_not_ancestry():
    doc = parse_html("<section><h2>Scope</h2></section><div><p>governed</p></div>")
    p = find(doc, "p")
    assert find(doc, "h2") in ctx_headers(doc, {p})


# -- lists -----------------------------------------------------------------------


def test_lists_nested_item_keeps_labels_not_siblings():
    doc = parse_html(LUNCH)
    salad = find(doc, "li", "Salad")
    out = ctx_lists(doc, {salad})
    ol, outer, ul = find(doc, "ol"), find(doc, "li", "Lunch"), find(doc, "ul")
    lunch_text = outer + (0,)
    assert node_at(doc, lunch_text).content == "Lunch"
    assert out == {salad, ol, outer, lunch_text, ul}
    assert find(doc, "li", "Sandwich") not in out


def test_lists_top_level_item_adds_only_list():
    doc = parse_html("<ul><li>a</li><li>b</li></ul>")
    li = find(doc, "li", "b")
    assert ctx_lists(doc, {li}) == {li, find(doc, "ul")}


def test_lists_outside_list_unchanged():
    doc = parse_html(TINY)
    assert ctx_lists(doc, {(0, 0, 1)}) == {(0, 0, 1)}


@given(trees_with_paths())
def test_lists_never_add_unselected_sibling_items(case):
    doc, P, _ = case
    out = ctx_lists(doc, P)
    chains = {p[:i] for p in P for i in range(len(p) + 1)}
    for q in out - P:
        node = node_at(doc, q)
        if isinstance(node, Element) and node.tag == "li":
            assert q in chains, "an added item must lie on a selected item's ancestor chain"


# -- tables ----------------------------------------------------------------------

TABLE = (
    "<table>"
    "<tr><th>corner</th><th>c1</th><th>c2</th></tr>"
    "<tr><th>r1</th><td>a</td><td>b</td></tr>"
    "<tr><th>r2</th><td>c</td><td>d</td></tr>"
    "</table>"
)


def _oracle_labels(doc, table, r, c):
    """Positional scan over the hand-built grid."""
    rows = [p for p in preorder(doc) if p[:-1] == table and node_at(doc, p).tag == "tr"]
    grid = [[row + (i,) for i in range(len(node_at(doc, row).children))] for row in rows]
    row_label = next((x for x in grid[r] if node_at(doc, x).tag == "th"), None)
    col_label = next((g[c] for g in grid if c < len(g) and node_at(doc, g[c]).tag == "th"), None)
    return {x for x in (row_label, col_label) if x is not None}


def test_tables_row_and_column_labels():
    doc = parse_html(TABLE)
    table = find(doc, "table")
    cell = table + (2, 2)
    assert node_at(doc, cell + (0,)).content == "d"
    out = ctx_tables(doc, {cell})
    labels = _oracle_labels(doc, table, 2, 2)
    assert labels == {table + (2, 0), table + (0, 2)}
    assert out == {cell, table, table + (2,), table + (0,)} | labels


def test_tables_header_cell_is_not_chased():
    doc = parse_html(TABLE)
    table = find(doc, "table")
    th = table + (1, 0)
    assert ctx_tables(doc, {th}) == {th, table + (1,), table}


def test_tables_without_headers():
    doc = parse_html("<table><tr><td>a</td><td>b</td></tr></table>")
    table = find(doc, "table")
    assert ctx_tables(doc, {table + (0, 1)}) == {table + (0, 1), table + (0,), table}


@given(trees_with_paths())
def test_tables_add_at_most_two_cells_per_selected_cell(case):
    doc, P, _ = case
    cells = {"td", "th"}

    def is_cell(p):
        n = node_at(doc, p)
        return isinstance(n, Element) and n.tag in cells

    selected = {p[:i] for p in P for i in range(len(p) + 1) if is_cell(p[:i])}
    added = {q for q in ctx_tables(doc, P) - P if is_cell(q)} - selected
    assert len(added) <= 2 * len(selected)


# -- composition -------------------------------------------------------------------


def test_ctx_html_tiny():
    doc = parse_html(TINY)
    assert ctx_html(doc, {(0, 0, 1, 0)}) == {(0, 0, 1, 0), (0, 0, 0)}
    assert ctx_html(doc, set()) == ctx_title(doc)


def test_ctx_html_bullet_pulls_header_and_title(fixtures_dir):
    doc = parse_html((fixtures_dir / "corpus" / "parks.html").read_bytes())
    bullet = find(doc, "li", "Virginia has over 41")
    out = ctx_html(doc, {bullet + (0,)})
    assert find(doc, "h2", "Key Takeaways") in out
    assert find(doc, "h1") in out
    assert find(doc, "ul") in out
    assert find(doc, "li", "Some of the top") not in out


def test_ctx_html_equals_union_of_policies_on_tiny():
    doc = parse_html(TINY)
    P = {(0, 0, 2, 0)}
    union = frozenset(P) | ctx_title(doc) | ctx_headers(doc, P) | ctx_lists(doc, P) | ctx_tables(doc, P)
    assert ctx_html(doc, P) == union


@given(trees_with_paths())
def test_ctx_html_stays_within_valid_paths(case):
    doc, P, Q = case
    out = ctx_html(doc, P)
    assert P <= out <= valid_paths(doc)
    assert out <= ctx_html(doc, Q)
    assert ctx_html(doc, out) == out


@given(trees_with_paths())
def test_single_policies_are_closures(case):
    doc, P, Q = case
    for f in (ctx_headers, ctx_lists, ctx_tables, lambda d, X: frozenset(X) | ctx_title(d)):
        out = f(doc, P)
        assert P <= out <= f(doc, Q)
        assert f(doc, out) == out


def test_policy_selection():
    assert parse_policies("tables, title") == ("title", "tables")
    assert parse_policies("") == ()
    with pytest.raises(ValueError):
        parse_policies("title,glossary")
    doc = parse_html("<h1>A</h1><p>x</p>")
    p = find(doc, "p")
    assert ctx_html(doc, {p}, policies=()) == {p}
