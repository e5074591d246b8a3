"""Random document generators shared by the property and acceptance tests."""

from __future__ import annotations

import random
from typing import Optional

from hypothesis import strategies as st

from treecite.doctree import Element, Text, valid_paths

STRUCTURAL_TAGS = (
    "div", "section", "p", "span", "a", "b", "em",
    "h1", "h2", "h3", "h4",
    "ul", "ol", "li",
    "table", "tbody", "tr", "td", "th",
    "title", "head", "body",
)
WORDS = (
    "alpha", "beta", "gamma", "delta", "parks", "river", "engine", "notes",
    "Virginia", "Ada", "table", "lunch", "salad", "1980", "trail", "camping",
)


def random_tree(rng: random.Random, max_nodes: int = 50) -> Element:
    """Arbitrarily nested tree (any tag under any tag) with at most ``max_nodes`` nodes."""
    budget = [rng.randint(1, max_nodes) - 1]

    def build(depth: int) -> Element:
        tag = rng.choice(STRUCTURAL_TAGS)
        children = []
        while budget[0] > 0 and rng.random() < (0.75 if depth < 5 else 0.2):
            budget[0] -= 1
            if rng.random() < 0.35 or depth > 6:
                children.append(Text(rng.choice(WORDS)))
            else:
                children.append(build(depth + 1))
        return Element(tag, (), tuple(children))

    root = build(0)
    return Element("html", (), root.children)


def random_subset(rng: random.Random, doc: Element, p: Optional[float] = None) -> frozenset:
    paths = sorted(valid_paths(doc))
    p = rng.random() * 0.4 if p is None else p
    return frozenset(x for x in paths if rng.random() < p)


def random_superset(rng: random.Random, doc: Element, P: frozenset) -> frozenset:
    return P | random_subset(rng, doc, rng.random() * 0.3)


# ---------------------------------------------------------------------------
# Realistic HTML pages
# ---------------------------------------------------------------------------


def _sentence(rng: random.Random, markup: bool = True) -> str:
    words = [rng.choice(WORDS) for _ in range(rng.randint(2, 8))]
    words[0] = words[0].capitalize()
    if markup and len(words) > 2 and rng.random() < 0.5:
        i = rng.randrange(1, len(words) - 1)
        kind = rng.choice(("b", "em", "a", "code"))
        if kind == "a":
            words[i] = f'<a href="https://example.org/{words[i]}">{words[i]}</a>'
        else:
            words[i] = f"<{kind}>{words[i]}</{kind}>"
    return " ".join(words) + rng.choice((".", ".", "!", "?"))


def _para(rng: random.Random) -> str:
    return " ".join(_sentence(rng) for _ in range(rng.randint(1, 4)))


def _list(rng: random.Random, depth: int = 0) -> str:
    tag = rng.choice(("ul", "ol"))
    items = []
    for _ in range(rng.randint(1, 4)):
        body = _sentence(rng)
        if depth < 2 and rng.random() < 0.3:
            body += _list(rng, depth + 1)
        items.append(f"<li>{body}</li>")
    return f"<{tag}>{''.join(items)}</{tag}>"


def _table(rng: random.Random) -> str:
    cols = rng.randint(2, 4)
    rows = ["<tr>" + "".join(f"<th>{rng.choice(WORDS)}</th>" for _ in range(cols)) + "</tr>"]
    for _ in range(rng.randint(1, 3)):
        cells = [f"<th>{rng.choice(WORDS)}</th>"]
        cells += [f"<td>{_sentence(rng, markup=False)}</td>" for _ in range(cols - 1)]
        rows.append("<tr>" + "".join(cells) + "</tr>")
    return "<table>" + "".join(rows) + "</table>"


def random_page(rng: random.Random) -> str:
    """A plausible HTML page: title, headers, paragraphs, lists and tables."""
    parts = []
    if rng.random() < 0.7:
        parts.append(f"<head><title>{_sentence(rng, markup=False)[:-1]}</title></head>")
    body = []
    for _ in range(rng.randint(1, 6)):
        r = rng.random()
        if r < 0.25:
            level = rng.randint(1, 4)
            body.append(f"<h{level}>{' '.join(rng.choice(WORDS) for _ in range(2))}</h{level}>")
        elif r < 0.6:
            body.append(f"<p>{_para(rng)}</p>")
        elif r < 0.75:
            body.append(_list(rng))
        elif r < 0.85:
            body.append(_table(rng))
        else:
            body.append(f"<div>{_para(rng)}<p>{_para(rng)}</p></div>")
    parts.append("<body>" + "".join(body) + "</body>")
    return "<html>" + "".join(parts) + "</html>"


# ---------------------------------------------------------------------------
# Hypothesis strategies
# ---------------------------------------------------------------------------


@st.composite
def trees(draw, max_nodes: int = 50) -> Element:
    return random_tree(random.Random(draw(st.integers(0, 2**32 - 1))), max_nodes)


@st.composite
def trees_with_paths(draw, max_nodes: int = 50):
    rng = random.Random(draw(st.integers(0, 2**32 - 1)))
    doc = random_tree(rng, max_nodes)
    P = random_subset(rng, doc)
    return doc, P, random_superset(rng, doc, P)


@st.composite
def pages(draw) -> str:
    return random_page(random.Random(draw(st.integers(0, 2**32 - 1))))
