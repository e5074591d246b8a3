"""Budgeted local expansion of a seed selection.

The expansion is a fixed sequence of growth steps that does not depend on the
budget: complete the sentences the seed touches, take in the enclosing block
leaves, fill sentence gaps inside the covered span, then add neighbouring
sentences alternately after and before the span. The result is the longest
prefix of that sequence whose contextualized rendering fits the budget, which
makes the result monotone in the budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from treecite.context import DEFAULT_POLICIES, active_headers, ctx_html
from treecite.doctree import (
    HEADER_LEVELS,
    Element,
    Path,
    PathSet,
    check_paths,
    down,
    headers_in_order,
    node_at,
)
from treecite.render import Sizer, render_markdown, whitespace_tokens
from treecite.segment import AnnotatedDoc, is_block_leaf


@dataclass(frozen=True)
class Budget:
    """A size limit in units of ``size_of`` (whitespace tokens by default)."""

    limit: int
    size_of: Sizer = whitespace_tokens

    def __post_init__(self):
        if self.limit < 0:
            raise ValueError("budget limit must be non-negative")

    def cost(self, text: str) -> int:
        return self.size_of(text)


def view_cost(doc, P: Iterable[Path], budget: Budget, policies: Sequence[str] = DEFAULT_POLICIES) -> int:
    """Size of the contextualized rendering of ``(doc, P)``."""
    return budget.cost(render_markdown(doc, ctx_html(doc, P, policies)))


def _section_limit(doc, S: PathSet) -> Optional[Path]:
    """First header after ``S`` that outranks every header active for ``S``."""
    levels = [HEADER_LEVELS[node_at(doc, h).tag] for p in S for h in active_headers(doc, p)]
    for p in S:
        node = node_at(doc, p)
        if isinstance(node, Element) and node.tag in HEADER_LEVELS:
            levels.append(HEADER_LEVELS[node.tag])
    bound = min(levels, default=7)
    last = max(S)
    for hp, level in headers_in_order(doc):
        if hp > last and level < bound and not hp[: len(last)] == last:
            return hp
    return None


def expansion_steps(annotated: AnnotatedDoc, S: Iterable[Path]) -> list[PathSet]:
    """The budget-independent growth sequence for seed ``S``."""
    doc = annotated.doc
    S = frozenset(S)
    units = [paths for _, paths in annotated.sentence_units()]
    covered = set(down(doc, S))
    steps: list[PathSet] = []

    def push(step: Iterable[Path]) -> None:
        step = frozenset(step)
        if not step <= covered:
            steps.append(step)
            covered.update(step)

    # (1) complete partially selected sentences
    touched = [i for i, u in enumerate(units) if u & covered]
    for i in sorted(touched, key=lambda i: min(units[i])):
        push(units[i])

    # (2) enclosing block leaves
    blocks = set()
    for p in S:
        for j in range(len(p), -1, -1):
            if is_block_leaf(node_at(doc, p[:j])):
                blocks.add(p[:j])
                break
    for i in touched:
        parent = min(units[i])[:-1]
        if is_block_leaf(node_at(doc, parent)):
            blocks.add(parent)
    for b in sorted(blocks):
        push(down(doc, {b}))

    # (3) gaps inside the span, then neighbours alternating after/before
    inside = [i for i, u in enumerate(units) if u & covered]
    if inside:
        lo, hi = min(inside), max(inside)
    else:
        anchor = min(S)
        hi = sum(1 for u in units if min(u) < anchor) - 1
        lo = hi + 1
    for i in range(lo, hi + 1):
        push(units[i])

    limit = _section_limit(doc, S)
    after = [i for i in range(hi + 1, len(units)) if limit is None or min(units[i]) < limit]
    before = list(range(lo - 1, -1, -1))
    turn_after = True
    while after or before:
        side = after if (turn_after and after) or not before else before
        push(units[side.pop(0)])
        turn_after = not turn_after
    return steps


def expand_local(
    annotated: AnnotatedDoc,
    S: Iterable[Path],
    budget: Budget,
    policies: Sequence[str] = DEFAULT_POLICIES,
) -> PathSet:
    """Grow ``S`` toward ``budget`` without exceeding it.

    Returns ``S`` unchanged when ``S`` alone already exceeds the budget.
    """
    doc = annotated.doc
    S = frozenset(S)
    if not S:
        raise ValueError("expand_local requires a nonempty seed")
    check_paths(doc, S)
    P = S
    if view_cost(doc, P, budget, policies) > budget.limit:
        return P
    for step in expansion_steps(annotated, S):
        candidate = P | step
        if candidate == P:
            continue
        if view_cost(doc, candidate, budget, policies) > budget.limit:
            break
        P = candidate
    return P
