from __future__ import annotations

import json
import random
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treecite.doctree import parse_html, valid_paths
from treecite.errors import LabelParseError
from treecite.filtering import (
    Candidate,
    build_filter_prompt,
    build_view,
    citable_units,
    filter_citations,
    parse_label_response,
    parse_labels,
    run_filter,
)
from treecite.local import Budget, expand_local
from treecite.providers import FunctionProvider, ScriptedProvider, SelectAllProvider, SelectNoneProvider
from treecite.render import RenderedView
from treecite.segment import segment_sentences
from treegen import random_page

ADA_HTML = (
    "<section><h2>Background</h2><p>Ada Lovelace wrote the first algorithm. "
    '<a href="https://example.org/notes">Her notes</a> described the Analytical Engine.</p></section>'
)
QUERY = "Who described the Analytical Engine?"


@pytest.fixture
def ada():
    annotated = segment_sentences(parse_html(ADA_HTML))
    units = [u for _, u in annotated.sentence_units()]
    return Candidate("ada", annotated, units[1]), units


# -- response parsing ----------------------------------------------------------------


def test_parse_opening_tags():
    assert parse_label_response('["<lab_3>", "<lab_1>"]', {"lab_1", "lab_2", "lab_3"}) == {"lab_1", "lab_3"}
    assert parse_label_response("[]", {"lab_1"}) == set()


def test_parse_unknown_and_junk_entries_are_ignored():
    accepted, rejected = parse_labels('["<lab_9>", "lab_1", 3, "<lab_2"]', {"lab_1", "lab_2"})
    assert accepted == {"lab_1"}
    assert rejected == ["<lab_9>", 3, "<lab_2"]


def test_parse_without_array_raises():
    with pytest.raises(LabelParseError):
        parse_label_response("I think lab_1", {"lab_1"})


@pytest.mark.parametrize(
    "raw",
    [
        '```json\n["<lab_1>"]\n```',
        'Sure! ["<lab_1>", "<lab_2>"] hope that helps',
        '["<lab_2>"]',
        '```\n[]\n```',
        'The [bracket] in prose, then ["<lab_1>"]',
    ],
)
def test_tolerant_parser_agrees_with_strict_reference(raw):
    known = {"lab_1", "lab_2"}
    # strict reference: remove fences, take the last bracketed run and load it as JSON
    body = raw.replace("```json", "").replace("```", "")
    ref = json.loads(body[body.rfind("[", 0, body.rfind("]")) : body.rfind("]") + 1])
    assert parse_label_response(raw, known) == {x[1:-1] for x in ref}


# -- prompt ----------------------------------------------------------------------------


def test_prompt_contains_view_and_query(ada):
    candidate, _ = ada
    view = build_view(candidate, Budget(1000))
    prompt = build_filter_prompt(view, QUERY)
    assert "EXCERPT:\n" + view.text + "\nQUERY:\n" + QUERY in prompt
    assert "Return ONLY a valid JSON array" in prompt


def test_prompt_rejects_empty_query_and_labelless_view(ada):
    candidate, _ = ada
    view = build_view(candidate, Budget(1000))
    with pytest.raises(ValueError):
        build_filter_prompt(view, "  ")
    with pytest.raises(ValueError):
        build_filter_prompt(RenderedView("text", {}, "x"), QUERY)


def test_braces_in_query_pass_through(ada):
    candidate, _ = ada
    view = build_view(candidate, Budget(1000))
    prompt = build_filter_prompt(view, "what is {excerpt_md} and {query}?")
    assert prompt.endswith("QUERY:\nwhat is {excerpt_md} and {query}?")
    assert prompt.count(view.text) == 1


# -- filtering ---------------------------------------------------------------------------


def test_ada_model_selects_second_label(ada):
    candidate, units = ada
    provider = FunctionProvider(lambda prompt: '["<lab_2>"]')
    [citation] = filter_citations([candidate], QUERY, Budget(1000), provider)
    assert citation.doc_id == "ada" and citation.paths == units[1]
    assert "Her notes" in citation.text


def test_empty_selection_yields_nothing(ada):
    candidate, _ = ada
    assert filter_citations([candidate], QUERY, Budget(1000), SelectNoneProvider()) == []


def test_unknown_label_is_diagnosed(ada):
    candidate, _ = ada
    report = run_filter([candidate], QUERY, FunctionProvider(lambda p: '["<lab_9>"]'))
    assert report.citations == []
    assert any("lab_9" in d for d in report.diagnostics)


def test_unparseable_response_retried_once(ada):
    candidate, units = ada
    answers = iter(["no idea", '["<lab_1>"]'])
    report = run_filter([candidate], QUERY, FunctionProvider(lambda p: next(answers)))
    assert [c.paths for c in report.citations] == [units[0]]
    assert any("unparseable" in d for d in report.diagnostics)

    report = run_filter([candidate], QUERY, FunctionProvider(lambda p: "still nothing"))
    assert report.citations == [] and len(report.diagnostics) == 2


def test_provider_failure_skips_view(ada):
    candidate, units = ada
    other = Candidate("ada2", candidate.annotated, units[0])

    def flaky(prompt):
        if "Her notes" in prompt and "lab_2" in prompt and flaky.calls == 0:
            flaky.calls += 1
            raise ConnectionError("down")
        return '["<lab_1>"]'

    flaky.calls = 0
    report = run_filter([candidate, other], QUERY, FunctionProvider(flaky), concurrency=1)
    assert len(report.citations) == 1 and report.citations[0].doc_id == "ada2"
    assert any("provider failed" in d for d in report.diagnostics)


def test_duplicates_are_merged(ada):
    candidate, units = ada
    same = Candidate("ada", candidate.annotated, units[0])
    report = run_filter([candidate, same], QUERY, SelectAllProvider())
    keys = [(c.doc_id, c.paths) for c in report.citations]
    assert len(keys) == len(set(keys)) == 2


def test_empty_candidate_rejected(ada):
    candidate, _ = ada
    with pytest.raises(ValueError):
        run_filter([Candidate("x", candidate.annotated, frozenset())], QUERY, SelectAllProvider())


def test_citable_units_fall_back_to_blocks():
    annotated = segment_sentences(parse_html("<h1>T</h1><p>Alpha beta.</p>"), splitter=lambda text: [])
    units = citable_units(annotated, valid_paths(annotated.doc))
    assert len(units) == 1  # the paragraph, not the header


def test_concurrency_is_bounded_and_order_stable():
    docs = [segment_sentences(parse_html(random_page(random.Random(i)))) for i in range(8)]
    candidates = [Candidate(f"d{i}", a, u) for i, a in enumerate(docs)
                  for _, u in a.sentence_units()[:1]]
    lock, live, peak = threading.Lock(), [0], [0]

    def tracked(prompt):
        with lock:
            live[0] += 1
            peak[0] = max(peak[0], live[0])
        try:
            return SelectAllProvider().complete(prompt)
        finally:
            with lock:
                live[0] -= 1

    a = run_filter(candidates, "parks", FunctionProvider(tracked), concurrency=3)
    b = run_filter(candidates, "parks", SelectAllProvider(), concurrency=1)
    assert peak[0] <= 3
    assert a.citations == b.citations


def test_scripted_transcript_replays(ada):
    candidate, units = ada
    view = build_view(candidate, Budget(1000))
    provider = ScriptedProvider.from_pairs([(build_filter_prompt(view, QUERY), '["<lab_2>"]')])
    first = filter_citations([candidate], QUERY, Budget(1000), provider)
    second = filter_citations([candidate], QUERY, Budget(1000), provider)
    assert first == second and [c.paths for c in first] == [units[1]]


@st.composite
def filter_cases(draw):
    rng = random.Random(draw(st.integers(0, 2**32 - 1)))
    annotated = segment_sentences(parse_html(random_page(rng)))
    units = [u for _, u in annotated.sentence_units()]
    if not units:
        return None
    return annotated, rng.choice(units), draw(st.integers(5, 200))


@settings(max_examples=40, deadline=None)
@given(filter_cases())
def test_select_all_cites_every_unit_within_view(case):
    if case is None:
        return
    annotated, seed, limit = case
    candidate = Candidate("d", annotated, seed)
    budget = Budget(limit)
    expanded = expand_local(annotated, seed, budget)
    report = run_filter([candidate], "query", SelectAllProvider(), budget)
    units = citable_units(annotated, expanded)
    assert {c.paths for c in report.citations} == set(units)
    assert all(c.paths <= expanded for c in report.citations)
    none = run_filter([candidate], "query", SelectNoneProvider(), budget)
    assert none.citations == []
