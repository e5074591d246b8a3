from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from treecite.evaluate import (
    HELPFUL,
    NOT_HELPFUL,
    build_judge_prompt,
    format_ratio,
    judge_citations,
    parse_verdict,
)
from treecite.providers import FunctionProvider, OverlapJudge


def test_format_ratio():
    assert format_ratio(37, 113) == "37/113 (0.327)"
    assert format_ratio(1, 3) == "1/3 (0.333)"
    assert format_ratio(2, 3) == "2/3 (0.667)"
    assert format_ratio(0, 0) == "0/0 (n/a)"


@given(st.integers(1, 10_000).flatmap(lambda t: st.tuples(st.integers(0, t), st.just(t))))
def test_format_ratio_oracle(pair):
    h, t = pair
    assert format_ratio(h, t) == f"{h}/{t} ({round(h / t, 3):.3f})"


@pytest.mark.parametrize(
    "raw, verdict",
    [
        ('{"helps_answer_question": true, "reasoning": "r"}', HELPFUL),
        ('```json\n{"helps_answer_question": false}\n```', NOT_HELPFUL),
        ('Thoughts {not json} then {"helps_answer_question": true}', HELPFUL),
        ("YES, it does", HELPFUL),
        ("**No** because", NOT_HELPFUL),
        ('{"helps_answer_question": "yes"}', None),
        ("maybe", None),
    ],
)
def test_parse_verdict(raw, verdict):
    assert parse_verdict(raw)[0] == verdict


def test_judge_prompt_keeps_braces():
    prompt = build_judge_prompt("what is {citation}?", "text with {question}")
    assert prompt.count("what is {citation}?") == 1
    assert prompt.count("text with {question}") == 1


def test_planted_ratio_is_recovered():
    # the judge answers helpful exactly for citations whose index is below 37
    items = [("q", "d", [[i]], f"citation {i}") for i in range(113)]

    def judge(prompt):
        n = int(prompt.rsplit("citation ", 1)[1].split()[0])
        return json.dumps({"helps_answer_question": n < 37, "reasoning": ""})

    report = judge_citations(items, FunctionProvider(judge), concurrency=4)
    assert report.summary == "37/113 (0.327)"
    assert [r.citation for r in report.records] == [i[3] for i in items]


def test_unparseable_and_failing_judges_are_excluded():
    items = [("q", "d", [], "a"), ("q", "d", [], "b"), ("q", "d", [], "c")]

    def judge(prompt):
        if prompt.endswith('"reasoning".') and "\na\n" in prompt:
            return '{"helps_answer_question": true}'
        if "\nb\n" in prompt:
            return "dunno"
        raise RuntimeError("down")

    report = judge_citations(items, FunctionProvider(judge), concurrency=1)
    assert (report.helpful, report.total, report.unparseable) == (1, 1, 2)
    assert report.to_json()["ratio"] == "1/1 (1.000)"
    assert "judge failed" in report.records[2].rationale


def test_empty_input():
    report = judge_citations([], OverlapJudge())
    assert report.summary == "0/0 (n/a)" and report.ratio is None
