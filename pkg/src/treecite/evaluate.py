"""Judge harness: ask a judge model whether each citation helps answer its query."""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from treecite.prompts import fill, judge_template

HELPFUL = "helpful"
NOT_HELPFUL = "not-helpful"

_SUFFIX = (
    "\n\nQUESTION:\n{question}\n\nCITATION:\n{citation}\n\n"
    'Respond with a JSON object with the keys "helps_answer_question" (true or false), '
    '"helpful_citation_part", "answered_question_part" and "reasoning".'
)


def build_judge_prompt(question: str, citation: str) -> str:
    """The judge instructions followed by the question and the citation text."""
    return judge_template() + fill(_SUFFIX, question=question, citation=citation)


def parse_verdict(raw: str) -> tuple[Optional[str], str]:
    """``(verdict, rationale)``; verdict is ``None`` when nothing can be read."""
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", raw):
        try:
            obj, _ = decoder.raw_decode(raw, m.start())
        except ValueError:
            continue
        if isinstance(obj, dict) and isinstance(obj.get("helps_answer_question"), bool):
            verdict = HELPFUL if obj["helps_answer_question"] else NOT_HELPFUL
            return verdict, str(obj.get("reasoning", ""))
    m = re.match(r"\s*\**\s*(YES|NO)\b", raw, re.IGNORECASE)
    if m:
        return (HELPFUL if m.group(1).upper() == "YES" else NOT_HELPFUL), raw.strip()
    return None, raw.strip()


def format_ratio(helpful: int, total: int) -> str:
    """``"H/T (0.xyz)"``, or ``"0/0 (n/a)"`` when nothing was judged."""
    if total == 0:
        return f"{helpful}/0 (n/a)"
    return f"{helpful}/{total} ({helpful / total:.3f})"


@dataclass(frozen=True)
class EvalRecord:
    query: str
    doc_id: str
    paths: list
    citation: str
    verdict: Optional[str]
    rationale: str = ""


@dataclass
class EvalReport:
    records: list[EvalRecord] = field(default_factory=list)

    @property
    def helpful(self) -> int:
        return sum(r.verdict == HELPFUL for r in self.records)

    @property
    def total(self) -> int:
        return sum(r.verdict is not None for r in self.records)

    @property
    def unparseable(self) -> int:
        return sum(r.verdict is None for r in self.records)

    @property
    def ratio(self) -> Optional[float]:
        return self.helpful / self.total if self.total else None

    @property
    def summary(self) -> str:
        return format_ratio(self.helpful, self.total)

    def to_json(self) -> dict:
        return {
            "helpful": self.helpful,
            "total": self.total,
            "unparseable": self.unparseable,
            "ratio": self.summary,
            "records": [asdict(r) for r in self.records],
        }


def judge_citations(
    items: Sequence[tuple[str, str, list, str]],
    judge,
    concurrency: int = 4,
) -> EvalReport:
    """Judge ``(query, doc_id, paths, citation_text)`` items.

    Unreadable verdicts and judge failures are kept as records with verdict
    ``None`` and excluded from the ratio.
    """

    def one(item):
        query, doc_id, paths, text = item
        try:
            verdict, rationale = parse_verdict(judge.complete(build_judge_prompt(query, text)))
        except Exception as exc:
            verdict, rationale = None, f"judge failed: {exc}"
        return EvalRecord(query, doc_id, paths, text, verdict, rationale)

    if concurrency > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            records = list(pool.map(one, items))
    else:
        records = [one(i) for i in items]
    return EvalReport(records)
