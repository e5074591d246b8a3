"""Generative providers: an HTTP client and deterministic offline stand-ins."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Protocol

from treecite.errors import ProviderError


class GenerativeProvider(Protocol):
    def complete(self, prompt: str) -> str: ...


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass
class HttpGenerativeProvider:
    """Client for ``POST {"prompt": ...}`` -> ``{"text": ...}``."""

    endpoint: str
    api_key: Optional[str] = None
    timeout: float = 120.0

    def complete(self, prompt: str) -> str:
        import httpx

        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = httpx.post(self.endpoint, json={"prompt": prompt}, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            text = resp.json()["text"]
        except (httpx.HTTPError, KeyError, ValueError, TypeError) as exc:
            raise ProviderError(f"generation request failed: {exc}") from exc
        if not isinstance(text, str):
            raise ProviderError("generation response 'text' is not a string")
        return text


@dataclass
class ScriptedProvider:
    """Replays canned responses keyed by the SHA-256 of the prompt."""

    transcript: Mapping[str, str]
    default: Optional[str] = None
    calls: list = field(default_factory=list)

    @classmethod
    def from_pairs(cls, pairs, default: Optional[str] = None) -> "ScriptedProvider":
        return cls({prompt_key(p): r for p, r in pairs}, default)

    @classmethod
    def load(cls, path: str) -> "ScriptedProvider":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(dict(data.get("responses", {})), data.get("default"))

    def complete(self, prompt: str) -> str:
        key = prompt_key(prompt)
        self.calls.append(key)
        if key in self.transcript:
            return self.transcript[key]
        if self.default is not None:
            return self.default
        raise ProviderError(f"no scripted response for prompt {key[:12]}")


_LABEL = re.compile(r"<(lab_\d+)>")


def _excerpt(prompt: str) -> str:
    start = prompt.rfind("EXCERPT:\n")
    end = prompt.rfind("\nQUERY:\n")
    if start < 0 or end < start:
        return prompt
    return prompt[start:end]


@dataclass
class SelectAllProvider:
    """Selects every label that occurs in the excerpt."""

    def complete(self, prompt: str) -> str:
        seen = dict.fromkeys(_LABEL.findall(_excerpt(prompt)))
        return json.dumps([f"<{label}>" for label in seen])


@dataclass
class SelectNoneProvider:
    def complete(self, prompt: str) -> str:
        return "[]"


@dataclass
class FunctionProvider:
    """Wraps a plain function; handy for tests and ad-hoc judges."""

    fn: Callable[[str], str]

    def complete(self, prompt: str) -> str:
        return self.fn(prompt)


_WORD = re.compile(r"[a-z0-9]+")
_STOP = frozenset(
    "a an and are as at be by did do does for from has have how in is it of on or that the "
    "this to was were what when where which who whom why with".split()
)


@dataclass
class OverlapJudge:
    """Offline judge: helpful when the citation shares a content word with the question."""

    def complete(self, prompt: str) -> str:
        q = prompt.rfind("\nQUESTION:\n")
        c = prompt.rfind("\nCITATION:\n")
        e = prompt.rfind("\n\nRespond with")
        if q < 0 or c < q:
            raise ProviderError("judge prompt lacks QUESTION/CITATION sections")
        question = prompt[q + 11 : c]
        citation = prompt[c + 11 : e if e > c else len(prompt)]
        words = {w for w in _WORD.findall(question.lower()) if w not in _STOP}
        shared = sorted(words & set(_WORD.findall(citation.lower())))
        return json.dumps(
            {
                "helps_answer_question": bool(shared),
                "helpful_citation_part": "",
                "answered_question_part": "",
                "reasoning": f"shared terms: {', '.join(shared)}" if shared else "no shared terms",
            }
        )
