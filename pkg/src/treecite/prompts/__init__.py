"""Prompt templates used for evidence selection and judging."""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

_PLACEHOLDER = re.compile(r"\{(\w+)\}")


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    """Template text as shipped, minus the file's final newline."""
    text = resources.files(__name__).joinpath(f"{name}.txt").read_text(encoding="utf-8")
    return text[:-1] if text.endswith("\n") else text


def fill(template: str, **values: str) -> str:
    """Substitute ``{name}`` placeholders in a single pass.

    Substituted values are never rescanned, so braces inside a query or an
    excerpt pass through literally. Unknown placeholders are left as is.
    """
    return _PLACEHOLDER.sub(lambda m: values.get(m.group(1), m.group(0)), template)


def selector_template() -> str:
    return load_template("evidence_selector")


def judge_template() -> str:
    return load_template("judge")
