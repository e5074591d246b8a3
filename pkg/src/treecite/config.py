"""Flat key/value configuration loaded from TOML with environment overrides."""

from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass, fields
from typing import Mapping, Optional

from treecite.context import DEFAULT_POLICIES, parse_policies
from treecite.errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

ENV_PREFIX = "TREECITE_"


@dataclass
class Config:
    # embedding provider: "mock" or "http"
    embedding_provider: str = ""
    embedding_endpoint: str = ""
    embedding_api_key: str = ""
    embedding_dim: int = 64
    embedding_max_tokens: int = 0
    # generative provider for filtering: "mock-all", "mock-none", "scripted" or "http"
    generative_provider: str = ""
    generative_endpoint: str = ""
    generative_api_key: str = ""
    generative_transcript: str = ""
    # judge provider: "mock-overlap", "scripted" or "http"
    judge_provider: str = ""
    judge_endpoint: str = ""
    judge_api_key: str = ""
    judge_transcript: str = ""
    budget: int = 1000
    expand_budget: int = 1000
    k_init: int = 8
    fill_threshold: float = 0.8
    policies: str = ",".join(DEFAULT_POLICIES)
    batch_size: int = 32
    parallelism: int = 1
    concurrency: int = 4
    retries: int = 2
    seed: int = 0
    manifest_path: str = ""
    index_path: str = ""

    def validate(self) -> "Config":
        try:
            parse_policies(self.policies)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for name in ("budget", "expand_budget", "k_init", "batch_size", "parallelism", "concurrency"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if not 0 < self.fill_threshold <= 1:
            raise ConfigError("fill_threshold must be in (0, 1]")
        return self

    @property
    def policy_names(self) -> tuple[str, ...]:
        return parse_policies(self.policies)

    def to_toml(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, str):
                escaped = value.replace("\\", "\\\\").replace('"', '\\"')
                lines.append(f'{f.name} = "{escaped}"')
            else:
                lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


def _coerce(name: str, kind, value):
    try:
        if kind in (int, "int"):
            if isinstance(value, bool):
                raise ValueError
            return int(value)
        if kind in (float, "float"):
            return float(value)
        if isinstance(value, (list, tuple)):
            return ",".join(str(v) for v in value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {name}: {value!r}") from None


def load_config(
    path: Optional[str] = None,
    env: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, object]] = None,
) -> Config:
    """File values, then ``TREECITE_*`` environment variables, then ``overrides``."""
    env = os.environ if env is None else env
    kinds = {f.name: f.type for f in fields(Config)}
    values: dict[str, object] = {}
    if path:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from None
        for key, value in data.items():
            if key not in kinds:
                raise ConfigError(f"unknown config key {key!r}")
            if isinstance(value, dict):
                raise ConfigError(f"config is flat; {key!r} must not be a table")
            values[key] = value
    for key in kinds:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            values[key] = env[env_key]
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    coerced = {k: _coerce(k, kinds[k], v) for k, v in values.items()}
    return dataclasses.replace(Config(), **coerced).validate()
