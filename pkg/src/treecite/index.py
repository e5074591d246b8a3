"""Sentence-seeded vector index.

Each entry stores the *bare* sentence path set of one sentence together with
the embedding of its contextualized rendering. Vectors are kept L2-normalized,
so cosine similarity is a dot product.

File layout (all integers little-endian)::

    b"TCIX" | u8 version | u32 header length | header JSON
    | count * dim float32 vectors | entries JSON

The header records dimension, metric, count, the byte length of the entries
table and a SHA-256 over everything after the header.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import struct
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from treecite.context import DEFAULT_POLICIES, ctx_html
from treecite.doctree import DocNode, PathSet, from_json, paths_from_json, paths_to_json, to_json
from treecite.errors import (
    CorruptIndexError,
    DimensionMismatchError,
    IndexingError,
    IndexVersionError,
    ProviderError,
)
from treecite.render import render_markdown
from treecite.segment import AnnotatedDoc, SentenceSplitter, segment_sentences

log = logging.getLogger(__name__)

MAGIC = b"TCIX"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sBI")


# ---------------------------------------------------------------------------
# Embedding providers
# ---------------------------------------------------------------------------


class EmbeddingProvider(Protocol):
    dimension: int
    max_input_tokens: Optional[int]

    def embed(self, texts: list[str]) -> list[Sequence[float]]: ...


_TOKEN = re.compile(r"\w+", re.UNICODE)


@dataclass
class MockEmbedder:
    """Deterministic offline embedder: seeded feature hashing of lowercase words.

    Equal texts give equal vectors; texts sharing words have positive cosine.
    """

    dimension: int = 64
    seed: int = 0
    max_input_tokens: Optional[int] = None

    def _vector(self, text: str) -> np.ndarray:
        v = np.zeros(self.dimension, dtype=np.float64)
        for token in _TOKEN.findall(text.lower()):
            h = hashlib.sha256(f"{self.seed}:{token}".encode()).digest()
            idx = int.from_bytes(h[:4], "little") % self.dimension
            v[idx] += 1.0 if h[4] & 1 else -1.0
        if not v.any():
            v[0] = 1.0
        return v

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        return [self._vector(t) for t in texts]


@dataclass
class HttpEmbeddingProvider:
    """Client for ``POST {"inputs": [...]}`` -> ``{"vectors": [[...], ...]}``."""

    endpoint: str
    dimension: int
    api_key: Optional[str] = None
    timeout: float = 60.0
    max_input_tokens: Optional[int] = None

    def embed(self, texts: list[str]) -> list[list[float]]:
        import httpx

        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = httpx.post(self.endpoint, json={"inputs": texts}, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            vectors = resp.json()["vectors"]
        except (httpx.HTTPError, KeyError, ValueError, TypeError) as exc:
            raise ProviderError(f"embedding request failed: {exc}") from exc
        if len(vectors) != len(texts):
            raise ProviderError(f"expected {len(texts)} vectors, got {len(vectors)}")
        return vectors


# ---------------------------------------------------------------------------
# Index
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IndexEntry:
    doc_id: str
    seed: PathSet
    vector: np.ndarray = field(compare=False, repr=False)
    rendered: str = ""

    def sort_key(self):
        return (self.doc_id, sorted(self.seed))


@dataclass
class VectorIndex:
    """Flat index; the entry list is the source of truth."""

    dimension: int
    entries: list[IndexEntry] = field(default_factory=list)
    documents: dict[str, AnnotatedDoc] = field(default_factory=dict)
    metric: str = "cosine"

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def matrix(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, self.dimension), dtype=np.float32)
        return np.stack([e.vector for e in self.entries]).astype(np.float32, copy=False)

    def search(self, query_vec: Sequence[float], k: int) -> list[tuple[IndexEntry, float]]:
        return search(self, query_vec, k)


def normalize(vec: Sequence[float], dimension: int) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64).reshape(-1)
    if v.shape[0] != dimension:
        raise DimensionMismatchError(f"vector has dimension {v.shape[0]}, index expects {dimension}")
    norm = np.linalg.norm(v)
    if norm == 0 or not np.isfinite(norm):
        raise DimensionMismatchError("cannot normalize a zero or non-finite vector")
    return (v / norm).astype(np.float32)


def search(index: VectorIndex, query_vec: Sequence[float], k: int) -> list[tuple[IndexEntry, float]]:
    """Top-``k`` entries by cosine similarity with ``(doc_id, seed)`` tie order."""
    if k < 0:
        raise ValueError("k must be non-negative")
    q = normalize(query_vec, index.dimension)
    if k == 0 or not index.entries:
        return []
    scores = index.matrix @ q
    order = sorted(range(len(index.entries)), key=lambda i: (-float(scores[i]), index.entries[i].sort_key()))
    return [(index.entries[i], float(scores[i])) for i in order[:k]]


def truncate_tokens(text: str, limit: int) -> str:
    """Cut ``text`` after its ``limit``-th whitespace-separated token."""
    count = 0
    for m in re.finditer(r"\S+", text):
        count += 1
        if count == limit:
            return text[: m.end()]
    return text


def _embed_batch(provider, batch: list[str], retries: int, backoff: float) -> list[np.ndarray]:
    last: Optional[Exception] = None
    for attempt in range(retries + 1):
        try:
            vectors = provider.embed(batch)
            if len(vectors) != len(batch):
                raise ProviderError(f"expected {len(batch)} vectors, got {len(vectors)}")
            return [normalize(v, provider.dimension) for v in vectors]
        except DimensionMismatchError:
            raise
        except Exception as exc:  # providers are external; retry anything
            last = exc
            if attempt < retries and backoff:
                time.sleep(backoff * (2**attempt))
    raise IndexingError(f"embedding failed after {retries + 1} attempts: {last}", batch)


def embed_texts(
    provider,
    texts: list[str],
    batch_size: int = 32,
    parallelism: int = 1,
    retries: int = 2,
    backoff: float = 0.0,
) -> list[np.ndarray]:
    """Embed in batches, possibly concurrently; output order follows input order.

    Vectors come back L2-normalized.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    batches = [texts[i : i + batch_size] for i in range(0, len(texts), batch_size)]
    if parallelism > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(lambda b: _embed_batch(provider, b, retries, backoff), batches))
    else:
        results = [_embed_batch(provider, b, retries, backoff) for b in batches]
    return [v for batch in results for v in batch]


def indexing_surface(annotated: AnnotatedDoc, policies: Sequence[str] = DEFAULT_POLICIES):
    """``(seed, rendered)`` for every content sentence of one document."""
    out = []
    for _, seed in annotated.sentence_units():
        text = render_markdown(annotated.doc, ctx_html(annotated.doc, seed, policies))
        if text.strip():
            out.append((seed, text))
    return out


def build_index(
    corpus: Iterable[tuple[str, DocNode]],
    provider,
    splitter: Optional[SentenceSplitter] = None,
    policies: Sequence[str] = DEFAULT_POLICIES,
    batch_size: int = 32,
    parallelism: int = 1,
    retries: int = 2,
) -> VectorIndex:
    """Segment, contextualize, render and embed every sentence of the corpus.

    Entries keep the bare sentence seed; context only shapes the embedded text.

    Raises:
        IndexingError: when a batch still fails after the retries.
    """
    documents: dict[str, AnnotatedDoc] = {}
    pending: list[tuple[str, PathSet, str]] = []
    for doc_id, doc in corpus:
        if doc_id in documents:
            raise ValueError(f"duplicate document id {doc_id!r}")
        annotated = segment_sentences(doc, splitter)
        documents[doc_id] = annotated
        pending.extend((doc_id, seed, text) for seed, text in indexing_surface(annotated, policies))
    texts = [t for _, _, t in pending]
    limit = getattr(provider, "max_input_tokens", None)
    if limit:
        clipped = [truncate_tokens(t, limit) for t in texts]
        n_cut = sum(a != b for a, b in zip(texts, clipped))
        if n_cut:
            log.warning("%d rendering(s) truncated to the provider limit of %d tokens", n_cut, limit)
        texts = clipped
    vectors = embed_texts(provider, texts, batch_size, parallelism, retries)
    entries = [IndexEntry(d, s, v, t) for (d, s, _), v, t in zip(pending, vectors, texts)]
    return VectorIndex(provider.dimension, entries, documents)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _payload(index: VectorIndex) -> tuple[bytes, bytes]:
    vectors = index.matrix.astype("<f4").tobytes()
    table = {
        "entries": [
            {"doc_id": e.doc_id, "seed": paths_to_json(e.seed), "rendered": e.rendered}
            for e in index.entries
        ],
        "documents": {
            doc_id: {"tree": to_json(a.doc), "sentences": [list(b) for b in a.sentences]}
            for doc_id, a in sorted(index.documents.items())
        },
    }
    return vectors, json.dumps(table, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode()


def dumps_index(index: VectorIndex) -> bytes:
    vectors, table = _payload(index)
    header = {
        "count": len(index.entries),
        "dim": index.dimension,
        "entries_bytes": len(table),
        "metric": index.metric,
        "sha256": hashlib.sha256(vectors + table).hexdigest(),
        "version": FORMAT_VERSION,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return _PREFIX.pack(MAGIC, FORMAT_VERSION, len(head)) + head + vectors + table


def save_index(index: VectorIndex, path: str | os.PathLike) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    data = dumps_index(index)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tcix-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def loads_index(data: bytes) -> VectorIndex:
    if len(data) < _PREFIX.size:
        raise CorruptIndexError("index file is truncated")
    magic, version, head_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CorruptIndexError("not an index file (bad magic)")
    if version != FORMAT_VERSION:
        raise IndexVersionError(version, FORMAT_VERSION)
    start = _PREFIX.size
    try:
        header = json.loads(data[start : start + head_len])
        count, dim = int(header["count"]), int(header["dim"])
        n_table = int(header["entries_bytes"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptIndexError(f"unreadable index header: {exc}") from None
    body = data[start + head_len :]
    n_vec = count * dim * 4
    if len(body) != n_vec + n_table:
        raise CorruptIndexError(f"index payload is {len(body)} bytes, header promises {n_vec + n_table}")
    if hashlib.sha256(body).hexdigest() != header.get("sha256"):
        raise CorruptIndexError("index checksum mismatch")
    matrix = np.frombuffer(body[:n_vec], dtype="<f4").reshape(count, dim)
    try:
        table = json.loads(body[n_vec:])
        documents = {
            doc_id: AnnotatedDoc(from_json(d["tree"]), tuple(tuple(b) for b in d["sentences"]))
            for doc_id, d in table["documents"].items()
        }
        entries = [
            IndexEntry(e["doc_id"], paths_from_json(e["seed"]), matrix[i].astype(np.float32), e["rendered"])
            for i, e in enumerate(table["entries"])
        ]
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptIndexError(f"unreadable entries table: {exc}") from None
    if len(entries) != count:
        raise CorruptIndexError("entry count does not match header")
    return VectorIndex(dim, entries, documents, header.get("metric", "cosine"))


def load_index(path: str | os.PathLike) -> VectorIndex:
    with open(path, "rb") as fh:
        return loads_index(fh.read())
