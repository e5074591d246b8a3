"""Exception hierarchy shared across the package."""

from __future__ import annotations


class TreeciteError(Exception):
    """Base class for every error raised by this package."""


class InvalidPathError(TreeciteError, KeyError):
    """A path does not address a node of the document."""

    def __init__(self, path):
        self.path = tuple(path)
        super().__init__(f"path {list(self.path)} is not valid for this document")

    def __str__(self) -> str:
        return self.args[0]


class MalformedEncodingError(TreeciteError, ValueError):
    """The HTML bytes could not be decoded with the declared encoding."""


class SpanMappingError(TreeciteError, ValueError):
    """A sentence splitter returned overlapping or out-of-range spans."""


class UnknownSentenceError(TreeciteError, KeyError):
    """The sentence id does not belong to the annotated document."""


class OverlapError(TreeciteError, ValueError):
    """Two citable units share a text leaf."""


class DimensionMismatchError(TreeciteError, ValueError):
    """A vector does not have the dimension the index expects."""


class IndexFormatError(TreeciteError):
    """Base class for problems reading a persisted index."""


class CorruptIndexError(IndexFormatError):
    """The index file is truncated or its payload does not match its header."""


class IndexVersionError(IndexFormatError):
    """The index file was written with an unsupported format version."""

    def __init__(self, found: int, expected: int):
        self.found = found
        self.expected = expected
        super().__init__(
            f"index format version {found} is not supported (expected version {expected})"
        )


class ProviderError(TreeciteError):
    """An embedding or generative provider failed to answer."""


class IndexingError(ProviderError):
    """Embedding a batch failed after all retries; the batch can be retried later."""

    def __init__(self, message: str, batch: list[str]):
        super().__init__(message)
        self.batch = batch


class LabelParseError(TreeciteError, ValueError):
    """A model response did not contain a JSON array."""


class ConfigError(TreeciteError):
    """The configuration is incomplete or inconsistent."""
