"""Tokenization, deterministic text embeddings, and scalar similarities.

Three measures are exposed: token-set Jaccard, Euclidean distance between
embedding vectors, and cosine similarity (the bounded score used by the
table selection stage).  The default embedding provider hashes character
n-grams, so every vector is reproducible offline with no model files.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .errors import DimensionMismatch, IoError, UnknownToken

DEFAULT_DIMENSION = 64

# maximal runs of alphanumerics; underscore counts as a separator
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


class Tokens(NamedTuple):
    """Both views of a tokenized string: order matters for term frequency,
    the set view feeds Jaccard."""

    ordered: tuple[str, ...]
    unique: frozenset[str]


def tokenize(text: str) -> Tokens:
    """Lowercase and split on any maximal run of non-alphanumeric characters."""
    parts = _TOKEN_RE.findall(text.lower())
    return Tokens(tuple(parts), frozenset(parts))


def jaccard(a: Iterable[str], b: Iterable[str]) -> float:
    """|a and b| / |a or b| over token sets; two empty sets score 0."""
    sa = a if isinstance(a, frozenset) else frozenset(a)
    sb = b if isinstance(b, frozenset) else frozenset(b)
    if not sa and not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


def token_hash(token: str) -> int:
    """FNV-1a over the token's UTF-8 bytes, 64-bit."""
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


@dataclass(frozen=True, eq=False)
class Embedding:
    """Fixed-length real vector with its Euclidean norm cached."""

    values: np.ndarray
    norm: float

    @property
    def dimension(self) -> int:
        return self.values.shape[0]


class HashedSubwordProvider:
    """Deterministic subword embeddings.

    Each token is wrapped in boundary markers and decomposed into character
    3- to 5-grams; every n-gram adds +1 or -1 (sign bit of its hash) to one
    of `dimension` buckets.  Token vectors are sums of their n-gram
    contributions.  Identical input always yields identical output.
    """

    kind = "hashed_subword"

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        self.dimension = dimension
        self._cache: dict[str, np.ndarray] = {}

    def token_vector(self, token: str) -> np.ndarray:
        cached = self._cache.get(token)
        if cached is not None:
            return cached
        wrapped = f"<{token}>"
        vec = np.zeros(self.dimension)
        for size in (3, 4, 5):
            for start in range(len(wrapped) - size + 1):
                h = token_hash(wrapped[start : start + size])
                sign = -1.0 if h >> 63 else 1.0
                vec[h % self.dimension] += sign
        self._cache[token] = vec
        return vec


class WordVectorProvider:
    """Embeddings read from a plain-text vector file.

    File format: optional "N D" header line, then one `token v1 .. vD` line
    per entry.  Tokens missing from the file use a hashed-subword fallback
    of the same dimension, unless fallback is disabled.
    """

    kind = "word_vector_file"

    def __init__(self, vectors: dict[str, np.ndarray], dimension: int,
                 fallback: bool = True, source_path: str | None = None):
        self.dimension = dimension
        self.fallback = fallback
        self.source_path = source_path
        self._vectors = vectors
        self._hashed = HashedSubwordProvider(dimension) if fallback else None

    @classmethod
    def load(cls, path: str | Path, fallback: bool = True) -> "WordVectorProvider":
        path = Path(path)
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise IoError(f"cannot read word-vector file {path}: {exc}") from exc
        vectors: dict[str, np.ndarray] = {}
        dimension = None
        for lineno, line in enumerate(lines):
            parts = line.split()
            if not parts:
                continue
            if lineno == 0 and len(parts) == 2 and parts[0].isdigit() and parts[1].isdigit():
                dimension = int(parts[1])
                continue
            token, values = parts[0], parts[1:]
            if dimension is None:
                dimension = len(values)
            if len(values) != dimension:
                raise IoError(
                    f"{path}:{lineno + 1}: expected {dimension} values, got {len(values)}")
            vectors[token] = np.array([float(v) for v in values])
        if not vectors or dimension is None:
            raise IoError(f"word-vector file {path} contains no vectors")
        return cls(vectors, dimension, fallback=fallback, source_path=str(path))

    def token_vector(self, token: str) -> np.ndarray | None:
        vec = self._vectors.get(token)
        if vec is not None:
            return vec
        if self._hashed is not None:
            return self._hashed.token_vector(token)
        return None  # skipped; embed() errors only when every token is unknown


def embed(text: str, provider) -> Embedding:
    """Average the provider's token vectors and L2-normalize.

    Empty text (or text with no tokens) maps to the zero vector with norm 0.
    """
    tokens = tokenize(text).ordered
    dim = provider.dimension
    if not tokens:
        return Embedding(np.zeros(dim), 0.0)
    total = np.zeros(dim)
    used = 0
    for token in tokens:
        vec = provider.token_vector(token)
        if vec is None:
            continue
        total += vec
        used += 1
    if used == 0:
        raise UnknownToken(f"no token of {text!r} is in the provider vocabulary")
    mean = total / used
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        return Embedding(np.zeros(dim), 0.0)
    return Embedding(mean / norm, 1.0)


def _check_dims(u: Embedding, v: Embedding) -> None:
    if u.values.shape != v.values.shape:
        raise DimensionMismatch(
            f"vector dimensions differ: {u.values.shape[0]} vs {v.values.shape[0]}")


def semantic_distance(u: Embedding, v: Embedding) -> float:
    """Euclidean distance between two embedding vectors."""
    _check_dims(u, v)
    return float(np.linalg.norm(u.values - v.values))


def cosine_similarity(u: Embedding, v: Embedding) -> float:
    """dot(u, v) / (|u| |v|), with 0 when either vector is zero."""
    _check_dims(u, v)
    if u.norm == 0.0 or v.norm == 0.0:
        return 0.0
    raw = float(np.dot(u.values, v.values)) / (u.norm * v.norm)
    return max(-1.0, min(1.0, raw))
