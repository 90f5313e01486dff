"""In-process search over lake join-key cells.

Three structures are built over the same cell documents:

- an inverted index with document length normalization for BM25 ranking,
- MinHash signatures banded into LSH buckets for Jaccard candidate
  generation (candidates are re-scored exactly, so banding affects recall
  only, never precision),
- a flat matrix of embedding vectors scanned exactly for nearest-neighbor
  queries (desk-scale corpora make the exact scan affordable).

Documents are ordered by (table_id, row_index, column_index); every search
breaks score ties by that order, which keeps results reproducible.
"""

from __future__ import annotations

import pickle
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import _kernels as kernels
from .errors import EmptyCorpus, EmptyQuery, IoError
from .tablecore import Corpus, TargetTable, target_table_to_json, _table_from_json
from .textenc import (
    Embedding,
    HashedSubwordProvider,
    Tokens,
    WordVectorProvider,
    embed,
    token_hash,
    tokenize,
)

BM25_K1 = 1.2
BM25_B = 0.75
SIGNATURE_HASHES = 128
LSH_BANDS = 16
LSH_ROWS = 8  # LSH_BANDS * LSH_ROWS == SIGNATURE_HASHES

_MAGIC = b"TLIX1\n"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class CellDoc:
    """One indexed join-key cell."""

    table_id: str
    row_index: int
    column_index: int
    text: str
    tokens: Tokens


@dataclass(frozen=True)
class SearchHit:
    doc: CellDoc
    score: float
    measure: str  # jaccard | bm25 | semantic


@dataclass(eq=False)
class JoinIndex:
    """Immutable after construction; safe for concurrent queries."""

    docs: list[CellDoc]
    corpus: Corpus
    provider: object
    seed: int
    seeds: np.ndarray                      # uint64[SIGNATURE_HASHES]
    signatures: np.ndarray                 # uint64[N, SIGNATURE_HASHES]
    vectors: np.ndarray                    # float64[N, D]
    doc_lengths: np.ndarray                # float64[N]
    avgdl: float
    knorm: np.ndarray                      # float64[N], the per-doc BM25 length term
    postings: dict[str, tuple[np.ndarray, np.ndarray]]  # term -> (doc ids, tfs)
    buckets: list[dict[bytes, list[int]]]  # one dict per band

    @property
    def doc_count(self) -> int:
        return len(self.docs)

    def bucket_snapshot(self) -> list[tuple[int, bytes, tuple[int, ...]]]:
        """Normalized view of all band buckets, for determinism checks."""
        out = []
        for band, table in enumerate(self.buckets):
            for key in sorted(table):
                out.append((band, key, tuple(table[key])))
        return out


def first_column(table: TargetTable) -> Sequence[int]:
    """Default join-key predicate: index the leading column only."""
    return (0,) if table.column_names else ()


def _derive_seeds(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2**64, size=SIGNATURE_HASHES, dtype=np.uint64)


def _signature_block(token_sets: list[tuple[str, ...]], seeds: np.ndarray) -> np.ndarray:
    hashes = []
    offsets = [0]
    for tokens in token_sets:
        hashes.extend(token_hash(t) for t in tokens)
        offsets.append(len(hashes))
    hash_arr = np.array(hashes, dtype=np.uint64)
    offset_arr = np.array(offsets, dtype=np.int64)
    return kernels.minhash_block(hash_arr, offset_arr, seeds)


def signature_of_tokens(token_set: frozenset[str], seed: int) -> np.ndarray:
    """Signature of one token set under the index's seed schedule."""
    ordered = tuple(sorted(token_set))
    return _signature_block([ordered], _derive_seeds(seed))[0]


def build_index(corpus: Corpus,
                key_columns: Callable[[TargetTable], Sequence[int]] | None = None,
                provider=None, seed: int = 0) -> JoinIndex:
    """Index every join-key cell of every corpus table.

    Cells that tokenize to nothing are not indexed: they cannot match by
    token overlap and their zero embedding would outrank genuine neighbors.
    """
    if len(corpus) == 0:
        raise EmptyCorpus("cannot index an empty corpus")
    predicate = key_columns or first_column
    provider = provider or HashedSubwordProvider()

    docs: list[CellDoc] = []
    for table in sorted(corpus, key=lambda t: t.id):
        cols = sorted(set(predicate(table)))
        for col in cols:
            if not (0 <= col < len(table.column_names)):
                raise ValueError(
                    f"key column {col} out of range for table {table.id}")
        for row_index, row in enumerate(table.rows):
            for col in cols:
                text = row[col]
                tokens = tokenize(text)
                if not tokens.ordered:
                    continue
                docs.append(CellDoc(table.id, row_index, col, text, tokens))
    if not docs:
        raise EmptyCorpus("corpus has no indexable join-key cells")

    n = len(docs)
    doc_lengths = np.array([len(d.tokens.ordered) for d in docs], dtype=np.float64)
    avgdl = float(doc_lengths.mean())
    knorm = BM25_K1 * (1 - BM25_B + BM25_B * doc_lengths / avgdl)

    posting_lists: dict[str, tuple[list[int], list[float]]] = {}
    for doc_id, doc in enumerate(docs):
        for term, tf in Counter(doc.tokens.ordered).items():
            ids, tfs = posting_lists.setdefault(term, ([], []))
            ids.append(doc_id)
            tfs.append(float(tf))
    postings = {term: (np.array(ids, dtype=np.int64), np.array(tfs))
                for term, (ids, tfs) in posting_lists.items()}

    seeds = _derive_seeds(seed)
    # unique tokens in first-occurrence order; the min is order-independent
    unique_tokens = [tuple(dict.fromkeys(d.tokens.ordered)) for d in docs]
    signatures = _signature_block(unique_tokens, seeds)
    buckets = _band_buckets(signatures)

    vectors = np.empty((n, provider.dimension))
    for i, doc in enumerate(docs):
        vectors[i] = embed(doc.text, provider).values

    return JoinIndex(docs=docs, corpus=corpus, provider=provider, seed=seed,
                     seeds=seeds, signatures=signatures, vectors=vectors,
                     doc_lengths=doc_lengths, avgdl=avgdl, knorm=knorm,
                     postings=postings, buckets=buckets)


def _band_buckets(signatures: np.ndarray) -> list[dict[bytes, list[int]]]:
    buckets: list[dict[bytes, list[int]]] = [{} for _ in range(LSH_BANDS)]
    for doc_id in range(signatures.shape[0]):
        sig = signatures[doc_id]
        for band in range(LSH_BANDS):
            key = sig[band * LSH_ROWS : (band + 1) * LSH_ROWS].tobytes()
            buckets[band].setdefault(key, []).append(doc_id)
    return buckets


def _top_k_hits(index: JoinIndex, doc_ids: np.ndarray, scores: np.ndarray,
                k: int, measure: str) -> list[SearchHit]:
    """Sort by score descending, then document order; truncate to k."""
    order = np.lexsort((doc_ids, -scores))
    hits = []
    for pos in order[:k]:
        d = int(doc_ids[pos])
        hits.append(SearchHit(doc=index.docs[d], score=float(scores[pos]),
                              measure=measure))
    return hits


def _require_k(k: int) -> None:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")


def search_bm25(index: JoinIndex, query: str, k: int) -> list[SearchHit]:
    """Rank by BM25 with +1-smoothed IDF; repeated query terms accumulate.

    Documents sharing no query term are excluded.
    """
    _require_k(k)
    q_tokens = tokenize(query).ordered
    if not q_tokens:
        raise EmptyQuery(f"query {query!r} has no tokens")
    n = index.doc_count
    qtf = Counter(q_tokens)
    id_chunks, tf_chunks, weight_chunks = [], [], []
    for term in dict.fromkeys(q_tokens):  # first-occurrence order
        entry = index.postings.get(term)
        if entry is None:
            continue
        doc_ids, tfs = entry
        df = len(doc_ids)
        idf = np.log(1 + (n - df + 0.5) / (df + 0.5))
        id_chunks.append(doc_ids)
        tf_chunks.append(tfs)
        weight_chunks.append(np.full(df, qtf[term] * idf))
    if not id_chunks:
        return []
    all_ids = np.concatenate(id_chunks)
    scores = np.zeros(n)
    kernels.bm25_accumulate(all_ids, np.concatenate(tf_chunks),
                            np.concatenate(weight_chunks), index.knorm,
                            BM25_K1 + 1.0, scores)
    matched = np.unique(all_ids)
    return _top_k_hits(index, matched, scores[matched], k, "bm25")


def search_jaccard(index: JoinIndex, query: str, k: int) -> list[SearchHit]:
    """LSH candidate generation, then exact Jaccard re-scoring of candidates."""
    _require_k(k)
    q = tokenize(query)
    if not q.ordered:
        raise EmptyQuery(f"query {query!r} has no tokens")
    sig = _signature_block([tuple(dict.fromkeys(q.ordered))], index.seeds)[0]
    candidates: set[int] = set()
    for band in range(LSH_BANDS):
        key = sig[band * LSH_ROWS : (band + 1) * LSH_ROWS].tobytes()
        candidates.update(index.buckets[band].get(key, ()))
    if not candidates:
        return []
    ids = np.array(sorted(candidates), dtype=np.int64)
    scores = np.empty(len(ids))
    for i, doc_id in enumerate(ids):
        ds = index.docs[doc_id].tokens.unique
        scores[i] = len(q.unique & ds) / len(q.unique | ds)
    keep = scores > 0
    return _top_k_hits(index, ids[keep], scores[keep], k, "jaccard")


def search_semantic(index: JoinIndex, query: str, k: int) -> list[SearchHit]:
    """Exact scan: rank by Euclidean distance, report cosine as the score.

    A tokenless query embeds to the zero vector; results are then distance
    ties broken by document order, with score 0 everywhere.
    """
    _require_k(k)
    qv = embed(query, index.provider)
    diffs = index.vectors - qv.values
    dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    order = np.lexsort((np.arange(index.doc_count), dists))[:k]
    if qv.norm == 0.0:
        cosines = np.zeros(index.doc_count)
    else:
        cosines = np.clip(index.vectors @ qv.values, -1.0, 1.0)
    return [SearchHit(doc=index.docs[int(i)], score=float(cosines[int(i)]),
                      measure="semantic")
            for i in order]


# ---------------------------------------------------------------- persistence

def _provider_spec(provider) -> dict:
    if isinstance(provider, WordVectorProvider):
        return {"kind": provider.kind, "dimension": provider.dimension,
                "path": provider.source_path, "fallback": provider.fallback}
    return {"kind": provider.kind, "dimension": provider.dimension}


def _provider_from_spec(spec: dict):
    if spec["kind"] == "hashed_subword":
        return HashedSubwordProvider(spec["dimension"])
    if spec["kind"] == "word_vector_file":
        if not spec.get("path"):
            raise IoError("index was built with an unsaveable word-vector provider")
        return WordVectorProvider.load(spec["path"], fallback=spec.get("fallback", True))
    raise IoError(f"unknown embedding provider kind {spec['kind']!r}")


def save_index(index: JoinIndex, path: str | Path) -> None:
    """Write one self-contained index file (corpus embedded).

    Signatures and vectors are stored; postings, buckets, and token lists
    are cheap to rebuild and are reconstructed on load.
    """
    container = {
        "format_version": _FORMAT_VERSION,
        "seed": index.seed,
        "hash_count": SIGNATURE_HASHES,
        "provider": _provider_spec(index.provider),
        "seeds": index.seeds,
        "signatures": index.signatures,
        "vectors": index.vectors,
        "doc_coords": [(d.table_id, d.row_index, d.column_index) for d in index.docs],
        "tables": [target_table_to_json(t) for t in index.corpus],
        "skipped_count": index.corpus.skipped_count,
    }
    try:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            pickle.dump(container, fh, protocol=4)
    except OSError as exc:
        raise IoError(f"cannot write index to {path}: {exc}") from exc


def load_index(path: str | Path) -> JoinIndex:
    try:
        with open(path, "rb") as fh:
            magic = fh.read(len(_MAGIC))
            if magic != _MAGIC:
                raise IoError(f"{path} is not an index file")
            container = pickle.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read index from {path}: {exc}") from exc
    if container.get("format_version") != _FORMAT_VERSION:
        raise IoError(f"unsupported index format version {container.get('format_version')}")

    corpus = Corpus.from_tables(
        [_table_from_json(obj) for obj in container["tables"]],
        skipped_count=container.get("skipped_count", 0),
    )
    provider = _provider_from_spec(container["provider"])

    docs = []
    for table_id, row_index, column_index in container["doc_coords"]:
        text = corpus.get(table_id).rows[row_index][column_index]
        docs.append(CellDoc(table_id, row_index, column_index, text, tokenize(text)))

    doc_lengths = np.array([len(d.tokens.ordered) for d in docs], dtype=np.float64)
    avgdl = float(doc_lengths.mean())
    knorm = BM25_K1 * (1 - BM25_B + BM25_B * doc_lengths / avgdl)
    posting_lists: dict[str, tuple[list[int], list[float]]] = {}
    for doc_id, doc in enumerate(docs):
        for term, tf in Counter(doc.tokens.ordered).items():
            ids, tfs = posting_lists.setdefault(term, ([], []))
            ids.append(doc_id)
            tfs.append(float(tf))
    postings = {term: (np.array(ids, dtype=np.int64), np.array(tfs))
                for term, (ids, tfs) in posting_lists.items()}
    signatures = container["signatures"]

    return JoinIndex(docs=docs, corpus=corpus, provider=provider,
                     seed=container["seed"], seeds=container["seeds"],
                     signatures=signatures, vectors=container["vectors"],
                     doc_lengths=doc_lengths, avgdl=avgdl, knorm=knorm,
                     postings=postings, buckets=_band_buckets(signatures))
