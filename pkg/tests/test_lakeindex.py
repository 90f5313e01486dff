"""Search index tests.

Every ranking claim is checked against a brute-force oracle implemented
here from the scoring definitions, independent of the index internals.
"""

import math
from collections import Counter

import numpy as np
import pytest

from tablelift import lakeindex, textenc
from tablelift.errors import EmptyCorpus, EmptyQuery, IoError
from tablelift.tablecore import Corpus, TargetTable

K1 = 1.2
B = 0.75


# ---------------------------------------------------------------- oracles

def bm25_oracle(query: str, doc_texts: list[str]) -> list[float]:
    """Direct evaluation: IDF(t) = ln(1 + (N - n + 0.5)/(n + 0.5)), summed
    over the query token list (repeats included)."""
    docs = [textenc.tokenize(t).ordered for t in doc_texts]
    n_docs = len(docs)
    lengths = [len(d) for d in docs]
    avgdl = sum(lengths) / n_docs
    df = Counter()
    for d in docs:
        for term in set(d):
            df[term] += 1
    scores = []
    q_tokens = textenc.tokenize(query).ordered
    for d, dl in zip(docs, lengths):
        tf = Counter(d)
        s = 0.0
        for t in q_tokens:
            if tf[t] == 0:
                continue
            idf = math.log(1 + (n_docs - df[t] + 0.5) / (df[t] + 0.5))
            s += idf * (tf[t] * (K1 + 1)) / (tf[t] + K1 * (1 - B + B * dl / avgdl))
        scores.append(s)
    return scores


def jaccard_topk_oracle(query: str, doc_texts: list[str], k: int) -> list[int]:
    qs = textenc.tokenize(query).unique
    scored = []
    for i, t in enumerate(doc_texts):
        ds = textenc.tokenize(t).unique
        union = qs | ds
        score = len(qs & ds) / len(union) if union else 0.0
        if score > 0:
            scored.append((-score, i))
    scored.sort()
    return [i for _, i in scored[:k]]


def euclid_order_oracle(query: str, doc_texts: list[str], provider) -> list[int]:
    """Re-embeds every text and sorts by distance, ties by position.

    Distinct docs can tie in exact arithmetic (hash embeddings are discrete),
    and different float evaluation orders round such ties 1 ulp apart, which
    would flip the order arbitrarily.  The oracle therefore evaluates the
    distance with the same expression shape the scan uses; everything else
    (embeddings, sort, tie-break) is computed independently.
    """
    qv = textenc.embed(query, provider).values
    diffs = np.stack([textenc.embed(t, provider).values for t in doc_texts]) - qv
    dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    return sorted(range(len(doc_texts)), key=lambda i: (dists[i], i))


# ---------------------------------------------------------------- fixtures

def corpus_of_texts(texts: list[str]) -> Corpus:
    """One single-column one-row table per text; table ids follow list order."""
    tables = []
    for i, text in enumerate(texts):
        tables.append(TargetTable(
            id=f"t{i:04d}", title="", context="",
            column_names=("key",), rows=((text,),),
        ))
    return Corpus.from_tables(tables)


def multirow_corpus() -> Corpus:
    t1 = TargetTable(id="alpha", title="Console games", context="sales data",
                     column_names=("name", "sales"),
                     rows=(("mario bros", "40"), ("zelda", "30"), ("metroid", "20")))
    t2 = TargetTable(id="beta", title="Handheld games", context="more sales",
                     column_names=("name", "sales"),
                     rows=(("tetris", "35"), ("pokemon red", "31"), ("kirby", "12")))
    return Corpus.from_tables([t1, t2])


# ---------------------------------------------------------------- build

def test_build_counts_cells():
    index = lakeindex.build_index(multirow_corpus(), seed=1)
    assert index.doc_count == 6


def test_build_avgdl():
    corpus = corpus_of_texts(["mario bros", "zelda"])
    index = lakeindex.build_index(corpus, seed=1)
    assert index.avgdl == pytest.approx(1.5)


def test_build_skips_tokenless_cells():
    corpus = corpus_of_texts(["mario", "  --  ", "zelda"])
    index = lakeindex.build_index(corpus, seed=1)
    assert index.doc_count == 2


def test_build_deterministic():
    corpus = multirow_corpus()
    a = lakeindex.build_index(corpus, seed=9)
    b = lakeindex.build_index(corpus, seed=9)
    assert np.array_equal(a.signatures, b.signatures)
    assert a.bucket_snapshot() == b.bucket_snapshot()


def test_build_rejects_empty():
    corpus = corpus_of_texts(["   ", "!!"])
    with pytest.raises(EmptyCorpus):
        lakeindex.build_index(corpus, seed=1)


def test_build_custom_column_predicate():
    corpus = multirow_corpus()
    index = lakeindex.build_index(corpus, key_columns=lambda t: range(len(t.column_names)),
                                  seed=1)
    assert index.doc_count == 12


def test_doc_order_is_table_row_column():
    index = lakeindex.build_index(multirow_corpus(), seed=1)
    coords = [(d.table_id, d.row_index, d.column_index) for d in index.docs]
    assert coords == sorted(coords)


# ---------------------------------------------------------------- bm25

def test_bm25_hand_value():
    corpus = corpus_of_texts(["mario bros", "zelda"])
    index = lakeindex.build_index(corpus, seed=1)
    hits = lakeindex.search_bm25(index, "mario", k=5)
    assert len(hits) == 1
    assert hits[0].doc.text == "mario bros"
    expected = math.log(2) * 2.2 / 2.5  # = 0.60997..., one matching term
    assert hits[0].score == pytest.approx(expected, abs=1e-9)
    assert hits[0].score == pytest.approx(0.6100, abs=1e-4)


def test_bm25_matches_oracle_fuzz():
    rng = np.random.default_rng(42)
    vocab = [f"w{i}" for i in range(60)]
    texts = [" ".join(rng.choice(vocab, size=rng.integers(1, 10)))
             for _ in range(100)]
    corpus = corpus_of_texts(texts)
    index = lakeindex.build_index(corpus, seed=3)
    for _ in range(40):
        query = " ".join(rng.choice(vocab, size=rng.integers(1, 4)))
        oracle = bm25_oracle(query, texts)
        hits = lakeindex.search_bm25(index, query, k=100)
        got = {h.doc.table_id: h.score for h in hits}
        for i, s in enumerate(oracle):
            tid = f"t{i:04d}"
            if s > 0:
                assert got[tid] == pytest.approx(s, abs=1e-9)
            else:
                assert tid not in got


def test_bm25_no_match_is_empty():
    index = lakeindex.build_index(corpus_of_texts(["mario bros", "zelda"]), seed=1)
    assert lakeindex.search_bm25(index, "xylophone", k=5) == []


def test_bm25_k_larger_than_matches():
    index = lakeindex.build_index(corpus_of_texts(["mario bros", "mario kart", "zelda"]),
                                  seed=1)
    hits = lakeindex.search_bm25(index, "mario", k=50)
    assert len(hits) == 2


def test_bm25_empty_query():
    index = lakeindex.build_index(corpus_of_texts(["mario"]), seed=1)
    with pytest.raises(EmptyQuery):
        lakeindex.search_bm25(index, " !! ", k=5)


def test_bm25_repeat_query_terms_accumulate():
    texts = ["mario mario party", "mario kart", "zelda"]
    index = lakeindex.build_index(corpus_of_texts(texts), seed=1)
    single = lakeindex.search_bm25(index, "mario", k=5)
    double = lakeindex.search_bm25(index, "mario mario", k=5)
    for s, d in zip(single, double):
        assert d.doc.table_id == s.doc.table_id
        assert d.score == pytest.approx(2 * s.score, abs=1e-9)


def test_bm25_extra_occurrence_never_hurts():
    rng = np.random.default_rng(11)
    vocab = [f"w{i}" for i in range(20)]
    for trial in range(30):
        base = list(rng.choice(vocab, size=rng.integers(2, 8)))
        others = [" ".join(rng.choice(vocab, size=rng.integers(1, 8)))
                  for _ in range(6)]
        term = base[0]
        before_texts = [" ".join(base)] + others
        after_texts = [" ".join(base + [term])] + others
        s_before = bm25_oracle(term, before_texts)[0]
        s_after = bm25_oracle(term, after_texts)[0]
        assert s_after >= s_before - 1e-12
        # and the index agrees with the oracle for that specific doc
        for texts, expect in ((before_texts, s_before), (after_texts, s_after)):
            idx = lakeindex.build_index(corpus_of_texts(texts), seed=trial)
            hits = lakeindex.search_bm25(idx, term, k=10)
            by_table = {h.doc.table_id: h.score for h in hits}
            assert by_table["t0000"] == pytest.approx(expect, abs=1e-9)


def test_bm25_tie_break_by_doc_coordinates():
    # equal-length docs with the same tf tie exactly; lower table id wins
    texts = ["mario kart", "mario party", "zelda link"]
    index = lakeindex.build_index(corpus_of_texts(texts), seed=1)
    hits = lakeindex.search_bm25(index, "mario", k=5)
    assert [h.doc.table_id for h in hits] == ["t0000", "t0001"]


# ---------------------------------------------------------------- jaccard/LSH

def test_jaccard_identity_hit():
    texts = ["mario bros", "zelda breath wild", "metroid prime"]
    index = lakeindex.build_index(corpus_of_texts(texts), seed=5)
    hits = lakeindex.search_jaccard(index, "mario bros", k=3)
    assert hits and hits[0].doc.text == "mario bros"
    assert hits[0].score == 1.0


def test_jaccard_no_overlap_empty():
    index = lakeindex.build_index(corpus_of_texts(["mario bros", "zelda"]), seed=5)
    assert lakeindex.search_jaccard(index, "chrono trigger", k=5) == []


def test_jaccard_empty_query():
    index = lakeindex.build_index(corpus_of_texts(["mario"]), seed=1)
    with pytest.raises(EmptyQuery):
        lakeindex.search_jaccard(index, "...", k=2)


def _planted_texts(rng, n_background, n_pairs):
    """Docs draw from pairwise-disjoint token slices, so the only nonzero
    overlaps in the whole corpus are the planted query/partner pairs and the
    brute-force top-k for a planted query is exactly its partner."""
    counter = iter(range(10**6))

    def take(count):
        return [f"tok{next(counter)}" for _ in range(count)]

    texts, queries = [], []
    for _ in range(n_background):
        texts.append(" ".join(take(int(rng.integers(6, 14)))))
    for _ in range(n_pairs):
        base = take(16)
        drop = int(rng.integers(1, 3))  # keep 14 or 15 of 16: overlap 0.875..0.9375
        texts.append(" ".join(base[: 16 - drop]))
        queries.append(" ".join(base))
    return texts, queries


def test_jaccard_lsh_recall_vs_bruteforce():
    rng = np.random.default_rng(17)
    texts, queries = _planted_texts(rng, n_background=200, n_pairs=10)
    index = lakeindex.build_index(corpus_of_texts(texts), seed=17)
    found = 0
    total = 0
    for q in queries:
        want = jaccard_topk_oracle(q, texts, k=10)
        got = [int(h.doc.table_id[1:]) for h in lakeindex.search_jaccard(index, q, k=10)]
        total += len(want)
        found += len(set(want) & set(got))
    assert total > 0
    assert found / total >= 0.9


def test_jaccard_scores_are_exact():
    # LSH trims candidates only; reported scores must equal direct evaluation
    rng = np.random.default_rng(23)
    texts, queries = _planted_texts(rng, n_background=60, n_pairs=4)
    index = lakeindex.build_index(corpus_of_texts(texts), seed=23)
    for q in queries:
        qs = textenc.tokenize(q).unique
        for h in lakeindex.search_jaccard(index, q, k=10):
            ds = textenc.tokenize(h.doc.text).unique
            assert h.score == len(qs & ds) / len(qs | ds)


def test_minhash_estimates_jaccard():
    rng = np.random.default_rng(31)
    vocab = [f"v{i}" for i in range(500)]
    within = 0
    trials = 200
    for _ in range(trials):
        a = set(rng.choice(vocab, size=rng.integers(5, 30), replace=False))
        keep = rng.random()
        b = {t for t in a if rng.random() < keep}
        b |= set(rng.choice(vocab, size=rng.integers(0, 10), replace=False))
        if not a or not b:
            continue
        sig_a = lakeindex.signature_of_tokens(frozenset(a), seed=31)
        sig_b = lakeindex.signature_of_tokens(frozenset(b), seed=31)
        est = float(np.mean(sig_a == sig_b))
        true = len(a & b) / len(a | b)
        if abs(est - true) <= 0.1:
            within += 1
    assert within / trials >= 0.95


# ---------------------------------------------------------------- semantic

def test_semantic_identity_first():
    texts = ["mario bros", "zelda", "donkey kong country"]
    index = lakeindex.build_index(corpus_of_texts(texts), seed=2)
    hits = lakeindex.search_semantic(index, "zelda", k=3)
    assert hits[0].doc.text == "zelda"
    assert hits[0].score == pytest.approx(1.0, abs=1e-9)


def test_semantic_matches_bruteforce_order():
    rng = np.random.default_rng(7)
    counter = iter(range(10**6))
    texts = [" ".join(f"word{next(counter)}" for _ in range(int(rng.integers(3, 9))))
             for _ in range(120)]
    texts[40] = texts[7]  # exact duplicate: must tie-break by document order
    corpus = corpus_of_texts(texts)
    index = lakeindex.build_index(corpus, seed=7)
    provider = index.provider
    for q in [texts[3], "word5 word6", "unrelated thing entirely"]:
        want = euclid_order_oracle(q, texts, provider)
        got = [int(h.doc.table_id[1:]) for h in lakeindex.search_semantic(index, q, k=len(texts))]
        assert got == want


def test_semantic_k_equals_n_returns_all():
    texts = ["a b", "c d", "e f"]
    index = lakeindex.build_index(corpus_of_texts(texts), seed=2)
    assert len(lakeindex.search_semantic(index, "a", k=3)) == 3


def test_search_results_sorted_and_bounded():
    texts = ["mario bros", "mario kart", "mario party", "zelda", "mario"]
    index = lakeindex.build_index(corpus_of_texts(texts), seed=4)
    for fn, descending in ((lakeindex.search_bm25, True),
                           (lakeindex.search_jaccard, True)):
        hits = fn(index, "mario bros", k=3)
        assert len(hits) <= 3
        scores = [h.score for h in hits]
        assert scores == sorted(scores, reverse=descending)


# ---------------------------------------------------------------- persistence

def test_index_round_trip(tmp_path):
    corpus = multirow_corpus()
    index = lakeindex.build_index(corpus, seed=13)
    path = tmp_path / "lake.idx"
    lakeindex.save_index(index, path)
    loaded = lakeindex.load_index(path)

    assert loaded.doc_count == index.doc_count
    assert np.array_equal(loaded.signatures, index.signatures)
    assert [t.id for t in loaded.corpus] == [t.id for t in corpus]
    for query in ("mario bros", "pokemon", "kirby"):
        for fn in (lakeindex.search_bm25, lakeindex.search_jaccard,
                   lakeindex.search_semantic):
            a = fn(index, query, k=4)
            b = fn(loaded, query, k=4)
            assert [(x.doc.table_id, x.doc.row_index, x.score) for x in a] == \
                   [(x.doc.table_id, x.doc.row_index, x.score) for x in b]


def test_load_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad.idx"
    path.write_bytes(b"NOTANINDEX" + b"x" * 40)
    with pytest.raises(IoError):
        lakeindex.load_index(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(IoError):
        lakeindex.load_index(tmp_path / "absent.idx")
