#!/usr/bin/env python3
"""Times each hot kernel on the compiled and NumPy backends side by side.

The compiled module wins the import race when it is present; the NumPy
fallback covers installs without a C compiler.  Run this after touching
either implementation to confirm the compiled path still carries its weight
and that the two backends agree on the same inputs:

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import statistics
from time import perf_counter

import numpy as np

from tablelift._kernels import _pykernels

try:
    from tablelift._kernels import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, repeats):
    samples = []
    for _ in range(repeats):
        t0 = perf_counter()
        fn()
        samples.append(perf_counter() - t0)
    return statistics.median(samples)


# Each case builds one input set shared by both backends and returns a
# runner per backend; mutable arguments are copied per call so every run
# does identical work.

def case_minhash():
    rng = np.random.default_rng(1)
    lengths = rng.integers(2, 12, size=4000)
    offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    hashes = rng.integers(0, 2**63, size=int(offsets[-1]), dtype=np.uint64)
    seeds = rng.integers(0, 2**63, size=128, dtype=np.uint64)

    def runner(impl):
        return lambda: impl.minhash_block(hashes, offsets, seeds)

    def check(a, b):
        assert np.array_equal(a, b)  # integer kernel: bit-identical

    return "minhash_block (4000 docs x 128 hashes)", runner, check


def case_bm25():
    # one concatenated posting list with per-entry weights, the shape the
    # searcher hands over after merging all query terms
    rng = np.random.default_rng(2)
    n_docs = 50_000
    n_postings = 200_000
    knorm = rng.uniform(0.5, 2.0, size=n_docs)
    doc_ids = rng.integers(0, n_docs, size=n_postings).astype(np.int64)
    tfs = rng.integers(1, 6, size=n_postings).astype(np.float64)
    weights = rng.uniform(0.5, 4.0, size=n_postings)

    def runner(impl):
        def go():
            scores = np.zeros(n_docs)
            impl.bm25_accumulate(doc_ids, tfs, weights, knorm, 2.2, scores)
            return scores
        return go

    def check(a, b):
        assert np.allclose(a, b, rtol=1e-12)

    return "bm25_accumulate (200k postings, 50k docs)", runner, check


def case_lasso():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(2000, 60))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    xt = np.ascontiguousarray(X.T)
    y = X @ rng.normal(size=60) + rng.normal(size=2000)
    y = y - y.mean()

    def runner(impl):
        def go():
            w = np.zeros(60)
            # tol 0 pins the sweep count, so both backends do equal work
            impl.lasso_sweeps(xt, y.copy(), 0.01, 0.0, 25, w)
            return w
        return go

    def check(a, b):
        assert np.allclose(a, b, atol=1e-10)

    return "lasso_sweeps (2000 x 60, 25 sweeps)", runner, check


def case_split_regression():
    rng = np.random.default_rng(4)
    vals = np.sort(rng.normal(size=50_000))
    targets = np.sin(vals * 3.0) + rng.normal(scale=0.1, size=50_000)

    def runner(impl):
        return lambda: impl.best_split_regression(vals, targets, 2)

    def check(a, b):
        assert a[0] == b[0]
        assert np.isclose(a[1], b[1]) and np.isclose(a[2], b[2])

    return "best_split_regression (n=50000)", runner, check


def case_split_classification():
    rng = np.random.default_rng(5)
    vals = np.sort(rng.normal(size=50_000))
    classes = (np.digitize(vals, [-0.5, 0.5])
               + rng.integers(0, 2, size=50_000)).astype(np.int32) % 3

    def runner(impl):
        return lambda: impl.best_split_classification(vals, classes, 3, 2)

    def check(a, b):
        assert a[0] == b[0]
        assert np.isclose(a[1], b[1]) and np.isclose(a[2], b[2])

    return "best_split_classification (n=50000, 3 classes)", runner, check


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timed runs per kernel; the median is reported")
    args = parser.parse_args()

    cases = [case_minhash(), case_bm25(), case_lasso(),
             case_split_regression(), case_split_classification()]

    rows = []
    for label, runner, check in cases:
        py = runner(_pykernels)
        py_out = py()
        py_ms = _time(py, args.repeats) * 1e3
        if _ckernels is None:
            rows.append((label, py_ms, None, None))
            continue
        ck = runner(_ckernels)
        check(py_out, ck())
        ck_ms = _time(ck, args.repeats) * 1e3
        rows.append((label, py_ms, ck_ms, py_ms / ck_ms))

    header = ("kernel", "numpy ms", "compiled ms", "speedup")
    cells = [header]
    for label, py_ms, ck_ms, ratio in rows:
        cells.append((label, f"{py_ms:.2f}",
                      "-" if ck_ms is None else f"{ck_ms:.2f}",
                      "-" if ratio is None else f"{ratio:.1f}x"))
    widths = [max(len(r[c]) for r in cells) for c in range(4)]
    for r in cells:
        print("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    if _ckernels is None:
        print("\ncompiled backend not built; numpy timings only")


if __name__ == "__main__":
    main()
