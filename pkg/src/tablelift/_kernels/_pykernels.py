"""NumPy implementations of the hot kernels.

Each function mirrors the compiled module's arithmetic operation-for-operation
(same accumulation order, same casts), so minhash signatures and tree split
decisions are bit-identical across backends.  Lasso and BM25 use BLAS dots
here, which may differ from the compiled loop in the last few ulps.
"""

import numpy as np

_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)

U64_MAX = 0xFFFFFFFFFFFFFFFF


def _mix64(z):
    # splitmix64 finalizer over a uint64 ndarray; multiplication wraps mod 2^64
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


def minhash_block(hashes, offsets, seeds):
    """Signatures for a block of token-hash documents.

    hashes: uint64[total] concatenated token hashes
    offsets: int64[n+1] document boundaries into `hashes`
    seeds: uint64[H] per-hash-function seeds
    Returns uint64[n, H]; documents with no tokens get all-max sentinels.
    """
    n = len(offsets) - 1
    out = np.full((n, len(seeds)), U64_MAX, dtype=np.uint64)
    for i in range(n):
        lo, hi = offsets[i], offsets[i + 1]
        if hi > lo:
            mixed = _mix64(hashes[lo:hi, None] ^ seeds[None, :])
            out[i] = mixed.min(axis=0)
    return out


def bm25_accumulate(doc_ids, tfs, weights, knorm, k1_plus_1, scores):
    """scores[d] += w * ((tf * (k1+1)) / (tf + knorm[d])) for each posting entry."""
    kn = knorm[doc_ids]
    contrib = weights * ((tfs * k1_plus_1) / (tfs + kn))
    np.add.at(scores, doc_ids, contrib)


def lasso_sweeps(xt, y, lam, tol, max_sweeps, w):
    """Cyclic coordinate descent for (1/2n)||y - X w||^2 + lam * ||w||_1.

    xt is X transposed, shape (p, n), C-contiguous; w is updated in place.
    Returns the number of sweeps executed.
    """
    p, n = xt.shape
    col_sq = np.einsum("ij,ij->i", xt, xt) / n
    r = y - xt.T @ w if np.any(w) else y.copy()
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        max_delta = 0.0
        for j in range(p):
            zj = col_sq[j]
            if zj == 0.0:
                continue
            wj = w[j]
            rho = (xt[j] @ r) / n + zj * wj
            if rho > lam:
                wn = (rho - lam) / zj
            elif rho < -lam:
                wn = (rho + lam) / zj
            else:
                wn = 0.0
            if wn != wj:
                r -= (wn - wj) * xt[j]
                w[j] = wn
                delta = abs(wn - wj)
                if delta > max_delta:
                    max_delta = delta
        if max_delta < tol:
            break
    return sweeps


def best_split_classification(vals, classes, n_classes, min_leaf):
    """Best Gini split over a feature pre-sorted ascending.

    vals: float64[n] sorted; classes: int32[n] in the same order.
    Returns (pos, cost, parent_impurity); pos == -1 when no valid split exists.
    A split at pos puts the first pos samples left.
    """
    n = vals.shape[0]
    nf = float(n)
    total = np.bincount(classes, minlength=n_classes).astype(np.float64)
    sp = 0.0
    for c in range(n_classes):
        sp += total[c] * total[c]
    parent = 1.0 - sp / (nf * nf)
    if n < 2 * min_leaf:
        return -1, np.inf, parent

    i_arr = np.arange(1, n, dtype=np.float64)
    left_sq = np.zeros(n - 1)
    right_sq = np.zeros(n - 1)
    for c in range(n_classes):
        cl = np.cumsum(classes == c)[:-1].astype(np.float64)
        left_sq += cl * cl
        cr = total[c] - cl
        right_sq += cr * cr
    gl = 1.0 - left_sq / (i_arr * i_arr)
    gr = 1.0 - right_sq / ((nf - i_arr) * (nf - i_arr))
    cost = (i_arr * gl + (nf - i_arr) * gr) / nf

    cost[vals[:-1] == vals[1:]] = np.inf
    if min_leaf > 1:
        cost[: min_leaf - 1] = np.inf
        cost[n - min_leaf :] = np.inf
    pos = int(np.argmin(cost))
    best = cost[pos]
    if not np.isfinite(best):
        return -1, np.inf, parent
    return pos + 1, float(best), parent


def best_split_regression(vals, targets, min_leaf):
    """Best variance split over a feature pre-sorted ascending.

    Same contract as best_split_classification, with variance impurity.
    """
    n = vals.shape[0]
    nf = float(n)
    ps = np.cumsum(targets)
    pq = np.cumsum(targets * targets)
    s_tot = ps[-1]
    q_tot = pq[-1]
    mean = s_tot / nf
    parent = q_tot / nf - mean * mean
    if parent < 0.0:
        parent = 0.0
    if n < 2 * min_leaf:
        return -1, np.inf, parent

    i_arr = np.arange(1, n, dtype=np.float64)
    sl = ps[:-1]
    ql = pq[:-1]
    ml = sl / i_arr
    vl = ql / i_arr - ml * ml
    nr = nf - i_arr
    mr = (s_tot - sl) / nr
    vr = (q_tot - ql) / nr - mr * mr
    np.maximum(vl, 0.0, out=vl)
    np.maximum(vr, 0.0, out=vr)
    cost = (i_arr * vl + nr * vr) / nf

    cost[vals[:-1] == vals[1:]] = np.inf
    if min_leaf > 1:
        cost[: min_leaf - 1] = np.inf
        cost[n - min_leaf :] = np.inf
    pos = int(np.argmin(cost))
    best = cost[pos]
    if not np.isfinite(best):
        return -1, np.inf, parent
    return pos + 1, float(best), parent
