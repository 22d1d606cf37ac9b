"""Numpy implementations of the numeric kernels.

These mirror the compiled extension in ``_native.pyx``. Both backends must
agree: same neighbor sets (ties on squared distance broken by lower index),
same tree structures (first best gain wins, features scanned in order), same
accumulation order for prefix sums.
"""

import numpy as np

# Full stable sort below this many reference rows; above it, an argpartition
# band of this width handles boundary ties (continuous data in practice).
_SMALL_N = 4096
_TIE_BAND = 64


def knn_search(query, ref, k, exclude_self=False):
    """k nearest rows of `ref` for each row of `query` (Euclidean).

    Returns (dist, idx), each of shape (len(query), k), ordered by ascending
    (squared distance, index). With exclude_self=True, query must be ref and
    row i skips reference row i.
    """
    query = np.ascontiguousarray(query, dtype=np.float64)
    ref = np.ascontiguousarray(ref, dtype=np.float64)
    nq, nr = query.shape[0], ref.shape[0]
    out_d = np.empty((nq, k), dtype=np.float64)
    out_i = np.empty((nq, k), dtype=np.int64)
    chunk = max(1, int(2**24 // max(1, nr)))
    for start in range(0, nq, chunk):
        stop = min(nq, start + chunk)
        diff = query[start:stop, None, :] - ref[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        if exclude_self:
            d2[np.arange(start, stop) - start, np.arange(start, stop)] = np.inf
        if nr <= _SMALL_N:
            order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        else:
            band = min(nr, k + _TIE_BAND)
            part = np.argpartition(d2, band - 1, axis=1)[:, :band]
            band_d2 = np.take_along_axis(d2, part, axis=1)
            sub = np.argsort(band_d2, axis=1, kind="stable")
            # stable sort on values alone is not an index tiebreak here, since
            # argpartition scrambles candidate order; sort (d2, index) pairs
            rows = np.arange(stop - start)[:, None]
            cand = part[rows, sub]
            cand_d2 = band_d2[rows, sub]
            fix = np.lexsort((cand, cand_d2), axis=1)
            order = cand[rows, fix][:, :k]
        out_i[start:stop] = order
        out_d[start:stop] = np.sqrt(
            np.take_along_axis(d2, order, axis=1)
        )
    return out_d, out_i


def _scan_feature(values, g, h, lam, min_leaf, sum_g, sum_h, parent_score):
    """Best split of one sorted feature column. Returns (gain, threshold)."""
    n = values.shape[0]
    gl = np.cumsum(g)[:-1]
    hl = np.cumsum(h)[:-1]
    gr = sum_g - gl
    hr = sum_h - hl
    gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent_score)
    left_count = np.arange(1, n)
    valid = (values[:-1] < values[1:]) & (left_count >= min_leaf) & (
        n - left_count >= min_leaf
    )
    if not valid.any():
        return -np.inf, 0.0
    gain = np.where(valid, gain, -np.inf)
    pos = int(np.argmax(gain))
    return float(gain[pos]), float(0.5 * (values[pos] + values[pos + 1]))


def tree_build(X, g, h, max_depth, min_leaf, lam):
    """Fit one regression tree on gradients/hessians (Newton leaf values).

    Returns flat arrays (feature, threshold, left, right, value); feature -1
    marks a leaf. Splits maximize the usual second-order gain; the first
    strictly best (feature, position) in scan order wins.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def grow(rows, depth):
        node = new_node()
        sum_g = float(np.cumsum(g[rows])[-1]) if rows.size else 0.0
        sum_h = float(np.cumsum(h[rows])[-1]) if rows.size else 0.0
        best_gain, best_feat, best_thr = 1e-12, -1, 0.0
        if depth < max_depth and rows.size >= 2 * min_leaf:
            parent_score = sum_g * sum_g / (sum_h + lam)
            for f in range(X.shape[1]):
                col = X[rows, f]
                order = np.argsort(col, kind="stable")
                gain, thr = _scan_feature(
                    col[order], g[rows][order], h[rows][order],
                    lam, min_leaf, sum_g, sum_h, parent_score,
                )
                if gain > best_gain:
                    best_gain, best_feat, best_thr = gain, f, thr
        if best_feat < 0:
            value[node] = -sum_g / (sum_h + lam) + 0.0
            return node
        mask = X[rows, best_feat] < best_thr
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = grow(rows[mask], depth + 1)
        right[node] = grow(rows[~mask], depth + 1)
        return node

    grow(np.arange(X.shape[0], dtype=np.intp), 0)
    return (
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(value, dtype=np.float64),
    )


def tree_predict_raw(feature, threshold, left, right, value, X):
    """Leaf value reached by each row of X for one flat tree."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        cur = node[rows]
        f = feature[cur]
        go_left = X[rows, f] < threshold[cur]
        node[rows] = np.where(go_left, left[cur], right[cur])
        active[rows] = feature[node[rows]] >= 0
    return value[node].astype(np.float64, copy=True)


def iforest_depths(feature, threshold, left, right, adjust, X):
    """Adjusted path length of each row of X in one flat isolation tree.

    `adjust` holds the average-subtree correction at leaves (0 elsewhere);
    the result is edges traversed plus the leaf adjustment.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    depth = np.zeros(n, dtype=np.float64)
    active = feature[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        cur = node[rows]
        f = feature[cur]
        go_left = X[rows, f] < threshold[cur]
        node[rows] = np.where(go_left, left[cur], right[cur])
        depth[rows] += 1.0
        active[rows] = feature[node[rows]] >= 0
    return depth + adjust[node]
