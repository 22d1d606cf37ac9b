# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the numeric kernels (see _pure.py for the
reference semantics; the two backends must produce matching results)."""

from libc.math cimport sqrt, INFINITY
from libc.stdlib cimport malloc, free, qsort

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef struct Pair:
    double value
    long index


cdef int _pair_cmp(const void* a, const void* b) noexcept nogil:
    cdef Pair* pa = <Pair*> a
    cdef Pair* pb = <Pair*> b
    if pa.value < pb.value:
        return -1
    if pa.value > pb.value:
        return 1
    if pa.index < pb.index:
        return -1
    if pa.index > pb.index:
        return 1
    return 0


def knn_search(query, ref, long k, bint exclude_self=False):
    cdef double[:, ::1] Q = np.ascontiguousarray(query, dtype=np.float64)
    cdef double[:, ::1] R = np.ascontiguousarray(ref, dtype=np.float64)
    cdef long nq = Q.shape[0], nr = R.shape[0], d = Q.shape[1]
    cdef cnp.ndarray out_d = np.empty((nq, k), dtype=np.float64)
    cdef cnp.ndarray out_i = np.empty((nq, k), dtype=np.int64)
    cdef double[:, ::1] od = out_d
    cdef long[:, ::1] oi = out_i
    cdef double* best_d = <double*> malloc(k * sizeof(double))
    cdef long* best_i = <long*> malloc(k * sizeof(long))
    cdef long i, j, m, pos, count
    cdef double d2, diff
    if best_d == NULL or best_i == NULL:
        free(best_d); free(best_i)
        raise MemoryError
    try:
        for i in range(nq):
            count = 0
            for j in range(nr):
                if exclude_self and j == i:
                    continue
                d2 = 0.0
                for m in range(d):
                    diff = Q[i, m] - R[j, m]
                    d2 += diff * diff
                if count == k:
                    if d2 > best_d[k - 1] or (d2 == best_d[k - 1] and j > best_i[k - 1]):
                        continue
                pos = count if count < k else k - 1
                while pos > 0 and (best_d[pos - 1] > d2 or
                                   (best_d[pos - 1] == d2 and best_i[pos - 1] > j)):
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                    pos -= 1
                best_d[pos] = d2
                best_i[pos] = j
                if count < k:
                    count += 1
            for m in range(k):
                od[i, m] = sqrt(best_d[m])
                oi[i, m] = best_i[m]
    finally:
        free(best_d)
        free(best_i)
    return out_d, out_i


cdef struct TreeBuf:
    int* feature
    double* threshold
    int* left
    int* right
    double* value
    long count


cdef long _new_node(TreeBuf* t) noexcept nogil:
    cdef long n = t.count
    t.feature[n] = -1
    t.threshold[n] = 0.0
    t.left[n] = -1
    t.right[n] = -1
    t.value[n] = 0.0
    t.count += 1
    return n


cdef long _grow(double[:, ::1] X, double[::1] g, double[::1] h,
                long* rows, long start, long end, int depth,
                int max_depth, long min_leaf, double lam,
                TreeBuf* tree, Pair* scratch, long* buf) noexcept nogil:
    cdef long node = _new_node(tree)
    cdef long n = end - start
    cdef long i, f, pos, r, nl, nr_
    cdef double sum_g = 0.0, sum_h = 0.0
    cdef double gl, hl, gr, hr, gain, parent_score
    cdef double best_gain = 1e-12, best_thr = 0.0
    cdef int best_feat = -1
    cdef long d = X.shape[1]

    for i in range(start, end):
        sum_g += g[rows[i]]
    for i in range(start, end):
        sum_h += h[rows[i]]

    if depth < max_depth and n >= 2 * min_leaf:
        parent_score = sum_g * sum_g / (sum_h + lam)
        for f in range(d):
            for i in range(n):
                scratch[i].value = X[rows[start + i], f]
                scratch[i].index = i
            qsort(scratch, n, sizeof(Pair), _pair_cmp)
            gl = 0.0
            hl = 0.0
            for pos in range(n - 1):
                r = rows[start + scratch[pos].index]
                gl += g[r]
                hl += h[r]
                if scratch[pos].value >= scratch[pos + 1].value:
                    continue
                if pos + 1 < min_leaf or n - pos - 1 < min_leaf:
                    continue
                gr = sum_g - gl
                hr = sum_h - hl
                gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                              - parent_score)
                if gain > best_gain:
                    best_gain = gain
                    best_feat = <int> f
                    best_thr = 0.5 * (scratch[pos].value + scratch[pos + 1].value)

    if best_feat < 0:
        tree.value[node] = -sum_g / (sum_h + lam) + 0.0
        return node

    # stable partition keeps row order ascending in both children
    nl = 0
    nr_ = 0
    for i in range(start, end):
        if X[rows[i], best_feat] < best_thr:
            buf[nl] = rows[i]
            nl += 1
        else:
            buf[n + nr_] = rows[i]
            nr_ += 1
    for i in range(nl):
        rows[start + i] = buf[i]
    for i in range(nr_):
        rows[start + nl + i] = buf[n + i]

    tree.feature[node] = best_feat
    tree.threshold[node] = best_thr
    tree.left[node] = <int> _grow(X, g, h, rows, start, start + nl, depth + 1,
                                  max_depth, min_leaf, lam, tree, scratch, buf)
    tree.right[node] = <int> _grow(X, g, h, rows, start + nl, end, depth + 1,
                                   max_depth, min_leaf, lam, tree, scratch, buf)
    return node


def tree_build(X, g, h, int max_depth, long min_leaf, double lam):
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef long n = Xv.shape[0]
    cdef long max_nodes = (2 << max_depth) - 1
    cdef cnp.ndarray feature = np.empty(max_nodes, dtype=np.int32)
    cdef cnp.ndarray threshold = np.empty(max_nodes, dtype=np.float64)
    cdef cnp.ndarray left = np.empty(max_nodes, dtype=np.int32)
    cdef cnp.ndarray right = np.empty(max_nodes, dtype=np.int32)
    cdef cnp.ndarray value = np.empty(max_nodes, dtype=np.float64)
    cdef TreeBuf tree
    tree.feature = <int*> cnp.PyArray_DATA(feature)
    tree.threshold = <double*> cnp.PyArray_DATA(threshold)
    tree.left = <int*> cnp.PyArray_DATA(left)
    tree.right = <int*> cnp.PyArray_DATA(right)
    tree.value = <double*> cnp.PyArray_DATA(value)
    tree.count = 0
    cdef long* rows = <long*> malloc(n * sizeof(long))
    cdef Pair* scratch = <Pair*> malloc(n * sizeof(Pair))
    cdef long* buf = <long*> malloc(2 * n * sizeof(long))
    cdef long i
    if rows == NULL or scratch == NULL or buf == NULL:
        free(rows); free(scratch); free(buf)
        raise MemoryError
    try:
        for i in range(n):
            rows[i] = i
        _grow(Xv, gv, hv, rows, 0, n, 0, max_depth, min_leaf, lam,
              &tree, scratch, buf)
    finally:
        free(rows)
        free(scratch)
        free(buf)
    cdef long m = tree.count
    return (feature[:m].copy(), threshold[:m].copy(), left[:m].copy(),
            right[:m].copy(), value[:m].copy())


def tree_predict_raw(feature, threshold, left, right, value, X):
    cdef int[::1] fv = np.ascontiguousarray(feature, dtype=np.int32)
    cdef double[::1] tv = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef int[::1] lv = np.ascontiguousarray(left, dtype=np.int32)
    cdef int[::1] rv = np.ascontiguousarray(right, dtype=np.int32)
    cdef double[::1] vv = np.ascontiguousarray(value, dtype=np.float64)
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef long n = Xv.shape[0]
    cdef cnp.ndarray out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef long i
    cdef int node
    for i in range(n):
        node = 0
        while fv[node] >= 0:
            if Xv[i, fv[node]] < tv[node]:
                node = lv[node]
            else:
                node = rv[node]
        ov[i] = vv[node]
    return out


def iforest_depths(feature, threshold, left, right, adjust, X):
    cdef int[::1] fv = np.ascontiguousarray(feature, dtype=np.int32)
    cdef double[::1] tv = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef int[::1] lv = np.ascontiguousarray(left, dtype=np.int32)
    cdef int[::1] rv = np.ascontiguousarray(right, dtype=np.int32)
    cdef double[::1] av = np.ascontiguousarray(adjust, dtype=np.float64)
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef long n = Xv.shape[0]
    cdef cnp.ndarray out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef long i
    cdef int node
    cdef double depth
    for i in range(n):
        node = 0
        depth = 0.0
        while fv[node] >= 0:
            if Xv[i, fv[node]] < tv[node]:
                node = lv[node]
            else:
                node = rv[node]
            depth += 1.0
        ov[i] = depth + av[node]
    return out
