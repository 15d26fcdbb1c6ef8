"""Compiled CART building blocks.

Features are pre-encoded to integer codes (dense ranks of distinct values,
or histogram bins). A node sorts its samples by code (insertion sort for
tiny nodes, a counting sort when the code range is small relative to the
node, LSD radix otherwise); the sorted scan then evaluates every boundary
between consecutive distinct codes.

Trees are stored as flat arrays: ``feature`` (-1 at leaves), ``threshold``,
``left``, ``right`` and a per-node ``value`` row.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# relative tolerance under which two split scores count as tied
TIE_TOL = 1e-12


@njit(cache=True, nogil=True)
def next_u64(state):
    # splitmix64; state is a length-1 uint64 array
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def rand_below(state, n):
    return np.int64(next_u64(state) % np.uint64(n))


@njit(cache=True, nogil=True)
def _sort_by_code(codes_f, n_codes_f, idx, start, end, counts, out_idx, out_key,
                  tmp_idx, tmp_key):
    m = end - start
    if m <= 24:
        for j in range(m):
            s = idx[start + j]
            k = codes_f[s]
            p = j
            while p > 0 and out_key[p - 1] > k:
                out_key[p] = out_key[p - 1]
                out_idx[p] = out_idx[p - 1]
                p -= 1
            out_key[p] = k
            out_idx[p] = s
        return
    if n_codes_f <= 256 or m * 4 >= n_codes_f:
        for c in range(n_codes_f + 1):
            counts[c] = 0
        for j in range(start, end):
            counts[codes_f[idx[j]] + 1] += 1
        for c in range(n_codes_f):
            counts[c + 1] += counts[c]
        for j in range(start, end):
            s = idx[j]
            k = codes_f[s]
            p = counts[k]
            out_idx[p] = s
            out_key[p] = k
            counts[k] = p + 1
        return
    # LSD radix sort on 8-bit digits, ping-ponging between tmp and out
    n_pass = 0
    span = n_codes_f - 1
    while span > 0:
        n_pass += 1
        span >>= 8
    if n_pass % 2 == 0:
        src_idx, src_key, dst_idx, dst_key = tmp_idx, tmp_key, out_idx, out_key
    else:
        src_idx, src_key, dst_idx, dst_key = out_idx, out_key, tmp_idx, tmp_key
    # seed the first pass directly from the node slice
    for j in range(m):
        s = idx[start + j]
        dst_idx[j] = s
        dst_key[j] = codes_f[s]
    shift = 0
    for _ in range(n_pass):
        src_idx, dst_idx = dst_idx, src_idx
        src_key, dst_key = dst_key, src_key
        for c in range(257):
            counts[c] = 0
        for j in range(m):
            counts[((src_key[j] >> shift) & 255) + 1] += 1
        for c in range(256):
            counts[c + 1] += counts[c]
        for j in range(m):
            k = src_key[j]
            d = (k >> shift) & 255
            p = counts[d]
            dst_idx[p] = src_idx[j]
            dst_key[p] = k
            counts[d] = p + 1
        shift += 8


@njit(cache=True, nogil=True)
def _better(score, f, code, best_score, best_f, best_code, tol):
    if best_f < 0:
        return True
    if score > best_score + tol:
        return True
    if score >= best_score - tol:
        if f < best_f or (f == best_f and code < best_code):
            return True
    return False


@njit(cache=True, nogil=True)
def _scan_gini(f, m, buf_idx, buf_key, y, w, tot, n_classes, W, min_leaf,
               lc, best_score, best_f, best_code, best_next, tol):
    """Scan one sorted feature; score = sum_c l_c^2/W_l + sum_c r_c^2/W_r."""
    for c in range(n_classes):
        lc[c] = 0.0
    sumsq_l = 0.0
    sumsq_r = 0.0
    for c in range(n_classes):
        sumsq_r += tot[c] * tot[c]
    wl = 0.0
    for j in range(m - 1):
        s = buf_idx[j]
        c = y[s]
        ww = w[s]
        rc = tot[c] - lc[c]
        sumsq_l += (2.0 * lc[c] + ww) * ww
        sumsq_r += ww * ww - 2.0 * rc * ww
        lc[c] += ww
        wl += ww
        if buf_key[j] == buf_key[j + 1]:
            continue
        wr = W - wl
        if wl < min_leaf or wr < min_leaf:
            continue
        score = sumsq_l / wl + sumsq_r / wr
        if _better(score, f, buf_key[j], best_score, best_f, best_code, tol):
            best_score = score
            best_f = f
            best_code = buf_key[j]
            best_next = buf_key[j + 1]
    return best_score, best_f, best_code, best_next


@njit(cache=True, nogil=True)
def _threshold(lo, hi, offsets, f, code, next_code):
    a = hi[offsets[f] + code]
    b = lo[offsets[f] + next_code]
    t = 0.5 * (a + b)
    if t >= b or t < a:
        t = a
    return t


@njit(cache=True, nogil=True)
def _partition(codes_f, idx, start, end, code):
    i = start
    j = end - 1
    while i <= j:
        if codes_f[idx[i]] <= code:
            i += 1
        else:
            tmp = idx[i]
            idx[i] = idx[j]
            idx[j] = tmp
            j -= 1
    return i


@njit(cache=True, nogil=True)
def node_best_split(codes_T, n_codes, lo, hi, offsets, y, w, n_classes,
                    sample_idx, features, min_leaf):
    """Exhaustive best Gini split over ``features`` for one node.

    Returns (feature, threshold, gain); feature is -1 when no split exists.
    """
    m = sample_idx.shape[0]
    idx = sample_idx.copy()
    counts = np.zeros(max(n_codes.max(), 256) + 2, np.int64)
    buf_idx = np.empty(m, np.int64)
    buf_key = np.empty(m, np.int32)
    tmp_idx = np.empty(m, np.int64)
    tmp_key = np.empty(m, np.int32)
    tot = np.zeros(n_classes)
    lc = np.zeros(n_classes)
    for j in range(m):
        tot[y[idx[j]]] += w[idx[j]]
    W = tot.sum()
    tol = TIE_TOL * W
    best_score = -1.0
    best_f = -1
    best_code = -1
    best_next = -1
    for f in features:
        _sort_by_code(codes_T[f], n_codes[f], idx, 0, m, counts, buf_idx, buf_key, tmp_idx, tmp_key)
        if buf_key[0] == buf_key[m - 1]:
            continue
        best_score, best_f, best_code, best_next = _scan_gini(
            f, m, buf_idx, buf_key, y, w, tot, n_classes, W, min_leaf, lc,
            best_score, best_f, best_code, best_next, tol)
    if best_f < 0:
        return -1, 0.0, 0.0
    sumsq = 0.0
    for c in range(n_classes):
        sumsq += tot[c] * tot[c]
    gain = best_score / W - sumsq / (W * W)
    return best_f, _threshold(lo, hi, offsets, best_f, best_code, best_next), gain


@njit(cache=True, nogil=True)
def build_class_tree(codes_T, n_codes, lo, hi, offsets, y, w, n_classes,
                     sample_idx, mtry, min_leaf, max_depth, rng_state):
    """Grow a Gini CART on the samples in ``sample_idx`` weighted by ``w``.

    Candidate features are drawn without replacement per node; drawing stops
    once ``mtry`` non-constant features were scanned. ``max_depth < 0`` means
    unlimited depth.
    """
    n_feat = codes_T.shape[0]
    m = sample_idx.shape[0]
    cap = 2 * m + 1
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    value = np.zeros((cap, n_classes))

    idx = sample_idx.copy()
    counts = np.zeros(max(n_codes.max(), 256) + 2, np.int64)
    buf_idx = np.empty(m, np.int64)
    buf_key = np.empty(m, np.int32)
    tmp_idx = np.empty(m, np.int64)
    tmp_key = np.empty(m, np.int32)
    tot = np.zeros(n_classes)
    lc = np.zeros(n_classes)
    perm = np.arange(n_feat)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    sp = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]

        for c in range(n_classes):
            tot[c] = 0.0
        for j in range(start, end):
            tot[y[idx[j]]] += w[idx[j]]
        W = 0.0
        n_present = 0
        for c in range(n_classes):
            value[node, c] = tot[c]
            W += tot[c]
            if tot[c] > 0.0:
                n_present += 1
        if n_present <= 1 or W < 2.0 * min_leaf:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        nn = end - start
        tol = TIE_TOL * W
        best_score = -1.0
        best_f = -1
        best_code = -1
        best_next = -1
        for i in range(n_feat):
            perm[i] = i
        scanned = 0
        i = 0
        while i < n_feat and scanned < mtry:
            j = i + rand_below(rng_state, n_feat - i)
            f = perm[j]
            perm[j] = perm[i]
            perm[i] = f
            i += 1
            _sort_by_code(codes_T[f], n_codes[f], idx, start, end, counts, buf_idx, buf_key, tmp_idx, tmp_key)
            if buf_key[0] == buf_key[nn - 1]:
                continue
            scanned += 1
            best_score, best_f, best_code, best_next = _scan_gini(
                f, nn, buf_idx, buf_key, y, w, tot, n_classes, W, min_leaf, lc,
                best_score, best_f, best_code, best_next, tol)
        if best_f < 0:
            continue

        mid = _partition(codes_T[best_f], idx, start, end, best_code)
        feature[node] = best_f
        threshold[node] = _threshold(lo, hi, offsets, best_f, best_code, best_next)
        left[node] = n_nodes
        right[node] = n_nodes + 1
        # right pushed first so the left subtree is grown first
        st_node[sp] = n_nodes + 1
        st_start[sp] = mid
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = n_nodes
        st_start[sp] = start
        st_end[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1
        n_nodes += 2

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(), value[:n_nodes].copy())


@njit(cache=True, nogil=True)
def build_regression_tree(codes_T, n_codes, lo, hi, offsets, target, hess,
                          leaf_scale, min_leaf, max_depth):
    """Least-squares regression tree over all features.

    Leaves hold ``leaf_scale * sum(target) / sum(hess)`` (a one-step Newton
    update when ``hess`` is the loss curvature).
    """
    n_feat = codes_T.shape[0]
    m = target.shape[0]
    cap = 2 * m + 1
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    value = np.zeros((cap, 1))

    idx = np.arange(m)
    counts = np.zeros(max(n_codes.max(), 256) + 2, np.int64)
    buf_idx = np.empty(m, np.int64)
    buf_key = np.empty(m, np.int32)
    tmp_idx = np.empty(m, np.int64)
    tmp_key = np.empty(m, np.int32)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        nn = end - start

        s_tot = 0.0
        h_tot = 0.0
        for j in range(start, end):
            s_tot += target[idx[j]]
            h_tot += hess[idx[j]]
        if abs(h_tot) < 1e-150:
            value[node, 0] = 0.0
        else:
            value[node, 0] = leaf_scale * s_tot / h_tot
        if nn < 2 * min_leaf:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        parent = s_tot * s_tot / nn
        tol = TIE_TOL * (abs(parent) + 1.0)
        best_score = parent + tol
        best_f = -1
        best_code = -1
        best_next = -1
        for f in range(n_feat):
            _sort_by_code(codes_T[f], n_codes[f], idx, start, end, counts, buf_idx, buf_key, tmp_idx, tmp_key)
            if buf_key[0] == buf_key[nn - 1]:
                continue
            s_l = 0.0
            for j in range(nn - 1):
                s_l += target[buf_idx[j]]
                if buf_key[j] == buf_key[j + 1]:
                    continue
                n_l = j + 1
                n_r = nn - n_l
                if n_l < min_leaf or n_r < min_leaf:
                    continue
                s_r = s_tot - s_l
                score = s_l * s_l / n_l + s_r * s_r / n_r
                if score > best_score + tol:
                    best_score = score
                    best_f = f
                    best_code = buf_key[j]
                    best_next = buf_key[j + 1]
        if best_f < 0:
            continue

        mid = _partition(codes_T[best_f], idx, start, end, best_code)
        feature[node] = best_f
        threshold[node] = _threshold(lo, hi, offsets, best_f, best_code, best_next)
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[sp] = n_nodes + 1
        st_start[sp] = mid
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = n_nodes
        st_start[sp] = start
        st_end[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1
        n_nodes += 2

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            left[:n_nodes].copy(), right[:n_nodes].copy(), value[:n_nodes].copy())


@njit(cache=True, nogil=True)
def apply_tree(feature, threshold, left, right, X):
    """Leaf index reached by every row of ``X``."""
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out
