# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled SGNS training kernels.

Mirrors ``seq2vec._kernels_py`` operation for operation, including random
number consumption, so both backends generate the same training pairs.
Shards of sessions run in parallel OpenMP threads with unsynchronised
(Hogwild-style) row updates.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport exp, log1p
from libc.stdint cimport int32_t, int64_t, uint64_t
from libc.stdlib cimport free, malloc

cnp.import_array()

NAME = "cython"


cdef inline uint64_t next_u64(uint64_t* state) noexcept nogil:
    # splitmix64
    cdef uint64_t z
    state[0] += <uint64_t>0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double next_double(uint64_t* state) noexcept nogil:
    return <double>(next_u64(state) >> 11) * (1.0 / 9007199254740992.0)


cdef inline int64_t draw_index(const double* cum, int64_t n, double u) noexcept nogil:
    # first i with cum[i] > u
    cdef int64_t lo = 0
    cdef int64_t hi = n - 1
    cdef int64_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cum[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


cdef inline double sigmoid(double x) noexcept nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline double softplus(double x) noexcept nogil:
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef inline double dot(const double* a, const double* b, int d) noexcept nogil:
    cdef double s = 0.0
    cdef int i
    for i in range(d):
        s += a[i] * b[i]
    return s


cdef double train_pair(double* W, double* C, int d, int64_t src, int64_t dst, int64_t forbidden,
                       int k, const double* cum, int64_t n_cum, uint64_t* state, double lr,
                       int64_t* negs, double* gneg, double* grad_w) noexcept nogil:
    """One gradient step on the loss of pair (src, dst) with k fresh negatives."""
    cdef double* w = W + src * d
    cdef double* c = C + dst * d
    cdef double* cn
    cdef double f, g_pos, loss, scale
    cdef int i, j
    cdef int64_t nb
    for i in range(k):
        nb = draw_index(cum, n_cum, next_double(state))
        while nb == forbidden:
            nb = draw_index(cum, n_cum, next_double(state))
        negs[i] = nb
    f = dot(w, c, d)
    g_pos = sigmoid(f) - 1.0
    loss = softplus(-f)
    for j in range(d):
        grad_w[j] = g_pos * c[j]
    for i in range(k):
        cn = C + negs[i] * d
        f = dot(w, cn, d)
        gneg[i] = sigmoid(f)
        loss += softplus(f)
        for j in range(d):
            grad_w[j] += gneg[i] * cn[j]
    # context rows first, with the pre-update item vector
    scale = lr * g_pos
    for j in range(d):
        c[j] -= scale * w[j]
    for i in range(k):
        cn = C + negs[i] * d
        scale = lr * gneg[i]
        for j in range(d):
            cn[j] -= scale * w[j]
    for j in range(d):
        w[j] -= lr * grad_w[j]
    return loss


cdef void run_shard(const int32_t* tokens, const int64_t* offsets, int64_t s_begin, int64_t s_end,
                    const double* keep_prob, const double* cum, int64_t n_cum,
                    double* W, double* C, int d, const int32_t* meta_of, bint has_meta, double meta_weight,
                    int window, int k, double lr0, double lr_min, double total_centers,
                    int64_t centers_base, int64_t n_shards, uint64_t* item_state, uint64_t* meta_state,
                    double* out) noexcept nogil:
    cdef int64_t max_len = 0
    cdef int64_t s, p, m, i, j, lo, hi, b
    cdef int64_t center, ctx, mc, mcen
    cdef int64_t n_centers = 0, n_pairs = 0, n_meta = 0
    cdef double loss = 0.0, meta_loss = 0.0, lr = lr0, progress
    cdef double meta_lr
    cdef int32_t tok
    cdef bint trained
    for s in range(s_begin, s_end):
        if offsets[s + 1] - offsets[s] > max_len:
            max_len = offsets[s + 1] - offsets[s]
    cdef int32_t* kept = <int32_t*>malloc((max_len + 1) * sizeof(int32_t))
    cdef int64_t* negs = <int64_t*>malloc((k + 1) * sizeof(int64_t))
    cdef double* gneg = <double*>malloc((k + 1) * sizeof(double))
    cdef double* grad_w = <double*>malloc(d * sizeof(double))
    for s in range(s_begin, s_end):
        m = 0
        for p in range(offsets[s], offsets[s + 1]):
            tok = tokens[p]
            if next_double(item_state) < keep_prob[tok]:
                kept[m] = tok
                m += 1
        for i in range(m):
            b = 1 + <int64_t>(next_u64(item_state) % <uint64_t>window)
            progress = (centers_base + n_centers * n_shards) / total_centers
            lr = lr0 - (lr0 - lr_min) * progress
            if lr < lr_min:
                lr = lr_min
            meta_lr = lr * meta_weight
            center = kept[i]
            lo = i - b
            if lo < 0:
                lo = 0
            hi = i + b
            if hi > m - 1:
                hi = m - 1
            trained = False
            for j in range(lo, hi + 1):
                if j == i:
                    continue
                ctx = kept[j]
                loss += train_pair(W, C, d, center, ctx, ctx, k, cum, n_cum, item_state, lr, negs, gneg, grad_w)
                n_pairs += 1
                trained = True
                if has_meta:
                    mc = meta_of[ctx]
                    if mc >= 0:
                        meta_loss += meta_weight * train_pair(W, C, d, center, mc, -1, k, cum, n_cum,
                                                              meta_state, meta_lr, negs, gneg, grad_w)
                        n_meta += 1
                    mcen = meta_of[center]
                    if mcen >= 0:
                        meta_loss += meta_weight * train_pair(W, C, d, mcen, ctx, ctx, k, cum, n_cum,
                                                              meta_state, meta_lr, negs, gneg, grad_w)
                        n_meta += 1
            if has_meta and trained:
                mcen = meta_of[center]
                if mcen >= 0:
                    meta_loss += meta_weight * train_pair(W, C, d, center, mcen, -1, k, cum, n_cum,
                                                          meta_state, meta_lr, negs, gneg, grad_w)
                    n_meta += 1
            n_centers += 1
    free(kept)
    free(negs)
    free(gneg)
    free(grad_w)
    out[0] = loss
    out[1] = meta_loss
    out[2] = <double>n_pairs
    out[3] = <double>n_meta
    out[4] = <double>n_centers
    out[5] = lr


def train_epoch(const int32_t[::1] tokens, const int64_t[::1] offsets, const double[::1] keep_prob,
                const double[::1] cum, double[:, ::1] W, double[:, ::1] C, const int32_t[::1] meta_of,
                double meta_weight, int window, int negatives, double lr0, double lr_min,
                double total_centers, int64_t centers_base, uint64_t[:, ::1] states,
                const int64_t[::1] shard_bounds):
    """Run one pass over all sessions; returns a dict of epoch statistics.

    ``states`` holds one (item stream, meta stream) row per shard and is
    advanced in place.  ``shard_bounds`` are session offsets of the shards.
    """
    cdef int64_t n_shards = shard_bounds.shape[0] - 1
    cdef int d = W.shape[1]
    cdef int64_t n_cum = cum.shape[0]
    cdef bint has_meta = meta_of.shape[0] > 0
    cdef double[:, ::1] res = np.zeros((n_shards, 6), dtype=np.float64)
    cdef int64_t sh
    if tokens.shape[0] == 0:
        return _collect(np.asarray(res), lr0)
    cdef const int32_t* meta_ptr = &meta_of[0] if has_meta else NULL
    if n_shards == 1:
        with nogil:
            run_shard(&tokens[0], &offsets[0], shard_bounds[0], shard_bounds[1], &keep_prob[0], &cum[0], n_cum,
                      &W[0, 0], &C[0, 0], d, meta_ptr, has_meta, meta_weight, window, negatives,
                      lr0, lr_min, total_centers, centers_base, 1, &states[0, 0], &states[0, 1], &res[0, 0])
    else:
        for sh in prange(n_shards, nogil=True, schedule="static", chunksize=1, num_threads=n_shards):
            run_shard(&tokens[0], &offsets[0], shard_bounds[sh], shard_bounds[sh + 1], &keep_prob[0], &cum[0],
                      n_cum, &W[0, 0], &C[0, 0], d, meta_ptr, has_meta, meta_weight, window, negatives,
                      lr0, lr_min, total_centers, centers_base, n_shards, &states[sh, 0], &states[sh, 1],
                      &res[sh, 0])
    return _collect(np.asarray(res), lr0)


def _collect(res, lr0):
    last = res[:, 4] > 0
    return {
        "loss": float(res[:, 0].sum()),
        "meta_loss": float(res[:, 1].sum()),
        "pairs": int(res[:, 2].sum()),
        "meta_pairs": int(res[:, 3].sum()),
        "centers": int(res[:, 4].sum()),
        "lr": float(res[last, 5].min()) if last.any() else lr0,
    }


def draw_from_table(const double[::1] cum, Py_ssize_t n, int64_t forbidden, uint64_t seed):
    """``n`` kernel-path draws from an inverse-CDF table (for conformance tests)."""
    cdef uint64_t state = seed
    cdef int64_t[::1] out = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t i
    cdef int64_t nb
    cdef int64_t n_cum = cum.shape[0]
    with nogil:
        for i in range(n):
            nb = draw_index(&cum[0], n_cum, next_double(&state))
            while nb == forbidden:
                nb = draw_index(&cum[0], n_cum, next_double(&state))
            out[i] = nb
    return np.asarray(out)


def subsample_counts(const int32_t[::1] tokens, const double[::1] keep_prob, Py_ssize_t passes, uint64_t seed):
    """How often each position survives kernel-path subsampling over ``passes`` passes."""
    cdef uint64_t state = seed
    cdef int64_t[::1] kept = np.zeros(tokens.shape[0], dtype=np.int64)
    cdef Py_ssize_t r, p
    with nogil:
        for r in range(passes):
            for p in range(tokens.shape[0]):
                if next_double(&state) < keep_prob[tokens[p]]:
                    kept[p] += 1
    return np.asarray(kept)
