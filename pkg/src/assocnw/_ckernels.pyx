# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY, M_PI

cnp.import_array()

cdef double LOG_SQRT_2PI = 0.5 * log(2.0 * M_PI)


def log_terms(const double[::1] point, const double[:, ::1] centers,
              const double[:, ::1] bw, const double[::1] logw):
    cdef Py_ssize_t m = centers.shape[0], d = centers.shape[1], k, j
    cdef double acc, u
    out = np.empty(m)
    cdef double[::1] o = out
    for k in range(m):
        acc = logw[k] - d * LOG_SQRT_2PI
        for j in range(d):
            u = (point[j] - centers[k, j]) / bw[k, j]
            acc -= 0.5 * u * u + log(bw[k, j])
        o[k] = acc
    return out


def log_density_many(const double[:, ::1] points, const double[:, ::1] centers,
                     const double[:, ::1] bw, const double[::1] logw, chunk=None):
    cdef Py_ssize_t n = points.shape[0], m = centers.shape[0], d = centers.shape[1]
    cdef Py_ssize_t i, k, j
    cdef double acc, u, mx, s
    base_arr = np.empty(m)
    inv_arr = np.empty((m, d))
    t_arr = np.empty(m)
    cdef double[::1] base = base_arr, t = t_arr
    cdef double[:, ::1] inv = inv_arr
    for k in range(m):
        acc = logw[k] - d * LOG_SQRT_2PI
        for j in range(d):
            inv[k, j] = 1.0 / bw[k, j]
            acc -= log(bw[k, j])
        base[k] = acc
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        mx = -INFINITY
        for k in range(m):
            acc = 0.0
            for j in range(d):
                u = (points[i, j] - centers[k, j]) * inv[k, j]
                acc += u * u
            t[k] = base[k] - 0.5 * acc
            if t[k] > mx:
                mx = t[k]
        s = 0.0
        for k in range(m):
            s += exp(t[k] - mx)
        o[i] = mx + log(s)
    return out


def sq_dist_matrix(const double[:, ::1] z):
    cdef Py_ssize_t m = z.shape[0], d = z.shape[1], i, k, j
    cdef double acc, u
    out = np.zeros((m, m))
    cdef double[:, ::1] o = out
    for i in range(m):
        for k in range(i + 1, m):
            acc = 0.0
            for j in range(d):
                u = z[i, j] - z[k, j]
                acc += u * u
            o[i, k] = acc
            o[k, i] = acc
    return out


cdef double _row_lse(const double[:, ::1] dist, const double[::1] logw, Py_ssize_t i,
                     double scale, double[::1] row) noexcept nogil:
    """log sum_{k != i} w_k exp(-dist_ik * scale), max-shifted."""
    cdef Py_ssize_t k, m = dist.shape[0]
    cdef double t, mx = -INFINITY, s = 0.0
    for k in range(m):
        t = logw[k] - dist[i, k] * scale
        row[k] = t
        if k != i and t > mx:
            mx = t
    if mx == -INFINITY:
        return -INFINITY
    # terms below e^-50 of the row maximum are negligible
    for k in range(m):
        if k != i and row[k] > mx - 50.0:
            s += exp(row[k] - mx)
    return mx + log(s)


def loo_loglik(const double[:, ::1] dist, const double[::1] w, double h, Py_ssize_t d):
    cdef Py_ssize_t m = dist.shape[0], i, k
    cdef double scale = 1.0 / (2.0 * h * h)
    cdef double e, lse, rest, total = 0.0
    cdef double const_term = d * (log(h) + LOG_SQRT_2PI)
    sums_arr = np.zeros(m)
    logw_arr = np.empty(m)
    row_arr = np.empty(m)
    cdef double[::1] sums = sums_arr, logw = logw_arr, row = row_arr
    for k in range(m):
        logw[k] = log(w[k]) if w[k] > 0 else -INFINITY
    # the distance matrix is symmetric: one exp serves both rows of a pair
    for i in range(m):
        for k in range(i + 1, m):
            e = exp(-dist[i, k] * scale)
            sums[i] += w[k] * e
            sums[k] += w[i] * e
    for i in range(m):
        if w[i] == 0.0:
            continue
        if sums[i] > 1e-280:
            lse = log(sums[i])
        else:
            # underflow in the linear sum: redo this row in the log domain
            lse = _row_lse(dist, logw, i, scale, row)
            if lse == -INFINITY:
                return -INFINITY
        rest = 1.0 - w[i]
        if rest <= 0.0:
            return -INFINITY
        total += w[i] * (lse - log(rest) - const_term)
    return total


def merge_q(const double[::1] ci, const double[::1] si,
            const double[:, ::1] centers, const double[:, ::1] bw):
    cdef Py_ssize_t m = centers.shape[0], d = centers.shape[1], k, j
    cdef double acc, u, pooled
    out = np.empty(m)
    cdef double[::1] o = out
    for k in range(m):
        acc = 0.0
        for j in range(d):
            u = centers[k, j] - ci[j]
            pooled = 0.5 * (si[j] * si[j] + bw[k, j] * bw[k, j])
            acc += u * u / pooled
        o[k] = acc
    return out


def best_pair(const double[:, ::1] q, const double[::1] w, Py_ssize_t m):
    cdef Py_ssize_t i, j, bi = 0, bj = 1
    cdef double best = INFINITY, c, tot
    for i in range(m):
        for j in range(i + 1, m):
            tot = w[i] + w[j]
            c = q[i, j] * (w[i] * w[j] / tot) if tot > 0 else 0.0
            if c < best:
                best = c
                bi = i
                bj = j
    return bi, bj, best
