"""Pure-numpy implementations of the hot kernels.

Signatures mirror ``_ckernels``; every array is float64 and C-contiguous.
"""
import numpy as np

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def log_terms(point, centers, bw, logw):
    """``log(a_k) + log phi(point - c_k, s_k)`` for every kernel k."""
    u = (point - centers) / bw
    return logw - 0.5 * np.einsum("kd,kd->k", u, u) - np.log(bw).sum(axis=1) \
        - centers.shape[1] * LOG_SQRT_2PI


def log_density_many(points, centers, bw, logw, chunk=256):
    """Log mixture density at each row of ``points`` (log-sum-exp over kernels)."""
    n, d = points.shape
    out = np.empty(n)
    inv = 1.0 / bw
    base = logw - np.log(bw).sum(axis=1) - d * LOG_SQRT_2PI
    for lo in range(0, n, chunk):
        p = points[lo:lo + chunk]
        u = (p[:, None, :] - centers[None, :, :]) * inv[None, :, :]
        t = base[None, :] - 0.5 * np.einsum("nkd,nkd->nk", u, u)
        mx = t.max(axis=1)
        out[lo:lo + chunk] = mx + np.log(np.exp(t - mx[:, None]).sum(axis=1))
    return out


def sq_dist_matrix(z):
    diff = z[:, None, :] - z[None, :, :]
    return np.einsum("ijd,ijd->ij", diff, diff)


def loo_loglik(dist, w, h, d):
    """Weighted leave-one-out log-likelihood of the kernel centers.

    ``dist`` holds squared distances in units of the per-dimension spread;
    the spread's log-determinant is dropped (it does not depend on ``h``).
    Returns -inf when some center has no other center with positive weight.
    """
    m = dist.shape[0]
    t = -dist / (2.0 * h * h)
    with np.errstate(divide="ignore"):
        t = t + np.log(w)[None, :]
    t[np.arange(m), np.arange(m)] = -np.inf
    live = w > 0
    t, w = t[live], w[live]
    mx = t.max(axis=1)
    if not np.all(np.isfinite(mx)):
        return -np.inf
    lse = mx + np.log(np.exp(t - mx[:, None]).sum(axis=1))
    rest = 1.0 - w
    with np.errstate(divide="ignore"):
        row = lse - np.log(rest)
    row = row - d * (np.log(h) + LOG_SQRT_2PI)
    return float(np.dot(w, row))


def merge_q(ci, si, centers, bw):
    """Squared center distance of kernel ``i`` to every kernel, in pooled-bandwidth units."""
    pooled = 0.5 * (si * si + bw * bw)
    diff = centers - ci
    return np.einsum("kd,kd->k", diff * diff, 1.0 / pooled)


def best_pair(q, w, m):
    """Pair ``(i, j, cost)``, ``i < j``, minimizing ``q_ij * w_i w_j / (w_i + w_j)``."""
    w = w[:m]
    tot = w[:, None] + w[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        harm = np.where(tot > 0, (w[:, None] * w[None, :]) / tot, 0.0)
    cost = q[:m, :m] * harm
    cost[np.isnan(cost)] = 0.0  # inf * 0 never happens off the diagonal
    np.fill_diagonal(cost, np.inf)
    flat = int(np.argmin(cost))
    i, j = divmod(flat, m)
    return min(i, j), max(i, j), float(cost[i, j])
