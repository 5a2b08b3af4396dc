"""Online, compressed, forgetting Gaussian-mixture density estimate.

A :class:`MixtureModel` keeps a weighted sum of axis-aligned Gaussian kernels
over ``d`` named components. Every sample becomes a kernel; when the kernel
count exceeds the budget the closest pair is merged by moment matching. Weights
decay exponentially and the decayed mass is handed to the kernel that explains
the newest sample, so regions that are never revisited fade out. A shared
bandwidth template is re-selected periodically by leave-one-out likelihood.

Mutating methods are not thread-safe; readers take a snapshot of the kernel
arrays at call entry (see :meth:`MixtureModel.arrays`).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import kernels as _k

FORMAT_VERSION = 1
BANDWIDTH_FLOOR = 1e-9
SPREAD_FLOOR = 1e-9
H_RANGE = (0.05, 5.0)
H_RTOL = 1e-3
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class EmptyModelError(ValueError):
    """Raised when an operation needs at least one kernel."""


class ModelFormatError(ValueError):
    """Raised for malformed, incompatible or invariant-violating model documents."""


def _as_vector(x, name="vector") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def kernel_eval(u, s) -> float:
    """Axis-aligned Gaussian kernel ``prod_i N(u_i; 0, s_i^2)``."""
    return math.exp(log_kernel_eval(u, s))


def log_kernel_eval(u, s) -> float:
    """Natural log of :func:`kernel_eval`; finite where the linear value underflows."""
    u = _as_vector(u, "u")
    s = _as_vector(s, "s")
    if u.shape != s.shape:
        raise ValueError(f"dimension mismatch: {u.shape[0]} vs {s.shape[0]}")
    if not np.all(s > 0):
        raise ValueError("bandwidth must be strictly positive")
    z = u / s
    return float(-0.5 * np.dot(z, z) - np.log(s).sum() - u.shape[0] * LOG_SQRT_2PI)


def _logsumexp(t: np.ndarray) -> float:
    mx = float(np.max(t))
    if not math.isfinite(mx):
        return mx
    return mx + math.log(float(np.exp(t - mx).sum()))


def normalized_from_log(logw: np.ndarray) -> np.ndarray:
    """Weights proportional to ``exp(logw)``, formed with max-subtraction."""
    mx = np.max(logw)
    if not np.isfinite(mx):
        raise FloatingPointError("all log-weights are -inf")
    w = np.exp(logw - mx)
    return w / w.sum()


@dataclass(frozen=True)
class Kernel:
    weight: float
    center: np.ndarray
    bandwidth: np.ndarray
    hit_count: int = 0

    def __post_init__(self):
        if self.center.shape != self.bandwidth.shape:
            raise ValueError("center and bandwidth must have the same dimension")
        if not np.all(self.bandwidth > 0):
            raise ValueError("bandwidth components must be strictly positive")
        if not self.weight >= 0:
            raise ValueError("kernel weight must be nonnegative")


class MixtureModel:
    """Weighted mixture of diagonal Gaussian kernels learned sample by sample.

    Parameters
    ----------
    dim : int
        Number of vector components.
    names : sequence of str, optional
        Component labels, defaults to ``x0, x1, ...``.
    budget : int
        Maximum kernel count ``m_max``; exceeding it triggers pairwise merging.
    decay : float
        Per-sample weight retention in ``(0, 1]``; 1 disables forgetting.
    initial_bandwidth : array_like, optional
        Bandwidth template used before the first bandwidth selection.
    bandwidth_period : int
        Bandwidth selection runs whenever ``update_count`` is a multiple of it.
    gate : float
        Mahalanobis radius (template units) within which a kernel counts as
        explaining a new sample.
    """

    def __init__(self, dim: int, names: Optional[Sequence[str]] = None, budget: int = 500,
                 decay: float = 0.9999, initial_bandwidth=None, bandwidth_period: int = 50,
                 gate: float = 3.0):
        if int(dim) != dim or dim < 1:
            raise ValueError("dim must be a positive integer")
        self.dim = int(dim)
        self.names = list(names) if names is not None else [f"x{i}" for i in range(dim)]
        if len(self.names) != self.dim or len(set(self.names)) != self.dim:
            raise ValueError("names must be unique and match dim")
        if int(budget) != budget or budget < 1:
            raise ValueError("budget must be a positive integer")
        if not 0.0 < decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")
        if int(bandwidth_period) != bandwidth_period or bandwidth_period < 1:
            raise ValueError("bandwidth_period must be a positive integer")
        if not gate > 0:
            raise ValueError("gate must be positive")
        self.budget = int(budget)
        self.decay = float(decay)
        self.bandwidth_period = int(bandwidth_period)
        self.gate = float(gate)
        bw = np.ones(self.dim) if initial_bandwidth is None else _as_vector(initial_bandwidth)
        if bw.shape != (self.dim,) or not np.all(bw > 0):
            raise ValueError("initial_bandwidth must be positive with one entry per component")
        self.bandwidth = np.maximum(bw.astype(float), BANDWIDTH_FLOOR)
        self.bandwidth_scale = 1.0
        self.update_count = 0
        self._set(np.empty(0), np.empty((0, self.dim)), np.empty((0, self.dim)),
                  np.empty(0, dtype=np.int64))
        self._q = None         # weight-free merge distances, lazily built
        self._fresh = None     # index of the kernel appended by the current add

    # ------------------------------------------------------------------ state
    def _set(self, w, c, s, hits):
        # one attribute so readers always see a consistent tuple
        self._state = (w, c, s, hits)

    def arrays(self):
        """Snapshot ``(weights, centers, bandwidths, hit_counts)`` of the kernels."""
        return self._state

    @property
    def m(self) -> int:
        return self._state[0].shape[0]

    def __len__(self):
        return self.m

    @property
    def weights(self) -> np.ndarray:
        return self._state[0].copy()

    @property
    def centers(self) -> np.ndarray:
        return self._state[1].copy()

    @property
    def bandwidths(self) -> np.ndarray:
        return self._state[2].copy()

    @property
    def hit_counts(self) -> np.ndarray:
        return self._state[3].copy()

    @property
    def kernels(self) -> List[Kernel]:
        w, c, s, h = self._state
        return [Kernel(float(w[k]), c[k].copy(), s[k].copy(), int(h[k])) for k in range(len(w))]

    def _settings(self):
        return dict(budget=self.budget, decay=self.decay, bandwidth_period=self.bandwidth_period,
                    gate=self.gate)

    @classmethod
    def from_kernels(cls, weights, centers, bandwidths, hit_counts=None, names=None,
                     normalize: bool = False, **settings) -> "MixtureModel":
        """Build a model from explicit kernel parameters.

        ``weights`` must sum to one unless ``normalize`` is set.
        """
        c = np.atleast_2d(np.asarray(centers, dtype=float))
        s = np.atleast_2d(np.asarray(bandwidths, dtype=float))
        if c.ndim != 2:
            raise ValueError("centers must be a (m, d) array")
        s = np.broadcast_to(s, c.shape).copy()
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != c.shape[0]:
            raise ValueError("one weight per kernel required")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(s)) and np.all(np.isfinite(w))):
            raise ValueError("kernel parameters must be finite")
        if not np.all(s > 0):
            raise ValueError("bandwidth components must be strictly positive")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if normalize:
            w = w / w.sum()
        elif abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to one (got {w.sum()!r})")
        hits = (np.zeros(len(w), dtype=np.int64) if hit_counts is None
                else np.asarray(hit_counts, dtype=np.int64).reshape(-1))
        if hits.shape != w.shape or np.any(hits < 0):
            raise ValueError("hit counts must be nonnegative, one per kernel")
        dim = c.shape[1]
        settings.setdefault("budget", max(500, len(w)))
        model = cls(dim, names=names, initial_bandwidth=s[0] if len(w) else None, **settings)
        if len(w) > model.budget:
            raise ValueError("more kernels than the budget allows")
        model._set(w, c.copy(), s, hits)
        return model

    def copy(self) -> "MixtureModel":
        w, c, s, h = self._state
        out = MixtureModel(self.dim, self.names, initial_bandwidth=self.bandwidth,
                           **self._settings())
        out.bandwidth_scale = self.bandwidth_scale
        out.update_count = self.update_count
        out._set(w.copy(), c.copy(), s.copy(), h.copy())
        return out

    snapshot = copy

    def _require_kernels(self):
        if self.m == 0:
            raise EmptyModelError("model has no kernels")

    def _check_point(self, point) -> np.ndarray:
        x = _as_vector(point, "point")
        if x.shape[0] != self.dim:
            raise ValueError(f"expected {self.dim} components, got {x.shape[0]}")
        return x

    def index_of(self, names: Iterable) -> List[int]:
        out = []
        for n in names:
            if isinstance(n, (int, np.integer)):
                if not 0 <= n < self.dim:
                    raise IndexError(f"component index {n} out of range")
                out.append(int(n))
            else:
                out.append(self.names.index(n))
        return out

    # -------------------------------------------------------------- reading
    def log_density(self, point) -> float:
        x = self._check_point(point)
        w, c, s, _ = self._state
        if len(w) == 0:
            raise EmptyModelError("model has no kernels")
        with np.errstate(divide="ignore"):
            logw = np.log(w)
        return _logsumexp(_k.log_terms(x, c, s, logw))

    def density(self, point) -> float:
        return math.exp(self.log_density(point))

    def log_density_many(self, points) -> np.ndarray:
        pts = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
        if pts.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} components per point")
        w, c, s, _ = self._state
        if len(w) == 0:
            raise EmptyModelError("model has no kernels")
        live = w > 0
        return _k.log_density_many(pts, np.ascontiguousarray(c[live]),
                                   np.ascontiguousarray(s[live]), np.log(w[live]))

    def mean(self) -> np.ndarray:
        self._require_kernels()
        w, c, _, _ = self._state
        return w @ c

    def second_moment(self) -> np.ndarray:
        """Per-component raw second moment ``E[x_i^2]`` of the mixture."""
        self._require_kernels()
        w, c, s, _ = self._state
        return w @ (c * c + s * s)

    def marginal(self, keep) -> "MixtureModel":
        """Mixture over the components in ``keep`` (exact for diagonal kernels)."""
        idx = self.index_of(keep)
        if not idx:
            raise ValueError("keep must name at least one component")
        if len(set(idx)) != len(idx):
            raise ValueError("duplicate component in keep")
        w, c, s, h = self._state
        out = MixtureModel(len(idx), [self.names[i] for i in idx],
                           initial_bandwidth=self.bandwidth[idx], **self._settings())
        out.bandwidth_scale = self.bandwidth_scale
        out.update_count = self.update_count
        out._set(w.copy(), c[:, idx].copy(), s[:, idx].copy(), h.copy())
        return out

    def condition_weights(self, known_idx, known_vals) -> np.ndarray:
        """Normalized posterior kernel weights given the known components."""
        w, c, s, _ = self._state
        if len(w) == 0:
            raise EmptyModelError("model has no kernels")
        idx = list(known_idx)
        vals = _as_vector(known_vals, "known_vals")
        if len(idx) != vals.shape[0]:
            raise ValueError("one value per known index required")
        with np.errstate(divide="ignore"):
            logw = np.log(w)
        if not idx:
            return w.copy()
        lt = _k.log_terms(vals, np.ascontiguousarray(c[:, idx]),
                          np.ascontiguousarray(s[:, idx]), logw)
        return normalized_from_log(lt)

    def condition(self, known_idx, known_vals) -> "MixtureModel":
        """Mixture over the unknown components given values of the known ones."""
        self._require_kernels()
        idx = self.index_of(known_idx)
        if not idx:
            raise ValueError("known_idx must be nonempty")
        if len(set(idx)) != len(idx):
            raise ValueError("duplicate known index")
        rest = [i for i in range(self.dim) if i not in idx]
        if not rest:
            raise ValueError("every component is known; nothing to condition onto")
        wc = self.condition_weights(idx, known_vals)
        _, c, s, h = self._state
        out = MixtureModel(len(rest), [self.names[i] for i in rest],
                           initial_bandwidth=self.bandwidth[rest], **self._settings())
        out.bandwidth_scale = self.bandwidth_scale
        out.update_count = self.update_count
        out._set(wc, c[:, rest].copy(), s[:, rest].copy(), h.copy())
        return out

    def draw_sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """Draw from the mixture: pick a kernel by weight, then each component.

        Returns a vector for ``size=None`` and a ``(size, d)`` array otherwise.
        """
        w, c, s, _ = self._state
        if len(w) == 0:
            raise EmptyModelError("model has no kernels")
        n = 1 if size is None else int(size)
        cdf = np.cumsum(w)
        k = np.searchsorted(cdf, rng.random(n) * cdf[-1], side="right")
        k = np.minimum(k, len(w) - 1)
        x = c[k] + s[k] * rng.standard_normal((n, self.dim))
        return x[0] if size is None else x

    # -------------------------------------------------------------- writing
    def add_sample(self, sample) -> None:
        """Absorb one observation: new kernel, compression, forgetting, bandwidth."""
        x = self._check_point(sample)
        if not np.all(np.isfinite(x)):
            raise ValueError("sample values must be finite")
        w, c, s, h = self._state
        n = self.update_count
        m = len(w)
        new_w = 1.0 if m == 0 else 1.0 / (n + 1)
        scale = 1.0 - new_w if m else 1.0
        w = np.append(w * scale, new_w)
        w /= w.sum()
        c = np.vstack([c, x[None, :]])
        s = np.vstack([s, self.bandwidth[None, :]])
        h = np.append(h, 0)
        self._set(w, c, s, h)
        if self._q is not None:
            self._append_q_row()
        self._fresh = m
        self.update_count = n + 1
        while self.m > self.budget:
            self.compress_merge()
        self.forget_decay(self._nearest_for(x))
        self._fresh = None
        if self.update_count % self.bandwidth_period == 0 and self.m >= 2:
            self.bandwidth_update()

    def _nearest_for(self, x) -> Optional[int]:
        _, c, _, _ = self._state
        z = (c - x) / self.bandwidth
        d2 = np.einsum("kd,kd->k", z, z)
        if self._fresh is not None:
            d2[self._fresh] = np.inf
        if len(d2) == 0:
            return None
        k = int(np.argmin(d2))
        return k if d2[k] < self.gate ** 2 else None

    def _build_q(self):
        w, c, s, _ = self._state
        m = len(w)
        cap = max(self.budget + 2, m)
        q = np.full((cap, cap), np.inf)
        for i in range(m):
            q[i, :m] = _k.merge_q(c[i], s[i], c, s)
            q[i, i] = np.inf
        self._q = q

    def _append_q_row(self):
        w, c, s, _ = self._state
        m = len(w)
        if self._q.shape[0] < m:
            self._build_q()
            return
        row = _k.merge_q(c[m - 1], s[m - 1], c, s)
        row[m - 1] = np.inf
        self._q[m - 1, :m] = row
        self._q[:m, m - 1] = row

    def _remove(self, j: int):
        """Delete kernel ``j`` by moving the last kernel into its slot."""
        w, c, s, h = self._state
        last = len(w) - 1
        keep = np.ones(len(w), dtype=bool)
        if j != last:
            w, c, s, h = w.copy(), c.copy(), s.copy(), h.copy()
            w[j], c[j], s[j], h[j] = w[last], c[last], s[last], h[last]
            if self._q is not None:
                self._q[j, :] = self._q[last, :]
                self._q[:, j] = self._q[:, last]
                self._q[j, j] = np.inf
            if self._fresh == last:
                self._fresh = j
        elif self._fresh == j:
            self._fresh = None
        keep[last] = False
        if self._q is not None:
            self._q[last, :] = np.inf
            self._q[:, last] = np.inf
        self._set(w[keep], c[keep], s[keep], h[keep])

    def merge_pair(self, i: int, j: int) -> None:
        """Replace kernels ``i`` and ``j`` by one moment-matched kernel."""
        if i == j:
            raise ValueError("cannot merge a kernel with itself")
        i, j = min(i, j), max(i, j)
        w, c, s, h = self._state
        wi, wj = w[i], w[j]
        wt = wi + wj
        if wt > 0:
            ci = (wi * c[i] + wj * c[j]) / wt
            diff = c[i] - c[j]
            var = (wi * s[i] ** 2 + wj * s[j] ** 2) / wt + (wi * wj / (wt * wt)) * diff * diff
        else:
            ci, var = 0.5 * (c[i] + c[j]), 0.5 * (s[i] ** 2 + s[j] ** 2)
        w, c, s, h = w.copy(), c.copy(), s.copy(), h.copy()
        w[i], c[i], s[i], h[i] = wt, ci, np.maximum(np.sqrt(var), BANDWIDTH_FLOOR), h[i] + h[j]
        self._set(w, c, s, h)
        if self._fresh in (i, j):
            self._fresh = None
        self._remove(j)
        if self._q is not None:
            w, c, s, _ = self._state
            m = len(w)
            row = _k.merge_q(c[i], s[i], c, s)
            row[i] = np.inf
            self._q[i, :m] = row
            self._q[:m, i] = row

    def merge_candidates(self):
        """``(i, j, cost)`` of the cheapest pair to merge."""
        if self.m < 2:
            raise ValueError("merging needs at least two kernels")
        if self._q is None:
            self._build_q()
        w = self._state[0]
        i, j, cost = _k.best_pair(self._q, w, len(w))
        return int(i), int(j), float(cost)

    def compress_merge(self) -> None:
        """Merge the most similar pair of kernels (one step of compression)."""
        i, j, _ = self.merge_candidates()
        self.merge_pair(i, j)
        w = self._state[0]
        self._state[0][:] = w / w.sum()

    def forget_decay(self, matched_kernel: Optional[int] = None) -> None:
        """Decay all weights; the removed mass reinforces ``matched_kernel``."""
        w, c, s, h = self._state
        if len(w) == 0:
            return
        w = w * self.decay
        if matched_kernel is not None:
            w[matched_kernel] += 1.0 - w.sum()
            h = h.copy()
            h[matched_kernel] += 1
        w = w / w.sum()
        self._set(w, c, s, h)
        drop = np.flatnonzero(w < 1e-6 / len(w))
        if len(drop) and len(drop) < len(w):
            for j in sorted(drop, reverse=True):
                self._remove(int(j))
            w = self._state[0]
            self._state[0][:] = w / w.sum()

    def select_bandwidth(self):
        """Template bandwidth maximizing the leave-one-out likelihood.

        Returns ``(h, sigma)`` with the template equal to ``h * sigma``.
        """
        w, c, _, _ = self._state
        if len(w) < 2:
            raise ValueError("bandwidth selection needs at least two kernels")
        mu = w @ c
        sigma = np.maximum(np.sqrt(w @ ((c - mu) ** 2)), SPREAD_FLOOR)
        z = np.ascontiguousarray((c - mu) / sigma)
        dist = _k.sq_dist_matrix(z)
        ww = np.ascontiguousarray(w)
        obj = lambda lh: _k.loo_loglik(dist, ww, math.exp(lh), self.dim)
        lh = golden_section_max(obj, math.log(H_RANGE[0]), math.log(H_RANGE[1]),
                                math.log1p(H_RTOL))
        return math.exp(lh), sigma, dist

    def bandwidth_update(self) -> None:
        """Re-select the shared template and rewrite every kernel's bandwidth."""
        if self.m < 2:
            return
        h, sigma, dist = self.select_bandwidth()
        self.bandwidth_scale = h
        self.bandwidth = np.maximum(h * sigma, BANDWIDTH_FLOOR)
        w, c, _, hits = self._state
        s = np.broadcast_to(self.bandwidth, c.shape).copy()
        self._set(w, c, s, hits)
        if self._q is not None:
            if np.all(h * sigma >= BANDWIDTH_FLOOR):
                # shared bandwidth h*sigma: Mahalanobis distance is the scaled distance / h^2
                m = len(w)
                self._q[:m, :m] = dist / (h * h)
                self._q[np.arange(m), np.arange(m)] = np.inf
            else:
                self._build_q()

    # -------------------------------------------------------- persistence
    def to_document(self) -> dict:
        w, c, s, h = self._state
        return {
            "format_version": FORMAT_VERSION,
            "dim": self.dim,
            "names": list(self.names),
            "budget": self.budget,
            "decay": self.decay,
            "bandwidth_period": self.bandwidth_period,
            "gate": self.gate,
            "bandwidth_scale": float(self.bandwidth_scale),
            "bandwidth": self.bandwidth.tolist(),
            "update_count": int(self.update_count),
            "kernels": [{"w": float(w[k]), "center": c[k].tolist(), "bandwidth": s[k].tolist(),
                         "hits": int(h[k])} for k in range(len(w))],
        }

    def __repr__(self):
        return (f"MixtureModel(dim={self.dim}, m={self.m}, budget={self.budget}, "
                f"update_count={self.update_count})")


def golden_section_max(f, lo: float, hi: float, tol: float) -> float:
    """Maximizer of a unimodal ``f`` on ``[lo, hi]`` to absolute tolerance ``tol``.

    Ties between the two probes move toward the lower end, so a flat or
    monotonically decreasing objective lands on ``lo``.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    cands = [(f(lo), lo), (f1, x1), (f2, x2), (f(hi), hi)]
    best = max(v for v, _ in cands)
    return next(x for v, x in cands if v == best)


def serialize(model: MixtureModel) -> str:
    """Model document as JSON text, one kernel per line."""
    doc = model.to_document()
    kernels = doc.pop("kernels")
    head = json.dumps(doc, indent=1)
    lines = [json.dumps(k, separators=(",", ":")) for k in kernels]
    body = "[\n  " + ",\n  ".join(lines) + "\n ]" if lines else "[]"
    return head[:-2] + ',\n "kernels": ' + body + "\n}\n"


def deserialize(text: str) -> MixtureModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {doc.get('format_version')!r}")
    try:
        dim = int(doc["dim"])
        kernels = doc["kernels"]
        w = np.array([k["w"] for k in kernels], dtype=float)
        c = np.array([k["center"] for k in kernels], dtype=float).reshape(len(kernels), dim)
        s = np.array([k["bandwidth"] for k in kernels], dtype=float).reshape(len(kernels), dim)
        hits = np.array([k["hits"] for k in kernels], dtype=np.int64)
        model = MixtureModel(dim, doc["names"], budget=doc["budget"], decay=doc["decay"],
                             initial_bandwidth=doc["bandwidth"],
                             bandwidth_period=doc["bandwidth_period"], gate=doc["gate"])
        model.bandwidth = np.array(doc["bandwidth"], dtype=float)
        model.bandwidth_scale = float(doc["bandwidth_scale"])
        model.update_count = int(doc["update_count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"invalid model document: {exc}") from None
    if len(w):
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(c)) and np.all(np.isfinite(s))):
            raise ModelFormatError("non-finite kernel parameter")
        if np.any(w < 0) or np.any(s <= 0) or np.any(hits < 0):
            raise ModelFormatError("kernel weights/bandwidths/hits out of range")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ModelFormatError(f"kernel weights sum to {w.sum()!r}, expected 1")
        if len(w) > model.budget:
            raise ModelFormatError("kernel count exceeds budget")
    model._set(w, c, s, hits)
    return model
