"""Completion of partially known vectors from a :class:`MixtureModel`.

Unknown components are filled by a kernel-weighted regression over the kernel
centers: order 0 is the Nadaraya-Watson weighted mean, order 1 adds a local
linear term in the known components. Each completion carries a plausibility
score, the probability mass of vectors the model considers less likely.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .density import EmptyModelError, MixtureModel

DEFAULT_RIDGE = 1e-8
MAX_RIDGE = 1e-2
COND_LIMIT = 1e12
DEFAULT_MC_SAMPLES = 2000


class SingularFitError(np.linalg.LinAlgError):
    """The local linear system stayed singular after ridge escalation."""


@dataclass
class LocalLinearFit:
    intercept: np.ndarray      # (n_unknown,)
    slope: np.ndarray          # (n_unknown, n_known)
    weight_mass: float
    ridge: float = 0.0
    # weighted means of the regression points; predicting around them is better conditioned
    x_mean: Optional[np.ndarray] = None
    y_mean: Optional[np.ndarray] = None

    def predict(self, x_known) -> np.ndarray:
        x = np.asarray(x_known, dtype=float)
        if self.x_mean is None:
            return self.intercept + self.slope @ x
        return self.y_mean + self.slope @ (x - self.x_mean)


@dataclass
class AssociateResult:
    completed: np.ndarray
    plausibility: float
    fit: Optional[LocalLinearFit] = None
    order: int = 1
    fallback: bool = False     # order 1 was requested but the fit was singular


def _split_mask(model: MixtureModel, mask) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    flags = np.asarray(mask).astype(bool).reshape(-1)
    if flags.shape[0] != model.dim:
        raise ValueError(f"mask has {flags.shape[0]} flags, model has {model.dim} components")
    return flags, np.flatnonzero(flags), np.flatnonzero(~flags)


def _known_values(values, known: np.ndarray, dim: int) -> np.ndarray:
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.shape[0] == dim:
        v = v[known]
    elif v.shape[0] != len(known):
        raise ValueError("values must cover all components or exactly the known ones")
    if not np.all(np.isfinite(v)):
        raise ValueError("known values must be finite")
    return v


def _weights_mass(model, known, xk):
    """Normalized conditional weights and the raw mass ``sum a_k phi_k`` (log domain)."""
    w, c, s, _ = model.arrays()
    if len(w) == 0:
        raise EmptyModelError("model has no kernels")
    from . import kernels as _k
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    lt = _k.log_terms(xk, np.ascontiguousarray(c[:, known]), np.ascontiguousarray(s[:, known]),
                      logw)
    mx = np.max(lt)
    a = np.exp(lt - mx)
    tot = a.sum()
    return a / tot, float(np.exp(mx) * tot)


def nw_estimate(model: MixtureModel, mask, values) -> np.ndarray:
    """Zero-order (Nadaraya-Watson) estimate of the unknown components."""
    _, known, unknown = _split_mask(model, mask)
    if len(unknown) == 0:
        raise ValueError("no unknown components to estimate")
    if len(known) == 0:
        raise ValueError("at least one component must be known")
    xk = _known_values(values, known, model.dim)
    a, _ = _weights_mass(model, known, xk)
    return a @ model.arrays()[1][:, unknown]


def local_linear_fit(model: MixtureModel, mask, values, ridge: float = DEFAULT_RIDGE,
                     zero_slope: bool = False) -> LocalLinearFit:
    """Kernel-weighted least-squares fit ``y_i ~ alpha_i + beta_i . x`` over the centers.

    Weights are ``a_k * phi(values - center_k | known)``. The slope block gets a
    ridge term ``ridge * trace(S) / d_known`` where ``S`` is the weighted scatter
    of the known center coordinates; the intercept is never penalized. When the
    system is ill-conditioned the ridge factor escalates tenfold up to 1e-2
    before :class:`SingularFitError` is raised. ``zero_slope`` pins ``beta = 0``.
    """
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    _, known, unknown = _split_mask(model, mask)
    if len(unknown) == 0:
        raise ValueError("no unknown components to estimate")
    if len(known) == 0:
        raise ValueError("at least one component must be known")
    xk = _known_values(values, known, model.dim)
    a, mass = _weights_mass(model, known, xk)
    c = model.arrays()[1]
    X = c[:, known]
    Y = c[:, unknown]
    xbar = a @ X
    ybar = a @ Y
    nk = len(known)
    if zero_slope:
        slope = np.zeros((len(unknown), nk))
        return LocalLinearFit(ybar.copy(), slope, mass, 0.0, xbar, ybar)
    # centering at the weighted mean decouples intercept and slope
    Xc = X - xbar
    S = Xc.T @ (a[:, None] * Xc)
    B = Xc.T @ (a[:, None] * (Y - ybar))
    tr = float(np.trace(S))
    factor = ridge
    while True:
        lam = factor * tr / nk
        A = S + lam * np.eye(nk)
        ev = np.linalg.eigvalsh(A)
        if ev[-1] > 0 and ev[0] > ev[-1] / COND_LIMIT:
            break
        if factor >= MAX_RIDGE:
            raise SingularFitError("local linear system is singular")
        factor = MAX_RIDGE if factor == 0 else min(MAX_RIDGE, factor * 10.0)
    beta = np.linalg.solve(A, B).T          # (n_unknown, n_known)
    alpha = ybar - beta @ xbar
    if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
        raise SingularFitError("local linear fit produced non-finite coefficients")
    return LocalLinearFit(alpha, beta, mass, factor, xbar, ybar)


class PlausibilityReference:
    """Sorted log-densities of Monte-Carlo draws from a model snapshot.

    The plausibility of a point is the fraction of draws whose density does not
    exceed the point's density. Building the reference is the expensive part;
    scoring is a binary search, so callers that score many points against an
    unchanged model should keep one instance around.
    """

    def __init__(self, model: MixtureModel, mc_samples: int = DEFAULT_MC_SAMPLES, seed: int = 0):
        if mc_samples < 1:
            raise ValueError("mc_samples must be positive")
        if model.m == 0:
            raise EmptyModelError("model has no kernels")
        self.model = model
        self.mc_samples = int(mc_samples)
        self.seed = seed
        draws = model.draw_sample(np.random.default_rng(seed), self.mc_samples)
        self._sorted = np.sort(model.log_density_many(draws))

    def score_log_density(self, log_density: float) -> float:
        k = np.searchsorted(self._sorted, log_density, side="right")
        return float(k) / self.mc_samples

    def score(self, point) -> float:
        return self.score_log_density(self.model.log_density(point))


def plausibility(model: MixtureModel, point, mc_samples: int = DEFAULT_MC_SAMPLES,
                 seed: int = 0) -> float:
    """Monte-Carlo estimate of ``P(density(X) <= density(point))`` for ``X ~ model``."""
    return PlausibilityReference(model, mc_samples, seed).score(point)


def associate(model: MixtureModel, values, mask, order: int = 1, *,
              ridge: float = DEFAULT_RIDGE, mc_samples: int = DEFAULT_MC_SAMPLES, seed: int = 0,
              allow_unconditional: bool = False,
              reference: Optional[PlausibilityReference] = None) -> AssociateResult:
    """Complete the components of ``values`` whose ``mask`` flag is 0.

    Known components are copied verbatim. Order 1 uses the local linear fit and
    falls back to order 0 when that fit is singular. An all-known mask only
    scores the vector. An all-unknown mask is rejected unless
    ``allow_unconditional`` is set, in which case the mixture mean is returned.
    ``reference`` reuses a prebuilt plausibility reference for ``model``.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    if model.m == 0:
        raise EmptyModelError("model has no kernels")
    flags, known, unknown = _split_mask(model, mask)
    vals = np.asarray(values, dtype=float).reshape(-1)
    if vals.shape[0] != model.dim:
        raise ValueError(f"values must have {model.dim} entries (unknowns may be NaN)")
    completed = vals.copy()
    fit = None
    fallback = False
    if len(unknown) == 0:
        pass
    elif len(known) == 0:
        if not allow_unconditional:
            raise ValueError("every component is unknown; pass allow_unconditional=True "
                             "to get the mixture mean")
        completed = model.mean()
    else:
        xk = _known_values(vals[known], known, model.dim)
        if order == 1:
            try:
                fit = local_linear_fit(model, flags, xk, ridge=ridge)
                completed[unknown] = fit.predict(xk)
            except SingularFitError:
                fallback = True
        if order == 0 or fallback:
            completed[unknown] = nw_estimate(model, flags, xk)
    if reference is None:
        reference = PlausibilityReference(model, mc_samples, seed)
    score = reference.score(completed)
    return AssociateResult(completed, score, fit, order if not fallback else 0, fallback)


def detect_corrupt(model: MixtureModel, values, mask=None, threshold: float = 0.2, *,
                   order: int = 1, mc_samples: int = DEFAULT_MC_SAMPLES,
                   seed: int = 0) -> List[Tuple[int, float]]:
    """Components whose re-estimation raises plausibility by more than ``threshold``.

    Returns ``(index, gain)`` pairs sorted by gain, largest first.
    """
    flags = np.ones(model.dim, dtype=bool) if mask is None else np.asarray(mask).astype(bool)
    if not flags.all():
        raise ValueError("corruption detection needs a fully known vector")
    if model.m == 0:
        raise EmptyModelError("model has no kernels")
    vals = np.asarray(values, dtype=float).reshape(-1)
    ref = PlausibilityReference(model, mc_samples, seed)
    base = ref.score(vals)
    out = []
    if model.dim < 2:
        return out
    for i in range(model.dim):
        local = flags.copy()
        local[i] = False
        res = associate(model, vals, local, order, reference=ref)
        gain = res.plausibility - base
        if gain > threshold:
            out.append((i, gain))
    out.sort(key=lambda t: (-t[1], t[0]))
    return out


@dataclass
class Classification:
    label: Optional[int]
    scores: np.ndarray
    plausibility: float


def classify(model: MixtureModel, pattern, class_count: int, *,
             mc_samples: int = DEFAULT_MC_SAMPLES, seed: int = 0,
             reference: Optional[PlausibilityReference] = None) -> Classification:
    """Classify ``pattern`` with a model of concatenated (pattern, one-hot) vectors.

    The class block is completed at order 0, which makes each score the
    posterior class mass. Exact ties go to the lowest index. With
    ``class_count == 0`` only the plausibility is computed and ``label`` is None.
    """
    x = np.asarray(pattern, dtype=float).reshape(-1)
    if class_count < 0 or x.shape[0] + class_count != model.dim:
        raise ValueError(f"pattern ({x.shape[0]}) + classes ({class_count}) "
                         f"!= model dimension ({model.dim})")
    vals = np.concatenate([x, np.full(class_count, np.nan)])
    mask = np.concatenate([np.ones(x.shape[0], dtype=bool), np.zeros(class_count, dtype=bool)])
    res = associate(model, vals, mask, order=0, mc_samples=mc_samples, seed=seed,
                    reference=reference)
    if class_count == 0:
        return Classification(None, np.empty(0), res.plausibility)
    scores = res.completed[x.shape[0]:]
    return Classification(int(np.argmax(scores)), scores, res.plausibility)


def mask_from_names(names: Sequence[str], unknown: Sequence[str]) -> np.ndarray:
    missing = set(unknown) - set(names)
    if missing:
        raise ValueError(f"unknown component(s): {sorted(missing)}")
    return np.array([n not in set(unknown) for n in names], dtype=bool)
