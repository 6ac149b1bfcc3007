"""Regret and bias analytics for online output predictors.

Covers the time-averaged squared gap to the reference predictor, the
pole-matching decay level tau that governs how fast the asymptotic bias
shrinks as basis blocks are added, the resulting geometric bias ceiling,
and empirical rate fitting for the convergence checks.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RegretSeries",
    "BoundParams",
    "log_checkpoints",
    "average_regret",
    "tau",
    "bias_bound",
    "RateFit",
    "fit_convergence_rate",
    "fit_alpha",
]


@dataclass(frozen=True)
class RegretSeries:
    """Running-average squared prediction gaps sampled at step counts."""

    counts: np.ndarray
    values: np.ndarray
    bias_estimate: float = 0.0

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=int)
        values = np.asarray(self.values, dtype=float)
        if counts.shape != values.shape:
            raise ValueError("counts and values must have matching lengths")
        if values.size and np.min(values) < 0:
            raise ValueError("average regret values must be nonnegative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "values", values)


def log_checkpoints(horizon, per_decade=8):
    """Logarithmically spaced step counts ceil(10^(k/per_decade)) <= horizon.

    The horizon itself is always included so the final average is logged.
    """
    horizon = int(horizon)
    if horizon <= 0:
        return np.zeros(0, dtype=int)
    k_max = int(np.ceil(per_decade * np.log10(horizon))) + 1
    pts = np.ceil(10.0 ** (np.arange(k_max + 1) / per_decade)).astype(int)
    pts = pts[pts <= horizon]
    return np.unique(np.concatenate([pts, [horizon]]))


def average_regret(predictions, reference, checkpoints=None):
    """Running averages of the squared gap between two prediction streams.

    ``predictions`` and ``reference`` are (T, p) arrays (or 1-D for scalar
    outputs).  Returns the averages at every N, or at ``checkpoints``.
    """
    a = np.atleast_2d(np.asarray(predictions, dtype=float).T).T
    b = np.atleast_2d(np.asarray(reference, dtype=float).T).T
    if a.shape != b.shape:
        raise ValueError(f"prediction streams differ in shape: {a.shape} vs {b.shape}")
    T = a.shape[0]
    sq = np.sum((a - b) ** 2, axis=1)
    running = np.cumsum(sq) / np.arange(1, T + 1) if T else np.zeros(0)
    if checkpoints is None:
        counts = np.arange(1, T + 1)
        return RegretSeries(counts=counts, values=running)
    counts = np.asarray(checkpoints, dtype=int)
    return RegretSeries(counts=counts, values=running[counts - 1])


def _blaschke_level(lam, mu):
    lam = [complex(z) for z in np.atleast_1d(np.asarray(lam, dtype=complex))]
    mu = [complex(z) for z in np.atleast_1d(np.asarray(mu, dtype=complex))]
    for name, zs in (("lambda", lam), ("mu", mu)):
        for i, z in enumerate(zs):
            if abs(z) >= 1.0:
                raise ValueError(f"{name}[{i}] has modulus {abs(z):.6g} >= 1")
    best = 0.0
    for l in lam:
        prod = 1.0
        for u in mu:
            prod *= abs((l - u) / (1.0 - np.conj(l) * u))
        best = max(best, prod)
    return best, len(mu)


def tau(lam, mu, delta=1e-9):
    """Pole-matching decay level.

    ``(max_j prod_k |(lam_j - mu_k)/(1 - conj(lam_j) mu_k)|)^(2/n_b) + delta``
    for reference-predictor eigenvalues ``lam`` and basis poles ``mu``.
    A perfect pole match drives the product to zero; poles near the unit
    circle with poorly matched bases push it toward one.  ``delta`` must be
    positive for the downstream bound but is kept tiny by default.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    best, n_b = _blaschke_level(lam, mu)
    return float(best ** (2.0 / n_b) + delta)


@dataclass(frozen=True)
class BoundParams:
    """Inputs of the geometric bias ceiling.

    ``alpha_fit`` is the multiplicative constant; the theory guarantees
    its existence but not its value, so it is fitted from exact biases via
    :func:`fit_alpha` (and defaults to 1 for unit-constant reporting).
    """

    lam: tuple
    mu: tuple
    q: int
    delta: float = 1e-9
    alpha_fit: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "lam", tuple(complex(z) for z in np.atleast_1d(np.asarray(self.lam, dtype=complex))))
        object.__setattr__(self, "mu", tuple(complex(z) for z in np.atleast_1d(np.asarray(self.mu, dtype=complex))))
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    @property
    def n_b(self):
        return len(self.mu)

    def tau_value(self):
        return tau(self.lam, self.mu, self.delta)


def bias_bound(params):
    """Geometric ceiling ``alpha_fit * tau^((q+1) n_b) / (1 - tau^n_b)``.

    Raises if tau >= 1: the bound is then vacuous and is reported as such
    rather than clamped.
    """
    t = params.tau_value()
    n_b = params.n_b
    if t >= 1.0:
        raise ValueError(f"bound vacuous: tau = {t:.6g} >= 1 for this pole pairing")
    return float(params.alpha_fit * t ** ((params.q + 1) * n_b) / (1.0 - t**n_b))


def pooled_deviation(counts, values, bias):
    """Mean absolute deviation from the bias, pooled across runs.

    ``values`` has one row per run, one column per checkpoint.  The almost
    sure rate statements concern the magnitude of R_N minus its
    asymptote, whose sign fluctuates run by run, so pooling averages
    |R_N - bias| rather than the signed deviation (whose mean can cross
    zero and has no log-log slope).
    """
    counts = np.asarray(counts, dtype=int)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[1] != counts.size:
        raise ValueError("values must have one column per checkpoint")
    dev = np.mean(np.abs(values - float(bias)), axis=0)
    return RegretSeries(counts=counts, values=dev, bias_estimate=0.0)


@dataclass(frozen=True)
class RateFit:
    slope: float
    stderr: float
    n_points: int


def fit_convergence_rate(series, bias, n_min=None, n_max=None, min_points=10):
    """Log-log slope of (R_N - bias) against N with its standard error.

    The fit window defaults to the final decade of the series.  Every
    point used must satisfy R_N > bias; a nonpositive excess means the
    bias estimate is too large and the caller should re-estimate it.
    """
    counts = np.asarray(series.counts, dtype=float)
    values = np.asarray(series.values, dtype=float)
    excess_all = values - float(bias)
    if n_max is None:
        n_max = counts[-1]
    if n_min is None:
        n_min = n_max / 10.0
    mask = (counts >= n_min) & (counts <= n_max)
    used = np.flatnonzero(mask)
    if used.size < 3:
        raise ValueError("fit window contains fewer than 3 checkpoints")
    excess = excess_all[used]
    if np.min(excess) <= 0:
        raise ValueError(
            "R_N - bias is nonpositive at a used checkpoint; the bias estimate "
            "is too large and should be re-estimated"
        )
    if int(np.sum(excess_all > 0)) < min_points:
        raise ValueError(
            f"need at least {min_points} checkpoints with R_N above the bias to fit a rate"
        )
    x = np.log(counts[used])
    y = np.log(excess)
    X = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(1, x.size - 2)
    s2 = float(resid @ resid) / dof
    sxx = float(np.sum((x - np.mean(x)) ** 2))
    stderr = math.sqrt(s2 / sxx) if sxx > 0 else math.inf
    return RateFit(slope=float(coef[1]), stderr=stderr, n_points=int(x.size))


def fit_alpha(qs, biases, lam, mu, delta=1e-9, bias_floor=1e-14):
    """Smallest constant making the geometric ceiling dominate the biases.

    ``alpha_fit = max_q bias(q) (1 - tau^n_b) / tau^((q+1) n_b)``.  A zero
    pole-matching level together with a clearly nonzero bias contradicts
    the exact-representation property and flags a construction bug.
    """
    qs = np.asarray(qs, dtype=int)
    biases = np.asarray(biases, dtype=float)
    if qs.shape != biases.shape:
        raise ValueError("qs and biases must have matching lengths")
    level, n_b = _blaschke_level(lam, mu)
    if level == 0.0 and np.any(biases > bias_floor):
        raise ArithmeticError(
            "pole-matching level is exactly zero but a bias is nonzero; "
            "this contradicts exact representation and indicates a bug"
        )
    t = float(level ** (2.0 / n_b) + delta)
    if t >= 1.0:
        raise ValueError(f"bound vacuous: tau = {t:.6g} >= 1")
    alpha = 0.0
    for q, b in zip(qs, biases):
        alpha = max(alpha, float(b) * (1.0 - t**n_b) / t ** ((int(q) + 1) * n_b))
    return alpha
