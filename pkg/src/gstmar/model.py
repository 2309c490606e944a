"""The G-StMAR model: parameters, mixing weights, densities, moments and likelihood.

A G-StMAR(p, M1, M2) model mixes M1 Gaussian linear autoregressions (GMAR
type) and M2 Student's t autoregressions (StMAR type).  Regime m generates
y_t with probability alpha_{m,t}, proportional to alpha_m times the
stationary density of the regime evaluated at the last p observations.

Arrays of lag windows are laid out most-recent-first:
``window[t] = (y_{t-1}, ..., y_{t-p})``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, NamedTuple, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve_triangular
from scipy.special import ndtr

from .ar_stationary import (
    ArCoefficients,
    RegimeMoments,
    StationarityError,
    is_stationary,
    max_root_modulus,
    stationary_moments,
)
from .distributions import LOG_2PI, cholesky_factor, log_t_normalizer, t_cdf_1d

NU_MAX = 1e7
LikelihoodMode = Literal["exact", "conditional"]


class ModelError(ValueError):
    """Invalid model parameters; ``violations`` lists every failed restriction."""

    def __init__(self, message: str, violations: Sequence[str] = ()):
        super().__init__(message)
        self.violations = list(violations) or [message]


class LikelihoodError(ArithmeticError):
    """The log-likelihood could not be evaluated to a finite number."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class ModelOrder:
    p: int
    m1: int
    m2: int

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ModelError(f"autoregressive order must be >= 1, got {self.p}")
        if self.m1 < 0 or self.m2 < 0 or self.m1 + self.m2 < 1:
            raise ModelError(f"need m1, m2 >= 0 and m1 + m2 >= 1, got ({self.m1}, {self.m2})")

    @property
    def M(self) -> int:
        return self.m1 + self.m2

    def n_params(self, shared_ar: bool = False) -> int:
        """Number of free parameters, M(p+3) + M2 - 1 (fewer when AR parts are shared)."""
        n = self.M * (self.p + 3) + self.m2 - 1
        if shared_ar:
            n -= (self.M - 1) * self.p
        return n

    def __str__(self) -> str:
        return f"G-StMAR({self.p},{self.m1},{self.m2})"


@dataclass(frozen=True, eq=False)
class Regime:
    """One mixture component: intercept, AR coefficients, variance and optional dof."""

    phi0: float
    phi: NDArray[np.float64]
    sigma2: float
    nu: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "phi0", float(self.phi0))
        object.__setattr__(self, "phi", np.atleast_1d(np.asarray(self.phi, dtype=float)))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        if self.nu is not None:
            object.__setattr__(self, "nu", float(self.nu))

    @property
    def is_t(self) -> bool:
        return self.nu is not None

    @property
    def ar(self) -> ArCoefficients:
        return ArCoefficients(self.phi0, self.phi, self.sigma2)

    def replace(self, **kw) -> "Regime":
        d = dict(phi0=self.phi0, phi=self.phi, sigma2=self.sigma2, nu=self.nu)
        d.update(kw)
        return Regime(**d)


class _Prepared(NamedTuple):
    phi0: NDArray
    phi: NDArray  # (M, p)
    sigma2: NDArray
    log_alpha: NDArray
    mu: NDArray
    chol: NDArray  # (M, p, p) Cholesky factors of Gamma_{m,p}
    logdet: NDArray
    nu: NDArray  # inf for Gaussian regimes
    is_t: NDArray


@dataclass(frozen=True, eq=False)
class GStmarModel:
    """Immutable G-StMAR parameter set.

    ``regimes`` lists the m1 Gaussian regimes first, then the m2 t regimes.
    ``alphas`` holds all M mixing-weight parameters; the last one is
    re-derived as one minus the others so the vector sums to one exactly.
    """

    order: ModelOrder
    regimes: tuple[Regime, ...]
    alphas: NDArray[np.float64]
    shared_ar: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        order = self.order
        regimes = tuple(self.regimes)
        alphas = np.atleast_1d(np.asarray(self.alphas, dtype=float)).copy()
        problems = []
        if len(regimes) != order.M:
            raise ModelError(f"{order} needs {order.M} regimes, got {len(regimes)}")
        if alphas.size != order.M:
            raise ModelError(f"{order} needs {order.M} mixing weights, got {alphas.size}")
        if abs(alphas.sum() - 1.0) > 1e-8:
            problems.append(f"mixing weights sum to {alphas.sum():.12g}, not 1")
        alphas[-1] = 1.0 - alphas[:-1].sum()
        if np.any(~(alphas > 0)) or (order.M > 1 and np.any(~(alphas < 1))):
            problems.append(f"mixing weights must lie in (0, 1): {alphas.tolist()}")
        clamped = []
        for m, reg in enumerate(regimes):
            if reg.phi.size != order.p:
                problems.append(f"regime {m + 1}: expected {order.p} AR coefficients, got {reg.phi.size}")
                continue
            if (m < order.m1) == reg.is_t:
                kind = "Gaussian" if m < order.m1 else "Student-t"
                problems.append(f"regime {m + 1} should be {kind}")
            if not np.isfinite(reg.phi0):
                problems.append(f"regime {m + 1}: intercept is not finite")
            if not reg.sigma2 > 0 or not np.isfinite(reg.sigma2):
                problems.append(f"regime {m + 1}: variance must be positive, got {reg.sigma2}")
            if not is_stationary(reg.phi):
                problems.append(f"regime {m + 1}: AR coefficients are not stationary")
            if reg.is_t:
                if not reg.nu > 2:
                    problems.append(f"regime {m + 1}: degrees of freedom must exceed 2, got {reg.nu}")
                elif reg.nu > NU_MAX:
                    clamped.append(m)
        if self.shared_ar and any(not np.array_equal(r.phi, regimes[0].phi) for r in regimes):
            problems.append("shared_ar is set but regimes have different AR coefficients")
        if problems:
            raise ModelError("; ".join(problems), problems)
        if clamped:
            warnings.warn(
                f"degrees of freedom above {NU_MAX:g} clamped for regimes {[m + 1 for m in clamped]}",
                stacklevel=3,
            )
            regimes = tuple(r.replace(nu=NU_MAX) if m in clamped else r for m, r in enumerate(regimes))
        object.__setattr__(self, "regimes", regimes)
        object.__setattr__(self, "alphas", alphas)

    @classmethod
    def from_arrays(cls, p, m1, m2, phi0, phi, sigma2, alphas, nu=(), shared_ar=False, meta=None):
        """Build a model from stacked arrays; ``phi`` is (M, p), or (p,) when shared."""
        order = ModelOrder(p, m1, m2)
        phi = np.asarray(phi, dtype=float)
        if phi.ndim == 1:
            phi = np.tile(phi, (order.M, 1))
        nu = list(nu)
        if len(nu) != m2:
            raise ModelError(f"expected {m2} degrees of freedom, got {len(nu)}")
        regimes = tuple(
            Regime(phi0[m], phi[m], sigma2[m], None if m < m1 else nu[m - m1])
            for m in range(order.M)
        )
        return cls(order, regimes, np.asarray(alphas, dtype=float), shared_ar, dict(meta or {}))

    @property
    def p(self) -> int:
        return self.order.p

    @property
    def M(self) -> int:
        return self.order.M

    @property
    def n_params(self) -> int:
        return self.order.n_params(self.shared_ar)

    @property
    def nus(self) -> NDArray[np.float64]:
        return np.array([r.nu for r in self.regimes[self.order.m1:]], dtype=float)

    @cached_property
    def moments(self) -> tuple[RegimeMoments, ...]:
        return tuple(stationary_moments(r.ar) for r in self.regimes)

    @cached_property
    def prepared(self) -> _Prepared:
        chols = np.array([cholesky_factor(mom.gamma_p_matrix) for mom in self.moments])
        return _Prepared(
            phi0=np.array([r.phi0 for r in self.regimes]),
            phi=np.array([r.phi for r in self.regimes]),
            sigma2=np.array([r.sigma2 for r in self.regimes]),
            log_alpha=np.log(self.alphas),
            mu=np.array([mom.mean for mom in self.moments]),
            chol=chols,
            logdet=2.0 * np.log(np.diagonal(chols, axis1=1, axis2=2)).sum(axis=1),
            nu=np.array([r.nu if r.is_t else np.inf for r in self.regimes]),
            is_t=np.array([r.is_t for r in self.regimes]),
        )

    def with_regimes(self, regimes: Sequence[Regime], alphas: ArrayLike, order: ModelOrder | None = None):
        return GStmarModel(order or self.order, tuple(regimes), np.asarray(alphas), self.shared_ar, dict(self.meta))


# --- vectorized building blocks -------------------------------------------------
# Internal arrays are regime-major, shape (M, n): reductions over the few
# regimes then run as elementwise ops over long contiguous rows.

def logsumexp(a: NDArray, axis: int = 0, keepdims: bool = False) -> NDArray:
    """Max-shifted log-sum-exp; a row loop over the (few) regimes beats scipy's version here."""
    a = np.moveaxis(np.asarray(a, dtype=float), axis, 0)
    amax = a.max(axis=0)
    if not np.all(np.isfinite(amax)):
        amax = np.where(np.isfinite(amax), amax, 0.0)
    acc = np.exp(a[0] - amax)
    for row in a[1:]:
        acc += np.exp(row - amax)
    with np.errstate(divide="ignore"):
        out = np.log(acc) + amax
    return np.expand_dims(out, axis) if keepdims else out


def _as_windows(y_lag: ArrayLike, p: int) -> tuple[NDArray, bool]:
    w = np.asarray(y_lag, dtype=float)
    single = w.ndim == 1
    w = np.atleast_2d(w)
    if w.shape[1] != p:
        raise ValueError(f"lag windows must have length p={p}, got {w.shape[1]}")
    return w, single


def _quad_forms(prep: _Prepared, windows: NDArray) -> NDArray:
    """(M, n) quadratic forms (w - mu_m 1)' Gamma_m^{-1} (w - mu_m 1)."""
    n, M = windows.shape[0], prep.mu.size
    out = np.empty((M, n))
    wt = windows.T
    for m in range(M):
        if wt.shape[0] == 1:
            out[m] = (wt[0] - prep.mu[m]) ** 2 / prep.chol[m, 0, 0] ** 2
            continue
        z = solve_triangular(prep.chol[m], wt - prep.mu[m], lower=True, check_finite=False)
        out[m] = np.einsum("ij,ij->j", z, z)
    return out


def _log_stationary_from_q(prep: _Prepared, q: NDArray, d: int, logdet: NDArray) -> NDArray:
    out = np.empty_like(q)
    for m in range(prep.mu.size):
        if prep.is_t[m]:
            nu = prep.nu[m]
            out[m] = log_t_normalizer(d, nu) - 0.5 * logdet[m] - 0.5 * (d + nu) * np.log1p(q[m] / (nu - 2.0))
        else:
            out[m] = -0.5 * (d * LOG_2PI + logdet[m] + q[m])
    return out


class _CondParts(NamedTuple):
    log_weights: NDArray  # (M, n) log alpha_{m,t}
    mean: NDArray  # (M, n) mu_{m,t}
    var: NDArray  # (M, n) sigma^2_{m,t}
    dof: NDArray  # (M,) conditional dof, inf for Gaussian regimes


def _conditional_parts(model: GStmarModel, windows: NDArray) -> _CondParts:
    prep = model.prepared
    p = model.p
    q = _quad_forms(prep, windows)
    log_num = _log_stationary_from_q(prep, q, p, prep.logdet) + prep.log_alpha[:, None]
    log_w = log_num - logsumexp(log_num, axis=0, keepdims=True)
    mean = prep.phi0[:, None] + prep.phi @ windows.T
    var = np.empty_like(q)
    for m in range(prep.mu.size):
        if prep.is_t[m]:
            nu = prep.nu[m]
            var[m] = prep.sigma2[m] * (nu - 2.0 + q[m]) / (nu - 2.0 + p)
        else:
            var[m] = prep.sigma2[m]
    return _CondParts(log_w, mean, var, np.where(prep.is_t, prep.nu + p, np.inf))


def _component_logpdf(parts: _CondParts, y: NDArray) -> NDArray:
    """(M, n) log of the regime conditional densities at y."""
    resid2 = (y - parts.mean) ** 2
    out = np.empty_like(resid2)
    for m in range(resid2.shape[0]):
        df, var = parts.dof[m], parts.var[m]
        if np.isfinite(df):
            out[m] = log_t_normalizer(1, df) - 0.5 * np.log(var) - 0.5 * (1.0 + df) * np.log1p(
                resid2[m] / ((df - 2.0) * var)
            )
        else:
            out[m] = -0.5 * (LOG_2PI + np.log(var) + resid2[m] / var)
    return out


def _normalized_weights(parts: _CondParts) -> NDArray:
    w = np.exp(parts.log_weights)
    return w / w.sum(axis=0, keepdims=True)


def _pair(model: GStmarModel, y: ArrayLike, y_lag: ArrayLike):
    windows, single = _as_windows(y_lag, model.p)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if single and y.size > 1:
        windows = np.broadcast_to(windows, (y.size, model.p))
    return y, windows, single and y.size == 1


# --- public operations ----------------------------------------------------------

def log_mixing_weights(model: GStmarModel, y_lag: ArrayLike) -> NDArray:
    windows, single = _as_windows(y_lag, model.p)
    lw = _conditional_parts(model, windows).log_weights.T
    return lw[0] if single else lw


def mixing_weights(model: GStmarModel, y_lag: ArrayLike) -> NDArray:
    """Mixing weights alpha_{m,t} given the lag window(s), shape (M,) or (n, M)."""
    windows, single = _as_windows(y_lag, model.p)
    w = _normalized_weights(_conditional_parts(model, windows)).T
    return w[0] if single else w


def conditional_logdensity(model: GStmarModel, y: ArrayLike, y_lag: ArrayLike) -> float | NDArray:
    """log f(y | y_lag); ``y`` may be a vector paired row-wise with ``y_lag``
    or a vector of points evaluated against a single lag window."""
    y, windows, scalar = _pair(model, y, y_lag)
    parts = _conditional_parts(model, windows)
    out = logsumexp(parts.log_weights + _component_logpdf(parts, y), axis=0)
    return float(out[0]) if scalar else out


def conditional_density(model: GStmarModel, y: ArrayLike, y_lag: ArrayLike) -> float | NDArray:
    return np.exp(conditional_logdensity(model, y, y_lag))


def conditional_cdf(model: GStmarModel, y: ArrayLike, y_lag: ArrayLike) -> float | NDArray:
    """P(y_t <= y | y_lag): mixture of Gaussian and t CDFs with the mixing weights."""
    y, windows, scalar = _pair(model, y, y_lag)
    parts = _conditional_parts(model, windows)
    weights = _normalized_weights(parts)
    cdf = np.empty_like(parts.mean)
    for m in range(model.M):
        if np.isfinite(parts.dof[m]):
            cdf[m] = t_cdf_1d(y, parts.mean[m], parts.var[m], parts.dof[m])
        else:
            cdf[m] = ndtr((y - parts.mean[m]) / np.sqrt(parts.var[m]))
    out = np.sum(weights * cdf, axis=0)
    return float(out[0]) if scalar else out


class ConditionalMoments(NamedTuple):
    mean: float | NDArray
    variance: float | NDArray
    gmar_part: float | NDArray
    stmar_part: float | NDArray
    mean_part: float | NDArray
    regime_means: NDArray
    regime_variances: NDArray
    weights: NDArray


def conditional_moments(model: GStmarModel, y_lag: ArrayLike) -> ConditionalMoments:
    """Conditional mean and the three-part conditional variance given the lag window.

    The variance splits into the weighted GMAR-type variances, the weighted
    StMAR-type (time-varying) variances and the dispersion of regime means.
    """
    windows, single = _as_windows(y_lag, model.p)
    parts = _conditional_parts(model, windows)
    w = _normalized_weights(parts)
    mean = np.sum(w * parts.mean, axis=0)
    is_t = model.prepared.is_t
    gmar = np.sum(w[~is_t] * parts.var[~is_t], axis=0)
    stmar = np.sum(w[is_t] * parts.var[is_t], axis=0)
    disp = np.sum(w * (parts.mean - mean) ** 2, axis=0)
    out = ConditionalMoments(mean, gmar + stmar + disp, gmar, stmar, disp, parts.mean.T, parts.var.T, w.T)
    if single:
        return ConditionalMoments(*(v[0] for v in out))
    return out


def _regime_log_marginal(model: GStmarModel, windows: NDArray) -> NDArray:
    """(M, n) log stationary regime densities of consecutive windows of length h <= p+1."""
    h = windows.shape[1]
    if not 1 <= h <= model.p + 1:
        raise ValueError(f"window length must be between 1 and p+1={model.p + 1}, got {h}")
    prep = model.prepared
    q = np.empty((model.M, windows.shape[0]))
    logdet = np.empty(model.M)
    for m, mom in enumerate(model.moments):
        chol = prep.chol[m] if h == model.p else cholesky_factor(mom.gamma_p1_matrix[:h, :h])
        z = solve_triangular(chol, (windows - mom.mean).T, lower=True, check_finite=False)
        q[m] = np.einsum("ij,ij->j", z, z)
        logdet[m] = 2.0 * np.log(np.diag(chol)).sum()
    return _log_stationary_from_q(prep, q, h, logdet)


def stationary_logdensity(model: GStmarModel, y_window: ArrayLike) -> float | NDArray:
    """Log stationary density of h consecutive observations (h <= p+1).

    For h = p this is the p-dimensional mixture of n_p and t_p densities;
    shorter windows use the corresponding marginal blocks.
    """
    w = np.asarray(y_window, dtype=float)
    single = w.ndim <= 1
    windows = np.atleast_2d(w) if w.ndim else w.reshape(1, 1)
    out = logsumexp(model.prepared.log_alpha[:, None] + _regime_log_marginal(model, windows), axis=0)
    return float(out[0]) if single else out


def stationary_density(model: GStmarModel, y_window: ArrayLike) -> float | NDArray:
    return np.exp(stationary_logdensity(model, y_window))


class UnconditionalMoments(NamedTuple):
    mean: float
    gamma: NDArray  # gamma_0..gamma_p of the process
    regime_means: NDArray
    regime_variances: NDArray


def unconditional_moments(model: GStmarModel) -> UnconditionalMoments:
    """Stationary mean and autocovariances gamma_0..gamma_p of the mixture process.

    gamma_j = sum_m alpha_m gamma_{m,j} + sum_m alpha_m (mu_m - mu_y)^2; the
    between-regime term does not depend on j.
    """
    a = model.alphas
    mus = np.array([mom.mean for mom in model.moments])
    gam = np.array([mom.gamma for mom in model.moments])
    mu_y = float(a @ mus)
    gamma = a @ gam + a @ (mus - mu_y) ** 2
    return UnconditionalMoments(mu_y, gamma, mus, gam[:, 0].copy())


def lag_matrix(series: ArrayLike, p: int) -> tuple[NDArray, NDArray]:
    """Targets y_t (t = p..n-1) and their lag windows (y_{t-1}, ..., y_{t-p})."""
    y = np.asarray(series, dtype=float)
    if y.ndim != 1 or y.size < p + 1:
        raise ValueError(f"series must be 1-d with at least p+1={p + 1} observations")
    windows = sliding_window_view(y[:-1], p)[:, ::-1]
    return y[p:], windows


def loglik_terms(model: GStmarModel, series: ArrayLike) -> NDArray:
    """Per-observation conditional log densities l_t, t = 1..T."""
    y, windows = lag_matrix(series, model.p)
    parts = _conditional_parts(model, windows)
    return logsumexp(parts.log_weights + _component_logpdf(parts, y), axis=0)


def loglik_and_peak_weights(model: GStmarModel, y: NDArray, windows: NDArray) -> tuple[float, NDArray]:
    """Conditional log-likelihood and max_t alpha_{m,t} per regime, from prebuilt lag windows.

    Used by the genetic search, which needs both in one pass; non-finite
    likelihoods come back as -inf instead of raising.
    """
    with np.errstate(all="ignore"):
        parts = _conditional_parts(model, windows)
        total = float(logsumexp(parts.log_weights + _component_logpdf(parts, y), axis=0).sum())
        peak = np.exp(parts.log_weights.max(axis=1))
    return (total if np.isfinite(total) else -np.inf), peak


def log_likelihood(model: GStmarModel, series: ArrayLike, mode: LikelihoodMode = "exact") -> float:
    """Exact (stationary initial values) or conditional log-likelihood, unscaled."""
    if mode not in ("exact", "conditional"):
        raise ValueError(f"mode must be 'exact' or 'conditional', got {mode!r}")
    series = np.asarray(series, dtype=float)
    with np.errstate(all="ignore"):
        terms = loglik_terms(model, series)
    bad = np.flatnonzero(~np.isfinite(terms))
    if bad.size:
        raise LikelihoodError(f"non-finite log density at t={bad[0] + 1}", index=int(bad[0] + 1))
    total = float(terms.sum())
    if mode == "exact":
        init = stationary_logdensity(model, series[: model.p][::-1])
        if not np.isfinite(init):
            raise LikelihoodError("non-finite stationary density of the initial values", index=0)
        total += init
    return total


def canonicalize(model: GStmarModel) -> GStmarModel:
    """Order regimes by descending alpha within the Gaussian and t blocks.

    Ties (alphas equal to 12 decimals, since the last alpha is re-derived
    as one minus the rest) are broken by ascending variance, then ascending dof.
    """
    m1 = model.order.m1
    a = model.alphas
    a_key = np.round(a, 12)
    regs = model.regimes

    def key(m):
        return (-a_key[m], regs[m].sigma2, regs[m].nu if regs[m].is_t else 0.0)

    perm = sorted(range(m1), key=key) + sorted(range(m1, model.M), key=key)
    if perm == list(range(model.M)):
        return model
    return model.with_regimes([regs[m] for m in perm], a[perm])


def is_identified_order(model: GStmarModel) -> bool:
    a, m1 = model.alphas, model.order.m1
    return bool(np.all(np.diff(a[:m1]) < 0) and np.all(np.diff(a[m1:]) < 0))


def max_ar_modulus(model: GStmarModel) -> float:
    return max(max_root_modulus(r.phi) for r in model.regimes)


__all__ = [
    "GStmarModel",
    "ModelOrder",
    "Regime",
    "ModelError",
    "LikelihoodError",
    "StationarityError",
    "mixing_weights",
    "log_mixing_weights",
    "conditional_density",
    "conditional_logdensity",
    "conditional_cdf",
    "conditional_moments",
    "stationary_density",
    "stationary_logdensity",
    "unconditional_moments",
    "lag_matrix",
    "loglik_terms",
    "log_likelihood",
    "canonicalize",
]
