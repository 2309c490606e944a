"""Gaussian and Student's t densities in the covariance parametrization.

The t-distribution here is parametrized by its *covariance* matrix rather
than the classical scale matrix, so ``t_d(x; mu, cov, nu)`` has covariance
``cov`` for every ``nu > 2``.  All densities are computed in log space; the
plain ``*_pdf`` functions are thin ``exp`` wrappers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve_triangular
from scipy.special import gammaln, stdtr

LOG_2PI = float(np.log(2.0 * np.pi))
PD_RELATIVE_TOL = 1e-12


class DefinitenessError(ValueError):
    """A covariance matrix is not (numerically) positive definite."""


class DomainError(ValueError):
    """A distribution parameter lies outside its admissible range."""


def cholesky_factor(cov: ArrayLike) -> NDArray[np.float64]:
    """Lower Cholesky factor of ``cov`` with a scale-relative pivot check.

    Raises DefinitenessError naming the smallest eigenvalue (if the
    factorization fails) or the smallest pivot (if it is too small).
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape[0] != cov.shape[1]:
        raise DefinitenessError(f"covariance must be square, got shape {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise DefinitenessError("covariance contains non-finite entries")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh((cov + cov.T) / 2)
        raise DefinitenessError(
            f"covariance is not positive definite (smallest eigenvalue {eig.min():.6g})"
        ) from None
    pivots = np.diag(chol) ** 2
    scale = float(np.max(np.diag(cov)))
    k = int(np.argmin(pivots))
    if not pivots[k] > PD_RELATIVE_TOL * scale:
        raise DefinitenessError(
            f"covariance is numerically singular: Cholesky pivot {k} = {pivots[k]:.6g} "
            f"<= {PD_RELATIVE_TOL:g} * {scale:.6g}"
        )
    return chol


def log_t_normalizer(d: int, nu: float | NDArray) -> float | NDArray:
    """log C_d(nu) = log Gamma((d+nu)/2) - log Gamma(nu/2) - (d/2) log(pi (nu-2))."""
    nu = np.asarray(nu, dtype=float)
    out = gammaln((d + nu) / 2.0) - gammaln(nu / 2.0) - 0.5 * d * np.log(np.pi * (nu - 2.0))
    return out if out.ndim else float(out)


def _check_dof(nu: float) -> None:
    if not nu > 2:
        raise DomainError(f"degrees of freedom must exceed 2, got {nu}")


@dataclass(frozen=True, eq=False)
class MvnParams:
    """Mean and covariance of a d-variate Gaussian."""

    mean: NDArray[np.float64]
    cov: NDArray[np.float64]

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"mean has dimension {mean.size} but cov has shape {cov.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        _ = self.chol  # validates definiteness eagerly

    @property
    def dim(self) -> int:
        return self.mean.size

    @cached_property
    def chol(self) -> NDArray[np.float64]:
        return cholesky_factor(self.cov)

    @cached_property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def mahalanobis(self, x: ArrayLike) -> NDArray[np.float64]:
        """Quadratic form (x - mean)' cov^{-1} (x - mean) for rows of ``x``."""
        x = np.asarray(x, dtype=float)
        dev = np.atleast_2d(x - self.mean)
        z = solve_triangular(self.chol, dev.T, lower=True, check_finite=False)
        q = np.sum(z * z, axis=0)
        return q if x.ndim > 1 else q[0]


@dataclass(frozen=True, eq=False)
class MvtParams(MvnParams):
    """Mean, covariance and degrees of freedom of a d-variate t (covariance form)."""

    dof: float

    def __post_init__(self) -> None:
        _check_dof(self.dof)
        super().__post_init__()


def mvn_logpdf(x: ArrayLike, params: MvnParams) -> float | NDArray:
    """Log density of n_d(x; mean, cov); rows of a 2-d ``x`` are evaluated separately."""
    q = params.mahalanobis(x)
    return -0.5 * (params.dim * LOG_2PI + params.logdet + q)


def mvn_pdf(x: ArrayLike, params: MvnParams) -> float | NDArray:
    return np.exp(mvn_logpdf(x, params))


def mvt_logpdf(x: ArrayLike, params: MvtParams) -> float | NDArray:
    """Log density of t_d(x; mean, cov, dof) with ``cov`` the covariance matrix."""
    d, nu = params.dim, params.dof
    q = params.mahalanobis(x)
    return (
        log_t_normalizer(d, nu)
        - 0.5 * params.logdet
        - 0.5 * (d + nu) * np.log1p(q / (nu - 2.0))
    )


def mvt_pdf(x: ArrayLike, params: MvtParams) -> float | NDArray:
    return np.exp(mvt_logpdf(x, params))


def t_logpdf_1d(x, mu, var, dof):
    """Vectorized univariate t log density with variance ``var`` (not scale)."""
    x, mu, var, dof = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, mu, var, dof)))
    z2 = (x - mu) ** 2 / var
    return log_t_normalizer(1, dof) - 0.5 * np.log(var) - 0.5 * (1.0 + dof) * np.log1p(z2 / (dof - 2.0))


def t_cdf_1d(x, mu, var, dof):
    """CDF of the univariate t with mean ``mu``, variance ``var`` and ``dof`` > 2.

    Standardizes to the classical Student-t scale and evaluates the
    regularized incomplete beta form of its CDF.
    """
    dof_arr = np.asarray(dof, dtype=float)
    if np.any(~(dof_arr > 2)):
        raise DomainError(f"degrees of freedom must exceed 2, got {dof}")
    var_arr = np.asarray(var, dtype=float)
    if np.any(~(var_arr > 0)):
        raise DomainError("variance must be positive")
    z = (np.asarray(x, dtype=float) - mu) / np.sqrt(var_arr * (dof_arr - 2.0) / dof_arr)
    out = stdtr(dof_arr, z)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True, eq=False)
class PartitionedLaw:
    """Marginal and conditional laws of X1 | X2 for a partitioned Gaussian or t vector.

    ``params`` is split after the first ``d1`` coordinates.  ``conditional(x2)``
    returns the law of X1 given X2 = x2 as a parameter object of the same
    family (the t case gains ``d2`` degrees of freedom).
    """

    params: MvnParams
    d1: int

    def __post_init__(self) -> None:
        if not 1 <= self.d1 < self.params.dim:
            raise ValueError(f"split must satisfy 1 <= d1 < {self.params.dim}, got {self.d1}")
        _ = self._chol22

    @property
    def is_t(self) -> bool:
        return isinstance(self.params, MvtParams)

    @property
    def _blocks(self):
        k, mu, cov = self.d1, self.params.mean, self.params.cov
        return mu[:k], mu[k:], cov[:k, :k], cov[:k, k:], cov[k:, k:]

    @cached_property
    def _chol22(self):
        return cholesky_factor(self._blocks[4])

    @cached_property
    def _regression(self):
        # Gamma_12 Gamma_22^{-1} and the Schur complement
        _, _, g11, g12, _ = self._blocks
        tmp = solve_triangular(self._chol22, g12.T, lower=True)
        coef = solve_triangular(self._chol22.T, tmp, lower=False).T
        schur = g11 - tmp.T @ tmp
        return coef, (schur + schur.T) / 2

    def _make(self, mean, cov, dof=None):
        if self.is_t:
            return MvtParams(mean=mean, cov=cov, dof=dof)
        return MvnParams(mean=mean, cov=cov)

    def marginal1(self) -> MvnParams:
        mu1, _, g11, _, _ = self._blocks
        return self._make(mu1, g11, getattr(self.params, "dof", None))

    def marginal2(self) -> MvnParams:
        _, mu2, _, _, g22 = self._blocks
        return self._make(mu2, g22, getattr(self.params, "dof", None))

    def conditional(self, x2: ArrayLike) -> MvnParams:
        mu1, mu2, *_ = self._blocks
        dev = np.asarray(x2, dtype=float) - mu2
        coef, schur = self._regression
        mean = mu1 + coef @ dev
        if not self.is_t:
            return MvnParams(mean=mean, cov=schur)
        nu = self.params.dof
        d2 = dev.size
        z = solve_triangular(self._chol22, dev, lower=True)
        scale = (nu - 2.0 + float(z @ z)) / (nu - 2.0 + d2)
        return MvtParams(mean=mean, cov=scale * schur, dof=nu + d2)


def partition_conditional(params: MvnParams, d1: int) -> PartitionedLaw:
    return PartitionedLaw(params=params, d1=d1)


def logpdf(x: ArrayLike, params: MvnParams) -> float | NDArray:
    """Dispatch on the family of ``params``."""
    if isinstance(params, MvtParams):
        return mvt_logpdf(x, params)
    return mvn_logpdf(x, params)
