"""Stationarity and stationary second moments of linear AR(p) components."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

STATIONARITY_TOL = 1e-8
BOUNDARY_DELTA = 0.01
# partial autocorrelations are kept this far from +-1 so the output stays
# strictly inside the stationarity region under STATIONARITY_TOL
_PACF_MAX = 1.0 - 1e-6


class StationarityError(ValueError):
    """AR coefficients lie outside (or numerically on) the stationarity region."""


@dataclass(frozen=True, eq=False)
class ArCoefficients:
    intercept: float
    coeffs: NDArray[np.float64]
    noise_var: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeffs", np.atleast_1d(np.asarray(self.coeffs, dtype=float)))
        if not self.noise_var > 0:
            raise ValueError(f"noise variance must be positive, got {self.noise_var}")

    @property
    def p(self) -> int:
        return self.coeffs.size


@dataclass(frozen=True, eq=False)
class RegimeMoments:
    mean: float
    gamma: NDArray[np.float64]  # gamma_0, ..., gamma_p
    gamma_p_matrix: NDArray[np.float64]
    gamma_p1_matrix: NDArray[np.float64]


def companion_matrix(coeffs: ArrayLike) -> NDArray[np.float64]:
    phi = np.atleast_1d(np.asarray(coeffs, dtype=float))
    p = phi.size
    comp = np.zeros((p, p))
    comp[0] = phi
    comp[1:, :-1] = np.eye(p - 1)
    return comp


def max_root_modulus(coeffs: ArrayLike) -> float:
    """Largest companion-matrix eigenvalue modulus (inverse root of the AR polynomial)."""
    phi = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if phi.size == 1:
        return float(abs(phi[0]))
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(phi)))))


def is_stationary(coeffs: ArrayLike, tol: float = STATIONARITY_TOL) -> bool:
    phi = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if phi.size < 1 or not np.all(np.isfinite(phi)):
        return False
    return max_root_modulus(phi) < 1.0 - tol


def stationary_moments(ar: ArCoefficients) -> RegimeMoments:
    """Mean and autocovariances of a stationary AR(p) with Gaussian-type second moments.

    Gamma_p is obtained from the vec equation
    ``vec(Gamma_p) = (I - Phi kron Phi)^{-1} e_1 sigma^2`` with Phi the companion
    matrix; gamma_p = Gamma_p phi and Gamma_{p+1} is bordered from them.
    """
    phi = ar.coeffs
    if not is_stationary(phi):
        raise StationarityError(f"AR coefficients {phi.tolist()} are not stationary")
    p = phi.size
    mean = ar.intercept / (1.0 - phi.sum())
    if p == 1:
        g0 = ar.noise_var / (1.0 - phi[0] ** 2)
        gamma_p = np.array([[g0]])
    else:
        comp = companion_matrix(phi)
        rhs = np.zeros(p * p)
        rhs[0] = ar.noise_var
        vec = np.linalg.solve(np.eye(p * p) - np.kron(comp, comp), rhs)
        gamma_p = vec.reshape(p, p, order="F")
        gamma_p = (gamma_p + gamma_p.T) / 2
    gvec = gamma_p @ phi
    g0 = gamma_p[0, 0]
    gamma_p1 = np.empty((p + 1, p + 1))
    gamma_p1[0, 0] = g0
    gamma_p1[0, 1:] = gvec
    gamma_p1[1:, 0] = gvec
    gamma_p1[1:, 1:] = gamma_p
    return RegimeMoments(
        mean=float(mean),
        gamma=np.concatenate([[g0], gvec]),
        gamma_p_matrix=gamma_p,
        gamma_p1_matrix=gamma_p1,
    )


def pacf_to_ar(partials: ArrayLike) -> NDArray[np.float64]:
    """Map partial autocorrelations in (-1, 1) to AR coefficients (Levinson-Durbin)."""
    r = np.atleast_1d(np.asarray(partials, dtype=float))
    phi = np.zeros(0)
    for k, rk in enumerate(r):
        phi = np.concatenate([phi - rk * phi[::-1], [rk]]) if k else np.array([rk])
    return phi


def sample_stationary_coeffs(
    p: int,
    rng: np.random.Generator,
    boundary: bool = False,
    delta: float = BOUNDARY_DELTA,
) -> NDArray[np.float64]:
    """Draw a stationary AR(p) coefficient vector through its partial autocorrelations.

    Partials are uniform on (-1, 1).  In ``boundary`` mode the last partial
    is drawn with modulus in (1 - delta, 1), which pushes the product of the
    companion eigenvalue moduli (|phi_p|) above 1 - delta.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    while True:
        r = rng.uniform(-1.0, 1.0, size=p)
        if boundary:
            r[-1] = rng.choice([-1.0, 1.0]) * rng.uniform(1.0 - delta, 1.0)
        r = np.clip(r, -_PACF_MAX, _PACF_MAX)
        phi = pacf_to_ar(r)
        if is_stationary(phi):
            return phi
