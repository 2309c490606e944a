"""Sample paths, stationary initial values and Monte Carlo forecasts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .model import GStmarModel, _conditional_parts, _normalized_weights

DEFAULT_FORECAST_PATHS = 5000
DEFAULT_QUANTILES = (0.025, 0.16, 0.5, 0.84, 0.975)


@dataclass(frozen=True, eq=False)
class SimulationResult:
    paths: NDArray[np.float64]  # (length, n_paths)
    regimes: NDArray[np.int64]  # (length, n_paths), 0-based regime index
    weights: NDArray[np.float64]  # (length, n_paths, M)
    init: NDArray[np.float64]  # (p, n_paths), chronological


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _pick(prob: NDArray, rng: np.random.Generator) -> NDArray[np.int64]:
    """Categorical draws, one per column of the (M, n) probability matrix."""
    cum = np.cumsum(prob, axis=0)
    u = rng.random(prob.shape[1]) * cum[-1]
    return np.minimum((u > cum).sum(axis=0), prob.shape[0] - 1)


def sample_stationary_init(model: GStmarModel, rng=None, size: int | None = None):
    """Draw p consecutive values from the stationary mixture distribution.

    Returns a chronological (p,) vector, or (size, p) when ``size`` is given.
    t components are drawn as Gaussian scale mixtures so that their
    covariance equals Gamma_{m,p}.
    """
    rng = _rng(rng)
    n = 1 if size is None else size
    p = model.p
    prep = model.prepared
    comp = _pick(np.repeat(model.alphas[:, None], n, axis=1), rng)
    z = rng.standard_normal((n, p))
    out = np.empty((n, p))
    for m in range(model.M):
        idx = np.flatnonzero(comp == m)
        if idx.size == 0:
            continue
        draw = z[idx] @ prep.chol[m].T
        if prep.is_t[m]:
            nu = prep.nu[m]
            w = rng.chisquare(nu, size=idx.size)
            draw *= np.sqrt((nu - 2.0) / w)[:, None]
        out[idx] = prep.mu[m] + draw
    # windows are stored most-recent-first; Toeplitz symmetry makes the
    # reversal immaterial for the law but keep the convention explicit
    out = out[:, ::-1]
    return out[0] if size is None else out


def simulate(
    model: GStmarModel,
    length: int,
    n_paths: int = 1,
    init: str | ArrayLike = "stationary",
    seed=None,
) -> SimulationResult:
    """Simulate ``n_paths`` independent paths of ``length`` observations.

    ``init`` is "stationary" (fresh stationary draws per path) or a
    chronological vector of the p values preceding the first simulated one.
    Each step picks a regime from the mixing weights and adds unit-variance
    Gaussian or t(nu+p) noise scaled by the regime's conditional sd.
    """
    if length < 1 or n_paths < 1:
        raise ValueError("length and n_paths must be positive")
    rng = _rng(seed)
    p, M = model.p, model.M
    if isinstance(init, str):
        if init != "stationary":
            raise ValueError(f"unknown init {init!r}")
        start = sample_stationary_init(model, rng, size=n_paths)
    else:
        start = np.asarray(init, dtype=float)
        if start.shape != (p,):
            raise ValueError(f"fixed init must have length p={p}, got shape {start.shape}")
        start = np.tile(start, (n_paths, 1))

    window = start[:, ::-1].copy()  # (n_paths, p), most recent first
    paths = np.empty((length, n_paths))
    regimes = np.empty((length, n_paths), dtype=np.int64)
    weights = np.empty((length, n_paths, M))
    cols = np.arange(n_paths)
    for t in range(length):
        parts = _conditional_parts(model, window)
        w = _normalized_weights(parts)
        comp = _pick(w, rng)
        eps = rng.standard_normal(n_paths)
        for m in np.flatnonzero(np.isfinite(parts.dof)):
            idx = np.flatnonzero(comp == m)
            if idx.size:
                df = parts.dof[m]
                eps[idx] = rng.standard_t(df, size=idx.size) * np.sqrt((df - 2.0) / df)
        y = parts.mean[comp, cols] + np.sqrt(parts.var[comp, cols]) * eps
        paths[t] = y
        regimes[t] = comp
        weights[t] = w.T
        window[:, 1:] = window[:, :-1]
        window[:, 0] = y
    return SimulationResult(paths, regimes, weights, start.T.copy())


@dataclass(frozen=True, eq=False)
class Forecast:
    mean: NDArray[np.float64]  # (horizon,)
    quantile_levels: NDArray[np.float64]
    quantiles: NDArray[np.float64]  # (horizon, n_levels)
    n_paths: int


def forecast(
    model: GStmarModel,
    history: ArrayLike,
    horizon: int,
    n_paths: int = DEFAULT_FORECAST_PATHS,
    quantiles: Sequence[float] = DEFAULT_QUANTILES,
    seed=None,
) -> Forecast:
    """Monte Carlo predictive mean and quantiles for horizons 1..horizon."""
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    hist = np.asarray(history, dtype=float)
    if hist.ndim != 1 or hist.size < model.p:
        raise ValueError(f"history needs at least p={model.p} observations")
    levels = np.asarray(quantiles, dtype=float)
    if np.any((levels <= 0) | (levels >= 1)):
        raise ValueError("quantile levels must lie in (0, 1)")
    sim = simulate(model, horizon, n_paths=n_paths, init=hist[-model.p:], seed=seed)
    return Forecast(
        mean=sim.paths.mean(axis=1),
        quantile_levels=levels,
        quantiles=np.quantile(sim.paths, levels, axis=1).T,
        n_paths=n_paths,
    )
