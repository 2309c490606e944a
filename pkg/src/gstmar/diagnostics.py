"""Quantile residuals, residual autocorrelations, information criteria and model selection."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats
from scipy.special import ndtri

from .estimation import EstimationError, estimate, local_refine
from .genetic import GaConfig
from .model import (
    GStmarModel,
    LikelihoodMode,
    ModelOrder,
    canonicalize,
    conditional_cdf,
    lag_matrix,
    log_likelihood,
    max_ar_modulus,
    mixing_weights,
)
from .params import pack, unpack

log = logging.getLogger("gstmar")

PIT_EPS = 1e-12
DOF_THRESHOLD = 100.0
NORMALITY_CAVEAT = (
    "Jarque-Bera is computed as a descriptive statistic on the quantile residuals; "
    "it ignores parameter estimation uncertainty and is not a formal specification test."
)


class DegenerateInputError(ValueError):
    """Input without variation, for which autocorrelations are undefined."""


@dataclass(frozen=True, eq=False)
class QuantileResiduals:
    values: NDArray
    pit: NDArray


def quantile_residuals(model: GStmarModel, series: ArrayLike) -> QuantileResiduals:
    """Normal quantiles of the conditional probability integral transform."""
    y, windows = lag_matrix(series, model.p)
    pit = np.atleast_1d(conditional_cdf(model, y, windows))
    clipped = np.clip(pit, PIT_EPS, 1.0 - PIT_EPS)
    return QuantileResiduals(ndtri(clipped), pit)


def sample_acf(x: ArrayLike, max_lag: int) -> NDArray:
    """Sample autocorrelations at lags 1..max_lag, normalized by the lag-0 sum.

    The usual biased estimator: r_k = sum_{t>k} d_t d_{t-k} / sum_t d_t^2, so a
    perfectly alternating series gives r_1 = -(T-1)/T.
    """
    x = np.asarray(x, dtype=float)
    T = x.size
    if not 1 <= max_lag < T:
        raise ValueError(f"max_lag must be in [1, {T - 1}], got {max_lag}")
    d = x - x.mean()
    denom = float(d @ d)
    if not denom > 1e-300 * T or np.ptp(x) == 0:
        raise DegenerateInputError("series is constant; autocorrelations are undefined")
    return np.array([d[k:] @ d[:-k] for k in range(1, max_lag + 1)]) / denom


@dataclass(frozen=True, eq=False)
class ResidualAcf:
    lags: NDArray
    acf: NDArray
    acf_squared: NDArray  # nan when the squared residuals are constant
    band: float  # 1.96 / sqrt(T)


def residual_acf(values: ArrayLike, max_lag: int = 12) -> ResidualAcf:
    values = np.asarray(values, dtype=float)
    acf = sample_acf(values, max_lag)
    try:
        acf_sq = sample_acf(values**2, max_lag)
    except DegenerateInputError:
        acf_sq = np.full(max_lag, np.nan)
    return ResidualAcf(np.arange(1, max_lag + 1), acf, acf_sq, 1.96 / np.sqrt(values.size))


@dataclass(frozen=True)
class InformationCriteria:
    aic: float
    hqic: float
    bic: float


def information_criteria(loglik: float, k: int, T: int) -> InformationCriteria:
    """AIC, HQIC and BIC with T the number of observations entering the likelihood sum."""
    if k < 1:
        raise ValueError("number of parameters must be at least 1")
    if T <= 1:
        raise ValueError("effective sample size must exceed 1")
    return InformationCriteria(
        aic=-2.0 * loglik + 2.0 * k,
        hqic=-2.0 * loglik + 2.0 * k * np.log(np.log(T)),
        bic=-2.0 * loglik + k * np.log(T),
    )


@dataclass(eq=False)
class FitReport:
    order: str
    loglik: float
    mode: str
    n_params: int
    n_obs: int
    aic: float
    hqic: float
    bic: float
    acf_resid: list
    acf_sq_resid: list
    acf_band: float
    skewness: float
    excess_kurtosis: float
    jarque_bera: float
    jarque_bera_pvalue: float
    large_dof_flags: list
    max_ar_modulus: float
    normality_caveat: str = NORMALITY_CAVEAT
    std_errors: list | None = None
    hessian_ok: bool | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        # JSON has no nan
        out["acf_sq_resid"] = [None if not np.isfinite(v) else v for v in out["acf_sq_resid"]]
        return out


def fit_report(
    model: GStmarModel,
    series: ArrayLike,
    mode: LikelihoodMode = "exact",
    max_lag: int = 12,
    dof_threshold: float = DOF_THRESHOLD,
    std_errors: NDArray | None = None,
    hessian_ok: bool | None = None,
) -> FitReport:
    series = np.asarray(series, dtype=float)
    ll = log_likelihood(model, series, mode)
    T = series.size - model.p
    ic = information_criteria(ll, model.n_params, T)
    qr = quantile_residuals(model, series)
    acf = residual_acf(qr.values, min(max_lag, T - 1))
    jb = stats.jarque_bera(qr.values)
    return FitReport(
        order=str(model.order),
        loglik=ll,
        mode=mode,
        n_params=model.n_params,
        n_obs=T,
        aic=ic.aic,
        hqic=ic.hqic,
        bic=ic.bic,
        acf_resid=acf.acf.tolist(),
        acf_sq_resid=acf.acf_squared.tolist(),
        acf_band=acf.band,
        skewness=float(stats.skew(qr.values)),
        excess_kurtosis=float(stats.kurtosis(qr.values)),
        jarque_bera=float(jb.statistic),
        jarque_bera_pvalue=float(jb.pvalue),
        large_dof_flags=[bool(nu > dof_threshold) for nu in model.nus],
        max_ar_modulus=max_ar_modulus(model),
        std_errors=None if std_errors is None else [float(v) for v in std_errors],
        hessian_ok=hessian_ok,
    )


def diagnostic_panels(model: GStmarModel, series: ArrayLike, max_lag: int = 12) -> list[tuple]:
    """Tidy rows (panel, x, y, band_lo, band_hi) for residual, QQ, ACF and squared-ACF plots.

    Mixing weights follow as extra panels ``mixing_weight_<m>``.
    """
    series = np.asarray(series, dtype=float)
    qr = quantile_residuals(model, series)
    T = qr.values.size
    acf = residual_acf(qr.values, min(max_lag, T - 1))
    nan = float("nan")
    rows: list[tuple] = [("residuals", t + 1, float(v), nan, nan) for t, v in enumerate(qr.values)]
    theo = ndtri((np.arange(1, T + 1) - 0.5) / T)
    rows += [("qq", float(a), float(b), nan, nan) for a, b in zip(theo, np.sort(qr.values))]
    for name, vals in (("acf", acf.acf), ("acf_squared", acf.acf_squared)):
        rows += [(name, int(k), float(v), -acf.band, acf.band) for k, v in zip(acf.lags, vals)]
    _, windows = lag_matrix(series, model.p)
    w = mixing_weights(model, windows)
    for m in range(model.M):
        rows += [(f"mixing_weight_{m + 1}", t + 1, float(v), nan, nan) for t, v in enumerate(w[:, m])]
    return rows


# --- model selection ------------------------------------------------------------

@dataclass(frozen=True)
class SelectionConfig:
    n_rounds: int = 20
    ga: GaConfig = field(default_factory=GaConfig)
    mode: LikelihoodMode = "exact"
    criterion: str = "bic"
    dof_threshold: float = DOF_THRESHOLD
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.criterion not in ("aic", "hqic", "bic"):
            raise ValueError(f"criterion must be aic, hqic or bic, got {self.criterion!r}")


@dataclass(eq=False)
class SelectionCell:
    order: ModelOrder
    source: str  # "stmar" or "converted"
    model: GStmarModel | None
    loglik: float
    n_params: int
    n_obs: int
    criteria: InformationCriteria | None
    large_dof: list
    boundary: bool
    error: str | None = None

    def score(self, criterion: str) -> float:
        return getattr(self.criteria, criterion) if self.criteria else np.inf

    def summary(self) -> dict:
        return {
            "order": [self.order.p, self.order.m1, self.order.m2],
            "label": str(self.order),
            "source": self.source,
            "loglik": self.loglik if np.isfinite(self.loglik) else None,
            "n_params": self.n_params,
            "n_obs": self.n_obs,
            "criteria": asdict(self.criteria) if self.criteria else None,
            "large_dof": self.large_dof,
            "boundary": self.boundary,
            "error": self.error,
        }


@dataclass(eq=False)
class SelectionTrace:
    cells: list[SelectionCell]
    recommended: SelectionCell | None
    criterion: str

    def summary(self) -> dict:
        return {
            "criterion": self.criterion,
            "cells": [c.summary() for c in self.cells],
            "recommended": self.recommended.summary() if self.recommended else None,
        }


def _cell(order, source, model, series, mode, threshold) -> SelectionCell:
    T = series.size - order.p
    ll = log_likelihood(model, series, mode)
    return SelectionCell(
        order, source, model, ll, model.n_params, T,
        information_criteria(ll, model.n_params, T),
        [bool(nu > threshold) for nu in model.nus],
        max_ar_modulus(model) > 1 - 1e-3,
    )


def convert_large_dof(model: GStmarModel, threshold: float = DOF_THRESHOLD) -> GStmarModel:
    """Turn every t regime with dof above ``threshold`` into a Gaussian regime."""
    m1 = model.order.m1
    big = [m for m in range(m1, model.M) if model.regimes[m].nu > threshold]
    if not big:
        return model
    gauss = list(range(m1)) + big
    tdist = [m for m in range(m1, model.M) if m not in big]
    regimes = [model.regimes[m].replace(nu=None) for m in gauss] + [model.regimes[m] for m in tdist]
    order = ModelOrder(model.p, len(gauss), len(tdist))
    alphas = model.alphas[gauss + tdist]
    return canonicalize(GStmarModel(order, tuple(regimes), alphas, model.shared_ar, dict(model.meta)))


def _cell_seed(base: int | None, p: int, M: int) -> int:
    return int(np.random.SeedSequence([0 if base is None else base, p, M]).generate_state(1)[0])


def select_model(
    series: ArrayLike,
    p_range: Iterable[int],
    M_range: Iterable[int],
    config: SelectionConfig | None = None,
) -> SelectionTrace:
    """Fit StMAR(p, M) over the grid, then convert large-dof regimes to Gaussian ones.

    Each StMAR fit whose dof estimates exceed the threshold is followed by a
    G-StMAR fit with those regimes made Gaussian, started from the converted
    StMAR estimate.  The recommendation minimizes the chosen criterion over
    fits without large dof estimates and without near-boundary AR parts.
    Cell seeds depend only on (seed, p, M), so the result does not depend on
    the order in which the grid is listed.
    """
    config = config or SelectionConfig()
    series = np.asarray(series, dtype=float)
    grid = sorted({(int(p), int(M)) for p in p_range for M in M_range})
    if not grid:
        raise ValueError("selection grid is empty")
    cells: list[SelectionCell] = []
    for p, M in grid:
        order = ModelOrder(p, 0, M)
        ga = GaConfig(**{**asdict(config.ga), "seed": _cell_seed(config.ga.seed, p, M)})
        try:
            res = estimate(series, order, config.n_rounds, ga, config.mode,
                           workers=config.workers, compute_std_errors=False)
        except (EstimationError, ValueError, ArithmeticError) as exc:
            log.warning("selection cell %s failed: %s", order, exc)
            cells.append(SelectionCell(order, "stmar", None, -np.inf, order.n_params(), series.size - p,
                                       None, [], False, str(exc)))
            continue
        cell = _cell(order, "stmar", res.model, series, config.mode, config.dof_threshold)
        cells.append(cell)
        model = res.model
        while any(r.is_t and r.nu > config.dof_threshold for r in model.regimes):
            start = convert_large_dof(model, config.dof_threshold)
            try:
                ref = local_refine(series, pack(start), start.order, config.mode)
                model = canonicalize(unpack(ref.vector, start.order))
            except (ValueError, ArithmeticError) as exc:
                cells.append(SelectionCell(start.order, "converted", None, -np.inf, start.n_params,
                                           series.size - p, None, [], False, str(exc)))
                break
            cells.append(_cell(model.order, "converted", model, series, config.mode, config.dof_threshold))

    eligible = [c for c in cells if c.model is not None and not any(c.large_dof) and not c.boundary]
    crit = config.criterion
    best = min(eligible, key=lambda c: (c.score(crit), str(c.order))) if eligible else None
    return SelectionTrace(cells, best, crit)
