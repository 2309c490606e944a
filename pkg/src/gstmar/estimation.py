"""Two-phase maximum likelihood: genetic search, then variable-metric refinement."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .genetic import GaConfig, genetic_search
from .model import (
    GStmarModel,
    NU_MAX,
    LikelihoodMode,
    ModelOrder,
    canonicalize,
    is_identified_order,
    log_likelihood,
    max_ar_modulus,
)
from .optimize import DIFF_STEP, maximize, numerical_hessian
from .params import ParamLayout, layout_for, pack, unpack

log = logging.getLogger("gstmar")

BOUNDARY_MODULUS = 1.0 - 1e-3
WORKERS_ENV = "GSTMAR_WORKERS"


class EstimationError(RuntimeError):
    """No estimation round produced an acceptable estimate."""

    def __init__(self, message: str, rounds: list):
        super().__init__(message)
        self.rounds = rounds


def _safe_loglik(vec: NDArray, layout: ParamLayout, series: NDArray, mode: LikelihoodMode) -> float:
    nu = layout.index["nu"]
    if np.any(vec[nu] > NU_MAX):
        vec = vec.copy()
        vec[nu] = np.minimum(vec[nu], NU_MAX)  # quiet clamp, unlike the model constructor
    try:
        return log_likelihood(unpack(vec, layout.order, layout.shared_ar), series, mode)
    except (ValueError, ArithmeticError):
        return -np.inf


@dataclass(eq=False)
class RefineResult:
    vector: NDArray
    loglik: float
    converged: bool
    n_iter: int


def local_refine(
    series: ArrayLike,
    start: ArrayLike,
    order: ModelOrder,
    mode: LikelihoodMode = "exact",
    shared_ar: bool = False,
    maxit: int = 1000,
    reltol: float = 1e-12,
) -> RefineResult:
    """Quasi-Newton ascent from ``start`` (natural coordinates).

    Runs in unconstrained coordinates (log variances, log-ratio weights,
    log(nu - 2)); non-stationary trial points evaluate to -inf and are
    backtracked by the line search.
    """
    series = np.asarray(series, dtype=float)
    layout = layout_for(order, shared_ar)
    start = np.asarray(start, dtype=float)
    if not np.isfinite(_safe_loglik(start, layout, series, mode)):
        raise ValueError("log-likelihood is not finite at the starting vector")

    def objective(z):
        return _safe_loglik(layout.from_unconstrained(z), layout, series, mode)

    res = maximize(objective, layout.to_unconstrained(start), maxit=maxit, reltol=reltol)
    vec = layout.from_unconstrained(res.x)
    return RefineResult(vec, _safe_loglik(vec, layout, series, mode), res.converged, res.n_iter)


@dataclass(eq=False)
class StdErrorReport:
    std_errors: NDArray | None
    hessian_ok: bool
    message: str
    hessian: NDArray


def std_errors(series: ArrayLike, model: GStmarModel, mode: LikelihoodMode = "exact",
               eps: float = DIFF_STEP) -> StdErrorReport:
    """Standard errors from the central-difference Hessian of the unscaled log-likelihood.

    The Hessian is taken in the natural packed coordinates.  It is rejected
    when a dof sits at the NU_MAX cap, when an entry is non-finite, when a diagonal entry is indistinguishable
    from finite-difference noise (a flat direction, as for very large dof),
    or when -H is not positive definite.
    """
    series = np.asarray(series, dtype=float)
    layout = layout_for(model.order, model.shared_ar)
    x = pack(model)

    def f(v):
        return _safe_loglik(v, layout, series, mode)

    H, h = numerical_hessian(f, x, eps)
    names = layout.names()
    capped = [names[i] for i in layout.index["nu"] if x[i] >= NU_MAX * (1 - 1e-12)]
    if capped:
        # the likelihood is flat in a capped dof (and one-sided at the cap)
        return StdErrorReport(
            None, False,
            f"Hessian is singular: {capped} at the {NU_MAX:g} cap; the regime is effectively Gaussian",
            H,
        )
    if not np.all(np.isfinite(H)):
        bad = sorted({names[i] for i in np.argwhere(~np.isfinite(H))[:, 0]})
        return StdErrorReport(None, False, f"Hessian has non-finite entries for {bad}", H)
    # second differences carry rounding error of order 4 eps |f| / h^2
    noise = 100 * 4 * np.finfo(float).eps * max(1.0, abs(f(x))) / h**2
    flat = np.flatnonzero(np.abs(np.diag(H)) <= noise)
    if flat.size:
        return StdErrorReport(
            None, False,
            f"Hessian is numerically singular: curvature along {[names[i] for i in flat]} "
            "is below finite-difference noise",
            H,
        )
    try:
        chol = np.linalg.cholesky(-H)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(-H)
        return StdErrorReport(
            None, False, f"negative Hessian is not positive definite (smallest eigenvalue {eig.min():.4g})", H
        )
    inv = np.linalg.inv(chol)
    cov = inv.T @ inv
    return StdErrorReport(np.sqrt(np.diag(cov)), True, "ok", H)


@dataclass(eq=False)
class RoundRecord:
    index: int
    loglik: float
    converged: bool
    identified: bool
    boundary: bool
    ga_loglik: float
    model: GStmarModel | None = field(repr=False, default=None)


@dataclass(eq=False)
class EstimationResult:
    model: GStmarModel
    loglik: float
    mode: str
    std_errors: NDArray | None
    hessian_ok: bool
    hessian_message: str
    rounds: list[RoundRecord]
    n_obs_effective: int

    @property
    def n_params(self) -> int:
        return self.model.n_params


def _run_round(args) -> RoundRecord:
    series, order, ga, mode, shared_ar, seed_seq, index = args
    rng = np.random.default_rng(seed_seq)
    try:
        ga_res = genetic_search(series, order, ga, shared_ar=shared_ar, rng=rng, round_index=index)
        ref = local_refine(series, ga_res.vector, order, mode, shared_ar)
        model = canonicalize(unpack(ref.vector, order, shared_ar))
    except (ValueError, ArithmeticError) as exc:
        log.warning("round=%d failed: %s", index, exc)
        return RoundRecord(index, -np.inf, False, False, False, -np.inf)
    ll = log_likelihood(model, series, mode)
    log.info("round=%d final loglik=%.6f", index, ll)
    return RoundRecord(
        index,
        ll,
        ref.converged,
        is_identified_order(model),
        max_ar_modulus(model) > BOUNDARY_MODULUS,
        ga_res.loglik,
        model,
    )


def _workers(requested: int | None) -> int:
    if requested is not None:
        return max(1, requested)
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def estimate(
    series: ArrayLike,
    order: ModelOrder,
    n_rounds: int = 20,
    ga: GaConfig | None = None,
    mode: LikelihoodMode = "exact",
    shared_ar: bool = False,
    workers: int | None = None,
    compute_std_errors: bool = True,
) -> EstimationResult:
    """Run ``n_rounds`` independent GA + refinement rounds and keep the best acceptable one.

    Rounds whose estimate is not identified or sits within 1e-3 of the
    stationarity boundary are kept in the trace but never selected.  Round
    seeds are spawned from ``ga.seed`` so results do not depend on ``workers``.
    """
    ga = ga or GaConfig()
    series = np.asarray(series, dtype=float)
    if n_rounds < 1:
        raise ValueError("n_rounds must be positive")
    seeds = np.random.SeedSequence(ga.seed).spawn(n_rounds)
    jobs = [(series, order, ga, mode, shared_ar, seeds[i], i) for i in range(n_rounds)]
    nw = min(_workers(workers), n_rounds)
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            rounds = list(pool.map(_run_round, jobs))
    else:
        rounds = [_run_round(j) for j in jobs]

    ok = [r for r in rounds if r.model is not None and r.identified and not r.boundary and np.isfinite(r.loglik)]
    if not ok:
        raise EstimationError(f"none of {n_rounds} rounds produced an identified interior estimate", rounds)
    best = max(ok, key=lambda r: (r.loglik, -r.index))
    report = std_errors(series, best.model, mode) if compute_std_errors else None
    return EstimationResult(
        model=best.model,
        loglik=best.loglik,
        mode=mode,
        std_errors=report.std_errors if report else None,
        hessian_ok=report.hessian_ok if report else False,
        hessian_message=report.message if report else "not computed",
        rounds=rounds,
        n_obs_effective=series.size - order.p,
    )
