"""Genetic search for starting values of the likelihood maximization.

The search maximizes the conditional log-likelihood over flat parameter
vectors in search coordinates (``ParamLayout.to_search``).  Besides the usual
selection / one-point crossover / mutation loop it uses individually adaptive
crossover and mutation rates, fitness inheritance, mutations drawn near the
edge of the stationarity region, a selection penalty for vectors with
redundant regimes, and, late in the run, mutations targeted near the best
identified vector found so far.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from typing import Mapping

import numpy as np
from numpy.typing import NDArray

from .ar_stationary import sample_stationary_coeffs
from .model import (
    GStmarModel,
    ModelOrder,
    canonicalize,
    is_identified_order,
    lag_matrix,
    loglik_and_peak_weights,
)
from .params import layout_for, pack, unpack

log = logging.getLogger("gstmar")

_SIGMA2_RANGE = (0.01, 1.5)
_NU_MEAN_EXCESS = 10.0
# Patnaik-Srinivas constants: crossover k1 = k3, mutation k2 = k4
_PC_MAX = 1.0
_PM_MAX = 0.5


@dataclass(frozen=True)
class GaConfig:
    population_size: int | None = None  # None -> 10 x number of parameters
    generations: int = 200
    min_crossover_rate: float = 0.4
    smart_mutation_start: int = 120
    redundancy_threshold: float = 0.05
    boundary_mutation_prob: float = 0.2
    fitness_inheritance_prob: float = 0.2
    seed: int | None = None
    redundancy_penalty: float = 0.5
    convergence_tol: float = 1e-3
    rank_scale: float = 0.5  # selection weight exp(-rank / (rank_scale * N))

    def __post_init__(self) -> None:
        n = self.population_size
        if n is not None and (n < 2 or n % 2):
            raise ValueError(f"population_size must be even and >= 2, got {n}")
        if self.generations < 1:
            raise ValueError("generations must be positive")
        for name in ("min_crossover_rate", "redundancy_threshold", "boundary_mutation_prob",
                     "fitness_inheritance_prob", "redundancy_penalty"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.rank_scale <= 0:
            raise ValueError("rank_scale must be positive")

    def population_for(self, n_params: int) -> int:
        if self.population_size is not None:
            return self.population_size
        n = 10 * n_params
        return n + n % 2

    @classmethod
    def from_mapping(cls, values: Mapping) -> "GaConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown GA settings: {sorted(unknown)}")
        return cls(**dict(values))


@dataclass(eq=False)
class GaResult:
    vector: NDArray  # natural coordinates
    loglik: float  # conditional log-likelihood
    identified: bool
    population: NDArray  # final population, search coordinates
    fitness: NDArray
    best_by_generation: NDArray


class _Problem:
    """Series-dependent pieces shared by all candidate evaluations."""

    def __init__(self, series: NDArray, order: ModelOrder, shared_ar: bool, threshold: float):
        self.order = order
        self.shared_ar = shared_ar
        self.layout = layout_for(order, shared_ar)
        self.y, self.windows = lag_matrix(series, order.p)
        self.mean = float(np.mean(series))
        self.sd = float(np.std(series))
        self.threshold = threshold

    def model(self, x: NDArray) -> GStmarModel | None:
        try:
            return unpack(self.layout.from_search(x), self.order, self.shared_ar)
        except (ValueError, ArithmeticError):
            return None

    def evaluate(self, x: NDArray) -> tuple[float, int, NDArray, bool]:
        """(loglik, number of redundant regimes, canonical x, identified)."""
        model = self.model(x)
        if model is None:
            return -np.inf, self.order.M, x, False
        try:
            model = canonicalize(model)
            ll, peak = loglik_and_peak_weights(model, self.y, self.windows)
        except (ValueError, ArithmeticError):
            return -np.inf, self.order.M, x, False
        n_red = int(np.sum(peak < self.threshold)) if self.order.M > 1 else 0
        ident = np.isfinite(ll) and n_red == 0 and is_identified_order(model)
        return ll, n_red, self.layout.to_search(pack(model)), ident

    def random_vector(self, rng: np.random.Generator, boundary_prob: float) -> NDArray:
        p, M, m1 = self.order.p, self.order.M, self.order.m1
        idx = self.layout.index
        vec = np.empty(self.layout.size)
        phi_shared = sample_stationary_coeffs(p, rng, boundary=rng.random() < boundary_prob)
        lo, hi = np.log(_SIGMA2_RANGE)
        for m in range(M):
            phi = phi_shared if self.shared_ar else sample_stationary_coeffs(
                p, rng, boundary=rng.random() < boundary_prob
            )
            # draw the regime mean and back out the intercept
            mu = self.mean + self.sd * rng.standard_normal()
            vec[idx["phi0"][m]] = mu * (1.0 - phi.sum())
            vec[idx["phi"][m]] = phi
            vec[idx["sigma2"][m]] = self.sd**2 * np.exp(rng.uniform(lo, hi))
        alpha = rng.dirichlet(np.ones(M))
        alpha = np.concatenate([np.sort(alpha[:m1])[::-1], np.sort(alpha[m1:])[::-1]])
        vec[idx["alpha"]] = alpha[:-1]
        vec[idx["nu"]] = 2.0 + rng.exponential(_NU_MEAN_EXCESS, size=self.order.m2)
        return self.layout.to_search(vec)

    def perturb(self, x: NDArray, rng: np.random.Generator, tries: int = 10) -> NDArray | None:
        for _ in range(tries):
            cand = x + rng.standard_normal(x.size) * (0.1 * np.abs(x) + 0.01)
            if self.model(cand) is not None:
                return cand
        return None

    def combine(self, pop: NDArray, fit: NDArray, rng: np.random.Generator, n_top: int = 10) -> NDArray | None:
        """Keep the best vector's non-redundant regimes, fill the rest from other good vectors."""
        if self.shared_ar or self.order.M < 2:
            return None
        ranked = [i for i in np.argsort(-fit)[:n_top] if np.isfinite(fit[i])]
        pool: list[tuple] = []  # (regime, alpha)
        base: list[tuple] = []
        for r, i in enumerate(ranked):
            model = self.model(pop[i])
            if model is None:
                continue
            _, peak = loglik_and_peak_weights(model, self.y, self.windows)
            keep = [(model.regimes[m], model.alphas[m]) for m in range(model.M) if peak[m] >= self.threshold]
            if r == 0:
                base = keep
            else:
                pool.extend(keep)
        chosen = list(base)
        for want_t, quota in ((False, self.order.m1), (True, self.order.m2)):
            have = sum(1 for reg, _ in chosen if reg.is_t == want_t)
            cands = [c for c in pool if c[0].is_t == want_t]
            while have < quota:
                if not cands:
                    return None
                chosen.append(cands.pop(rng.integers(len(cands))))
                have += 1
        gauss = [c for c in chosen if not c[0].is_t][: self.order.m1]
        tdist = [c for c in chosen if c[0].is_t][: self.order.m2]
        regimes = [c[0] for c in gauss + tdist]
        alphas = np.array([c[1] for c in gauss + tdist])
        try:
            model = GStmarModel(self.order, tuple(regimes), alphas / alphas.sum())
        except ValueError:
            return None
        return self.layout.to_search(pack(canonicalize(model)))


def _adaptive_rate(f: float, fmax: float, favg: float, top: float) -> float:
    if not np.isfinite(f) or f < favg:
        return top
    spread = fmax - favg
    return top * (fmax - f) / spread if spread > 0 else 0.0


def selection_weights(fit: NDArray, n_redundant: NDArray, config: GaConfig) -> NDArray:
    """Exponential-ranking selection probabilities, times penalty**(redundant regimes)."""
    N = fit.size
    ranks = np.empty(N)
    ranks[np.argsort(-fit, kind="stable")] = np.arange(N)
    weights = np.exp(-ranks / (config.rank_scale * N)) * config.redundancy_penalty ** np.asarray(n_redundant)
    weights[~np.isfinite(fit)] = 0.0
    if weights.sum() <= 0:
        weights[:] = 1.0
    return weights / weights.sum()


def genetic_search(
    series,
    order: ModelOrder,
    config: GaConfig | None = None,
    shared_ar: bool = False,
    rng: np.random.Generator | None = None,
    round_index: int = 0,
) -> GaResult:
    """Run the genetic search; returns the best (preferably identified) vector."""
    config = config or GaConfig()
    series = np.asarray(series, dtype=float)
    layout = layout_for(order, shared_ar)
    k = layout.size
    if series.size <= order.p + k:
        raise ValueError(f"series of length {series.size} is too short for {k} parameters and p={order.p}")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    prob = _Problem(series, order, shared_ar, config.redundancy_threshold)
    N = config.population_for(k)

    pop = np.array([prob.random_vector(rng, config.boundary_mutation_prob) for _ in range(N)])
    fit = np.empty(N)
    n_red = np.zeros(N, dtype=int)
    best_x, best_f, best_red = None, -np.inf, 0
    best_id_x, best_id_f = None, -np.inf

    def evaluate(i):
        nonlocal best_x, best_f, best_red, best_id_x, best_id_f
        ll, nr, xc, ident = prob.evaluate(pop[i])
        pop[i], fit[i], n_red[i] = xc, ll, nr
        if ll > best_f:
            best_x, best_f, best_red = xc.copy(), ll, nr
        if ident and ll > best_id_f:
            best_id_x, best_id_f = xc.copy(), ll

    for i in range(N):
        evaluate(i)

    def mutant(gen):
        if gen >= config.smart_mutation_start:
            cand = prob.perturb(best_id_x, rng) if best_id_x is not None else prob.combine(pop, fit, rng)
            if cand is not None:
                return cand
        return prob.random_vector(rng, config.boundary_mutation_prob)

    history = np.empty(config.generations)
    for gen in range(config.generations):
        parents = rng.choice(N, size=N, p=selection_weights(fit, n_red, config))
        children = pop[parents].copy()
        est = fit[parents].copy()
        child_red = n_red[parents].copy()
        finite = fit[np.isfinite(fit)]
        fmax = finite.max() if finite.size else 0.0
        favg = finite.mean() if finite.size else 0.0

        needs_eval = np.zeros(N, dtype=bool)
        for a in range(0, N, 2):
            b = a + 1
            pc = max(config.min_crossover_rate, _adaptive_rate(max(est[a], est[b]), fmax, favg, _PC_MAX))
            if k > 1 and rng.random() < pc:
                cut = int(rng.integers(1, k))
                tail = children[a, cut:].copy()
                children[a, cut:] = children[b, cut:]
                children[b, cut:] = tail
                w = cut / k
                est[a], est[b] = w * est[a] + (1 - w) * est[b], w * est[b] + (1 - w) * est[a]
                for c in (a, b):
                    if rng.random() >= config.fitness_inheritance_prob:
                        needs_eval[c] = True
                    child_red[c] = 0
        for c in range(N):
            if rng.random() < _adaptive_rate(est[c], fmax, favg, _PM_MAX):
                children[c] = mutant(gen)
                needs_eval[c] = True

        pop, fit, n_red = children, est, child_red
        for c in np.flatnonzero(needs_eval):
            evaluate(c)
        # elitism: the best evaluated vector survives
        if best_x is not None:
            worst = int(np.argmin(np.where(np.isfinite(fit), fit, -np.inf)))
            pop[worst], fit[worst], n_red[worst] = best_x, best_f, best_red

        finite = fit[np.isfinite(fit)]
        if finite.size == N and finite.max() - finite.min() < config.convergence_tol:
            keep = int(np.argmax(fit))
            for c in range(N):
                if c != keep:
                    pop[c] = mutant(gen)
                    evaluate(c)
        history[gen] = best_f
        if gen % 10 == 0 or gen == config.generations - 1:
            log.info("round=%d gen=%d best=%.6f", round_index, gen, best_f)

    identified = best_id_x is not None
    x, f = (best_id_x, best_id_f) if identified else (best_x, best_f)
    if x is None:
        x = pop[0]
    return GaResult(layout.from_search(x), float(f), identified, pop, fit, history)
