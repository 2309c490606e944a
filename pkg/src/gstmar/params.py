"""Flat parameter vectors and the smooth reparametrizations used by the optimizers.

Natural layout (unrestricted)::

    (phi0_1, phi_1, sigma2_1, ..., phi0_M, phi_M, sigma2_M, alpha_1..alpha_{M-1}, nu_{m1+1}..nu_M)

Shared-AR layout::

    (phi0_1..phi0_M, phi, sigma2_1..sigma2_M, alpha_1..alpha_{M-1}, nu)
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .model import NU_MAX, GStmarModel, ModelError, ModelOrder, Regime

LOG_NU_SHIFT_MAX = float(np.log(NU_MAX - 2.0))


@dataclass(frozen=True)
class ParamLayout:
    order: ModelOrder
    shared_ar: bool = False

    @property
    def size(self) -> int:
        return self.order.n_params(self.shared_ar)

    @cached_property
    def index(self) -> dict[str, NDArray[np.int64]]:
        """Positions of each parameter group in the flat vector."""
        p, M, m2 = self.order.p, self.order.M, self.order.m2
        if self.shared_ar:
            phi0 = np.arange(M)
            phi = np.tile(np.arange(M, M + p), (M, 1))
            sigma2 = np.arange(M + p, 2 * M + p)
            start = 2 * M + p
        else:
            base = np.arange(M) * (p + 2)
            phi0 = base
            phi = base[:, None] + 1 + np.arange(p)
            sigma2 = base + p + 1
            start = M * (p + 2)
        alpha = np.arange(start, start + M - 1)
        nu = np.arange(start + M - 1, start + M - 1 + m2)
        return {"phi0": phi0, "phi": phi, "sigma2": sigma2, "alpha": alpha, "nu": nu}

    def names(self) -> list[str]:
        out = [""] * self.size
        idx = self.index
        for m in range(self.order.M):
            out[idx["phi0"][m]] = f"phi{m + 1},0"
            out[idx["sigma2"][m]] = f"sigma2_{m + 1}"
            for i in range(self.order.p):
                j = idx["phi"][m, i]
                out[j] = f"phi{i + 1}" if self.shared_ar else f"phi{m + 1},{i + 1}"
        for m, j in enumerate(idx["alpha"]):
            out[j] = f"alpha{m + 1}"
        for m, j in enumerate(idx["nu"]):
            out[j] = f"nu{self.order.m1 + m + 1}"
        return out

    # natural <-> GA coordinates: nu stored as log(nu - 2)
    def to_search(self, vec: ArrayLike) -> NDArray:
        x = np.array(vec, dtype=float)
        nu = self.index["nu"]
        with np.errstate(invalid="ignore", divide="ignore"):
            x[nu] = np.log(x[nu] - 2.0)
        return x

    def from_search(self, x: ArrayLike) -> NDArray:
        vec = np.array(x, dtype=float)
        nu = self.index["nu"]
        # quiet clamp at NU_MAX; the outer minimum absorbs exp/log round-off
        vec[nu] = np.minimum(2.0 + np.exp(np.minimum(vec[nu], LOG_NU_SHIFT_MAX)), NU_MAX)
        return vec

    # natural <-> local-optimizer coordinates: additionally log sigma2 and
    # additive log-ratio alphas, so every finite point has sigma2 > 0,
    # alphas in the simplex and nu > 2
    def to_unconstrained(self, vec: ArrayLike) -> NDArray:
        x = self.to_search(vec)
        idx = self.index
        x[idx["sigma2"]] = np.log(x[idx["sigma2"]])
        a = x[idx["alpha"]]
        a_last = 1.0 - a.sum()
        x[idx["alpha"]] = np.log(a) - np.log(a_last)
        return x

    def from_unconstrained(self, x: ArrayLike) -> NDArray:
        vec = self.from_search(x)
        idx = self.index
        with np.errstate(over="ignore"):
            vec[idx["sigma2"]] = np.exp(vec[idx["sigma2"]])
        z = np.append(vec[idx["alpha"]], 0.0)
        z = np.exp(z - z.max())
        vec[idx["alpha"]] = (z / z.sum())[:-1]
        return vec


@lru_cache(maxsize=64)
def layout_for(order: ModelOrder, shared_ar: bool = False) -> ParamLayout:
    return ParamLayout(order, shared_ar)


def pack(model: GStmarModel) -> NDArray[np.float64]:
    layout = layout_for(model.order, model.shared_ar)
    idx = layout.index
    vec = np.empty(layout.size)
    for m, reg in enumerate(model.regimes):
        vec[idx["phi0"][m]] = reg.phi0
        vec[idx["phi"][m]] = reg.phi
        vec[idx["sigma2"][m]] = reg.sigma2
    vec[idx["alpha"]] = model.alphas[:-1]
    vec[idx["nu"]] = model.nus
    return vec


def unpack(vec: ArrayLike, order: ModelOrder, shared_ar: bool = False, meta: dict | None = None) -> GStmarModel:
    """Inverse of ``pack``; raises ModelError listing every violated restriction."""
    layout = layout_for(order, shared_ar)
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (layout.size,):
        raise ModelError(f"{order} needs a parameter vector of length {layout.size}, got {vec.shape}")
    idx = layout.index
    a = vec[idx["alpha"]]
    alphas = np.append(a, 1.0 - a.sum())
    regimes = tuple(
        Regime(
            vec[idx["phi0"][m]],
            vec[idx["phi"][m]],
            vec[idx["sigma2"][m]],
            None if m < order.m1 else vec[idx["nu"][m - order.m1]],
        )
        for m in range(order.M)
    )
    return GStmarModel(order, regimes, alphas, shared_ar, dict(meta or {}))
