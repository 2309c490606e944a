"""Variable-metric (BFGS) maximization with central-difference derivatives.

The iteration follows the classic Nash/R ``vmmin`` scheme: an inverse-Hessian
approximation updated by BFGS, a backtracking Armijo line search that simply
shrinks the step when the objective is infeasible (non-finite), and a reset to
the identity whenever the update loses positive definiteness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

DIFF_STEP = 6e-6
_ACCTOL = 1e-4
_STEPREDN = 0.2
_RELTEST = 10.0

Objective = Callable[[NDArray], float]


def diff_steps(x: NDArray, eps: float = DIFF_STEP) -> NDArray:
    return eps * np.maximum(1.0, np.abs(x))


def numerical_gradient(fun: Objective, x: NDArray, eps: float = DIFF_STEP, f0: float | None = None) -> NDArray:
    """Central differences; falls back to a one-sided difference next to an infeasible point."""
    x = np.asarray(x, dtype=float)
    h = diff_steps(x, eps)
    g = np.empty_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        fp, fm = fun(xp), fun(xm)
        if np.isfinite(fp) and np.isfinite(fm):
            g[i] = (fp - fm) / (2 * h[i])
            continue
        if f0 is None:
            f0 = fun(x)
        if np.isfinite(fp):
            g[i] = (fp - f0) / h[i]
        elif np.isfinite(fm):
            g[i] = (f0 - fm) / h[i]
        else:
            g[i] = 0.0
    return g


def numerical_hessian(fun: Objective, x: NDArray, eps: float = DIFF_STEP) -> tuple[NDArray, NDArray]:
    """Central-difference Hessian; returns (H, steps).  Non-finite evaluations propagate as nan."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = diff_steps(x, eps)
    f0 = fun(x)
    H = np.empty((n, n))

    def f_at(i, si, j=None, sj=0):
        z = x.copy()
        z[i] += si * h[i]
        if j is not None:
            z[j] += sj * h[j]
        v = fun(z)
        return v if np.isfinite(v) else np.nan

    for i in range(n):
        H[i, i] = (f_at(i, 1) - 2.0 * f0 + f_at(i, -1)) / h[i] ** 2
        for j in range(i):
            v = (f_at(i, 1, j, 1) - f_at(i, 1, j, -1) - f_at(i, -1, j, 1) + f_at(i, -1, j, -1)) / (4 * h[i] * h[j])
            H[i, j] = H[j, i] = v
    return H, h


@dataclass
class OptimResult:
    x: NDArray
    value: float
    converged: bool
    n_iter: int
    n_fev: int


def maximize(
    fun: Objective,
    x0: NDArray,
    grad: Callable[[NDArray], NDArray] | None = None,
    maxit: int = 1000,
    reltol: float = 1e-10,
) -> OptimResult:
    """Maximize ``fun`` from ``x0``.  Non-finite values mark infeasible points."""
    n_fev = 0

    def f(z):
        nonlocal n_fev
        n_fev += 1
        v = fun(z)
        return -v if np.isfinite(v) else np.inf

    if grad is None:
        def g(z, fz):
            return -numerical_gradient(fun, z, f0=-fz)
    else:
        def g(z, fz):
            return -np.asarray(grad(z), dtype=float)

    b = np.array(x0, dtype=float)
    n = b.size
    fmin = f(b)
    if not np.isfinite(fmin):
        raise ValueError("objective is not finite at the starting point")
    gvec = g(b, fmin)
    B = np.eye(n)
    n_iter, gradcount, ilast = 0, 1, 1
    while True:
        if ilast == gradcount:
            B = np.eye(n)
        X, c = b.copy(), gvec.copy()
        t = -B @ gvec
        gradproj = float(t @ gvec)
        if gradproj < 0:
            step = 1.0
            while True:
                b = X + step * t
                count = int(np.sum(_RELTEST + X == _RELTEST + b))
                if count == n:
                    b = X  # line search exhausted; stay put
                    break
                fb = f(b)
                if np.isfinite(fb) and fb <= fmin + gradproj * step * _ACCTOL:
                    break
                step *= _STEPREDN
            if count < n:
                enough = abs(fb - fmin) > reltol * (abs(fmin) + reltol)
                fmin = fb
                if not enough:
                    count = n
            if count < n:
                gvec = g(b, fmin)
                gradcount += 1
                n_iter += 1
                t = step * t
                c = gvec - c
                d1 = float(t @ c)
                if d1 > 0:
                    Bc = B @ c
                    d2 = 1.0 + float(c @ Bc) / d1
                    B = B + (d2 * np.outer(t, t) - np.outer(Bc, t) - np.outer(t, Bc)) / d1
                else:
                    ilast = gradcount
            else:
                if ilast < gradcount:
                    count = 0
                    ilast = gradcount
        else:
            count = 0
            if ilast == gradcount:
                count = n
            else:
                ilast = gradcount
        if n_iter >= maxit:
            break
        if gradcount - ilast > 2 * n:
            ilast = gradcount
        if count == n and ilast == gradcount:
            break
    return OptimResult(b, -fmin, n_iter < maxit, n_iter, n_fev)
