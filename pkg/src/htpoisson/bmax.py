"""Tail of the largest jump before the hitting time of zero.

``p(x) = P(B_tau > x)`` is the unique fixed point of

    T(p) = P(B > x) + int_0^x (1 - exp(-lambda p t)) dP(B <= t)

on ``[0, 1]``.  ``T`` is increasing with Lipschitz constant at most
``lambda E[B] = rho < 1``, so Picard iteration converges geometrically and the
a-posteriori bound ``|p_n - p| <= rho / (1 - rho) |p_n - p_{n-1}|`` certifies
the stopping point.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .pk_engine import ModelParams

__all__ = ["BmaxResult", "BmaxCurve", "boxma_map", "solve_bmax_tail", "bmax_bisect", "bmax_curve"]


@dataclass(frozen=True)
class BmaxResult:
    p: float
    residual: float
    iterations: int


def boxma_map(params: ModelParams, x: float, p: float, tol: float = 1e-12, lam: float | None = None) -> float:
    """One application of the map ``T`` at level ``x``."""
    law = params.law
    lam = params.lam if lam is None else lam
    tail = float(law.tail(x))
    if x <= 0 or lam == 0 or p == 0:
        return tail
    # split at the knee of 1 - exp(-lam p t) and at any kink of the density
    knots = sorted({b for b in (1.0 / (lam * p), getattr(law, "xm", None)) if b is not None and 0 < b < x})
    edges = [0.0, *knots, x]
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(lambda t: -math.expm1(-lam * p * t) * float(law.density(t)), a, b,
                                    epsabs=tol / 10.0, epsrel=1e-13, limit=200)
            total += val
    return tail + total


def _bracket(params: ModelParams, x: float) -> tuple[float, float]:
    tail = float(params.law.tail(x))
    return tail, min(1.0, tail / (1.0 - params.rho))


def solve_bmax_tail(params: ModelParams, x: float, tol: float = 1e-12, p0: float | None = None,
                    lam: float | None = None, max_iter: int = 100_000) -> BmaxResult:
    """Picard iteration for ``P(B_tau > x)``, started at ``P(B > x)`` unless ``p0`` is given.

    ``lam`` overrides the arrival rate; ``lam = 0`` is the degenerate limit where
    the answer is ``P(B > x)``.
    """
    if x < 0:
        raise ValueError("x must be nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    rate = params.rho if lam is None else lam * params.law.mean
    lo, hi = _bracket(params, x)
    p = lo if p0 is None else min(max(p0, lo), hi)
    contraction = rate / (1.0 - rate) if rate < 1 else math.inf
    for it in range(1, max_iter + 1):
        new = boxma_map(params, x, p, tol, lam)
        step = abs(new - p)
        p = new
        if step * contraction < tol or step == 0.0:
            break
    else:
        raise RuntimeError(f"Picard iteration did not settle in {max_iter} steps at x={x}")
    residual = abs(p - boxma_map(params, x, p, tol, lam))
    return BmaxResult(p, residual, it)


def bmax_bisect(params: ModelParams, x: float, tol: float = 1e-13) -> float:
    """Independent root of ``p - T(p)`` on the bracket ``[P(B > x), min(1, P(B > x) / (1 - rho))]``."""
    lo, hi = _bracket(params, x)
    if hi - lo <= tol:
        return lo

    def g(p):
        return p - boxma_map(params, x, p, tol / 10.0)

    if g(lo) >= 0:
        return lo
    if g(hi) <= 0:
        return hi
    return optimize.brentq(g, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class BmaxCurve:
    params: ModelParams
    x: np.ndarray
    p: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray

    def to_csv(self, path_or_buf) -> None:
        lines = ["x,p,residual,iterations"]
        lines += [f"{x:.12g},{p:.12g},{r:.3e},{n:d}"
                  for x, p, r, n in zip(self.x, self.p, self.residual, self.iterations)]
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)


def bmax_curve(params: ModelParams, grid, tol: float = 1e-12) -> BmaxCurve:
    """Solve on an ascending grid, warm-starting each level from the previous solution."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending")
    ps, res, its = [], [], []
    prev = None
    for x in grid:
        r = solve_bmax_tail(params, float(x), tol, p0=prev)
        lo, hi = _bracket(params, float(x))
        if not lo - tol <= r.p <= hi + tol:
            raise ArithmeticError(f"solution {r.p} left the bracket [{lo}, {hi}] at x={x}")
        ps.append(min(max(r.p, lo), hi))
        res.append(r.residual)
        its.append(r.iterations)
        prev = r.p
    p = np.array(ps)
    if np.any(np.diff(p) > 10 * tol):
        raise ArithmeticError("solved tail is not non-increasing")
    return BmaxCurve(params, grid, p, np.array(res), np.array(its))
