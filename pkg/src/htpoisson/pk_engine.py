"""Stationary supremum law, scale functions and exit identities on a uniform grid.

The all-time supremum ``M`` of the model is a geometric(rho) compound of the
excess law ``B*``.  Conditioning on the first ladder height gives two renewal
equations with kernel ``k = f_{B*}``::

    P(M > x) = rho * P(B* > x) + rho * int_0^x P(M > x - y) k(y) dy
    f_M(x)   = rho (1 - rho) k(x) + rho * int_0^x f_M(x - y) k(y) dy

Both are solved on the grid ``x_i = i h`` by product integration: the kernel
is integrated exactly over each cell against a piecewise-linear interpolant of
the unknown, then the ``h^2`` error term is removed by Richardson extrapolation.  Solving for
the survival function (rather than the cdf) keeps relative accuracy in the far
tail, where the heavy-tail comparisons live.  The scale function is
``W(x) = P(M <= x) / (1 - rho)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, optimize, signal

from .distributions import JumpLaw, parse_law
from .lattice import discretize, nfold

__all__ = [
    "ModelParams",
    "GridError",
    "StationaryTable",
    "build_stationary",
    "stationary_local",
    "mtau_tail",
    "q_scale",
    "passage_prob",
    "expected_passage",
    "expected_passage_random_start",
    "local_sum_ratio",
    "laplace_exponent",
    "right_inverse",
]


class GridError(ValueError):
    """A level outside the table, or a grid too short or too coarse for the request."""


@dataclass(frozen=True)
class ModelParams:
    """Utilisation ``rho`` and jump law; the arrival rate is ``rho / E[B]``."""

    rho: float
    law: JumpLaw

    def __post_init__(self):
        if isinstance(self.law, str):
            object.__setattr__(self, "law", parse_law(self.law))
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1) (got {self.rho})")

    @property
    def lam(self) -> float:
        return self.rho / self.law.mean

    @property
    def drift_gap(self) -> float:
        return 1.0 - self.rho

    @property
    def mu(self) -> float:
        return self.law.mu


def _product_weights(law: JumpLaw, h: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell weights of ``k = f_{B*}`` against piecewise-linear hat functions.

    ``a[j] + b[j]`` is the exact mass of ``[jh, (j+1)h)`` under the excess
    law, so the discrete renewal kernel keeps total mass below one for every
    ``rho < 1``; ``b[j] = int_cell k(y) (y/h - j) dy`` by Gauss-Legendre.
    """
    t, wq = np.polynomial.legendre.leggauss(8)
    t = 0.5 * (t + 1.0)
    wq = 0.5 * wq
    left = h * np.arange(n)
    mass = law.excess.interval_prob(left, h)
    dens = law.excess_density(left[:, None] + h * t[None, :])
    b = h * (dens * t) @ wq
    b = np.minimum(b, mass)
    return mass - b, b


def _volterra(forcing: np.ndarray, a: np.ndarray, b: np.ndarray, rho: float) -> np.ndarray:
    """Solve ``u = forcing + rho * (u conv k)`` with product-integration weights.

    On cell ``j`` the unknown ``u(x - y)`` is interpolated linearly between
    ``u_{i-j}`` and ``u_{i-j-1}``, which weight ``a[j]`` and ``b[j]``.  All
    rows of ``forcing`` (shape ``(m, n)``) share the kernel.
    """
    m, n = forcing.shape
    u = np.empty((m, n))
    u[:, 0] = forcing[:, 0]
    c = np.empty(n)
    c[0] = a[0]
    c[1:] = a[1:] + b[:-1]  # total weight on u_{i-m}
    crev = c[::-1]
    denom = 1.0 - rho * a[0]
    for i in range(1, n):
        # sum_{j=1}^{i-1} u_j c_{i-j}
        s = u[:, 1:i] @ crev[n - i:n - 1]
        u[:, i] = (forcing[:, i] + rho * (s + b[i - 1] * u[:, 0])) / denom
    return u


def _trapezoid_conv(f: np.ndarray, g: np.ndarray, h: float) -> np.ndarray:
    """``int_0^x f(x - t) g(t) dt`` on the grid by the trapezoid rule."""
    n = f.size
    full = np.convolve(f, g)[:n] if n <= 4096 else signal.fftconvolve(f, g)[:n]
    return h * (full - 0.5 * (f[0] * g + g[0] * f))


def _interp(x, grid: np.ndarray, values: np.ndarray):
    out = np.interp(x, grid, values)
    return out[()] if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class StationaryTable:
    """Grid values of the supremum law and the scale function.

    ``cdf[i] = P(M <= x_i)`` (so ``cdf[0] = 1 - rho``), ``sf = 1 - cdf`` kept
    separately at full relative precision, ``density`` the absolutely
    continuous part, ``w = cdf / (1 - rho)``.  Values are Richardson-corrected
    product-integration solutions; ``err_bound`` is the sup-norm gap between the
    corrected survival functions built on ``h`` and on ``2h``.
    """

    params: ModelParams
    h: float
    x: np.ndarray
    sf: np.ndarray
    density: np.ndarray
    err_bound: float
    tol: float = field(default=1e-5)

    def __post_init__(self):
        for a in (self.x, self.sf, self.density):
            a.setflags(write=False)

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    @cached_property
    def cdf(self) -> np.ndarray:
        return _frozen(1.0 - self.sf)

    @cached_property
    def w(self) -> np.ndarray:
        return _frozen(self.cdf / self.params.drift_gap)

    @cached_property
    def logw(self) -> np.ndarray:
        return _frozen(np.log1p(-self.sf) - math.log(self.params.drift_gap))

    @cached_property
    def log_increments(self) -> np.ndarray:
        """``log w(x_{i+1}) - log w(x_i)`` without cancellation."""
        return _frozen(np.log1p((self.sf[:-1] - self.sf[1:]) / self.cdf[:-1]))

    @cached_property
    def iw(self) -> np.ndarray:
        """``int_0^x W``."""
        return _frozen(integrate.cumulative_trapezoid(self.w, self.x, initial=0.0))

    @cached_property
    def w2(self) -> np.ndarray:
        """Self-convolution ``W * W``."""
        return _frozen(_trapezoid_conv(self.w, self.w, self.h))

    def check(self, x, upper: float | None = None) -> None:
        x = np.asarray(x, dtype=float)
        top = self.x_max if upper is None else upper
        if np.any(x < 0) or np.any(x > top + 1e-9 * top):
            raise GridError(f"level outside the table [0, {top:g}] (err_bound={self.err_bound:.3g})")

    def sf_at(self, x):
        self.check(x)
        return _interp(x, self.x, self.sf)

    def cdf_at(self, x):
        self.check(x)
        return _interp(x, self.x, self.cdf)

    def density_at(self, x):
        self.check(x)
        return _interp(x, self.x, self.density)

    def w_at(self, x):
        """``W(x)``, zero on the negative half-line."""
        x = np.asarray(x, dtype=float)
        self.check(np.maximum(x, 0.0))
        out = np.where(x < 0, 0.0, np.interp(x, self.x, self.w))
        return out[()] if out.ndim == 0 else out

    def to_csv(self, path_or_buf) -> None:
        """Write ``x, cdf, density, w, logw`` with a commented parameter header."""
        head = (f"# rho={self.params.rho!r}, law={self.params.law.spec()}, h={self.h!r}, "
                f"x_max={self.x_max!r}, err_bound={self.err_bound:.6e}\n")
        cols = np.column_stack([self.x, self.cdf, self.density, self.w, self.logw])
        body = "\n".join(",".join(f"{v:.12g}" for v in row) for row in cols)
        text = head + "x,cdf,density,w,logw\n" + body + "\n"
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _solve(params: ModelParams, x: np.ndarray, h: float):
    law, rho = params.law, params.rho
    forcing = np.vstack([rho * law.excess_tail(x), rho * (1.0 - rho) * law.excess_density(x)])
    a, b = _product_weights(law, h, x.size)
    return _volterra(forcing, a, b, rho)


def build_stationary(params: ModelParams, h: float, x_max: float, tol: float = 1e-5) -> StationaryTable:
    """Tabulate ``P(M > x)`` and ``f_M(x)`` on ``[0, x_max]`` with step ``h``.

    Raises :class:`GridError` if ``x_max < 10 / (1 - rho)`` for ``rho >= 0.95``
    (the supremum lives on the scale ``1 / (1 - rho)``), or if the estimated
    discretisation error exceeds ``10 * tol``.
    """
    if not h > 0 or not x_max > h:
        raise ValueError("need h > 0 and x_max > h")
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    if params.rho >= 0.95 and x_max < 10.0 / params.drift_gap:
        raise GridError(f"x_max={x_max:g} is too short for rho={params.rho}: "
                        f"need at least 10/(1-rho) = {10.0 / params.drift_gap:g}")
    n = 4 * int(math.ceil(x_max / (4 * h)))  # aligned with the 2h and 4h companions
    x = h * np.arange(n + 1)
    fine = _solve(params, x, h)
    mid = _solve(params, x[::2], 2 * h)
    coarse = _solve(params, x[::4], 4 * h)
    # the discretisation error is c(x) h^2 + O(h^4) with smooth c: remove it, and
    # use the gap between the h and 2h extrapolants as the error bound
    corr = (fine[:, ::2] - mid) / 3.0
    corr_fine = np.vstack([np.interp(x, x[::2], c) for c in corr])
    sf, dens = fine + corr_fine
    err = float(np.max(np.abs(sf[::4] - (mid[0, ::2] + (mid[0, ::2] - coarse[0]) / 3.0))))
    if err > 10 * tol:
        raise GridError(f"grid step h={h:g} too coarse: error estimate {err:.3g} exceeds 10*tol={10 * tol:g}")
    sf = np.clip(sf, 0.0, params.rho)
    dens = np.clip(dens, 0.0, None)
    return StationaryTable(params, h, x, sf, dens, err, tol)


def stationary_local(table: StationaryTable, x, T):
    """``P(M in [x, x + T))``."""
    x = np.asarray(x, dtype=float)
    table.check(x + T)
    table.check(x)
    out = _interp(x, table.x, table.sf) - _interp(x + T, table.x, table.sf)
    return out


def mtau_tail(table: StationaryTable, x):
    """``P(M_tau > x) = (1 / lambda) d/dx log P(M <= x)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < table.h) or np.any(x > table.x_max - table.h):
        raise GridError(f"level outside [h, x_max - h] = [{table.h:g}, {table.x_max - table.h:g}]")
    out = table.density_at(x) / table.cdf_at(x) / table.params.lam
    return out


@dataclass(frozen=True)
class QScale:
    wq: float | np.ndarray
    zq: float | np.ndarray
    terms: int


def q_scale(table: StationaryTable, q: float, x, max_terms: int = 400) -> QScale:
    """``W^(q)(x) = sum_k q^k W^{(k+1)*}(x)`` and ``Z^(q)(x) = 1 + q int_0^x W^(q)``."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    x = np.asarray(x, dtype=float)
    table.check(np.maximum(x, 0.0))
    if q == 0.0:
        wq_grid, terms = np.asarray(table.w), 1
    else:
        # the k-th term is at most (q int W)^k / k! * sup W; beyond this scale
        # the partial sums lose all precision before they settle
        scale = q * table.iw[-1]
        if scale > 500.0:
            raise OverflowError(f"q-series diverges numerically on this grid (q * int W = {scale:.3g}); "
                                "shorten x_max or lower q")
        term = np.array(table.w)
        wq_grid = term.copy()
        for terms in range(1, max_terms + 1):
            term = q * _trapezoid_conv(term, table.w, table.h)
            wq_grid += term
            if np.max(np.abs(term)) < table.tol * 1e-3 * np.max(wq_grid):
                break
        else:
            raise OverflowError(f"q-series did not settle within {max_terms} terms")
        terms += 1
    iwq = integrate.cumulative_trapezoid(wq_grid, table.x, initial=0.0)
    wq = np.where(x < 0, 0.0, np.interp(np.maximum(x, 0), table.x, wq_grid))
    zq = np.where(x < 0, 1.0, 1.0 + q * np.interp(np.maximum(x, 0), table.x, iwq))
    if wq.ndim == 0:
        wq, zq = float(wq), float(zq)
    return QScale(wq, zq, terms)


def passage_prob(table: StationaryTable, y, a):
    """``P_y(sigma(a) < tau) = (W(a) - W(a - y)) / W(a)``, equal to one for ``y >= a``."""
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("target level must be positive")
    if np.any(y <= 0):
        raise ValueError("initial level must be positive")
    wa = table.w_at(a)
    # W has an atom at zero, so the start-at-or-above case is set explicitly
    out = np.where(y >= a, 1.0, (wa - table.w_at(np.maximum(a - y, 0.0))) / wa)
    return out[()] if out.ndim == 0 else out


def _passage_numerator(table: StationaryTable, y, a):
    """``E_y[sigma(a); sigma(a) < tau]`` for ``0 < y < a``."""
    b = a - y
    w_a, w_b = table.w_at(a), table.w_at(b)
    iw_a, iw_b = _interp(a, table.x, table.iw), _interp(b, table.x, table.iw)
    w2_a, w2_b = _interp(a, table.x, table.w2), _interp(b, table.x, table.w2)
    return (w_b / w_a) * (iw_a - w2_a / w_a) - (iw_b - w2_b / w_a)


def expected_passage(table: StationaryTable, y, a, floor: float = 1e-12):
    """``E_y[sigma(a) | sigma(a) < tau]`` from the scale-function representation."""
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    if np.any(y <= 0) or np.any(y >= a):
        raise ValueError("need 0 < y < a")
    table.check(a)
    p = passage_prob(table, y, a)
    if np.any(p < floor):
        raise ValueError(f"conditioning on a near-null event: P_y(sigma(a) < tau) = {np.min(p):.3g}")
    out = np.maximum(_passage_numerator(table, y, a) / p, 0.0)
    return out[()] if np.ndim(out) == 0 else out


def expected_passage_random_start(table: StationaryTable, a: float, floor: float = 1e-12) -> float:
    """``E[sigma(a) | sigma(a) < tau]`` with ``X_0 ~ B``.

    Starts at or above ``a`` pass at time zero with probability one; the
    conditional mean is total expected time on the event over its probability.
    """
    if a <= 0:
        raise ValueError("target level must be positive")
    table.check(a)
    law = table.params.law
    breaks = [b for b in (getattr(law, "xm", None),) if b is not None and 0 < b < a]

    def num(y):
        return _passage_numerator(table, y, a) * law.density(y)

    def den(y):
        return passage_prob(table, y, a) * law.density(y)

    opts = dict(limit=400, epsabs=0.0, epsrel=1e-9, points=breaks or None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        top, _ = integrate.quad(num, 0.0, a, **opts)
        prob, _ = integrate.quad(den, 0.0, a, **opts)
    prob += float(law.tail(a))
    if prob < floor:
        raise ValueError(f"conditioning on a near-null event: P(sigma(a) < tau) = {prob:.3g}")
    return max(top / prob, 0.0)


def local_sum_ratio(params: ModelParams, n: int, x: float, T: float, h: float = 0.01) -> float:
    """``P(S*_n in [x, x + T)) / (n P(B* in [x - (n - 1) mu, x - (n - 1) mu + T)))``.

    ``S*_n`` is a sum of ``n`` excess variables; its law comes from ``n``-fold
    convolution of the excess law discretised with midpoint cells.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    shift = x - (n - 1) * params.mu
    if shift < 0:
        raise ValueError(f"x - (n-1) mu = {shift:.6g} is negative")
    denom = n * float(params.law.excess.interval_prob(shift, T))
    if n == 1:
        return 1.0
    m = int(math.ceil((x + T) / h)) + 2
    lat = nfold(discretize(params.law.excess.cdf, h, m, alignment="round"), n)
    # cell i holds [(i - 1/2) h, (i + 1/2) h); its cdf is known at the upper edges
    edges = h * (np.arange(lat.n) + 0.5)
    cdf = np.cumsum(lat.masses)
    num = np.interp(x + T, edges, cdf) - np.interp(x, edges, cdf)
    return num / denom


def laplace_exponent(params: ModelParams, beta):
    """``psi(beta) = beta - lambda (1 - E[exp(-beta B)])``."""
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 0):
        raise ValueError("beta must be nonnegative")
    b = np.where(beta == 0, 1.0, beta)
    out = np.where(beta == 0, 0.0, b - params.lam * (1.0 - params.law.laplace(b)))
    return out[()] if out.ndim == 0 else out


def right_inverse(params: ModelParams, q: float) -> float:
    """Largest root ``Phi(q)`` of ``psi(beta) = q``; ``Phi(0) = 0`` since ``psi'(0) > 0``."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    if q == 0:
        return 0.0
    hi = q / params.drift_gap + 1.0
    while laplace_exponent(params, hi) < q:
        hi *= 2.0
    return optimize.brentq(lambda b: laplace_exponent(params, b) - q, 0.0, hi, xtol=1e-14, rtol=1e-14)
