"""Lattice distributions: discretisation, convolution and geometric compounds.

A :class:`LatticeDistribution` carries the masses of a nonnegative law on the
points ``0, h, 2h, ...`` plus the probability left beyond the grid.  Sums of
independent lattice variables are computed by discrete convolution; the
geometric compound ``sum_n (1 - rho) rho^n p^{*n}`` by the renewal recursion
(direct path) or by an exponentially tilted FFT (transform path).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy import signal

Method = Literal["direct", "fft"]
Alignment = Literal["floor", "ceil", "round"]


@dataclass(frozen=True)
class LatticeDistribution:
    """Masses on the grid ``i * h`` (``i = 0..n-1``) and the mass beyond it."""

    h: float
    masses: np.ndarray
    tail_mass: float

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("grid step must be positive")
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("masses must be a non-empty 1-d array")
        if (m < -1e-15).any() or self.tail_mass < -1e-15:
            raise ValueError("masses must be nonnegative")
        total = m.sum() + self.tail_mass
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"masses do not sum to one (total {total!r})")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    @property
    def n(self) -> int:
        return self.masses.size

    @property
    def points(self) -> np.ndarray:
        return self.h * np.arange(self.n)

    def cdf(self) -> np.ndarray:
        """``P(K h <= i h)`` for each grid index ``i``."""
        return np.cumsum(self.masses)

    def mean(self) -> float:
        """Mean of the on-grid part (ignores ``tail_mass``)."""
        return float(self.points @ self.masses)


def discretize(cdf: Callable[[np.ndarray], np.ndarray], h: float, n: int,
               alignment: Alignment = "floor") -> LatticeDistribution:
    """Mass-preserving discretisation of a law on ``[0, inf)`` given its cdf.

    ``floor`` puts the mass of ``[ih, (i+1)h)`` on ``ih`` (stochastically smaller),
    ``ceil`` puts it on ``(i+1)h`` (stochastically larger) and ``round`` puts the
    mass of ``[(i-1/2)h, (i+1/2)h)`` on ``ih``.
    """
    if n < 1:
        raise ValueError("need at least one grid point")
    if alignment == "floor":
        edges = h * np.arange(n + 1)
        c = np.asarray(cdf(edges), dtype=float)
        c[0] = 0.0
        masses = np.diff(c)
    elif alignment == "ceil":
        c = np.asarray(cdf(h * np.arange(n)), dtype=float)
        c[0] = 0.0
        masses = np.diff(c, prepend=0.0)
    elif alignment == "round":
        edges = h * (np.arange(n) + 0.5)
        c = np.asarray(cdf(edges), dtype=float)
        masses = np.diff(c, prepend=0.0)
    else:
        raise ValueError(f"unknown alignment {alignment!r}")
    masses = np.clip(masses, 0.0, None)
    tail_mass = max(1.0 - masses.sum(), 0.0)
    # absorb round-off so that the total is one
    masses = masses / (masses.sum() + tail_mass)
    return LatticeDistribution(h, masses, 1.0 - masses.sum())


def convolve(a: np.ndarray, b: np.ndarray, n: int | None = None, method: Method = "direct") -> np.ndarray:
    """Discrete convolution truncated to the first ``n`` points.

    ``direct`` is the exact O(n^2) sum and the reference; ``fft`` is the
    O(n log n) transform path.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if n is None:
        n = a.size + b.size - 1
    if method == "direct":
        out = np.convolve(a[:n], b[:n])[:n]
    elif method == "fft":
        out = signal.fftconvolve(a[:n], b[:n])[:n]
        out = np.clip(out, 0.0, None) if (a >= 0).all() and (b >= 0).all() else out
    else:
        raise ValueError(f"unknown method {method!r}")
    if out.size < n:
        out = np.pad(out, (0, n - out.size))
    return out


def add(x: LatticeDistribution, y: LatticeDistribution, method: Method = "direct") -> LatticeDistribution:
    """Law of the sum of two independent lattice variables, on the grid of ``x``."""
    if x.h != y.h:
        raise ValueError("grid steps differ")
    n = x.n
    m = convolve(x.masses, y.masses[:n], n, method)
    return LatticeDistribution(x.h, m, max(1.0 - m.sum(), 0.0) if m.sum() <= 1.0 else 0.0)


def nfold(x: LatticeDistribution, k: int, method: Method = "direct") -> LatticeDistribution:
    """Law of the sum of ``k`` independent copies of ``x``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    out = x
    for _ in range(k - 1):
        out = add(out, x, method)
    return out


def geometric_compound(x: LatticeDistribution, rho: float, method: Method = "direct") -> LatticeDistribution:
    """Law of ``sum_{i=1}^G X_i`` with ``P(G = n) = (1 - rho) rho^n``.

    Masses on the grid are exact for the lattice input: the renewal relation
    ``g = (1 - rho) delta_0 + rho p * g`` only couples grid points with smaller
    indices, so nothing beyond the grid is needed and the geometric series is
    summed to all orders.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    p = x.masses
    n = x.n
    if method == "direct":
        g = np.empty(n)
        denom = 1.0 - rho * p[0]
        g[0] = (1.0 - rho) / denom
        prev = p[1:][::-1]  # prev[n-1-j] = p[j]
        for i in range(1, n):
            # sum_{j=1}^{i} p_j g_{i-j}
            s = np.dot(prev[n - 1 - i:], g[:i])
            g[i] = rho * s / denom
    elif method == "fft":
        g = _geometric_compound_fft(p, rho)
    else:
        raise ValueError(f"unknown method {method!r}")
    g = np.clip(g, 0.0, None)
    total = g.sum()
    return LatticeDistribution(x.h, g, max(1.0 - total, 0.0) if total <= 1.0 else 0.0)


def _geometric_compound_fft(p: np.ndarray, rho: float) -> np.ndarray:
    """Transform path: ``G(z) = (1 - rho) / (1 - rho P(z))`` on a tilted, padded grid.

    Tilting by ``theta^i`` damps the wrap-around of the circular transform;
    the pad factor and ``theta`` keep both aliasing and the round-off
    amplification of the untilting near 1e-12.
    """
    n = p.size
    size = 1 << int(np.ceil(np.log2(4 * n)))
    theta = 10.0 ** (-4.0 / n)
    tilt = theta ** np.arange(n)
    pt = np.zeros(size)
    pt[:n] = p * tilt
    P = np.fft.rfft(pt)
    G = (1.0 - rho) / (1.0 - rho * P)
    g = np.fft.irfft(G, size)[:n]
    return g / tilt
