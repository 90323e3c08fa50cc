"""Closed-form heavy-tail approximations, transition thresholds and limit laws.

Everything here is a direct formula in ``rho``, the jump law and the level;
the exact counterparts live in :mod:`htpoisson.pk_engine`,
:mod:`htpoisson.bmax` and :mod:`htpoisson.simulator`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from .pk_engine import ModelParams

__all__ = [
    "Thresholds",
    "thresholds",
    "approx_supremum_global",
    "classical_global",
    "approx_supremum_local",
    "approx_mtau",
    "approx_bmax",
    "approx_tau",
    "approx_tau_from_mtau",
    "kingman_tail",
    "kingman_local_density",
    "abate_whitt_density",
    "abate_whitt_tail",
    "prokhorov_bound",
    "ProkhorovBound",
]


def _scalar(a):
    return a[()] if np.ndim(a) == 0 else a


@dataclass(frozen=True)
class Thresholds:
    """Levels beyond which the heavy-tail approximations hold uniformly."""

    rho: float
    k: float
    k_star: float
    x_rho: float
    x_tilde: float
    x_rho_star: float
    a_rho_star: float


def thresholds(params: ModelParams, k: float = 1.5, k_star: float = 2.5) -> Thresholds:
    """``x_rho(k)``, ``x~_rho``, ``x*_rho(k*)`` and ``a*_rho(k*)``.

    ``k = 1`` is admitted only for laws whose slowly varying part beats
    ``(log x)^alpha``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if k == 1 and not params.law.satisfies_k1_clause:
        raise ValueError("k = 1 requires L(x) / (log x)^alpha -> infinity for the jump law")
    if k_star <= 2:
        raise ValueError("k_star must exceed 2")
    law, rho = params.law, params.rho
    alpha = getattr(law, "alpha", None)
    if alpha is None:
        raise ValueError(f"thresholds need a regularly varying law (got {law.spec()})")
    g = math.log(1.0 / (1.0 - rho))
    scale = law.mu / (1.0 - rho) * g
    return Thresholds(
        rho=rho, k=k, k_star=k_star,
        x_rho=k * (alpha - 1.0) * scale,
        x_tilde=(alpha - 2.0) * scale,
        x_rho_star=g ** k_star / (1.0 - rho) ** 2,
        a_rho_star=k_star * (alpha - 1.0) * scale,
    )


def approx_supremum_global(params: ModelParams, x):
    """The global supremum estimate in its literal form ``(rho / E[B]) (1 - rho) int_x^inf P(B > t) dt``.

    This equals ``rho (1 - rho) P(B* > x)``; compare :func:`classical_global`.
    """
    return _scalar(params.rho * (1.0 - params.rho) * params.law.excess_tail(np.asarray(x, dtype=float)))


def classical_global(params: ModelParams, x):
    """``P(M > x) ~ rho / (1 - rho) P(B* > x)``."""
    return _scalar(params.rho / (1.0 - params.rho) * params.law.excess_tail(np.asarray(x, dtype=float)))


def approx_supremum_local(params: ModelParams, x, T):
    """``P(M in [x, x + T)) ~ rho / (1 - rho) P(B* in [x, x + T))``."""
    if np.any(np.asarray(T) < 0):
        raise ValueError("window length must be nonnegative")
    return _scalar(params.rho / (1.0 - params.rho) * params.law.excess.interval_prob(x, T))


def approx_mtau(params: ModelParams, x):
    """``P(M_tau > x) ~ rho / (1 - rho) P(B > x)``."""
    return _scalar(params.rho / (1.0 - params.rho) * params.law.tail(np.asarray(x, dtype=float)))


def approx_bmax(params: ModelParams, x):
    """``P(B_tau > x) ~ P(B > x) / (1 - rho)``."""
    return _scalar(params.law.tail(np.asarray(x, dtype=float)) / (1.0 - params.rho))


def approx_tau(params: ModelParams, x):
    """``P(tau > x) ~ rho / (1 - rho) P(B > (1 - rho) x)``."""
    return approx_mtau(params, (1.0 - params.rho) * np.asarray(x, dtype=float))


def approx_tau_from_mtau(table, x):
    """``P(tau > x) ~ P(M_tau > (1 - rho) x)`` with the exact ``M_tau`` tail of ``table``."""
    from .pk_engine import mtau_tail
    return mtau_tail(table, (1.0 - table.params.rho) * np.asarray(x, dtype=float))


def _check_kingman(params: ModelParams) -> None:
    if not params.law.completely_monotone:
        warnings.warn(f"{params.law.spec()} has no completely monotone density; "
                      "the local limit is not guaranteed", RuntimeWarning, stacklevel=3)


def kingman_tail(params: ModelParams, y):
    """Heavy-traffic limit ``P((1 - rho) M > y) -> exp(-y / E[B*])``."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("y must be nonnegative")
    return _scalar(np.exp(-y / params.law.mu))


def kingman_local_density(params: ModelParams, y):
    """Limit ``(1 / E[B*]) exp(-y / E[B*])`` of the scaled supremum density."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("y must be nonnegative")
    _check_kingman(params)
    mu = params.law.mu
    return _scalar(np.exp(-y / mu) / mu)


def abate_whitt_density(t):
    """``f_R(t) = t^{-1/2} sqrt(2/pi) exp(-t/2) - 2 Phi_bar(sqrt(t))``, the scaled busy-period limit."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    r = np.sqrt(t)
    return _scalar(math.sqrt(2.0 / math.pi) * np.exp(-t / 2.0) / r - special.erfc(r / math.sqrt(2.0)))


def abate_whitt_tail(t):
    """``int_t^inf f_R(s) ds = 2 (1 + t) Phi_bar(sqrt t) - 2 sqrt(t) phi(sqrt t)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    r = np.sqrt(t)
    phibar = 0.5 * special.erfc(r / math.sqrt(2.0))
    phi = np.exp(-t / 2.0) / math.sqrt(2.0 * math.pi)
    return _scalar(2.0 * (1.0 + t) * phibar - 2.0 * r * phi)


class ProkhorovBound(NamedTuple):
    arcsinh: float
    simplified: float


def prokhorov_bound(y: float, c: float, var_sum: float) -> ProkhorovBound:
    """Tail bound for a sum of independent zero-mean variables bounded by ``c``.

    ``P(S > y) <= exp(-(y / 2c) arcsinh(y c / (2 var_sum)))``; the simplified
    form ``(c y / var_sum)^{-y / (2c)}`` follows from ``arcsinh z >= log 2z``
    and is the weaker of the two.
    """
    if y <= 0 or c <= 0 or var_sum <= 0:
        raise ValueError("y, c and var_sum must be positive")
    expo = y / (2.0 * c)
    # the simplified form exceeds one (and may overflow) when c y < var_sum
    simple = -expo * math.log(c * y / var_sum)
    return ProkhorovBound(
        arcsinh=math.exp(-expo * math.asinh(y * c / (2.0 * var_sum))),
        simplified=math.exp(simple) if simple < 700.0 else math.inf,
    )
