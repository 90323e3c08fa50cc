"""Jump-size laws, their excess (integrated-tail) laws, moments and samplers.

All laws live on ``[0, inf)`` and use the normalised units of the model:
unit drain rate, Lomax scale 1.  Every method broadcasts over numpy arrays.
"""
from __future__ import annotations

import abc
import re
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy import integrate, special
from scipy.optimize import elementwise

__all__ = [
    "AlphaThreeWarning",
    "JumpLaw",
    "ExcessLaw",
    "Moments",
    "Lomax",
    "Pareto",
    "LogPerturbedPareto",
    "Exponential",
    "parse_law",
    "tail",
    "moments",
    "excess_tail",
    "excess_density",
    "sample",
    "excess_sample",
]

_ROOT_TOL = dict(xrtol=1e-13, xatol=0.0, frtol=0.0, fatol=0.0)


class AlphaThreeWarning(UserWarning):
    """Tail index exactly 3: formulas still evaluate, the limit theorems are not proven there."""


class Moments(NamedTuple):
    mean: float
    second_moment: float
    mu: float


def _uniform_open(rng: np.random.Generator, size) -> np.ndarray:
    # (0, 1]; keeps inverse-tail samplers finite
    return 1.0 - rng.random(size)


def _check_alpha(alpha: float) -> None:
    if not np.isfinite(alpha) or alpha <= 2.0:
        raise ValueError(f"alpha must exceed 2 (got {alpha}); the variance would be infinite")
    if alpha == 3.0:
        warnings.warn("alpha = 3 is accepted but excluded by the limit theorems", AlphaThreeWarning,
                      stacklevel=3)


class JumpLaw(abc.ABC):
    """Base class of jump-size laws ``B``.

    Subclasses provide the tail, density, moments and an exact inverse-transform
    sampler.  The excess law ``B*`` with density ``tail(x) / mean`` is derived
    here and exposed through :attr:`excess`.
    """

    #: ``True`` for the regularly varying variants.
    regularly_varying: bool = True
    #: jump density completely monotone (hypothesis of the local Kingman limit)
    completely_monotone: bool = False

    @abc.abstractmethod
    def tail(self, x): ...

    @abc.abstractmethod
    def density(self, x): ...

    @property
    @abc.abstractmethod
    def mean(self) -> float: ...

    @property
    @abc.abstractmethod
    def second_moment(self) -> float: ...

    @abc.abstractmethod
    def excess_tail(self, x): ...

    @abc.abstractmethod
    def _tail_inverse(self, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def _excess_tail_inverse(self, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def spec(self) -> str:
        """Config-string form, parseable by :func:`parse_law`."""

    @property
    def mu(self) -> float:
        """Mean of the excess law, ``E[B^2] / (2 E[B])``."""
        return self.second_moment / (2.0 * self.mean)

    @property
    def alpha_is_three(self) -> bool:
        return getattr(self, "alpha", None) == 3.0

    @property
    def satisfies_k1_clause(self) -> bool:
        """Whether ``L(x) / (log x)^alpha -> inf`` holds, which admits ``k = 1`` in the thresholds."""
        return False

    def moments(self) -> Moments:
        return Moments(self.mean, self.second_moment, self.mu)

    def cdf(self, x):
        return 1.0 - self.tail(x)

    def excess_density(self, x):
        return self.tail(x) / self.mean

    @cached_property
    def excess(self) -> "ExcessLaw":
        return ExcessLaw(self)

    def tail_integral(self, s) -> np.ndarray:
        """``int_0^inf exp(-s t) P(B > t) dt`` for ``s > 0``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s)
        for i, si in enumerate(s.flat):
            if si <= 0:
                raise ValueError("transform variable must be positive")
            val, _ = integrate.quad(lambda t: np.exp(-si * t) * self.tail(t), 0.0, np.inf,
                                    epsabs=0.0, epsrel=1e-11, limit=400)
            out.flat[i] = val
        return out

    def laplace(self, s):
        """Laplace-Stieltjes transform ``E[exp(-s B)]``."""
        s_arr = np.asarray(s, dtype=float)
        out = 1.0 - s_arr * self.tail_integral(s_arr).reshape(s_arr.shape)
        return out[()] if out.ndim == 0 else out

    def excess_laplace(self, s):
        """``E[exp(-s B*)]``."""
        s_arr = np.asarray(s, dtype=float)
        out = self.tail_integral(s_arr).reshape(s_arr.shape) / self.mean
        return out[()] if out.ndim == 0 else out

    def _excess_interval(self, a, b):
        return self.excess_tail(a) - self.excess_tail(b)

    def sample(self, rng: np.random.Generator, size=None):
        return self._tail_inverse(_uniform_open(rng, size))

    def excess_sample(self, rng: np.random.Generator, size=None):
        return self._excess_tail_inverse(_uniform_open(rng, size))

    def __str__(self) -> str:
        return self.spec()


@dataclass(frozen=True)
class ExcessLaw:
    """Integrated-tail law ``B*`` of a jump law ``B``.

    Density ``P(B > x) / E[B]``; mean ``mu = E[B^2] / (2 E[B])``.
    """

    parent: JumpLaw

    def tail(self, x):
        return self.parent.excess_tail(x)

    def density(self, x):
        return self.parent.excess_density(x)

    def cdf(self, x):
        return 1.0 - self.parent.excess_tail(x)

    @property
    def mean(self) -> float:
        return self.parent.mu

    def laplace(self, s):
        return self.parent.excess_laplace(s)

    def sample(self, rng: np.random.Generator, size=None):
        return self.parent.excess_sample(rng, size)

    def interval_prob(self, x, T):
        """``P(B* in [x, x + T))``, computed without cancellation where the law allows it."""
        x = np.asarray(x, dtype=float)
        return self.parent._excess_interval(np.maximum(x, 0.0), np.maximum(x + T, 0.0))


@dataclass(frozen=True, eq=True)
class Lomax(JumpLaw):
    """Pareto type II law with unit scale: ``P(B > x) = (1 + x)^(-alpha)``."""

    alpha: float
    completely_monotone = True

    def __post_init__(self):
        _check_alpha(self.alpha)

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0, 1.0, np.power(1.0 + np.maximum(x, 0.0), -self.alpha))[()]

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 0.0, self.alpha * np.power(1.0 + np.maximum(x, 0.0), -self.alpha - 1.0))[()]

    @property
    def mean(self) -> float:
        return 1.0 / (self.alpha - 1.0)

    @property
    def second_moment(self) -> float:
        return 2.0 / ((self.alpha - 1.0) * (self.alpha - 2.0))

    def excess_tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0, 1.0, np.power(1.0 + np.maximum(x, 0.0), 1.0 - self.alpha))[()]

    def _excess_interval(self, a, b):
        # (1+a)^(1-alpha) * (1 - ((1+a)/(1+b))^(alpha-1))
        r = np.log1p(a) - np.log1p(b)
        return np.power(1.0 + a, 1.0 - self.alpha) * -np.expm1((self.alpha - 1.0) * r)

    def _tail_inverse(self, u):
        return np.power(u, -1.0 / self.alpha) - 1.0

    def _excess_tail_inverse(self, u):
        return np.power(u, -1.0 / (self.alpha - 1.0)) - 1.0

    def spec(self) -> str:
        return f"lomax(alpha={self.alpha:g})"


@dataclass(frozen=True, eq=True)
class Pareto(JumpLaw):
    """Classical Pareto law: ``P(B > x) = (x / x_m)^(-alpha)`` for ``x >= x_m``, 1 below."""

    alpha: float
    xm: float = 1.0

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not self.xm > 0:
            raise ValueError("xm must be positive")

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < self.xm, 1.0, np.power(np.maximum(x, self.xm) / self.xm, -self.alpha))[()]

    def density(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.maximum(x, self.xm)
        return np.where(x < self.xm, 0.0, self.alpha / self.xm * np.power(xs / self.xm, -self.alpha - 1.0))[()]

    @property
    def mean(self) -> float:
        return self.alpha * self.xm / (self.alpha - 1.0)

    @property
    def second_moment(self) -> float:
        return self.alpha * self.xm ** 2 / (self.alpha - 2.0)

    def excess_tail(self, x):
        x = np.asarray(x, dtype=float)
        below = 1.0 - np.maximum(x, 0.0) / self.mean
        xs = np.maximum(x, self.xm)
        above = self.xm ** self.alpha * np.power(xs, 1.0 - self.alpha) / ((self.alpha - 1.0) * self.mean)
        return np.where(x < self.xm, below, above)[()]

    def _tail_inverse(self, u):
        return self.xm * np.power(u, -1.0 / self.alpha)

    def _excess_tail_inverse(self, u):
        knee = 1.0 / self.alpha  # excess tail at xm
        below = self.mean * (1.0 - u)
        above = np.power(u * (self.alpha - 1.0) * self.mean / self.xm ** self.alpha, 1.0 / (1.0 - self.alpha))
        return np.where(u > knee, below, above)

    def spec(self) -> str:
        return f"pareto(alpha={self.alpha:g},xm={self.xm:g})"


@dataclass(frozen=True, eq=True)
class LogPerturbedPareto(JumpLaw):
    """Regularly varying law with a logarithmic slowly varying factor.

    The density is ``f(x) = (1 + log(1 + x))^beta (1 + x)^(-alpha - 1) / Z``, so that
    ``P(B > x) ~ L(x) x^(-alpha) / (alpha Z)`` with ``L(x) = (1 + log(1 + x))^beta``.
    Substituting ``s = 1 + log(1 + x)`` turns every moment and tail integral into an
    upper incomplete gamma function, which is what the methods below evaluate.
    For ``beta > alpha`` the law satisfies ``L(x) / (log x)^alpha -> inf``.
    """

    alpha: float
    beta: float

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ValueError("beta must be a finite non-negative number")

    @property
    def satisfies_k1_clause(self) -> bool:
        return self.beta > self.alpha

    # G(c, s0) = int_{s0}^inf s^beta exp(-c (s - 1)) ds
    def _g(self, c: float, s0):
        a = self.beta + 1.0
        return np.exp(c + special.gammaln(a) - a * np.log(c)) * special.gammaincc(a, c * s0)

    @cached_property
    def _z(self) -> float:
        return float(self._g(self.alpha, 1.0))

    @staticmethod
    def _s(x):
        return 1.0 + np.log1p(np.maximum(np.asarray(x, dtype=float), 0.0))

    def tail(self, x):
        a = self.beta + 1.0
        x = np.asarray(x, dtype=float)
        val = special.gammaincc(a, self.alpha * self._s(x)) / special.gammaincc(a, self.alpha)
        return np.where(x <= 0, 1.0, val)[()]

    def density(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.maximum(x, 0.0)
        val = np.power(self._s(xs), self.beta) * np.power(1.0 + xs, -self.alpha - 1.0) / self._z
        return np.where(x < 0, 0.0, val)[()]

    def _partial_mean(self, x):
        """``E[B; B > x]``."""
        s0 = self._s(x)
        return (self._g(self.alpha - 1.0, s0) - self._g(self.alpha, s0)) / self._z

    @cached_property
    def _mean(self) -> float:
        return float(self._partial_mean(0.0))

    @property
    def mean(self) -> float:
        return self._mean

    @cached_property
    def _second(self) -> float:
        a = self.alpha
        return float((self._g(a - 2.0, 1.0) - 2.0 * self._g(a - 1.0, 1.0) + self._g(a, 1.0)) / self._z)

    @property
    def second_moment(self) -> float:
        return self._second

    def excess_tail(self, x):
        x = np.asarray(x, dtype=float)
        xs = np.maximum(x, 0.0)
        # int_x^inf P(B > t) dt = E[B; B > x] - x P(B > x)
        val = (self._partial_mean(xs) - xs * self.tail(xs)) / self.mean
        return np.where(x <= 0, 1.0, np.clip(val, 0.0, 1.0))[()]

    def _invert(self, log_tail_fn, u):
        u = np.asarray(u, dtype=float)
        logu = np.log(u)
        lo = np.zeros_like(u)
        hi = np.ones_like(u)
        # grow the bracket (in log(1 + x)) until the tail drops below u
        for _ in range(200):
            short = log_tail_fn(np.expm1(hi)) > logu
            if not short.any():
                break
            hi = np.where(short, 2.0 * hi, hi)
        res = elementwise.find_root(lambda y, lu: log_tail_fn(np.expm1(y)) - lu, (lo, hi),
                                    args=(logu,), tolerances=_ROOT_TOL)
        return np.expm1(res.x)

    def _tail_inverse(self, u):
        return self._invert(lambda x: np.log(self.tail(x)), u)

    def _excess_tail_inverse(self, u):
        return self._invert(lambda x: np.log(np.maximum(self.excess_tail(x), 1e-300)), u)

    def spec(self) -> str:
        return f"logpareto(alpha={self.alpha:g},beta={self.beta:g})"


@dataclass(frozen=True, eq=True)
class Exponential(JumpLaw):
    """Exponential jumps with mean ``scale`` (memoryless).  Validation only: not regularly varying."""

    scale: float = 1.0
    regularly_varying = False
    completely_monotone = True

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("mean must be positive")

    @property
    def mean(self) -> float:
        return self.scale

    @property
    def second_moment(self) -> float:
        return 2.0 * self.scale ** 2

    def tail(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-np.maximum(x, 0.0) / self.scale)[()]

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 0.0, np.exp(-np.maximum(x, 0.0) / self.scale) / self.scale)[()]

    excess_tail = tail

    def laplace(self, s):
        return 1.0 / (1.0 + np.asarray(s, dtype=float) * self.scale)

    def excess_laplace(self, s):
        return self.laplace(s)

    def _tail_inverse(self, u):
        return -self.scale * np.log(u)

    _excess_tail_inverse = _tail_inverse

    def spec(self) -> str:
        return f"exp(mean={self.scale:g})"


_LAW_RE = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$")
_LAW_ARGS = {
    "lomax": (Lomax, {"alpha": "alpha"}),
    "pareto": (Pareto, {"alpha": "alpha", "xm": "xm"}),
    "logpareto": (LogPerturbedPareto, {"alpha": "alpha", "beta": "beta"}),
    "exp": (Exponential, {"mean": "scale"}),
}


def parse_law(text: str) -> JumpLaw:
    """Build a law from its config string, e.g. ``lomax(alpha=2.5)`` or ``exp(mean=1)``.

    Raises ``ValueError`` for unknown families, unknown or malformed arguments and
    parameter values outside the admissible range.
    """
    m = _LAW_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse law {text!r}; expected e.g. 'lomax(alpha=2.5)'")
    name, argtext = m.group(1).lower(), m.group(2)
    if name not in _LAW_ARGS:
        raise ValueError(f"unknown law family {name!r}; choose from {sorted(_LAW_ARGS)}")
    cls, names = _LAW_ARGS[name]
    kwargs = {}
    for part in filter(None, (p.strip() for p in argtext.split(","))):
        key, sep, val = part.partition("=")
        key = key.strip()
        if not sep or key not in names:
            raise ValueError(f"bad argument {part!r} for {name}; expected {sorted(names)}")
        try:
            kwargs[names[key]] = float(val)
        except ValueError:
            raise ValueError(f"argument {key} of {name} is not a number: {val.strip()!r}") from None
    return cls(**kwargs)


# Functional aliases mirroring the operation list of the library.

def tail(law: JumpLaw, x):
    return law.tail(x)


def moments(law: JumpLaw) -> Moments:
    return law.moments()


def excess_tail(law: JumpLaw, x):
    return law.excess_tail(x)


def excess_density(law: JumpLaw, x):
    return law.excess_density(x)


def sample(law: JumpLaw, rng: np.random.Generator, size=None):
    return law.sample(rng, size)


def excess_sample(law: JumpLaw, rng: np.random.Generator, size=None):
    return law.excess_sample(rng, size)
