"""Event-driven Monte Carlo for the process and its functionals.

A path starts at ``X_0 ~ B`` (or a fixed level), drains at unit rate and
receives jumps ``B_i`` at Poisson epochs of rate ``lambda = rho / E[B]``.  It is
simulated exactly jump by jump until it first hits zero.  Recorded per path:
``tau``, ``M_tau = sup X`` on ``[0, tau]``, ``B_tau = max(B_0, ..., B_N)`` with
``B_0 = X_0``, the number of jumps ``N(tau)`` and optionally the first passage
time ``sigma(a)`` of a level ``a``.

Random streams.  Replications are grouped in fixed blocks of
:data:`BLOCK` paths.  Block ``j`` draws from a Philox generator keyed by the
master seed with counter word 2 set to ``j``, so each block's output is a
pure function of ``(master_seed, j)``.  Blocks are reduced in index order,
which makes every estimate identical for any number of workers.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .pk_engine import ModelParams

__all__ = [
    "BLOCK",
    "PathFunctionals",
    "PathBatch",
    "Estimate",
    "SimConfig",
    "ZeroSupportError",
    "block_rng",
    "simulate_path",
    "simulate_batch",
    "sample_m_infinity",
    "estimate",
    "estimate_many",
    "Value",
    "Exceeds",
    "Passed",
    "Equals",
    "estimate_m_infinity",
    "write_functionals_csv",
]

BLOCK = 8192


class ZeroSupportError(RuntimeError):
    """The conditioning event was (almost) never observed."""


@dataclass(frozen=True)
class PathFunctionals:
    tau: float
    m_tau: float
    b_tau: float
    n_jumps: int
    x0: float
    total_input: float
    sigma_a: float = math.inf


@dataclass(frozen=True)
class PathBatch:
    """Functionals of a block of paths as parallel arrays (``sigma_a = inf`` when not reached)."""

    x0: np.ndarray
    tau: np.ndarray
    m_tau: np.ndarray
    b_tau: np.ndarray
    n_jumps: np.ndarray
    total_input: np.ndarray
    sigma_a: np.ndarray | None = None

    def __len__(self) -> int:
        return self.tau.size

    def path(self, i: int) -> PathFunctionals:
        s = math.inf if self.sigma_a is None else float(self.sigma_a[i])
        return PathFunctionals(float(self.tau[i]), float(self.m_tau[i]), float(self.b_tau[i]),
                               int(self.n_jumps[i]), float(self.x0[i]), float(self.total_input[i]), s)


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width: float
    n: int

    @classmethod
    def from_sums(cls, n: int, s1: float, s2: float) -> "Estimate":
        if n < 2:
            raise ZeroSupportError(f"zero-support: only {n} observation(s)")
        mean = s1 / n
        var = max(s2 - n * mean * mean, 0.0) / (n - 1)
        return cls(mean, 1.96 * math.sqrt(var / n), n)

    def contains(self, value: float, widths: float = 3.0) -> bool:
        """``|value - mean| <= widths * half_width``."""
        return abs(value - self.mean) <= widths * self.half_width


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    replications: int
    master_seed: int = 0
    passage_level: float | None = None
    #: fixed initial level instead of ``X_0 ~ B``
    x0: float | None = None
    workers: int = 1
    block: int = field(default=BLOCK)

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")
        if self.x0 is not None and self.x0 <= 0:
            raise ValueError("initial level must be positive")

    @property
    def n_blocks(self) -> int:
        return -(-self.replications // self.block)

    def block_size(self, j: int) -> int:
        return min(self.block, self.replications - j * self.block)


def block_rng(master_seed: int, block: int) -> np.random.Generator:
    """Counter-based stream of block ``block``: Philox keyed by the seed, counter word 2 = block."""
    key = [master_seed & 0xFFFFFFFFFFFFFFFF, master_seed >> 64]
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, block, 0]))


def simulate_path(params: ModelParams, rng: np.random.Generator, a: float | None = None,
                  x0: float | None = None) -> PathFunctionals:
    """One exact path; the scalar reference for :func:`simulate_batch`."""
    lam = params.lam
    law = params.law
    start = float(law.sample(rng)) if x0 is None else float(x0)
    level = start
    t = 0.0
    m = start
    b = start
    total = start
    n = 0
    sigma = 0.0 if a is not None and start >= a else math.inf
    while True:
        gap = rng.exponential(1.0 / lam)
        if gap >= level:
            t += level
            break
        t += gap
        level -= gap
        jump = float(law.sample(rng))
        level += jump
        total += jump
        n += 1
        m = max(m, level)
        b = max(b, jump)
        if a is not None and sigma == math.inf and level >= a:
            sigma = t
    return PathFunctionals(t, m, b, n, start, total, sigma)


def simulate_batch(params: ModelParams, rng: np.random.Generator, size: int, a: float | None = None,
                   x0: float | None = None) -> PathBatch:
    """``size`` independent paths advanced together, one jump per sweep over the live set."""
    lam = params.lam
    law = params.law
    start = law.sample(rng, size) if x0 is None else np.full(size, float(x0))
    level = start.copy()
    t = np.zeros(size)
    m = start.copy()
    b = start.copy()
    total = start.copy()
    n = np.zeros(size, dtype=np.int64)
    sigma = None
    if a is not None:
        sigma = np.where(start >= a, 0.0, np.inf)
    live = np.arange(size)
    while live.size:
        gap = rng.exponential(1.0 / lam, live.size)
        lv = level[live]
        done = gap >= lv
        fin = live[done]
        t[fin] += lv[done]
        level[fin] = 0.0
        keep = ~done
        live = live[keep]
        if not live.size:
            break
        g = gap[keep]
        t[live] += g
        jump = law.sample(rng, live.size)
        new = lv[keep] - g + jump
        level[live] = new
        total[live] += jump
        n[live] += 1
        m[live] = np.maximum(m[live], new)
        b[live] = np.maximum(b[live], jump)
        if sigma is not None:
            hit = (new >= a) & np.isinf(sigma[live])
            sigma[live[hit]] = t[live[hit]]
    return PathBatch(start, t, m, b, n, total, sigma)


def sample_m_infinity(params: ModelParams, rng: np.random.Generator, size: int | None = None):
    """``M = B*_1 + ... + B*_G`` with ``P(G = n) = (1 - rho) rho^n``."""
    k = 1 if size is None else size
    g = rng.geometric(1.0 - params.rho, k) - 1
    draws = params.law.excess_sample(rng, int(g.sum()))
    out = np.bincount(np.repeat(np.arange(k), g), weights=draws, minlength=k)
    return float(out[0]) if size is None else out


Statistic = Callable[[PathBatch], np.ndarray]
Condition = Callable[[PathBatch], np.ndarray]


@dataclass(frozen=True)
class Value:
    """Per-path value of a functional, e.g. ``Value("tau")``."""

    name: str

    def __call__(self, batch: PathBatch) -> np.ndarray:
        return getattr(batch, self.name)


@dataclass(frozen=True)
class Exceeds:
    """Indicator ``functional > level``; as a statistic its mean is a tail probability."""

    name: str
    level: float

    def __call__(self, batch: PathBatch) -> np.ndarray:
        return getattr(batch, self.name) > self.level


@dataclass(frozen=True)
class Passed:
    """Indicator of ``sigma(a) < tau``."""

    def __call__(self, batch: PathBatch) -> np.ndarray:
        if batch.sigma_a is None:
            raise ValueError("passage times were not recorded; set passage_level")
        return np.isfinite(batch.sigma_a)


@dataclass(frozen=True)
class Equals:
    name: str
    value: float

    def __call__(self, batch: PathBatch) -> np.ndarray:
        return getattr(batch, self.name) == self.value


def _run_block(config: SimConfig, j: int) -> PathBatch:
    rng = block_rng(config.master_seed, j)
    return simulate_batch(config.params, rng, config.block_size(j), config.passage_level, config.x0)


def _block_sums(config: SimConfig, j: int, pairs) -> list[tuple[int, float, float]]:
    batch = _run_block(config, j)
    out = []
    for statistic, condition in pairs:
        v = np.asarray(statistic(batch), dtype=float)
        if condition is not None:
            v = v[np.asarray(condition(batch), dtype=bool)]
        out.append((v.size, float(v.sum()), float(v @ v)))
    return out


def _map_blocks(config: SimConfig, fn, *args):
    blocks = range(config.n_blocks)
    if config.workers <= 1:
        return [fn(config, j, *args) for j in blocks]
    k = len(blocks)
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(fn, [config] * k, blocks, *([a] * k for a in args)))


def estimate_many(config: SimConfig, pairs) -> list[Estimate]:
    """Several ``(statistic, condition)`` estimates from the same replications.

    ``statistic`` maps a :class:`PathBatch` to per-path values; ``condition``
    (or ``None``) to a boolean mask.  Both must be picklable when
    ``config.workers > 1``.
    """
    pairs = list(pairs)
    per_block = _map_blocks(config, _block_sums, pairs)
    results = []
    for i in range(len(pairs)):
        n, s1, s2 = 0, 0.0, 0.0
        for sums in per_block:  # fixed block order, independent of scheduling
            n += sums[i][0]
            s1 += sums[i][1]
            s2 += sums[i][2]
        if n < 2:
            raise ZeroSupportError(f"zero-support: conditioning event seen {n} time(s) "
                                   f"in {config.replications} replications")
        results.append(Estimate.from_sums(n, s1, s2))
    return results


def estimate(config: SimConfig, statistic: Statistic, condition: Condition | None = None) -> Estimate:
    """Mean of ``statistic`` over replications (restricted to ``condition`` if given)."""
    return estimate_many(config, [(statistic, condition)])[0]


def _m_infinity_sums(config: SimConfig, j: int, levels, window):
    m = sample_m_infinity(config.params, block_rng(config.master_seed, j), config.block_size(j))
    out = []
    for x in levels:
        v = (m > x) if window is None else ((m >= x) & (m < x + window))
        c = int(v.sum())
        out.append((m.size, float(c), float(c)))
    return out


def estimate_m_infinity(config: SimConfig, levels, window: float | None = None) -> list[Estimate]:
    """``P(M > x)`` (or ``P(M in [x, x + window))``) for each level, from the compound sampler.

    Uses the same block streams and ordered reduction as :func:`estimate`.
    """
    levels = [float(x) for x in np.atleast_1d(levels)]
    per_block = _map_blocks(config, _m_infinity_sums, levels, window)
    out = []
    for i in range(len(levels)):
        n = sum(b[i][0] for b in per_block)
        s1 = 0.0
        for b in per_block:
            s1 += b[i][1]
        out.append(Estimate.from_sums(n, s1, s1))
    return out


def write_functionals_csv(config: SimConfig, path) -> None:
    """Stream ``rep, tau, m_tau, b_tau, n_jumps[, sigma_a]`` for every replication."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["rep", "tau", "m_tau", "b_tau", "n_jumps"]
        if config.passage_level is not None:
            cols.append("sigma_a")
        w.writerow(cols)
        rep = 0
        for j in range(config.n_blocks):
            b = _run_block(config, j)
            for i in range(len(b)):
                row = [rep, repr(float(b.tau[i])), repr(float(b.m_tau[i])), repr(float(b.b_tau[i])),
                       int(b.n_jumps[i])]
                if b.sigma_a is not None:
                    row.append(repr(float(b.sigma_a[i])))
                w.writerow(row)
                rep += 1
