"""Sanity check of the stationary engine against the M/M/1 closed form.

With exponential jumps the all-time supremum has P(M > x) = rho exp(-(1 - rho) x),
so every derived quantity has a closed form to compare with.
"""
import math

import numpy as np

from htpoisson import Exponential, ModelParams, build_stationary
from htpoisson.pk_engine import laplace_exponent, mtau_tail, passage_prob, q_scale, stationary_local

rho = 0.5
params = ModelParams(rho, Exponential(1.0))
table = build_stationary(params, h=0.005, x_max=30.0)
print(f"grid: h={table.h}, x_max={table.x_max}, error bound {table.err_bound:.2e}")

exact = 1 - rho * np.exp(-(1 - rho) * table.x)
print(f"sup |cdf - exact| over the grid: {np.max(np.abs(table.cdf - exact)):.2e}")

x = 2.0
print(f"P(M in [2, 3)):  engine {stationary_local(table, x, 1.0):.7f}  "
      f"exact {rho * (math.exp(-1) - math.exp(-1.5)):.7f}")
e = math.exp(-(1 - rho) * x)
print(f"P(M_tau > 2):    engine {mtau_tail(table, x):.7f}  exact {(1 - rho) * e / (1 - rho * e):.7f}")
print(f"psi(1) = {laplace_exponent(params, 1.0):.4f} (closed form 0.75)")
print(f"P_1(sigma(3) < tau) = {passage_prob(table, 1.0, 3.0):.5f}")
q = q_scale(table, 0.1, 1.0)
print(f"W^(0.1)(1) = {q.wq:.6f}, Z^(0.1)(1) = {q.zq:.6f} ({q.terms} series terms)")
