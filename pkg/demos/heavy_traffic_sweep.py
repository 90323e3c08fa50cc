"""How good are the heavy-tail approximations at the proposed thresholds?

For Lomax(2.5) jumps, compare the exact local supremum probability and the
M_tau tail with their one-big-jump approximations along x_rho(1.5), and watch
the scaled supremum density approach its exponential limit.
"""
import math

import numpy as np

from htpoisson import Lomax, ModelParams, build_stationary
from htpoisson import asymptotics as asy
from htpoisson.pk_engine import mtau_tail, stationary_local

law = Lomax(2.5)
print(" rho   x_rho    local ratio   mtau ratio")
for rho in (0.8, 0.9, 0.95):
    params = ModelParams(rho, law)
    x = asy.thresholds(params, k=1.5).x_rho
    table = build_stationary(params, 0.02, 2 * x, tol=1e-4)
    local = stationary_local(table, x, 1.0) / asy.approx_supremum_local(params, x, 1.0)
    mt = mtau_tail(table, x) / asy.approx_mtau(params, x)
    print(f"{rho:4.2f} {x:8.2f} {local:12.4f} {mt:12.4f}")

# At these levels the exponential (Kingman) part of the supremum is still of the
# same order as the heavy-tailed part, so the ratios sit well above one.
print("\nscaled density (1/(1-rho)) f_M(y/(1-rho)) against 0.5 exp(-y/2)")
for rho, h in ((0.9, 0.02), (0.99, 0.05)):
    table = build_stationary(ModelParams(rho, law), h, 10 / (1 - rho) + 1, tol=1e-4)
    vals = [table.density_at(y / (1 - rho)) / (1 - rho) for y in (0.5, 1.0, 2.0)]
    print(f"rho={rho}: " + ", ".join(f"{v:.4f}" for v in vals)
          + "   limit: " + ", ".join(f"{0.5 * math.exp(-y / 2):.4f}" for y in (0.5, 1.0, 2.0)))
