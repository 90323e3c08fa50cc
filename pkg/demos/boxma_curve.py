"""Tail of the largest jump before the busy period ends.

Solves the fixed-point equation on a grid, checks it against an independent
root-finder and a simulation, and compares with P(B > x) / (1 - rho).
"""
import numpy as np

from htpoisson import Lomax, ModelParams
from htpoisson.asymptotics import approx_bmax
from htpoisson.bmax import bmax_bisect, bmax_curve
from htpoisson.simulator import Exceeds, SimConfig, estimate

params = ModelParams(0.8, Lomax(2.5))
grid = np.array([1.0, 2.0, 5.0, 10.0, 20.0, 50.0])
curve = bmax_curve(params, grid)
print("    x        p(x)      bound ratio  iterations")
for x, p, n in zip(curve.x, curve.p, curve.iterations):
    print(f"{x:5.0f}  {p:.6e}  {p / approx_bmax(params, x):10.4f}  {n:6d}")

print(f"\nbisection at x=5: {bmax_bisect(params, 5.0):.10f}")
mc = estimate(SimConfig(params, 200_000, master_seed=1), Exceeds("b_tau", 5.0))
print(f"simulated P(B_tau > 5) = {mc.mean:.5f} +/- {mc.half_width:.5f}")

for rho in (0.9, 0.95, 0.99):
    p = ModelParams(rho, Lomax(2.5))
    x = 1 / (1 - rho)
    c = bmax_curve(p, [x])
    print(f"rho={rho}: p(1/(1-rho)) / bound = {c.p[0] / approx_bmax(p, x):.4f}")
