"""Conditional first-passage times from scale functions, checked by simulation.

E_y[sigma(a) | sigma(a) < tau] is assembled from W, its integral and W * W.
"""
from htpoisson import Lomax, ModelParams, build_stationary
from htpoisson.pk_engine import expected_passage, expected_passage_random_start, passage_prob
from htpoisson.simulator import Passed, SimConfig, Value, estimate_many

params = ModelParams(0.5, Lomax(2.5))
table = build_stationary(params, 0.005, 30.0)
a = 5.0

cfg = SimConfig(params, 200_000, master_seed=3, passage_level=a, x0=1.0)
prob, time = estimate_many(cfg, [(Passed(), None), (Value("sigma_a"), Passed())])
print(f"P_1(sigma(5) < tau):    engine {passage_prob(table, 1.0, a):.5f}, "
      f"MC {prob.mean:.5f} +/- {prob.half_width:.5f}")
print(f"E_1[sigma(5) | passed]: engine {expected_passage(table, 1.0, a):.4f}, "
      f"MC {time.mean:.4f} +/- {time.half_width:.4f} (n={time.n})")

cfg = SimConfig(params, 200_000, master_seed=4, passage_level=a)
time, = estimate_many(cfg, [(Value("sigma_a"), Passed())])
print(f"random start:           engine {expected_passage_random_start(table, a):.4f}, "
      f"MC {time.mean:.4f} +/- {time.half_width:.4f}")

# Starting just below a, the level drifts down before the next jump, so the
# conditional time does not vanish as y -> a.
for gap in (0.5, 0.1, 0.01):
    print(f"y = a - {gap}: {expected_passage(table, a - gap, a):.4f}")
