"""Random channels: the supermartingale property and superadditive rates."""

import numpy as np

from qpurify import supermartingale_check
from qpurify.models import random_channel, random_density
from qpurify.rates import superadditivity_report

rng = np.random.default_rng(0)
for d, k in [(2, 2), (3, 2), (4, 3)]:
    ch = random_channel(d, k, rng)
    states = [random_density(d, rng) for _ in range(100)]
    rep = supermartingale_check(ch, states, [1, 2, 3])
    print(f"d={d} k={k}: worst E[V]-V = {rep.worst_margin:.2e}")

ch = random_channel(3, 2, rng)
rep = superadditivity_report(ch, 3, restarts=8)
print("\n p   lambda_hat  gamma_hat  gamma_hat/p")
for p, lam, g, per in rep.rows():
    print(f" {p}   {lam:.6f}    {g:.6f}   {per:.6f}")
print("superadditive within slack:", rep.passed)
