"""Amplitude damping: closed-form rate, exact decay and sampled trajectories.

For a qubit the rate has a closed form, and for amplitude damping the exact
expectation of V decays exactly geometrically, so every number printed here
can be checked by hand.
"""

import math

import numpy as np

from qpurify import (
    amplitude_damping,
    ensemble,
    exact_expected_lyapunov,
    lyapunov,
    maximally_mixed,
    optimize_rate,
    qubit_rate_closed_form,
)

a = 0.75
ch = amplitude_damping(a)
rho0 = maximally_mixed(2)

est = optimize_rate(ch, 1)
print(f"closed form gamma_1 = {qubit_rate_closed_form(ch, 1):.6f} (ln 2 = {math.log(2):.6f})")
print(f"optimizer   gamma_1 = {est.gamma_hat:.6f}, exact={est.exact}")

ens = ensemble(ch, rho0, 10, 20000, base_seed=1)
v0 = lyapunov(rho0)
print("\n n   exact E[V]   bound        MC mean      MC SE")
for n in range(11):
    exact = exact_expected_lyapunov(ch, rho0, n)
    bound = v0 * np.exp(-est.gamma_hat * n)
    print(f"{n:2d}   {exact:.6e}  {bound:.6e}  {ens.mean_lyapunov[n]:.6e}  {ens.se_lyapunov[n]:.1e}")
