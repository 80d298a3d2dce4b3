"""A filter started from the wrong state converges to the true trajectory.

The true state starts in |1>, the filter in I/2. The mean infidelity is
compared with C exp(-gamma_1 n), C being the stability constant.
"""

import numpy as np

from qpurify import amplitude_damping, ensemble, maximally_mixed, optimize_rate, pure_state
from qpurify.analysis import stability_bound, stability_constant

ch = amplitude_damping(0.5)
rho0, hat0 = pure_state([0, 1]), maximally_mixed(2)
c = stability_constant(rho0, hat0)
gamma = optimize_rate(ch, 1).gamma_hat
ens = ensemble(ch, rho0, 30, 5000, base_seed=2, rho_hat0=hat0)
bound = stability_bound(c, gamma, 1, 30)
print(f"C = {c:.6f}, gamma_1 = {gamma:.6f}")
print(" n   mean(1-F)    3 SE        bound")
for n in range(0, 31, 3):
    print(f"{n:2d}   {ens.mean_one_minus_fidelity[n]:.4e}  {3 * ens.se_one_minus_fidelity[n]:.1e}"
          f"  {bound[n]:.4e}")
print("bound respected:", bool(np.all(ens.mean_one_minus_fidelity <= bound + 3 * ens.se_one_minus_fidelity)))
