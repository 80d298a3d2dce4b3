"""Four-site Ising chain measured on its last spin.

Prints the normalized ensemble mean of V over 60 steps next to the bounds
exp(-gamma_p floor(n/p)) for several block lengths p. At the default
couplings the chain has rank-2 subspaces that stay dark for records up to
length 4, so the first few rates vanish and the bound only becomes
informative from p = 5 onward. Takes a few minutes.
"""

import numpy as np

from qpurify import ensemble, maximally_mixed, optimize_rate, spin_chain_channel

ch = spin_chain_channel(n_qubits=4, J=1.0, tau=1.0, Bx=1.0, Bz=1.0)
ens = ensemble(ch, maximally_mixed(ch.dim), 60, 300, base_seed=0)
mean, se = ens.normalized_lyapunov()

gammas = {}
for p in range(1, 7):
    est = optimize_rate(ch, p, restarts=12, seed=0)
    gammas[p] = est.gamma_hat
    print(f"p={p}: lambda_hat={est.lambda_hat:.6f} gamma_hat={est.gamma_hat:.4f}")

steps = np.arange(61)
print("\n n   mean V/V0   " + "  ".join(f"bound p={p}" for p in gammas))
for n in range(0, 61, 6):
    bounds = "  ".join(f"{np.exp(-g * (n // p)):.4f}   " for p, g in gammas.items())
    print(f"{n:2d}   {mean[n]:.4f}      {bounds}")
