"""Moment spaces, one-step darkness, and longer dark witnesses on the chain."""

import numpy as np

from qpurify import Projector, is_dark, lambda_of_state, moment_spaces, spin_chain_channel
from qpurify.darkspace import dark_search

ch = spin_chain_channel(n_qubits=4)
rep = moment_spaces(ch)
print("dim E_p:", rep.dims, "-> stabilizes at p =", rep.p_bar_span)

pi = Projector.onto_range(ch.effects[0])
print("\nrange(U^dag P_0 U), rank", pi.rank)
for p in (1, 2):
    v = is_dark(ch, pi, p_max=p)
    print(f"  dark up to length {p}: {v.is_dark} (max residual {v.max_residual:.2e})")

print("\nrank-2 searches:")
for p in range(1, 6):
    v = dark_search(ch, 2, p_max=p, restarts=8, seed=0)
    rho = v.projector.matrix / 2
    lam = lambda_of_state(ch, rho, p)
    print(f"  p_max={p}: best residual {v.max_residual:.2e}, lambda_p(pi/2) = {lam:.10f}")
