"""Exponential purification of quantum trajectories under repeated measurement."""

from .analysis import (
    exact_expected_lyapunov,
    lambda_of_state,
    monte_carlo_vs_exact,
    supermartingale_check,
)
from .core import (
    DensityMatrix,
    KrausChannel,
    Projector,
    fidelity,
    hermitian_eig,
    lyapunov,
    maximally_mixed,
    psd_sqrt,
    pure_state,
    purity,
    validate_density,
    word_operator,
)
from .darkspace import dark_search, is_dark, moment_spaces, purification_verdict
from .models import (
    SpinChainParams,
    amplitude_damping,
    hermitian_expm,
    random_channel,
    random_unitary_channel,
    rank_one_channel,
    spin_chain_channel,
    unitary_channel,
)
from .rates import (
    PairWeights,
    empirical_rate,
    optimize_rate,
    pair_determinant,
    qubit_rate_closed_form,
    rate_objective,
    superadditivity_report,
)
from .trajectory import (
    ensemble,
    paired_filter_trajectory,
    record_probability,
    sample_trajectory,
    step,
)

__version__ = "0.1.0"
