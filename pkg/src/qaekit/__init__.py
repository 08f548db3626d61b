"""Spectral estimation of low-rank states with quantum auto-encoders, simulated densely."""

from .circuits import ParamCircuit, build_hardware_efficient, evolve, unitary
from .errors import (
    ConfigError,
    DegenerateCompressionError,
    DimensionError,
    NotADensityOperatorError,
    ProtocolError,
    QaeKitError,
)
from .fidelity import (
    FidelityEstimate,
    NoisyStateSpec,
    build_noisy_state,
    estimate_fidelity_qae,
    estimate_fidelity_resource_efficient,
    ssfb_interval,
    sub_fidelity,
    super_fidelity,
)
from .gibbs import GibbsConfig, exact_gibbs, solve_gibbs, truncated_entropy, truncation_coefficients
from .linalg import DensityOperator, PureState, eig_hermitian, partial_trace, trace_distance, uhlmann_fidelity
from .pauli import PauliHamiltonian, ising_ring, z_sum
from .qae import QaeConfig, QaeModel, compress, qae_loss, reconstructed_state, spectral_readout, train
from .qfi import QfiConfig, encode_phase, exact_qfi_pure, optimize_probe, qfi_surrogate

__version__ = "0.1.0"
