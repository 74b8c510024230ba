"""Gaussian channels at the covariance-matrix level and their output p-purities."""

__version__ = "0.1.0"

from .channels import (
    GaussianChannel,
    ReductionCertificate,
    ValidationReport,
    apply,
    atten_amp,
    channel_from_dict,
    channel_to_dict,
    classical_noise,
    identity_channel,
    is_pure_channel,
    load_channel,
    reduce_standard_form,
    tensor,
    thermal_bath,
    validate,
)
from .exceptions import (
    DegenerateSpectrumError,
    GaussMultError,
    HypothesisError,
    InvalidChannel,
    InvalidCovarianceMatrix,
    NotSymplectic,
    TruncationError,
)
from .fock import oracle_entropy, oracle_trace_power, truncated_spectrum
from .optimizer import (
    OptimizerConfig,
    PurityReport,
    gradient_at,
    identical_channel_spectrum,
    majorization_audit,
    multiplicativity_check,
    objective,
    optimize,
)
from .states import (
    PureStateParams,
    F_p,
    f_p,
    majorizes,
    pure_cm_from_params,
    pure_state_decomposition,
    purity_from_spectrum,
    thermal_spectrum,
    trace_power,
    von_neumann_entropy,
)
from .symplectic import (
    block_trace,
    euler_decompose,
    generator_basis,
    is_symplectic,
    matrix_exp,
    symplectic_eigenvalue_derivative,
    symplectic_eigenvalues,
    symplectic_form,
    williamson,
)
