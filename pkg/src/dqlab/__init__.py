"""Quantum-noise analysis of linear force measurements.

Kernels on a uniform time grid, probe and meter-noise models, sum-noise and
commutator algebra, SQL/DQL curves, uncertainty checks and noise-state
optimization, with a scenario-driven command line front end.
"""

__version__ = "0.1.0"

from ._config import get_hbar, hbar_context, set_hbar
from .exceptions import (
    BoundaryWarning,
    CrossCheckError,
    DQLabError,
    GridMismatchError,
    IllConditionedError,
    InfeasibleBudgetError,
    NegativeVarianceError,
    NotToeplitzError,
    NumericalError,
    SlowEnvelopeWarning,
    SNRDivergence,
    ValidationError,
)
from .kernels import (
    SpectralDensity,
    TimeGrid,
    TimeSeries,
    TwoTimeKernel,
    anticausal_fraction,
    antisymmetric_part,
    compose,
    delta_derivative_kernel,
    delta_kernel,
    diagonal_kernel,
    invert,
    kernel_to_spectrum,
    make_grid,
    second_derivative_kernel,
    spectral_frequencies,
    symmetric_part,
    toeplitz_from_spectrum,
    transpose,
    zero_kernel,
)
from .probes import (
    ProbeModel,
    RigidityModel,
    damped_oscillator_response,
    damped_oscillator_spectrum,
    free_mass_response,
    free_mass_spectrum,
    modified_response,
    pin_boundary,
    rigidity_kernel,
    velocity_damping_kernel,
)
from .noise import (
    MemorylessNoise,
    NoiseCovariances,
    check_uncertainty_block,
    check_uncertainty_memoryless,
    check_uncertainty_stationary,
    memoryless_covariances,
    stationary_covariances,
    thermal_covariance,
)
from .analysis import (
    FilterSet,
    QuadratureSpec,
    dql_curve,
    filtered_variance,
    multi_filter_commutators,
    narrowband_bound,
    output_commutator,
    pairwise_bounds,
    snr,
    sql_curve,
    stationary_sum_spectrum,
    sum_noise_commutator,
    sum_noise_covariance,
    thermal_commutator,
)
from .optimize import (
    memoryless_optimize,
    memoryless_verify,
    psi_function,
    stationary_optimize,
    variance_functional,
)
