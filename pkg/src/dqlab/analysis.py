"""Output-side quantities: sum noise, commutator identities, filtered
variances, SNR, stationary spectra, SQL/DQL curves and the multi-filter
uncertainty bounds.

Every commutator kernel is returned as the real factor ``C`` in
``[A(t), B(t')] = iħ C(t, t')``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._config import resolve_hbar
from .exceptions import (
    BoundaryWarning,
    CrossCheckError,
    NegativeVarianceError,
    SlowEnvelopeWarning,
    SNRDivergence,
    ValidationError,
)
from .kernels import (
    SpectralDensity,
    TimeGrid,
    TimeSeries,
    TwoTimeKernel,
    _require_same_grid,
    antisymmetric_part,
    compose,
    delta_kernel,
    enforce_window,
    relative_error,
    transpose,
    zero_kernel,
)
from .noise import NoiseCovariances
from .probes import velocity_damping_kernel

SUM_ASYMMETRY_RTOL = 1e-10
IDENTITY_RTOL = 1e-12
VARIANCE_RTOL = 1e-10


# -- sum noise ---------------------------------------------------------------

def sum_noise_covariance(noise: NoiseCovariances, chiK_inv: TwoTimeKernel) -> TwoTimeKernel:
    """Correlation kernel of ``F_sum = χ_K⁻¹ x_fl + F_fl``.

    ``B_sum = χ_K⁻¹ B_xx χ_K⁻¹ᵀ dt² + χ_K⁻¹ B_xF dt + (χ_K⁻¹ B_xF dt)ᵀ + B_FF``
    """
    grid = _require_same_grid(noise.grid, chiK_inv.grid)
    dt = grid.dt
    c = chiK_inv.values
    cross = c @ noise.B_xF.values * dt
    total = c @ noise.B_xx.values @ c.T * dt ** 2 + cross + cross.T + noise.B_FF.values
    asym = float(np.linalg.norm(total - total.T))
    norm = float(np.linalg.norm(total))
    if asym > SUM_ASYMMETRY_RTOL * norm:
        raise CrossCheckError(f"sum-noise covariance asymmetry {asym:.3e} exceeds "
                              f"{SUM_ASYMMETRY_RTOL:.0e} of its norm")
    return TwoTimeKernel(grid, 0.5 * (total + total.T))


def meter_commutators(K: TwoTimeKernel) -> tuple[TwoTimeKernel, TwoTimeKernel, TwoTimeKernel]:
    """Real commutator kernels ``(C_xx, C_FF, C_xF)`` of the meter noises.

    ``[x_fl, x_fl] = 0``, ``[F_fl, F_fl] = iħ(K - Kᵀ)``, ``[x_fl, F_fl] = -iħδ``.
    """
    grid = K.grid
    return zero_kernel(grid), K - K.T, -delta_kernel(grid)


@dataclass(frozen=True, eq=False)
class CommutatorRoutes:
    direct: TwoTimeKernel          # -2 χ_a⁻¹
    composed: TwoTimeKernel        # built from the meter commutators
    relative_error: float


def sum_noise_commutator_routes(chi_inv: TwoTimeKernel, K: TwoTimeKernel) -> CommutatorRoutes:
    """Both evaluations of the sum-noise autocommutator.

    The composed route expands ``[F_sum(t), F_sum(t')]`` term by term using
    the meter commutators and never references ``χ_a⁻¹``; the direct route is
    ``-2 χ_a⁻¹``.  They must agree for any ``χ⁻¹`` and ``K``.
    """
    _require_same_grid(chi_inv.grid, K.grid)
    chiK = chi_inv + K
    c_xx, c_ff, c_xf = meter_commutators(K)
    c_fx = -transpose(c_xf)
    composed = (compose(compose(chiK, c_xx), transpose(chiK))
                + compose(chiK, c_xf)
                + compose(c_fx, transpose(chiK))
                + c_ff)
    direct = -2.0 * antisymmetric_part(chi_inv)
    scale = chi_inv.norm() + K.norm()
    err = relative_error(direct, composed, scale if scale > 0 else 1.0)
    return CommutatorRoutes(direct, composed, err)


def sum_noise_commutator(chi_inv: TwoTimeKernel, K: TwoTimeKernel,
                         rtol: float = IDENTITY_RTOL) -> TwoTimeKernel:
    """``C`` with ``[F_sum(t), F_sum(t')] = iħ C(t, t')``; equals ``-2 χ_a⁻¹``.

    Raises :class:`CrossCheckError` if the two evaluation routes disagree.
    ``χ_K⁻¹`` need not be invertible.
    """
    routes = sum_noise_commutator_routes(chi_inv, K)
    if routes.relative_error > rtol:
        raise CrossCheckError(f"sum-noise commutator routes disagree: {routes.relative_error:.3e}")
    return routes.direct


def thermal_commutator(chi_inv: TwoTimeKernel) -> TwoTimeKernel:
    """``[F_T(t), F_T(t')] = 2iħ χ_a⁻¹(t, t')``."""
    return 2.0 * antisymmetric_part(chi_inv)


def output_commutator(chi_inv: TwoTimeKernel, K: TwoTimeKernel) -> TwoTimeKernel:
    """Autocommutator of the force estimate; identically zero."""
    return sum_noise_commutator(chi_inv, K) + thermal_commutator(chi_inv)


def output_commutator_residual(chi_inv: TwoTimeKernel, K: TwoTimeKernel) -> float:
    scale = chi_inv.norm() + K.norm()
    return relative_error(output_commutator(chi_inv, K), zero_kernel(chi_inv.grid),
                          scale if scale > 0 else 1.0)


# -- filtered quantities -----------------------------------------------------

def filtered_variance(B: TwoTimeKernel, phi: TimeSeries) -> float:
    """``∫∫ Φ(t) B(t, t') Φ(t') dt dt'``; negative results beyond round-off raise."""
    value = B.quadratic_form(phi)
    dt = B.grid.dt
    a = np.abs(phi.values)
    scale = float(a @ np.abs(B.values) @ a) * dt ** 2
    if value < -VARIANCE_RTOL * scale:
        raise NegativeVarianceError(f"filtered variance {value:.6e} is negative; "
                                    "covariance is not positive semidefinite")
    return value


def snr(F_sig: TimeSeries, phi: TimeSeries, B_sum: TwoTimeKernel,
        B_TT: TwoTimeKernel | None = None) -> float:
    """``(∫ Φ F_sig dt)² / (⟨𝓕_sum²⟩ + ⟨𝓕_T²⟩)``.

    Zero total variance raises :class:`SNRDivergence` instead of returning ∞.
    """
    _require_same_grid(F_sig.grid, phi.grid, B_sum.grid)
    var = filtered_variance(B_sum, phi)
    if B_TT is not None:
        var += filtered_variance(B_TT, phi)
    if not var > 0:
        raise SNRDivergence("total filtered noise variance is zero")
    return phi.dot(F_sig) ** 2 / var


# -- stationary curves -------------------------------------------------------

def sql_curve(chi_inv_spectrum: SpectralDensity, hbar=None) -> SpectralDensity:
    """``S_SQL(Ω) = ħ |χ⁻¹(Ω)|``."""
    hbar = resolve_hbar(hbar)
    return SpectralDensity(chi_inv_spectrum.omegas, hbar * np.abs(chi_inv_spectrum.values))


def dql_curve(chi_inv_spectrum: SpectralDensity, hbar=None) -> SpectralDensity:
    """``S_DQL(Ω) = ħ |Im χ⁻¹(Ω)|``."""
    hbar = resolve_hbar(hbar)
    return SpectralDensity(chi_inv_spectrum.omegas, hbar * np.abs(chi_inv_spectrum.values.imag))


def _spectral_values(s, omegas):
    if isinstance(s, SpectralDensity):
        if omegas is not None and not np.array_equal(s.omegas, omegas):
            raise ValidationError("spectra must share one frequency set")
        return s.omegas, s.values
    return omegas, np.asarray(s, dtype=complex)


def stationary_sum_spectrum(S_xx, S_FF, S_xF, chiK_inv_spectrum, omegas=None) -> SpectralDensity:
    """``|χ_K⁻¹|² S_xx + 2 Re(χ_K⁻¹ S_xF) + S_FF`` on a common frequency set.

    Arguments are :class:`SpectralDensity` objects or plain arrays (then
    ``omegas`` is required).
    """
    om = omegas
    vals = []
    for s in (S_xx, S_FF, S_xF, chiK_inv_spectrum):
        om, v = _spectral_values(s, om)
        vals.append(v)
    if om is None:
        raise ValidationError("omegas required when spectra are passed as arrays")
    sxx, sff, sxf, chi = vals
    total = np.abs(chi) ** 2 * sxx.real + 2 * (chi * sxf).real + sff.real
    return SpectralDensity(om, total)


# -- multiple filters --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FilterSet:
    filters: tuple

    def __init__(self, filters: Sequence[TimeSeries], check_window: bool = True):
        filters = tuple(filters)
        if not filters:
            raise ValidationError("a filter set needs at least one filter")
        _require_same_grid(*(f.grid for f in filters))
        if check_window:
            for j, f in enumerate(filters):
                if not enforce_window(f.values):
                    warnings.warn(f"filter {j} is not negligible near the window edges",
                                  BoundaryWarning, stacklevel=2)
        object.__setattr__(self, "filters", filters)

    @property
    def grid(self) -> TimeGrid:
        return self.filters[0].grid

    def matrix(self) -> np.ndarray:
        return np.vstack([f.values for f in self.filters])

    def __len__(self):
        return len(self.filters)


def _as_filterset(filters) -> FilterSet:
    return filters if isinstance(filters, FilterSet) else FilterSet(filters, check_window=False)


def _filter_integrals(filters: FilterSet, chi_a_inv: TwoTimeKernel) -> np.ndarray:
    """Exactly antisymmetric matrix of ``∫∫ Φ_j χ_a⁻¹ Φ_k dt dt'``."""
    _require_same_grid(filters.grid, chi_a_inv.grid)
    phi = filters.matrix()
    raw = phi @ chi_a_inv.values @ phi.T * chi_a_inv.grid.dt ** 2
    return 0.5 * (raw - raw.T)


def multi_filter_commutators(filters, chi_a_inv: TwoTimeKernel) -> np.ndarray:
    """``C_jk`` with ``[𝓕_j, 𝓕_k] = iħ C_jk = -2iħ ∫∫ Φ_j χ_a⁻¹ Φ_k``."""
    return -2.0 * _filter_integrals(_as_filterset(filters), chi_a_inv)


def pairwise_bounds(filters, chi_a_inv: TwoTimeKernel, hbar=None) -> np.ndarray:
    """Lower bounds ``ħ² (∫∫ Φ_j χ_a⁻¹ Φ_k)²`` on ``⟨𝓕_j²⟩⟨𝓕_k²⟩``."""
    hbar = resolve_hbar(hbar)
    integrals = _filter_integrals(_as_filterset(filters), chi_a_inv)
    return hbar ** 2 * integrals ** 2


# -- narrow-band quadratures -------------------------------------------------

SLOW_ENVELOPE_RATIO = 0.1
MIN_CARRIER_CYCLES = 20.0


@dataclass(frozen=True, eq=False)
class QuadratureSpec:
    """Carrier ``Ω₀``, slow envelopes ``Φ_c0``, ``Φ_s0`` and friction ``H``.

    ``Ω₀ (t_end - t_start) < 20`` is rejected.  Envelopes faster than
    ``max|dΦ/dt| ≤ 0.1 Ω₀ max|Φ|`` only warn: on a finite window a Gaussian
    cannot be both that slow and negligible at the edges when ``Ω₀T`` is a few
    tens.
    """

    omega0: float
    env_c: TimeSeries
    env_s: TimeSeries
    H: float

    def __post_init__(self):
        grid = _require_same_grid(self.env_c.grid, self.env_s.grid)
        if not self.omega0 > 0:
            raise ValidationError("carrier frequency must be positive")
        if self.H < 0:
            raise ValidationError("friction coefficient must be non-negative")
        if self.omega0 * grid.duration < MIN_CARRIER_CYCLES:
            raise ValidationError(
                f"omega0 * window = {self.omega0 * grid.duration:.3g} < {MIN_CARRIER_CYCLES}")
        for name, env in (("c", self.env_c), ("s", self.env_s)):
            peak = np.abs(env.values).max()
            if peak == 0:
                continue
            slope = np.abs(np.gradient(env.values, grid.dt)).max()
            if slope > SLOW_ENVELOPE_RATIO * self.omega0 * peak:
                warnings.warn(f"envelope {name} is not slow compared with the carrier "
                              f"(max|dΦ/dt| = {slope / peak:.3g} max|Φ|, "
                              f"limit {SLOW_ENVELOPE_RATIO * self.omega0:.3g})",
                              SlowEnvelopeWarning, stacklevel=3)

    @property
    def grid(self) -> TimeGrid:
        return self.env_c.grid

    def filters(self) -> FilterSet:
        t = self.grid.times
        phi_c = TimeSeries(self.grid, self.env_c.values * np.cos(self.omega0 * t))
        phi_s = TimeSeries(self.grid, self.env_s.values * np.sin(self.omega0 * t))
        return FilterSet([phi_c, phi_s], check_window=False)


@dataclass(frozen=True)
class NarrowbandBound:
    exact: float
    approx: float
    rel_error: float
    commutator_exact: float
    commutator_approx: float
    degenerate: bool

    def to_dict(self) -> dict:
        return dict(exact=self.exact, approx=self.approx, rel_error=self.rel_error,
                    commutator_exact=self.commutator_exact,
                    commutator_approx=self.commutator_approx, degenerate=self.degenerate)


def narrowband_bound(spec: QuadratureSpec, hbar=None) -> NarrowbandBound:
    """Two-quadrature bound on ``⟨(𝓕^c)²⟩⟨(𝓕^s)²⟩``, exact and narrow-band.

    ``exact`` is the pairwise bound of ``Φ_c0 cos Ω₀t`` and ``Φ_s0 sin Ω₀t``
    under ``χ_a⁻¹ = H δ'`` by full quadrature; ``approx`` is
    ``ħ² Ω₀² H² (∫ Φ_c0 Φ_s0 dt)² / 4``.  The commutators are reported too;
    the narrow-band one is ``-Ω₀ H ∫ Φ_c0 Φ_s0 dt`` with ``δ'`` acting as
    ``d/dt``.
    """
    hbar = resolve_hbar(hbar)
    chi_a = velocity_damping_kernel(spec.H, spec.grid)
    filters = spec.filters()
    exact = float(pairwise_bounds(filters, chi_a, hbar)[0, 1])
    comm = float(multi_filter_commutators(filters, chi_a)[0, 1])
    overlap = spec.env_c.dot(spec.env_s)
    approx = hbar ** 2 * spec.omega0 ** 2 * spec.H ** 2 * overlap ** 2 / 4
    comm_approx = -spec.omega0 * spec.H * overlap
    degenerate = False
    if approx == 0:
        rel = 0.0 if exact == 0 else float("inf")
        degenerate = exact != 0
    else:
        rel = abs(exact - approx) / approx
    return NarrowbandBound(exact, approx, rel, comm, comm_approx, degenerate)
