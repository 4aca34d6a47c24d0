"""Meter quantum-noise covariances, probe thermal covariance and the
uncertainty relations that constrain them.

Commutator kernels are stored real with the ``iħ`` factored out; the only
place complex arithmetic appears is the block matrix assembled inside
:func:`check_uncertainty_block`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._config import resolve_hbar
from .exceptions import ValidationError
from .kernels import (
    SpectralDensity,
    SpectrumLike,
    TimeGrid,
    TimeSeries,
    TwoTimeKernel,
    _require_same_grid,
    diagonal_kernel,
    spectral_frequencies,
    toeplitz_from_spectrum,
    zero_kernel,
)

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-9


def _check_symmetric(k: TwoTimeKernel, name: str, rtol: float = SYMMETRY_RTOL) -> None:
    asym = float(np.linalg.norm(k.values - k.values.T))
    if asym > rtol * k.norm():
        raise ValidationError(f"{name} must be symmetric (asymmetry {asym:.3e})")


@dataclass(frozen=True, eq=False)
class NoiseCovariances:
    """Symmetrized correlation kernels of the meter noises.

    ``B_Fx`` is not stored: ``B_Fx(t, t') = B_xF(t', t)``.
    """

    B_xx: TwoTimeKernel
    B_FF: TwoTimeKernel
    B_xF: TwoTimeKernel
    K: TwoTimeKernel | None = None

    def __post_init__(self):
        if self.K is None:
            object.__setattr__(self, "K", zero_kernel(self.B_xx.grid))
        _require_same_grid(self.B_xx.grid, self.B_FF.grid, self.B_xF.grid, self.K.grid)
        _check_symmetric(self.B_xx, "B_xx")
        _check_symmetric(self.B_FF, "B_FF")

    @property
    def grid(self) -> TimeGrid:
        return self.B_xx.grid

    @property
    def B_Fx(self) -> TwoTimeKernel:
        return self.B_xF.T

    def scaled(self, factor: float) -> "NoiseCovariances":
        return NoiseCovariances(factor * self.B_xx, factor * self.B_FF, factor * self.B_xF, self.K)


@dataclass(frozen=True, eq=False)
class MemorylessNoise:
    """Delta-correlated noises with time-dependent prefactors."""

    S_xx: TimeSeries
    S_FF: TimeSeries
    S_xF: TimeSeries

    def __post_init__(self):
        _require_same_grid(self.S_xx.grid, self.S_FF.grid, self.S_xF.grid)
        if not np.all(self.S_xx.values > 0):
            raise ValidationError("S_xx(t) must be positive everywhere")
        if not np.all(self.S_FF.values > 0):
            raise ValidationError("S_FF(t) must be positive everywhere")

    @property
    def grid(self) -> TimeGrid:
        return self.S_xx.grid

    @classmethod
    def vacuum(cls, grid: TimeGrid, S_FF: TimeSeries | float | None = None, hbar=None) -> "MemorylessNoise":
        """Minimum-uncertainty uncorrelated state ``S_xx S_FF = ħ²/4``."""
        hbar = resolve_hbar(hbar)
        if S_FF is None:
            S_FF = hbar / 2
        if not isinstance(S_FF, TimeSeries):
            S_FF = TimeSeries.constant(grid, S_FF)
        S_xx = TimeSeries(grid, hbar ** 2 / 4 / S_FF.values)
        return cls(S_xx, S_FF, TimeSeries.constant(grid, 0.0))


@dataclass(frozen=True)
class PSDReport:
    min_eigenvalue: float
    matrix_norm: float
    passed: bool
    tolerance: float

    def to_dict(self) -> dict:
        return {"min_eigenvalue": self.min_eigenvalue, "matrix_norm": self.matrix_norm,
                "passed": self.passed, "tolerance": self.tolerance}


def memoryless_covariances(noise: MemorylessNoise, grid: TimeGrid | None = None) -> NoiseCovariances:
    """``B_αβ(t, t') = S_αβ(t) δ(t - t')`` with ``K = 0``."""
    if grid is not None:
        _require_same_grid(noise.grid, grid)
    return NoiseCovariances(diagonal_kernel(noise.S_xx), diagonal_kernel(noise.S_FF),
                            diagonal_kernel(noise.S_xF))


def _spectrum_samples(spec: SpectrumLike, grid: TimeGrid) -> np.ndarray:
    omegas = spectral_frequencies(grid)
    if isinstance(spec, SpectralDensity):
        return spec.at(omegas)
    return np.broadcast_to(np.asarray(spec(omegas), dtype=complex), omegas.shape)


def stationary_covariances(S_xx: SpectrumLike, S_FF: SpectrumLike, S_xF: SpectrumLike,
                           K: SpectrumLike | None, grid: TimeGrid) -> NoiseCovariances:
    """Toeplitz covariances from spectral densities.

    ``S_xx`` and ``S_FF`` must be real and non-negative; ``S_xF`` and ``K``
    must satisfy ``S(-Ω) = S(Ω)*``.
    """
    for name, spec in (("S_xx", S_xx), ("S_FF", S_FF)):
        s = _spectrum_samples(spec, grid)
        scale = float(np.abs(s).max()) or 1.0
        if np.abs(s.imag).max() > 1e-12 * scale:
            raise ValidationError(f"{name} must be real")
        if s.real.min() < -1e-12 * scale:
            raise ValidationError(f"{name} must be non-negative")
    kernels = [toeplitz_from_spectrum(s, grid) for s in (S_xx, S_FF, S_xF)]
    rigidity = zero_kernel(grid) if K is None else toeplitz_from_spectrum(K, grid)
    # Toeplitz synthesis of an even real spectrum is symmetric only to round-off
    b_xx, b_ff = (TwoTimeKernel(grid, 0.5 * (k.values + k.values.T)) for k in kernels[:2])
    return NoiseCovariances(b_xx, b_ff, kernels[2], rigidity)


def thermal_covariance(spec: SpectrumLike | TwoTimeKernel | float | None, grid: TimeGrid) -> TwoTimeKernel:
    """Symmetrized thermal-force correlation ``B_TT``; zero unless supplied.

    ``spec`` may be a white level ``S_T`` (number), a spectrum, or an explicit
    symmetric kernel.
    """
    if spec is None:
        return zero_kernel(grid)
    if isinstance(spec, TwoTimeKernel):
        _require_same_grid(spec.grid, grid)
        _check_symmetric(spec, "B_TT")
        return spec
    if isinstance(spec, (int, float)):
        level = float(spec)
        if level < 0:
            raise ValidationError("thermal spectral level must be non-negative")
        return toeplitz_from_spectrum(lambda w: np.full(w.shape, level), grid)
    k = toeplitz_from_spectrum(spec, grid)
    return TwoTimeKernel(grid, 0.5 * (k.values + k.values.T))


def uncertainty_block_matrix(noise: NoiseCovariances, hbar=None) -> np.ndarray:
    """Hermitian ``2N × 2N`` operator of the block uncertainty relation, scaled by ``dt``.

    Ordering is ``(Q_F, Q_x)``; with the ``dt`` scaling the ``iħ/2 δ`` blocks
    become ``iħ/2 · I``.
    """
    hbar = resolve_hbar(hbar)
    grid = noise.grid
    n, dt = grid.n, grid.dt
    eye = np.eye(n)
    k = noise.K.values
    top_left = noise.B_FF.values * dt + 0.5j * hbar * (k - k.T) * dt
    top_right = noise.B_xF.values.T * dt + 0.5j * hbar * eye
    bottom_left = noise.B_xF.values * dt - 0.5j * hbar * eye
    bottom_right = noise.B_xx.values * dt + 0j
    return np.block([[top_left, top_right], [bottom_left, bottom_right]])


def check_uncertainty_block(noise: NoiseCovariances, hbar=None, rtol: float = PSD_RTOL) -> PSDReport:
    """Positive semidefiniteness of the block uncertainty operator.

    Passes iff the smallest eigenvalue is at least ``-rtol`` times the
    operator 2-norm.
    """
    mat = uncertainty_block_matrix(noise, hbar)
    eig = np.linalg.eigvalsh(mat)
    norm = float(np.abs(eig).max())
    lo = float(eig[0])
    return PSDReport(lo, norm, bool(lo >= -rtol * norm), rtol)


def check_uncertainty_stationary(S_xx: float, S_FF: float, S_xF: complex, K: complex,
                                 omega: float | None = None, hbar=None, rtol: float = 1e-12) -> bool:
    """``S_xx S_FF - |S_xF|² ≥ ħ|Im(K* S_xx + S_xF)| + ħ²/4`` at one frequency.

    ``omega`` is informational; the spectra are passed already evaluated.
    Equality passes within a relative slack ``rtol``.
    """
    hbar = resolve_hbar(hbar)
    lhs = S_xx * S_FF - abs(S_xF) ** 2
    rhs = hbar * abs((np.conj(K) * S_xx + S_xF).imag) + hbar ** 2 / 4
    return bool(lhs >= rhs - rtol * max(abs(S_xx * S_FF), rhs))


def uncertainty_margin_memoryless(noise: MemorylessNoise, hbar=None) -> np.ndarray:
    """Pointwise ``S_xx S_FF - S_xF² - ħ²/4``."""
    hbar = resolve_hbar(hbar)
    return noise.S_xx.values * noise.S_FF.values - noise.S_xF.values ** 2 - hbar ** 2 / 4


def check_uncertainty_memoryless(noise: MemorylessNoise, t: float | None = None, hbar=None,
                                 rtol: float = 1e-12):
    """``S_xx(t) S_FF(t) - S_xF²(t) ≥ ħ²/4``.

    With ``t`` given, the check at the nearest grid sample (``t`` must lie on
    the grid) as a bool; otherwise a boolean array over the whole grid.
    """
    hbar = resolve_hbar(hbar)
    prod = noise.S_xx.values * noise.S_FF.values
    ok = uncertainty_margin_memoryless(noise, hbar) >= -rtol * np.maximum(prod, hbar ** 2 / 4)
    if t is None:
        return ok
    grid = noise.grid
    idx = int(round((t - grid.t_start) / grid.dt))
    if not 0 <= idx < grid.n or abs(grid.t_start + idx * grid.dt - t) > 1e-9 * grid.dt:
        raise ValidationError(f"t = {t} is not a grid sample")
    return bool(ok[idx])
