"""Probe response kernels χ⁻¹, meter rigidity K and the modified response χ_K⁻¹.

Sign conventions.  The damped oscillator follows
``χ⁻¹(Ω) = m(Ω₀² - Ω²) - i m γ Ω`` so that ``Im χ⁻¹(Ω) < 0`` for ``Ω > 0``.
The free-mass constructor realizes ``-m d²/dt²`` exactly as documented on
:func:`free_mass_response`; under the package Fourier convention its spectrum
is ``+mΩ²``.  Only ``|χ⁻¹|`` and ``Im χ⁻¹`` enter the SQL and DQL, so neither
curve depends on that sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .exceptions import ValidationError
from .kernels import (
    TimeGrid,
    TimeSeries,
    TwoTimeKernel,
    _require_same_grid,
    delta_derivative_kernel,
    delta_kernel,
    diagonal_kernel,
    second_derivative_kernel,
    zero_kernel,
)

#: rows/columns at each edge where differential kernels are not Toeplitz
BOUNDARY_MARGIN = 4


@dataclass(frozen=True, eq=False)
class ProbeModel:
    kind: Literal["free_mass", "damped_oscillator", "custom"]
    mass: float = 1.0
    omega0: float = 0.0
    gamma: float = 0.0
    kernel: TwoTimeKernel | None = None

    def __post_init__(self):
        if self.kind not in ("free_mass", "damped_oscillator", "custom"):
            raise ValidationError(f"unknown probe kind {self.kind!r}")
        if self.kind == "custom":
            if self.kernel is None:
                raise ValidationError("custom probe needs an explicit kernel")
            return
        if not self.mass > 0:
            raise ValidationError(f"mass must be positive, got {self.mass}")
        if self.gamma < 0 or self.omega0 < 0:
            raise ValidationError("gamma and omega0 must be non-negative")

    @property
    def friction(self) -> float:
        """Friction coefficient ``H = mγ`` (zero for a free mass)."""
        return self.mass * self.gamma if self.kind == "damped_oscillator" else 0.0

    def response(self, grid: TimeGrid) -> TwoTimeKernel:
        if self.kind == "free_mass":
            return free_mass_response(self.mass, grid)
        if self.kind == "damped_oscillator":
            return damped_oscillator_response(self.mass, self.omega0, self.gamma, grid)
        _require_same_grid(self.kernel.grid, grid)
        return self.kernel

    def response_spectrum(self, omegas) -> np.ndarray:
        """Continuum response ``χ⁻¹(Ω)`` of the named models."""
        w = np.asarray(omegas, dtype=float)
        if self.kind == "free_mass":
            return free_mass_spectrum(self.mass, w)
        if self.kind == "damped_oscillator":
            return damped_oscillator_spectrum(self.mass, self.omega0, self.gamma, w)
        raise ValidationError("custom probes have no closed-form spectrum; use kernel_to_spectrum")


@dataclass(frozen=True, eq=False)
class RigidityModel:
    """Either an instantaneous spring profile ``K₀(t)`` or an explicit kernel."""

    profile: TimeSeries | None = None
    kernel: TwoTimeKernel | None = None

    def __post_init__(self):
        if (self.profile is None) == (self.kernel is None):
            raise ValidationError("rigidity needs exactly one of profile or kernel")


def free_mass_response(m: float, grid: TimeGrid) -> TwoTimeKernel:
    """``-m d²/dt²``: matrix ``-m D₂ / dt`` with ``D₂`` the (1, -2, 1)/dt² stencil."""
    if not m > 0:
        raise ValidationError(f"mass must be positive, got {m}")
    return -m * second_derivative_kernel(grid)


def free_mass_spectrum(m: float, omegas) -> np.ndarray:
    w = np.asarray(omegas, dtype=float)
    return (m * w ** 2).astype(complex)


def damped_oscillator_response(m: float, omega0: float, gamma: float, grid: TimeGrid) -> TwoTimeKernel:
    """``m (d²/dt² + γ d/dt + Ω₀²)``, i.e. ``χ⁻¹(Ω) = m(Ω₀² - Ω²) - i m γ Ω``."""
    if not m > 0:
        raise ValidationError(f"mass must be positive, got {m}")
    if gamma < 0 or omega0 < 0:
        raise ValidationError("gamma and omega0 must be non-negative")
    return (m * second_derivative_kernel(grid)
            + velocity_damping_kernel(m * gamma, grid)
            + (m * omega0 ** 2) * delta_kernel(grid))


def damped_oscillator_spectrum(m: float, omega0: float, gamma: float, omegas) -> np.ndarray:
    w = np.asarray(omegas, dtype=float)
    return m * (omega0 ** 2 - w ** 2) - 1j * m * gamma * w


def velocity_damping_kernel(H: float, grid: TimeGrid) -> TwoTimeKernel:
    """Stationary dissipation ``H dδ(t - t')/dt``; spectrum ``-iΩH``."""
    if H < 0:
        raise ValidationError(f"friction coefficient must be non-negative, got {H}")
    return H * delta_derivative_kernel(grid)


def rigidity_kernel(model: RigidityModel | TimeSeries | TwoTimeKernel | None,
                    grid: TimeGrid) -> TwoTimeKernel:
    """``K(t, t') = K₀(t) δ(t - t')`` for a profile; explicit kernels pass through."""
    if model is None:
        return zero_kernel(grid)
    if isinstance(model, TimeSeries):
        model = RigidityModel(profile=model)
    elif isinstance(model, TwoTimeKernel):
        model = RigidityModel(kernel=model)
    if model.kernel is not None:
        _require_same_grid(model.kernel.grid, grid)
        return model.kernel
    _require_same_grid(model.profile.grid, grid)
    return diagonal_kernel(model.profile)


def modified_response(chi_inv: TwoTimeKernel, K: TwoTimeKernel) -> TwoTimeKernel:
    """``χ_K⁻¹ = χ⁻¹ + K``."""
    return chi_inv + K


def pin_boundary(k: TwoTimeKernel, width: int = 1) -> TwoTimeKernel:
    """Replace the first and last ``width`` rows by delta rows.

    Differential kernels annihilate low-order polynomials and are singular;
    pinning the edge samples (Dirichlet conditions on the window) makes them
    invertible without touching the interior.  The pinned diagonal takes the
    largest diagonal magnitude of ``k`` to keep the rows balanced.
    """
    m = np.array(k.values)
    n, dt = k.grid.n, k.grid.dt
    pin = float(np.abs(np.diag(m)).max()) or 1.0 / dt
    rows = list(range(width)) + list(range(n - width, n))
    m[rows, :] = 0.0
    m[rows, rows] = pin
    return TwoTimeKernel(k.grid, m)
