"""Uniform time grids and the algebra of two-time kernels.

A kernel ``κ(t, t')`` on a grid of ``n`` samples is stored as a dense real
``n × n`` matrix ``M`` with ``κ(t_i, t_j) ≈ M[i, j]``.  Integrals over the
intermediate time are approximated with the rectangle rule, so composition is
``(κ₁∘κ₂) = M₁ @ M₂ * dt`` and the Dirac delta is the matrix ``I / dt``.  With
that convention the kernel inverse is an exact matrix identity, which is what
the commutator identities downstream rely on.

Fourier convention (shared with the rest of the package)::

    S(Ω)   = Σ_k B(τ_k) exp(+iΩτ_k) dt
    B(τ_k) = (1/2π) Σ_j S(Ω_j) exp(-iΩ_jτ_k) dΩ

over the ``2n - 1`` lags ``τ_k = k dt, |k| < n`` and the matching ``2n - 1``
DFT frequencies returned by :func:`spectral_frequencies`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .exceptions import GridMismatchError, IllConditionedError, NotToeplitzError, ValidationError

MIN_SAMPLES = 8
RCOND_THRESHOLD = 1e-12
TOEPLITZ_RTOL = 1e-8


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling ``t_k = t_start + k·dt`` of ``[t_start, t_end]``."""

    t_start: float
    t_end: float
    n: int

    def __post_init__(self):
        t0, t1 = float(self.t_start), float(self.t_end)
        if not (math.isfinite(t0) and math.isfinite(t1)):
            raise ValidationError(f"grid bounds must be finite, got ({t0}, {t1})")
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise ValidationError(f"grid size must be an integer, got {self.n!r}")
        if self.n < MIN_SAMPLES:
            raise ValidationError(f"grid needs at least {MIN_SAMPLES} samples, got {self.n}")
        if not t1 > t0:
            raise ValidationError(f"t_end must exceed t_start, got ({t0}, {t1})")
        object.__setattr__(self, "t_start", t0)
        object.__setattr__(self, "t_end", t1)
        object.__setattr__(self, "n", int(self.n))

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.n - 1)

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def times(self) -> np.ndarray:
        return self.t_start + np.arange(self.n) * self.dt

    def interior(self, margin: int) -> "TimeGrid":
        """The grid with ``margin`` samples dropped from each end."""
        dt = self.dt
        return TimeGrid(self.t_start + margin * dt, self.t_start + (self.n - 1 - margin) * dt,
                        self.n - 2 * margin)


def make_grid(t_start: float, t_end: float, n: int) -> TimeGrid:
    return TimeGrid(t_start, t_end, n)


def _require_same_grid(*grids: TimeGrid) -> TimeGrid:
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise GridMismatchError(f"grid mismatch: {first} vs {g}")
    return first


def _frozen(values, shape, what) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.shape != shape:
        raise ValidationError(f"{what} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, (self.grid.n,), "time series"))

    @classmethod
    def from_function(cls, grid: TimeGrid, func: Callable[[np.ndarray], np.ndarray]) -> "TimeSeries":
        return cls(grid, np.broadcast_to(func(grid.times), (grid.n,)))

    @classmethod
    def constant(cls, grid: TimeGrid, value: float) -> "TimeSeries":
        return cls(grid, np.full(grid.n, float(value)))

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.dt)

    def dot(self, other: "TimeSeries") -> float:
        """``∫ f(t) g(t) dt`` by the rectangle rule."""
        _require_same_grid(self.grid, other.grid)
        return float(self.values @ other.values * self.grid.dt)

    def _binary(self, other, op):
        if isinstance(other, TimeSeries):
            _require_same_grid(self.grid, other.grid)
            other = other.values
        return TimeSeries(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __radd__ = __add__
    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return TimeSeries(self.grid, -self.values)

    def __len__(self):
        return self.grid.n


@dataclass(frozen=True, eq=False)
class TwoTimeKernel:
    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.grid.n
        object.__setattr__(self, "values", _frozen(self.values, (n, n), "kernel"))

    @classmethod
    def from_function(cls, grid: TimeGrid, func: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        t = grid.times
        return cls(grid, func(t[:, None], t[None, :]))

    @property
    def T(self) -> "TwoTimeKernel":
        return transpose(self)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def apply(self, f: TimeSeries) -> TimeSeries:
        """``∫ κ(t, t') f(t') dt'``."""
        _require_same_grid(self.grid, f.grid)
        return TimeSeries(self.grid, self.values @ f.values * self.grid.dt)

    def quadratic_form(self, f: TimeSeries, g: TimeSeries | None = None) -> float:
        """``∫∫ f(t) κ(t, t') g(t') dt dt'``; ``g`` defaults to ``f``."""
        g = f if g is None else g
        _require_same_grid(self.grid, f.grid, g.grid)
        return float(f.values @ self.values @ g.values * self.grid.dt ** 2)

    def interior(self, margin: int) -> "TwoTimeKernel":
        """Restriction to the interior sub-grid (the Toeplitz core of differential kernels)."""
        if margin == 0:
            return self
        sl = slice(margin, self.grid.n - margin)
        return TwoTimeKernel(self.grid.interior(margin), self.values[sl, sl])

    def _binary(self, other, op):
        if isinstance(other, TwoTimeKernel):
            _require_same_grid(self.grid, other.grid)
            return TwoTimeKernel(self.grid, op(self.values, other.values))
        return NotImplemented

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        if isinstance(scalar, TwoTimeKernel):
            return NotImplemented
        return TwoTimeKernel(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return TwoTimeKernel(self.grid, self.values / float(scalar))

    def __neg__(self):
        return TwoTimeKernel(self.grid, -self.values)

    def __matmul__(self, other):
        return compose(self, other)


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """Samples ``S(Ω)`` on strictly increasing frequencies."""

    omegas: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        om = np.array(self.omegas, dtype=float, copy=True)
        val = np.array(self.values, dtype=complex, copy=True)
        if om.ndim != 1 or val.shape != om.shape:
            raise ValidationError("omegas and values must be 1-D arrays of equal length")
        if om.size > 1 and not np.all(np.diff(om) > 0):
            raise ValidationError("omegas must be strictly increasing")
        if not (np.all(np.isfinite(om)) and np.all(np.isfinite(val))):
            raise ValidationError("spectral density has non-finite samples")
        om.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_function(cls, omegas, func: Callable[[np.ndarray], np.ndarray]) -> "SpectralDensity":
        omegas = np.asarray(omegas, dtype=float)
        return cls(omegas, np.broadcast_to(func(omegas), omegas.shape))

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    @property
    def imag(self) -> np.ndarray:
        return self.values.imag

    def at(self, omegas) -> np.ndarray:
        """Linear interpolation of real and imaginary parts."""
        omegas = np.asarray(omegas, dtype=float)
        if omegas.size and (omegas.min() < self.omegas[0] or omegas.max() > self.omegas[-1]):
            raise ValidationError("requested frequencies fall outside the sampled range")
        return (np.interp(omegas, self.omegas, self.values.real)
                + 1j * np.interp(omegas, self.omegas, self.values.imag))

    def __len__(self):
        return self.omegas.size


SpectrumLike = Union[SpectralDensity, Callable[[np.ndarray], np.ndarray]]


# -- elementary kernels ------------------------------------------------------

def zero_kernel(grid: TimeGrid) -> TwoTimeKernel:
    return TwoTimeKernel(grid, np.zeros((grid.n, grid.n)))


def delta_kernel(grid: TimeGrid) -> TwoTimeKernel:
    return TwoTimeKernel(grid, np.eye(grid.n) / grid.dt)


def diagonal_kernel(profile: TimeSeries) -> TwoTimeKernel:
    """``p(t) δ(t - t')``."""
    return TwoTimeKernel(profile.grid, np.diag(profile.values) / profile.grid.dt)


def delta_derivative_kernel(grid: TimeGrid) -> TwoTimeKernel:
    """Kernel of ``d/dt``: ``∫ δ'(t - t') f(t') dt' = f'(t)``.

    Second-order central differences in the interior, one-sided second-order
    stencils on the two boundary rows, then antisymmetrized so that
    ``κᵀ = -κ`` holds exactly.
    """
    n, dt = grid.n, grid.dt
    m = np.zeros((n, n))
    i = np.arange(1, n - 1)
    m[i, i + 1] = 0.5
    m[i, i - 1] = -0.5
    m[0, :3] = (-1.5, 2.0, -0.5)
    m[-1, -3:] = (0.5, -2.0, 1.5)
    m = 0.5 * (m - m.T)
    return TwoTimeKernel(grid, m / dt ** 2)


def second_derivative_kernel(grid: TimeGrid) -> TwoTimeKernel:
    """Kernel of ``d²/dt²``: the ``(1, -2, 1)/dt²`` stencil divided by ``dt``.

    Boundary rows use the one-sided second-order stencil ``(2, -5, 4, -1)``;
    rows ``1 .. n-2`` form an exactly Toeplitz block.
    """
    n, dt = grid.n, grid.dt
    m = np.zeros((n, n))
    i = np.arange(1, n - 1)
    m[i, i - 1] = 1.0
    m[i, i] = -2.0
    m[i, i + 1] = 1.0
    m[0, :4] = (2.0, -5.0, 4.0, -1.0)
    m[-1, -4:] = (-1.0, 4.0, -5.0, 2.0)
    return TwoTimeKernel(grid, m / dt ** 3)


# -- algebra -----------------------------------------------------------------

def compose(k1: TwoTimeKernel, k2: TwoTimeKernel) -> TwoTimeKernel:
    """``∫ κ₁(t, t'') κ₂(t'', t') dt''``."""
    grid = _require_same_grid(k1.grid, k2.grid)
    return TwoTimeKernel(grid, k1.values @ k2.values * grid.dt)


def _lu(a):
    # singular input is reported through the condition estimate, not a warning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        return scipy.linalg.lu_factor(a, check_finite=False)


def reciprocal_condition(k: TwoTimeKernel) -> float:
    """LAPACK 1-norm reciprocal condition estimate of the kernel matrix."""
    lu, _ = _lu(k.values)
    anorm = np.linalg.norm(k.values, 1)
    if anorm == 0:
        return 0.0
    rcond, _ = lapack.dgecon(lu, anorm, norm="1")
    return float(rcond)


def invert(k: TwoTimeKernel, rcond_threshold: float = RCOND_THRESHOLD) -> TwoTimeKernel:
    """Kernel inverse: ``compose(invert(k), k) = delta_kernel``.

    Raises :class:`IllConditionedError` when the reciprocal condition estimate
    falls below ``rcond_threshold``.
    """
    a = k.values
    anorm = np.linalg.norm(a, 1)
    lu, piv = _lu(a)
    rcond = float(lapack.dgecon(lu, anorm, norm="1")[0]) if anorm > 0 else 0.0
    if not rcond >= rcond_threshold:
        raise IllConditionedError(rcond, rcond_threshold)
    inv = scipy.linalg.lu_solve((lu, piv), np.eye(k.grid.n), check_finite=False)
    return TwoTimeKernel(k.grid, inv / k.grid.dt ** 2)


def transpose(k: TwoTimeKernel) -> TwoTimeKernel:
    return TwoTimeKernel(k.grid, k.values.T)


def antisymmetric_part(k: TwoTimeKernel) -> TwoTimeKernel:
    """``½ (κ(t, t') - κ(t', t))``."""
    return TwoTimeKernel(k.grid, 0.5 * (k.values - k.values.T))


def symmetric_part(k: TwoTimeKernel) -> TwoTimeKernel:
    return TwoTimeKernel(k.grid, 0.5 * (k.values + k.values.T))


def relative_error(a, b, scale: float | None = None) -> float:
    """Frobenius ``‖a - b‖ / scale``; ``scale`` defaults to ``max(‖a‖, ‖b‖)``."""
    av = a.values if hasattr(a, "values") else np.asarray(a)
    bv = b.values if hasattr(b, "values") else np.asarray(b)
    diff = float(np.linalg.norm(av - bv))
    if scale is None:
        scale = max(float(np.linalg.norm(av)), float(np.linalg.norm(bv)))
    if scale == 0:
        return diff
    return diff / scale


def anticausal_fraction(k: TwoTimeKernel) -> float:
    """Share of ``‖k‖`` in entries with ``t' > t`` (zero for a causal response).

    Diagnostic only; nothing in the package requires causality.
    """
    total = float(np.linalg.norm(k.values))
    if total == 0:
        return 0.0
    return float(np.linalg.norm(np.triu(k.values, 1))) / total


def enforce_window(values: np.ndarray, margin: int = 5, rtol: float = 1e-6) -> bool:
    """True if ``values`` are below ``rtol`` of their peak within ``margin`` samples of each edge."""
    v = np.abs(np.asarray(values))
    peak = v.max()
    if peak == 0:
        return True
    edge = np.concatenate([v[:margin], v[-margin:]])
    return bool(edge.max() < rtol * peak)


# -- stationary bridge -------------------------------------------------------

def spectral_frequencies(grid: TimeGrid) -> np.ndarray:
    """The ``2n - 1`` DFT frequencies matching the lag set of an ``n``-sample grid, ascending."""
    length = 2 * grid.n - 1
    return np.fft.fftshift(2 * np.pi * np.fft.fftfreq(length, grid.dt))


def toeplitz_deviation(k: TwoTimeKernel) -> float:
    """Largest spread of entries along any diagonal."""
    m = k.values
    n = m.shape[0]
    worst = 0.0
    for off in range(-(n - 1), n):
        d = np.diagonal(m, off)
        worst = max(worst, float(d.max() - d.min()))
    return worst


def _lags(k: TwoTimeKernel) -> np.ndarray:
    """Lag values in FFT order: ``B(0), B(dt), …, B((n-1)dt), B(-(n-1)dt), …, B(-dt)``."""
    m = k.values
    return np.concatenate([m[:, 0], m[0, :0:-1]])


def kernel_to_spectrum(k: TwoTimeKernel, grid: TimeGrid | None = None, omegas=None,
                       rtol: float = TOEPLITZ_RTOL) -> SpectralDensity:
    """Spectrum ``S(Ω) = Σ_k B(τ_k) e^{iΩτ_k} dt`` of a Toeplitz kernel.

    Evaluated at :func:`spectral_frequencies` unless ``omegas`` is given, in
    which case the lag sum is evaluated directly at those frequencies.
    """
    if grid is not None:
        _require_same_grid(k.grid, grid)
    grid = k.grid
    tol = rtol * k.norm()
    dev = toeplitz_deviation(k)
    if dev > tol:
        raise NotToeplitzError(dev, tol)
    c = _lags(k)
    dt = grid.dt
    if omegas is None:
        length = c.size
        s = np.fft.fftshift(np.fft.ifft(c) * length * dt)
        return SpectralDensity(spectral_frequencies(grid), s)
    omegas = np.asarray(omegas, dtype=float)
    n = grid.n
    lag_index = np.arange(-(n - 1), n)
    lag_values = np.concatenate([k.values[0, :0:-1], k.values[:, 0]])
    phase = np.exp(1j * np.outer(omegas, lag_index * dt))
    return SpectralDensity(omegas, phase @ lag_values * dt)


def _sample_spectrum(spectrum: SpectrumLike, grid: TimeGrid) -> np.ndarray:
    omegas = spectral_frequencies(grid)
    if isinstance(spectrum, SpectralDensity):
        if spectrum.omegas.shape == omegas.shape and np.allclose(
                spectrum.omegas, omegas, rtol=1e-12, atol=1e-12 * np.abs(omegas).max()):
            return np.asarray(spectrum.values)
        return spectrum.at(omegas)
    if callable(spectrum):
        return np.broadcast_to(np.asarray(spectrum(omegas), dtype=complex), omegas.shape)
    raise ValidationError(f"cannot interpret {type(spectrum).__name__} as a spectrum")


def toeplitz_from_spectrum(spectrum: SpectrumLike, grid: TimeGrid) -> TwoTimeKernel:
    """Stationary kernel ``B(t_i - t_j)`` with ``B(τ) = ∫ S(Ω) e^{-iΩτ} dΩ/2π``.

    ``spectrum`` is a :class:`SpectralDensity` (interpolated onto the grid's
    DFT frequencies if sampled elsewhere) or a callable ``S(Ω)``.  The
    spectrum must satisfy ``S(-Ω) = S(Ω)*`` so that the kernel is real.
    """
    s = _sample_spectrum(spectrum, grid)
    if not np.all(np.isfinite(s)):
        raise ValidationError("spectrum has non-finite samples")
    length = s.size
    c = np.fft.fft(np.fft.ifftshift(s)) / (length * grid.dt)
    scale = float(np.abs(c).max())
    if np.abs(c.imag).max() > 1e-8 * scale + 1e-300:
        raise ValidationError("spectrum is not Hermitian (S(-Ω) != S(Ω)*): kernel would be complex")
    c = c.real
    n = grid.n
    col = c[:n]
    row = np.concatenate([c[:1], c[:n - 1:-1]])
    return TwoTimeKernel(grid, scipy.linalg.toeplitz(col, row))
