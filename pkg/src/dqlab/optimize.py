"""Noise-state optimization: the memoryless closed-form optimum and a
per-frequency numerical minimization of the stationary sum spectrum.

Random perturbations in :func:`memoryless_verify` draw from NumPy's
``PCG64`` bit generator seeded with the caller's integer seed, so reports are
reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ._config import resolve_hbar
from .exceptions import NumericalError, ValidationError
from .kernels import TimeSeries, TwoTimeKernel, _require_same_grid, transpose

SXF_CAP = 1e3  # in units of ħ
PERTURBATION_RTOL = 1e-10


def psi_function(phi: TimeSeries, chi_inv: TwoTimeKernel) -> TimeSeries:
    """``Ψ(t) = ∫ Φ(t') χ⁻¹(t', t) dt'``."""
    _require_same_grid(phi.grid, chi_inv.grid)
    return transpose(chi_inv).apply(phi)


def variance_functional(phi: TimeSeries, psi: TimeSeries, S_xx, S_xF, S_FF) -> float:
    """``∫ (Ψ² S_xx + 2ΨΦ S_xF + Φ² S_FF) dt`` for memoryless noise."""
    p, q = phi.values, psi.values
    sxx, sxf, sff = (np.asarray(getattr(s, "values", s), dtype=float) for s in (S_xx, S_xF, S_FF))
    return float(np.sum(q * q * sxx + 2 * q * p * sxf + p * p * sff) * phi.grid.dt)


@dataclass(frozen=True, eq=False)
class MemorylessOptimum:
    S_xF_opt: TimeSeries
    S_xx_opt: TimeSeries
    min_variance: float
    psi: TimeSeries
    S_FF: TimeSeries
    degenerate: np.ndarray = field(repr=False)
    achieved_variance: float = 0.0

    @property
    def n_degenerate(self) -> int:
        return int(np.count_nonzero(self.degenerate))


def memoryless_optimize(phi: TimeSeries, chi_inv: TwoTimeKernel, S_FF: TimeSeries,
                        hbar=None) -> MemorylessOptimum:
    """Minimize the filtered sum-noise variance at fixed ``S_FF(t)``.

    The constraint ``S_xx S_FF - S_xF² = ħ²/4`` is saturated pointwise and
    ``S_xF = -Φ S_FF / Ψ``, giving ``(ħ²/4) ∫ Ψ²/S_FF dt``.  Outside the
    filter support (``Φ = Ψ = 0``) ``S_xF = 0``.  Where ``Ψ`` vanishes but
    ``Φ`` does not, ``|S_xF|`` is capped at ``10³ħ`` and the sample is
    flagged in ``degenerate``; ``achieved_variance`` then exceeds
    ``min_variance``.
    """
    hbar = resolve_hbar(hbar)
    _require_same_grid(phi.grid, chi_inv.grid, S_FF.grid)
    sff = S_FF.values
    if not np.all(sff > 0):
        raise ValidationError("S_FF(t) must be positive everywhere")
    psi = psi_function(phi, chi_inv)
    p, q = phi.values, psi.values
    cap = SXF_CAP * hbar
    with np.errstate(divide="ignore", invalid="ignore"):
        sxf = np.where(q != 0, -p * sff / q, 0.0)
    outside = (p == 0) & (q == 0)
    degenerate = ~outside & ((q == 0) | (np.abs(sxf) > cap))
    sign = np.where(q != 0, np.sign(sxf), -np.sign(p))
    sxf = np.where(degenerate, sign * cap, sxf)
    sxf = np.where(outside, 0.0, sxf)
    sxx = (sxf ** 2 + hbar ** 2 / 4) / sff
    min_var = float(hbar ** 2 / 4 * np.sum(q * q / sff) * phi.grid.dt)
    achieved = variance_functional(phi, psi, sxx, sxf, sff)
    grid = phi.grid
    degenerate.setflags(write=False)
    return MemorylessOptimum(TimeSeries(grid, sxf), TimeSeries(grid, sxx), min_var, psi, S_FF,
                             degenerate, achieved)


@dataclass(frozen=True)
class VerifyReport:
    generator: str
    seed: int
    trials: int
    amplitude: float
    min_variance: float
    best_perturbed: float
    tolerance: float
    violations: int
    scaling_amplitudes: tuple
    scaling_excess: tuple
    scaling_exponent: float
    passed: bool

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["scaling_amplitudes"] = list(self.scaling_amplitudes)
        d["scaling_excess"] = list(self.scaling_excess)
        return d


def _perturbed_variance(opt: MemorylessOptimum, phi: TimeSeries, eps: np.ndarray, hbar: float) -> float:
    sxf = opt.S_xF_opt.values + eps
    sff = opt.S_FF.values
    sxx = (sxf ** 2 + hbar ** 2 / 4) / sff
    return variance_functional(phi, opt.psi, sxx, sxf, sff)


def memoryless_verify(opt: MemorylessOptimum, phi: TimeSeries, chi_inv: TwoTimeKernel,
                      S_FF: TimeSeries, trials: int = 1000, seed: int = 0,
                      amplitude: float = 0.1, scaling_amplitudes=(0.01, 0.02, 0.04),
                      hbar=None) -> VerifyReport:
    """Brute-force minimality check of a memoryless optimum.

    Draws ``trials`` Gaussian perturbations ``ε(t)`` of ``S_xF`` with standard
    deviation ``amplitude · max|S_xF_opt|``, re-saturates the constraint
    through ``S_xx``, and counts perturbed variances below the optimum (by more
    than ``1e-10`` of the functional's scale).  Also fits the excess-variance
    exponent along one fixed random direction.
    """
    hbar = resolve_hbar(hbar)
    _require_same_grid(phi.grid, chi_inv.grid, S_FF.grid, opt.psi.grid)
    if not np.array_equal(S_FF.values, opt.S_FF.values):
        raise ValidationError("S_FF differs from the profile the optimum was computed for")
    psi = psi_function(phi, chi_inv)
    if not np.array_equal(psi.values, opt.psi.values):
        raise ValidationError("filter or probe differs from the ones the optimum was computed for")
    rng = np.random.Generator(np.random.PCG64(seed))
    n = phi.grid.n
    sigma = amplitude * float(np.abs(opt.S_xF_opt.values).max() or hbar)
    base = _perturbed_variance(opt, phi, np.zeros(n), hbar)
    p, q = phi.values, opt.psi.values
    terms = (q * q * opt.S_xx_opt.values + 2 * np.abs(q * p * opt.S_xF_opt.values)
             + p * p * opt.S_FF.values)
    tol = PERTURBATION_RTOL * float(np.sum(terms) * phi.grid.dt)
    best = np.inf
    violations = 0
    for _ in range(trials):
        value = _perturbed_variance(opt, phi, sigma * rng.standard_normal(n), hbar)
        best = min(best, value)
        if value < base - tol:
            violations += 1
    direction = rng.standard_normal(n)
    direction *= float(np.abs(opt.S_xF_opt.values).max() or hbar) / np.abs(direction).max()
    amps = tuple(float(a) for a in scaling_amplitudes)
    excess = tuple(_perturbed_variance(opt, phi, a * direction, hbar) - base for a in amps)
    if all(e > 0 for e in excess) and len(amps) > 1:
        exponent = float(np.polyfit(np.log(amps), np.log(excess), 1)[0])
    else:
        exponent = float("nan")
    return VerifyReport("PCG64", int(seed), int(trials), float(amplitude), opt.min_variance,
                        float(best), tol, violations, amps, excess, exponent,
                        violations == 0)


# -- stationary per-frequency optimization -----------------------------------

N_STARTS = 27
XATOL = 1e-10
FATOL = 1e-12
INFEASIBLE = 1e300  # finite stand-in so simplex arithmetic never sees inf - inf


@dataclass(frozen=True)
class StationaryOptimum:
    omega: float
    S_FF_budget: float
    min_sum_spectrum: float
    S_xx: float
    S_xF: complex
    dql: float
    feasible: bool
    iterations: int
    residual: float
    n_starts: int

    def to_dict(self) -> dict:
        return dict(omega=self.omega, S_FF_budget=self.S_FF_budget,
                    min_sum_spectrum=self.min_sum_spectrum, S_xx=self.S_xx,
                    S_xF_re=self.S_xF.real, S_xF_im=self.S_xF.imag, dql=self.dql,
                    feasible=self.feasible, iterations=self.iterations,
                    residual=self.residual, n_starts=self.n_starts)


def _min_feasible_sxx(a: float, b: float, budget: float, k_im: float, hbar: float):
    """Smallest ``S_xx ≥ 0`` satisfying the stationary uncertainty relation, or None.

    With ``S_xF = a + ib`` the relation reads
    ``s B - (a² + b² + ħ²/4) ≥ ħ |b - Im(K) s|``, i.e. two linear inequalities.
    """
    c = a * a + b * b + hbar * hbar / 4
    lo, hi = 0.0, np.inf
    for slope, offset in ((budget + hbar * k_im, c + hbar * b), (budget - hbar * k_im, c - hbar * b)):
        if slope > 0:
            lo = max(lo, offset / slope)
        elif slope < 0:
            hi = min(hi, offset / slope)
        elif offset > 0:
            return None
    return lo if lo <= hi else None


def uncertainty_residual(S_xx: float, S_FF: float, S_xF: complex, K: complex, hbar=None) -> float:
    """``S_xx S_FF - |S_xF|² - ħ|Im(K* S_xx + S_xF)| - ħ²/4`` (≥ 0 when feasible)."""
    hbar = resolve_hbar(hbar)
    return float(S_xx * S_FF - abs(S_xF) ** 2 - hbar * abs((np.conj(K) * S_xx + S_xF).imag)
                 - hbar ** 2 / 4)


def stationary_optimize(chiK_inv: complex, K: complex, S_FF_budget: float, omega: float = 0.0,
                        hbar=None, n_starts: int = N_STARTS) -> StationaryOptimum:
    """Minimize ``S_sum(Ω)`` over ``S_xx ≥ 0`` and complex ``S_xF`` at fixed ``S_FF``.

    ``S_sum`` grows with ``S_xx``, so each candidate ``S_xF`` is projected onto
    the feasible boundary (smallest admissible ``S_xx``) and Nelder–Mead
    descends over ``(Re S_xF, Im S_xF)`` from ``n_starts`` seeds laid out on a
    log grid of magnitudes times a ring of phases.  The best local minimum wins,
    ties resolved by seed order.  ``dql`` is ``ħ|Im χ⁻¹(Ω)|`` with
    ``χ⁻¹ = χ_K⁻¹ - K``.  Raises :class:`NumericalError` when ``|χ_K⁻¹|`` is so
    small that the optimal ``S_xx`` would overflow.
    """
    hbar = resolve_hbar(hbar)
    chi = complex(chiK_inv)
    k = complex(K)
    budget = float(S_FF_budget)
    if not budget > 0:
        raise ValidationError("S_FF budget must be positive")
    dql = hbar * abs((chi - k).imag)
    if budget < hbar * abs(k.imag):
        return StationaryOptimum(float(omega), budget, float("inf"), float("nan"),
                                 complex("nan+nanj"), dql, False, 0, float("nan"), 0)
    chi2 = abs(chi) ** 2
    # the optimum has |S_xF| ~ budget/|χ| and S_xx ~ budget/|χ|²
    if chi != 0 and budget / abs(chi) / abs(chi) > 1e250:
        raise NumericalError(f"optimal S_xx ~ {budget / abs(chi) / abs(chi):.1e} is outside "
                             f"floating-point range (|chi_K^-1| = {abs(chi):.1e})")
    # beyond this radius the simplex is only drifting across the flat infeasible penalty
    radius = 1e100 * max(budget / abs(chi) if chi != 0 else 0.0, hbar)

    def evaluate(a, b):
        if not abs(a) + abs(b) <= radius:
            return None, np.inf
        s = _min_feasible_sxx(a, b, budget, k.imag, hbar)
        if s is None:
            return None, np.inf
        return s, chi2 * s + 2 * (chi.real * a - chi.imag * b) + budget

    if chi2 == 0:
        s, _ = evaluate(0.0, 0.0)
        if s is None:
            s = _min_feasible_sxx(0.0, hbar / 2, budget, k.imag, hbar)
        return StationaryOptimum(float(omega), budget, budget, float(s), 0j, dql, True, 0,
                                 uncertainty_residual(s, budget, 0j, k, hbar), 1)

    scale = budget / abs(chi)
    n_mag = 3
    n_phase = max(1, n_starts // n_mag)
    mags = np.geomspace(hbar / 2, max(scale, hbar), n_mag)
    phases = 2 * np.pi * np.arange(n_phase) / n_phase
    objective_scale = budget + chi2 * hbar ** 2 / (4 * budget)

    best = None
    iterations = 0
    for rho in mags:
        for theta in phases:
            x0 = np.array([rho * np.cos(theta), rho * np.sin(theta)])
            res = minimize(lambda x: min(evaluate(x[0], x[1])[1], INFEASIBLE), x0,
                           method="Nelder-Mead",
                           options=dict(xatol=XATOL * max(rho, scale),
                                        fatol=FATOL * objective_scale,
                                        initial_simplex=np.array([x0, x0 + [rho / 2, 0], x0 + [0, rho / 2]]),
                                        maxiter=20000, maxfev=40000))
            iterations += int(res.nit)
            if res.fun < INFEASIBLE and (best is None or res.fun < best.fun):
                best = res
    if best is None:
        return StationaryOptimum(float(omega), budget, float("inf"), float("nan"),
                                 complex("nan+nanj"), dql, False, iterations, float("nan"), n_starts)
    a, b = best.x
    s, value = evaluate(a, b)
    sxf = complex(a, b)
    return StationaryOptimum(float(omega), budget, float(value), float(s), sxf, dql, True,
                             iterations, uncertainty_residual(s, budget, sxf, k, hbar),
                             len(mags) * len(phases))
