import numpy as np
import pytest

from dqlab import (
    ProbeModel,
    RigidityModel,
    TimeSeries,
    TwoTimeKernel,
    ValidationError,
    antisymmetric_part,
    compose,
    damped_oscillator_response,
    damped_oscillator_spectrum,
    delta_kernel,
    free_mass_response,
    free_mass_spectrum,
    invert,
    kernel_to_spectrum,
    make_grid,
    modified_response,
    pin_boundary,
    rigidity_kernel,
    velocity_damping_kernel,
)
from dqlab.kernels import relative_error, toeplitz_deviation
from dqlab.probes import BOUNDARY_MARGIN


@pytest.fixture
def grid():
    return make_grid(-1.0, 1.0, 201)


def interior_spectrum(k):
    return kernel_to_spectrum(k.interior(BOUNDARY_MARGIN))


# -- free mass -------------------------------------------------------------------

def test_free_mass_on_parabola(grid):
    m = 2.5
    f = TimeSeries(grid, grid.times ** 2)
    out = free_mass_response(m, grid).apply(f).values
    np.testing.assert_allclose(out[1:-1], -2 * m, rtol=1e-9)


def test_free_mass_interior_symmetric(grid):
    a = antisymmetric_part(free_mass_response(1.0, grid)).values
    inner = slice(BOUNDARY_MARGIN, -BOUNDARY_MARGIN)
    assert np.count_nonzero(a[inner, inner]) == 0


def test_free_mass_spectrum_matches_closed_form(grid):
    m = 1.7
    spec = interior_spectrum(free_mass_response(m, grid))
    w = spec.omegas
    sel = np.abs(w) * grid.dt <= 0.3
    expected = free_mass_spectrum(m, w[sel])
    err = np.abs(spec.values[sel] - expected)
    assert np.all(err <= 0.01 * np.abs(expected) + 1e-9 * m / grid.dt ** 2 * grid.dt ** 2)
    assert np.all(spec.values[sel].real >= -1e-9)


def test_free_mass_rejects_bad_mass(grid):
    with pytest.raises(ValidationError):
        free_mass_response(0.0, grid)
    with pytest.raises(ValidationError):
        ProbeModel("free_mass", mass=-1.0)


def test_free_mass_pinned_inverse_round_trip():
    g = make_grid(0, 1, 128)
    chi = pin_boundary(free_mass_response(1.0, g))
    inv = invert(chi)
    d = delta_kernel(g)
    assert relative_error(compose(chi, inv), d) < 1e-8
    assert relative_error(compose(inv, chi), d) < 1e-8


def test_unpinned_free_mass_is_singular():
    from dqlab import IllConditionedError
    g = make_grid(0, 1, 64)
    with pytest.raises(IllConditionedError):
        invert(free_mass_response(1.0, g))


# -- damped oscillator ---------------------------------------------------------------

def test_undamped_oscillator_has_no_dissipation(grid):
    chi = damped_oscillator_response(1.0, 5.0, 0.0, grid)
    a = antisymmetric_part(chi).values
    inner = slice(BOUNDARY_MARGIN, -BOUNDARY_MARGIN)
    assert np.count_nonzero(a[inner, inner]) == 0


def test_oscillator_dissipative_part_is_velocity_damping(grid):
    m, w0, gamma = 1.3, 4.0, 0.7
    a = antisymmetric_part(damped_oscillator_response(m, w0, gamma, grid)).values
    h = velocity_damping_kernel(m * gamma, grid).values
    inner = slice(BOUNDARY_MARGIN, -BOUNDARY_MARGIN)
    assert np.abs(a[inner, inner] - h[inner, inner]).max() <= 1e-10 * np.abs(h).max()


def test_oscillator_spectrum_at_resonance():
    # The stencil's residual at Ω₀ is about mΩ₀⁴dt²/12; keep it well below mγΩ₀.
    m, w0, gamma = 1.0, 1.0, 0.1
    g = make_grid(0, 3.15, 64)
    inner = damped_oscillator_response(m, w0, gamma, g).interior(BOUNDARY_MARGIN)
    value = kernel_to_spectrum(inner, omegas=[w0]).values[0]
    expected = -1j * m * gamma * w0
    assert abs(value - expected) <= 0.01 * abs(expected)


def test_oscillator_spectrum_band(grid):
    m, w0, gamma = 1.0, 20.0, 2.0
    spec = interior_spectrum(damped_oscillator_response(m, w0, gamma, grid))
    sel = (np.abs(spec.omegas) * grid.dt <= 0.3)
    expected = damped_oscillator_spectrum(m, w0, gamma, spec.omegas[sel])
    # relative to the size of the mass term, which dominates the stencil error
    scale = np.abs(expected) + m * spec.omegas[sel] ** 2
    assert np.all(np.abs(spec.values[sel] - expected) <= 0.01 * scale + 1e-9)
    assert np.all(spec.imag[sel][spec.omegas[sel] > 0] < 0)


def test_oscillator_and_free_mass_relation(grid):
    # With the free mass defined as -m d²/dt², the undamped oscillator is
    # m d²/dt² + mΩ₀²δ = -(free mass) + mΩ₀²δ.
    m, w0 = 2.0, 3.0
    lhs = damped_oscillator_response(m, w0, 0.0, grid)
    rhs = -1.0 * free_mass_response(m, grid) + (m * w0 ** 2) * delta_kernel(grid)
    assert relative_error(lhs, rhs) < 1e-15


def test_stationary_constructors_have_toeplitz_interior(grid):
    for k in (free_mass_response(1.0, grid), damped_oscillator_response(1.0, 3.0, 0.2, grid),
              velocity_damping_kernel(0.4, grid)):
        assert toeplitz_deviation(k.interior(BOUNDARY_MARGIN)) == 0.0


# -- velocity damping ----------------------------------------------------------------

def test_velocity_damping_examples(grid):
    assert np.count_nonzero(velocity_damping_kernel(0.0, grid).values) == 0
    k = velocity_damping_kernel(1.5, grid)
    np.testing.assert_array_equal(k.T.values, -k.values)
    with pytest.raises(ValidationError):
        velocity_damping_kernel(-1.0, grid)


def test_velocity_damping_spectrum(grid):
    H = 0.8
    spec = interior_spectrum(velocity_damping_kernel(H, grid))
    w, dt = spec.omegas, grid.dt
    # the central difference has symbol -iH sin(Ω dt)/dt exactly
    np.testing.assert_allclose(spec.values, -1j * H * np.sin(w * dt) / dt, atol=1e-9 * H / dt)
    # 1% agreement with -iΩH holds for |Ω|dt <= 0.24; at 0.3 the error is 1.5%
    sel = np.abs(w) * dt <= 0.24
    expected = -1j * w[sel] * H
    assert np.all(np.abs(spec.values[sel] - expected) <= 0.01 * np.abs(expected) + 1e-9)
    x = np.abs(w[np.abs(w) * dt <= 0.3]).max() * dt
    assert 1 - np.sin(x) / x > 0.014


# -- rigidity ------------------------------------------------------------------------

def test_rigidity_examples(grid):
    assert rigidity_kernel(None, grid).norm() == 0
    zero = TimeSeries.constant(grid, 0.0)
    assert rigidity_kernel(zero, grid).norm() == 0
    k = 3.0
    kern = rigidity_kernel(TimeSeries.constant(grid, k), grid)
    assert relative_error(kern, k * delta_kernel(grid)) < 1e-15
    x = TimeSeries(grid, np.sin(grid.times))
    np.testing.assert_allclose(kern.apply(x).values, k * x.values, rtol=1e-14)


def test_modulated_rigidity(grid):
    k, w0 = 2.0, 7.0
    prof = TimeSeries(grid, k * np.cos(2 * w0 * grid.times))
    out = rigidity_kernel(RigidityModel(profile=prof), grid).apply(TimeSeries.constant(grid, 1.5))
    np.testing.assert_allclose(out.values, 1.5 * prof.values, rtol=1e-14, atol=1e-14)


def test_rigidity_model_validation(grid):
    with pytest.raises(ValidationError):
        RigidityModel()
    k = TwoTimeKernel(grid, np.eye(grid.n))
    assert rigidity_kernel(k, grid) is k


def test_modified_response(grid, rng):
    chi = damped_oscillator_response(1.0, 2.0, 0.3, grid)
    zero = rigidity_kernel(None, grid)
    np.testing.assert_array_equal(modified_response(chi, zero).values, chi.values)
    r = rng.standard_normal((grid.n, grid.n))
    sym = TwoTimeKernel(grid, r + r.T)
    np.testing.assert_allclose(antisymmetric_part(modified_response(chi, sym)).values,
                               antisymmetric_part(chi).values, atol=1e-12)


def test_free_mass_plus_spring_spectrum(grid):
    m, k = 1.0, 50.0
    chiK = modified_response(free_mass_response(m, grid), k * delta_kernel(grid))
    spec = interior_spectrum(chiK)
    sel = np.abs(spec.omegas) * grid.dt <= 0.3
    expected = m * spec.omegas[sel] ** 2 + k
    assert np.all(np.abs(spec.values[sel] - expected) <= 0.01 * np.abs(expected))


def test_probe_model_dispatch(grid):
    p = ProbeModel("damped_oscillator", mass=2.0, omega0=3.0, gamma=0.5)
    assert p.friction == 1.0
    assert relative_error(p.response(grid), damped_oscillator_response(2.0, 3.0, 0.5, grid)) == 0
    np.testing.assert_allclose(p.response_spectrum([3.0]), [-1j * 2.0 * 0.5 * 3.0])
    custom = ProbeModel("custom", kernel=delta_kernel(grid))
    assert custom.response(grid) is custom.kernel
    with pytest.raises(ValidationError):
        custom.response_spectrum([1.0])
    with pytest.raises(ValidationError):
        ProbeModel("custom")
    with pytest.raises(ValidationError):
        ProbeModel("spring")
    assert ProbeModel("free_mass").friction == 0.0
