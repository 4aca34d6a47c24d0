import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dqlab import (
    GridMismatchError,
    IllConditionedError,
    NotToeplitzError,
    SpectralDensity,
    TimeSeries,
    TwoTimeKernel,
    ValidationError,
    antisymmetric_part,
    compose,
    delta_derivative_kernel,
    delta_kernel,
    invert,
    kernel_to_spectrum,
    make_grid,
    spectral_frequencies,
    toeplitz_from_spectrum,
    transpose,
    zero_kernel,
)
from dqlab.kernels import enforce_window, reciprocal_condition, relative_error, toeplitz_deviation


def random_kernel(grid, rng, scale=1.0):
    return TwoTimeKernel(grid, scale * rng.standard_normal((grid.n, grid.n)))


# -- grid ---------------------------------------------------------------------

def test_grid_spacing_examples():
    g = make_grid(0, 1, 11)
    assert g.dt == pytest.approx(0.1, abs=1e-15)
    assert g.times[5] == pytest.approx(0.5, abs=1e-15)
    g = make_grid(-5, 5, 101)
    assert g.dt == pytest.approx(0.1, abs=1e-15)
    assert g.times[0] == -5


@pytest.mark.parametrize("args", [(0, 1, 2), (0, 1, 7), (1, 1, 10), (1, 0, 10),
                                  (0, float("inf"), 10), (float("nan"), 1, 10), (0, 1, 8.5)])
def test_grid_rejects_bad_input(args):
    with pytest.raises(ValidationError):
        make_grid(*args)


def test_grid_equality_and_mismatch():
    a, b = make_grid(0, 1, 16), make_grid(0, 1, 16)
    assert a == b
    c = make_grid(0, 1, 17)
    assert a != c
    with pytest.raises(GridMismatchError):
        compose(delta_kernel(a), delta_kernel(c))
    with pytest.raises(GridMismatchError):
        TimeSeries.constant(a, 1.0) + TimeSeries.constant(c, 1.0)


def test_interior_grid_samples_match():
    g = make_grid(-1, 1, 41)
    inner = g.interior(4)
    np.testing.assert_allclose(inner.times, g.times[4:-4], atol=1e-14)
    assert inner.dt == pytest.approx(g.dt, rel=1e-13)


def test_values_are_immutable_and_finite():
    g = make_grid(0, 1, 8)
    k = delta_kernel(g)
    with pytest.raises(ValueError):
        k.values[0, 0] = 1.0
    with pytest.raises(ValidationError):
        TwoTimeKernel(g, np.full((8, 8), np.nan))
    with pytest.raises(ValidationError):
        TimeSeries(g, np.ones(7))


# -- delta and composition -----------------------------------------------------

def test_delta_entries():
    g = make_grid(0, 1.5, 16)  # dt = 0.1
    d = delta_kernel(g).values
    np.testing.assert_allclose(np.diag(d), 10.0, rtol=1e-13)
    assert np.count_nonzero(d - np.diag(np.diag(d))) == 0


def test_delta_is_identity_of_composition(rng, grid64):
    k = random_kernel(grid64, rng)
    d = delta_kernel(grid64)
    assert relative_error(compose(d, d), d) < 1e-14
    assert relative_error(compose(d, k), k) < 1e-14
    assert relative_error(compose(k, d), k) < 1e-14
    f = TimeSeries(grid64, rng.standard_normal(grid64.n))
    np.testing.assert_allclose(d.apply(f).values, f.values, rtol=1e-13)


def test_scaled_delta_composition(grid64):
    d = delta_kernel(grid64)
    assert relative_error(compose(3.0 * d, -2.5 * d), -7.5 * d) < 1e-14


def test_composition_associative(rng, grid64):
    a, b, c = (random_kernel(grid64, rng) for _ in range(3))
    lhs = compose(compose(a, b), c)
    rhs = compose(a, compose(b, c))
    scale = a.norm() * b.norm() * c.norm() * grid64.dt ** 2
    assert np.linalg.norm(lhs.values - rhs.values) <= 1e-12 * scale


def test_matmul_operator_is_compose(rng, grid64):
    a, b = random_kernel(grid64, rng), random_kernel(grid64, rng)
    np.testing.assert_array_equal((a @ b).values, compose(a, b).values)


def test_composition_refinement_order():
    # Tapered exp(-|t - s|): negligible at the window edges, with a kink on the
    # diagonal that keeps the rectangle rule at second order.
    def compose_on(n):
        g = make_grid(-1, 1, n)
        w = lambda t: np.exp(-0.5 * (t / 0.15) ** 2)
        k = TwoTimeKernel.from_function(g, lambda t, s: w(t) * w(s) * np.exp(-np.abs(t - s)))
        return compose(k, k).values

    coarse, mid, fine = (compose_on(n) for n in (33, 65, 129))
    e1 = np.abs(coarse - mid[::2, ::2]).max()
    e2 = np.abs(mid[::2, ::2] - fine[::4, ::4]).max()
    order = np.log2(e1 / e2)
    assert order >= 1.8


# -- inversion -------------------------------------------------------------------

def test_invert_delta_examples(grid64):
    d = delta_kernel(grid64)
    assert relative_error(invert(d), d) < 1e-14
    assert relative_error(invert(2.0 * d), 0.5 * d) < 1e-14


def test_invert_two_sided(rng, grid64):
    k = random_kernel(grid64, rng) + 20.0 * delta_kernel(grid64)
    inv = invert(k)
    d = delta_kernel(grid64)
    assert relative_error(compose(inv, k), d) < 1e-8
    assert relative_error(compose(k, inv), d) < 1e-8


def test_invert_rejects_singular(grid64):
    with pytest.raises(IllConditionedError) as info:
        invert(zero_kernel(grid64))
    assert info.value.rcond == 0.0
    m = np.ones((grid64.n, grid64.n))
    with pytest.raises(IllConditionedError) as info:
        invert(TwoTimeKernel(grid64, m))
    assert info.value.rcond < 1e-12
    assert "1.0e-12" in str(info.value)


def test_reciprocal_condition_of_delta(grid64):
    assert reciprocal_condition(delta_kernel(grid64)) == pytest.approx(1.0)


# -- transpose and antisymmetric part ---------------------------------------------

def test_transpose_examples(rng, grid64):
    k = random_kernel(grid64, rng)
    np.testing.assert_array_equal(transpose(transpose(k)).values, k.values)
    np.testing.assert_array_equal(transpose(delta_kernel(grid64)).values, delta_kernel(grid64).values)
    dp = delta_derivative_kernel(grid64)
    np.testing.assert_array_equal(transpose(dp).values, -dp.values)


def test_antisymmetric_part_examples(rng, grid64):
    k = random_kernel(grid64, rng)
    sym = k + k.T
    assert np.count_nonzero(antisymmetric_part(sym).values) == 0
    dp = 3.0 * delta_derivative_kernel(grid64)
    np.testing.assert_array_equal(antisymmetric_part(dp).values, dp.values)
    a = antisymmetric_part(k)
    assert np.count_nonzero((a + transpose(a)).values) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=8, max_value=40), st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_antisymmetric_complement_property(n, seed):
    g = make_grid(0, 1, n)
    k = random_kernel(g, np.random.default_rng(seed))
    a = antisymmetric_part(k)
    assert np.count_nonzero((a + transpose(a)).values) == 0
    np.testing.assert_allclose((a + 0.5 * (k + k.T)).values, k.values, atol=1e-14)


# -- δ′ kernel ----------------------------------------------------------------------

def test_delta_derivative_linear_exact():
    g = make_grid(-1, 1, 41)
    f = TimeSeries(g, g.times)
    out = delta_derivative_kernel(g).apply(f).values
    np.testing.assert_allclose(out[3:-3], 1.0, rtol=1e-12)


def test_delta_derivative_central_stencil():
    g = make_grid(0, 1, 21)
    m = delta_derivative_kernel(g).values
    dt = g.dt
    i = 10
    assert m[i, i + 1] == pytest.approx(0.5 / dt ** 2)
    assert m[i, i - 1] == pytest.approx(-0.5 / dt ** 2)
    assert m[i, i] == 0


def test_delta_derivative_sine():
    w0 = 5.0
    g = make_grid(0, 10, int(round(10 / (0.1 / w0))) + 1)
    assert w0 * g.dt == pytest.approx(0.1, rel=1e-12)
    f = TimeSeries(g, np.sin(w0 * g.times))
    out = delta_derivative_kernel(g).apply(f).values
    exact = w0 * np.cos(w0 * g.times)
    sl = slice(3, -3)
    assert np.abs(out[sl] - exact[sl]).max() <= 0.01 * w0


# -- spectral bridge ----------------------------------------------------------------

def test_spectral_frequencies_are_dft():
    g = make_grid(0, 1, 16)
    w = spectral_frequencies(g)
    assert w.size == 31
    assert np.all(np.diff(w) > 0)
    np.testing.assert_allclose(np.diff(w), 2 * np.pi / (31 * g.dt), rtol=1e-12)
    assert 0.0 in w


def test_white_spectrum_gives_delta(grid64):
    k = toeplitz_from_spectrum(lambda w: np.full(w.shape, 2.5), grid64)
    assert relative_error(k, 2.5 * delta_kernel(grid64)) < 1e-12


def test_lorentzian_pair():
    lam, var = 2.0, 1.5
    g = make_grid(0, 10, 1001)  # λ dt = 0.02, λT = 20
    spec = lambda w: 2 * lam * var / (lam ** 2 + w ** 2)
    k = toeplitz_from_spectrum(spec, g)
    exact = var * np.exp(-lam * np.abs(g.times[:, None] - g.times[None, :]))
    sl = slice(100, -100)
    assert np.abs(k.values[sl, sl] - exact[sl, sl]).max() <= 0.01 * var


def test_spectrum_round_trip_random_smooth(rng):
    g = make_grid(0, 8, 128)
    w = spectral_frequencies(g)
    c = rng.uniform(0.5, 2.0, 4)
    values = sum(ci / (1 + (w / (j + 1)) ** 2) for j, ci in enumerate(c))
    spec = SpectralDensity(w, values)
    back = kernel_to_spectrum(toeplitz_from_spectrum(spec, g))
    np.testing.assert_array_equal(back.omegas, w)
    inner = slice(w.size // 4, 3 * w.size // 4)
    assert np.abs(back.values[inner] - values[inner]).max() <= 1e-8 * np.abs(values).max()


def test_kernel_to_spectrum_explicit_omegas_matches_dft(rng):
    g = make_grid(0, 4, 32)
    k = toeplitz_from_spectrum(lambda w: 1.0 / (1 + w ** 2), g)
    full = kernel_to_spectrum(k)
    direct = kernel_to_spectrum(k, omegas=full.omegas[10:20])
    np.testing.assert_allclose(direct.values, full.values[10:20], atol=1e-12)


def test_kernel_to_spectrum_rejects_non_toeplitz(rng, grid64):
    k = random_kernel(grid64, rng)
    with pytest.raises(NotToeplitzError):
        kernel_to_spectrum(k)
    assert toeplitz_deviation(delta_kernel(grid64)) == 0


def test_toeplitz_rejects_non_hermitian(grid64):
    with pytest.raises(ValidationError):
        toeplitz_from_spectrum(lambda w: 1j * np.sign(w) + 1j, grid64)


def test_spectral_density_validation():
    with pytest.raises(ValidationError):
        SpectralDensity([0.0, 0.0], [1.0, 1.0])
    s = SpectralDensity([0.0, 1.0, 2.0], [0.0, 1.0, 4.0])
    assert s.at([0.5])[0] == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        s.at([3.0])


def test_enforce_window():
    g = make_grid(-1, 1, 101)
    assert enforce_window(np.exp(-0.5 * (g.times / 0.1) ** 2))
    assert not enforce_window(np.ones(g.n))
    assert enforce_window(np.zeros(g.n))


def test_timeseries_arithmetic(grid64):
    a = TimeSeries.constant(grid64, 2.0)
    b = TimeSeries(grid64, grid64.times)
    np.testing.assert_allclose((a * b - b).values, b.values)
    assert a.integral() == pytest.approx(2.0 * grid64.n * grid64.dt)
    assert (-a).values[0] == -2.0
    assert len(a) == grid64.n


def test_anticausal_fraction():
    from dqlab import anticausal_fraction, damped_oscillator_response, pin_boundary
    g = make_grid(0.0, 10.0, 200)
    assert anticausal_fraction(zero_kernel(g)) == 0.0
    assert anticausal_fraction(TwoTimeKernel(g, np.tril(np.ones((g.n, g.n))))) == 0.0
    assert anticausal_fraction(TwoTimeKernel(g, np.triu(np.ones((g.n, g.n)), 1))) == 1.0
    # the pinned inverse solves a two-point boundary problem, so it is far from causal
    inv = invert(pin_boundary(damped_oscillator_response(1.0, 2.0, 0.5, g)))
    assert anticausal_fraction(inv) > 0.5
