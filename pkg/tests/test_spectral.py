import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsl.spectral import (
    CovarianceSpectrum,
    Grid,
    basis_matrix,
    build_spectrum,
    evaluate_on_grid,
    project_to_modes,
    sample_gaussian,
)


class ZeroRng:
    """Stands in for a generator whose normals are all zero."""

    def standard_normal(self, shape):
        return np.zeros(shape)


def test_flat_spectrum_is_constant():
    np.testing.assert_array_equal(build_spectrum("flat", 3, 1.0).eigenvalues, [1.0, 1.0, 1.0])


def test_polynomial_spectrum_is_inverse_square():
    np.testing.assert_allclose(build_spectrum("polynomial", 3, 2.0).eigenvalues, [1.0, 0.25, 1 / 9], rtol=1e-15)


def test_exponential_spectrum_halves_each_mode():
    np.testing.assert_allclose(build_spectrum("exponential", 3, np.log(2)).eigenvalues, [0.5, 0.25, 0.125], rtol=1e-15)


@pytest.mark.parametrize(
    "kind, D, param",
    [("polynomial", 3, 1.0), ("polynomial", 0, 2.0), ("exponential", 3, 0.0), ("flat", 2, -1.0), ("cubic", 3, 1.0), ("flat", 2.5, 1.0)],
)
def test_invalid_spectra_are_rejected(kind, D, param):
    with pytest.raises(ValueError):
        build_spectrum(kind, D, param)


def test_spectrum_rejects_nonpositive_eigenvalues():
    with pytest.raises(ValueError):
        CovarianceSpectrum(np.array([1.0, 0.0]))


def test_spectrum_is_immutable():
    s = build_spectrum("flat", 2, 1.0)
    with pytest.raises(ValueError):
        s.eigenvalues[0] = 5.0
    assert s.trace == 2.0 and s.D == len(s) == 2


def test_zero_noise_draw_returns_the_mean():
    m = np.array([0.3, -1.0, 2.0])
    np.testing.assert_array_equal(sample_gaussian(build_spectrum("polynomial", 3, 2.0), m, ZeroRng()), m)


@pytest.mark.parametrize("kind, mode, var", [("flat", None, 1.0), ("polynomial", 1, 0.25)])
def test_draw_variance_matches_eigenvalue(kind, mode, var):
    spec = build_spectrum(kind, 4, 1.0 if kind == "flat" else 2.0)
    n = 100_000
    x = sample_gaussian(spec, np.zeros(4), np.random.default_rng(1), size=n)
    cols = range(4) if mode is None else [mode]
    for j in cols:
        v = spec.eigenvalues[j]
        # standard error of a sample variance of Gaussian data
        assert abs(x[:, j].var(ddof=1) - v) < 3 * v * np.sqrt(2 / (n - 1))


def test_draw_checks_mean_length():
    with pytest.raises(ValueError):
        sample_gaussian(build_spectrum("flat", 3, 1.0), np.zeros(2), np.random.default_rng(0))


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(np.array([0.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        Grid(np.array([0.0]))
    with pytest.raises(ValueError):
        Grid(np.array([0.0, 2.0]), s_min=0.5, s_max=3.0)
    g = Grid.uniform(-1, 1, 5)
    assert g.is_uniform and g.N == 5 and g.length == 2.0
    assert not Grid(np.array([0.0, 0.3, 1.0])).is_uniform
    np.testing.assert_allclose(g.trapezoid_weights().sum(), 2.0)


def test_zero_coefficients_evaluate_to_zero():
    np.testing.assert_array_equal(evaluate_on_grid(np.zeros(4), Grid.uniform(0, 1, 7)), np.zeros(7))


def test_first_mode_evaluates_to_scaled_cosine():
    g = Grid.uniform(0.0, 2.0, 9)
    vals = evaluate_on_grid(np.array([1.0, 0.0, 0.0]), g)
    np.testing.assert_allclose(vals, np.sqrt(2 / 2.0) * np.cos(np.pi * g.points / 2.0), atol=1e-15)


def test_basis_is_orthonormal_under_trapezoid_rule():
    g = Grid.uniform(0.0, 3.0, 41)
    B = basis_matrix(g, 8)
    gram = B.T @ (g.trapezoid_weights()[:, None] * B)
    np.testing.assert_allclose(gram, np.eye(8), atol=1e-12)


def test_projection_of_zeros_is_zero():
    np.testing.assert_array_equal(project_to_modes(np.zeros(10), Grid.uniform(0, 1, 10), 3), np.zeros(3))


def test_superposition_of_first_two_modes():
    g = Grid.uniform(-1.0, 2.0, 16)
    B = basis_matrix(g, 2)
    np.testing.assert_allclose(project_to_modes(B[:, 0] + B[:, 1], g, 2), [1.0, 1.0], atol=1e-8)


def test_projection_needs_enough_points():
    with pytest.raises(ValueError):
        project_to_modes(np.zeros(3), Grid.uniform(0, 1, 3), 4)
    with pytest.raises(ValueError):
        project_to_modes(np.zeros(4), Grid.uniform(0, 1, 5), 2)


@settings(max_examples=50, deadline=None)
@given(
    D=st.integers(1, 8),
    extra=st.integers(0, 10),
    uniform=st.booleans(),
    seed=st.integers(0, 2**32 - 1),
)
def test_round_trip_recovers_coefficients(D, extra, uniform, seed):
    rng = np.random.default_rng(seed)
    N = 2 * D + extra
    if uniform:
        g = Grid.uniform(0.0, 1.0, N)
    else:
        pts = np.sort(rng.uniform(0.0, 1.0, N))
        while np.min(np.diff(pts)) < 1e-3:
            pts = np.sort(rng.uniform(0.0, 1.0, N))
        g = Grid(pts, 0.0, 1.0)
    v = rng.standard_normal(D)
    np.testing.assert_allclose(project_to_modes(evaluate_on_grid(v, g), g, D), v, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_evaluation_is_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    g = Grid.uniform(0, 1, 12)
    u, w = rng.standard_normal((2, 5))
    np.testing.assert_allclose(
        evaluate_on_grid(a * u + b * w, g), a * evaluate_on_grid(u, g) + b * evaluate_on_grid(w, g), atol=1e-10
    )
