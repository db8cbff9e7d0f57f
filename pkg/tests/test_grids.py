import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kghydro import (
    complex_field,
    divergence,
    grad_arr,
    gradient,
    grid_create,
    laplacian,
    real_field,
    volume_integral,
)


def test_wavenumbers_8_points_on_2pi():
    g = grid_create(1, 8, 2 * np.pi)
    assert g.spacing[0] == pytest.approx(np.pi / 4)
    assert np.allclose(g.wavenumbers[0], [0, 1, 2, 3, -4, -3, -2, -1])


def test_spacing_16_points_unit_box():
    g = grid_create(1, 16, 1.0)
    assert g.spacing[0] == 0.0625


def test_2d_tensor_product():
    g = grid_create(2, (8, 8), (2 * np.pi, 2 * np.pi))
    assert g.npoints == 64
    for axis in range(2):
        assert np.allclose(g.wavenumbers[axis], [0, 1, 2, 3, -4, -3, -2, -1])


def test_grid_rejects_bad_arguments():
    with pytest.raises(ValueError):
        grid_create(3, 8, 1.0)
    with pytest.raises(ValueError):
        grid_create(1, 4, 1.0)
    with pytest.raises(ValueError):
        grid_create(1, 8, -1.0)
    with pytest.raises(ValueError):
        grid_create(2, (8,), (1.0, 1.0))


def test_gradient_of_sine():
    g = grid_create(1, 64, 2 * np.pi)
    x = g.axes[0]
    (df,) = gradient(real_field(g, np.sin(x)))
    assert np.max(np.abs(df.values - np.cos(x))) < 1e-12


def test_gradient_of_constant_is_zero():
    g = grid_create(1, 32, 5.0)
    (df,) = gradient(real_field(g, np.full(32, 3.7)))
    assert np.max(np.abs(df.values)) < 1e-14


def test_gradient_complex_exponential():
    g = grid_create(1, 64, 2 * np.pi)
    x = g.axes[0]
    f = complex_field(g, np.exp(3j * x))
    (df,) = gradient(f)
    assert np.max(np.abs(df.values - 3j * np.exp(3j * x))) < 1e-11


def test_laplacian_oracles():
    g = grid_create(1, 64, 2 * np.pi)
    x = g.axes[0]
    lap = laplacian(real_field(g, np.sin(2 * x)))
    assert np.max(np.abs(lap.values + 4 * np.sin(2 * x))) < 1e-11
    lap0 = laplacian(real_field(g, np.ones(64)))
    assert np.max(np.abs(lap0.values)) < 1e-13


def test_laplacian_2d_plane_wave():
    g = grid_create(2, 32, 2 * np.pi)
    x, y = g.meshes()
    f = complex_field(g, np.exp(1j * (x + y)))
    lap = laplacian(f)
    assert np.max(np.abs(lap.values + 2 * f.values)) < 1e-11


def test_volume_integral_oracles():
    g = grid_create(1, 64, 2 * np.pi)
    assert volume_integral(real_field(g, np.ones(64))) == pytest.approx(2 * np.pi, rel=1e-14)
    assert abs(volume_integral(real_field(g, np.sin(g.axes[0])))) < 1e-13


def test_volume_integral_gaussian():
    # exp(-x^2) integrates to sqrt(pi); box [-8, 8) via a shifted grid
    g = grid_create(1, 256, 16.0)
    x = g.axes[0] - 8.0
    val = volume_integral(real_field(g, np.exp(-(x**2))))
    assert val == pytest.approx(np.sqrt(np.pi), abs=1e-12)


def test_laplacian_equals_div_grad():
    rng = np.random.default_rng(7)
    g = grid_create(2, 16, (3.0, 5.0))
    # band-limited random field
    spec = np.zeros((16, 16), dtype=complex)
    spec[:5, :5] = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    f = complex_field(g, np.fft.ifftn(spec))
    lhs = laplacian(f).values
    rhs = divergence(gradient(f)).values
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, np.max(np.abs(lhs)))


def test_parseval():
    rng = np.random.default_rng(3)
    g = grid_create(1, 128, 7.5)
    f = rng.standard_normal(128)
    space = volume_integral(real_field(g, f**2))
    fhat = np.fft.fft(f)
    spectral = np.sum(np.abs(fhat) ** 2) * g.lengths[0] / 128**2
    assert space == pytest.approx(spectral, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-5, 5, allow_nan=False),
    b=st.floats(-5, 5, allow_nan=False),
    seed=st.integers(0, 2**31 - 1),
)
def test_spectral_operators_are_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    g = grid_create(1, 32, 4.0)
    f1 = rng.standard_normal(32)
    f2 = rng.standard_normal(32)
    combo = grad_arr(g, a * f1 + b * f2)[0]
    parts = a * grad_arr(g, f1)[0] + b * grad_arr(g, f2)[0]
    scale = max(1.0, np.max(np.abs(combo)))
    assert np.max(np.abs(combo - parts)) < 1e-11 * scale


def test_field_shape_mismatch_rejected():
    g = grid_create(1, 16, 1.0)
    with pytest.raises(ValueError):
        real_field(g, np.zeros(8))
    with pytest.raises(ValueError):
        real_field(g, np.full(16, np.nan))
