import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rollwave import core
from rollwave.errors import NumericalError, RegimeError


def test_params_validation():
    with pytest.raises(RegimeError, match="must exceed 2"):
        core.PhysicalParams(1.5, 0.01)
    with pytest.raises(RegimeError):
        core.PhysicalParams(3.0, -1.0)
    with pytest.raises(RegimeError):
        core.WaveKey(0.0, 1.0)


def test_grid_size_rule():
    with pytest.raises(ValueError):
        core.diff_matrix(24, 1)
    with pytest.raises(ValueError):
        core.diff_matrix(8, 1)


def test_diff_constant_and_sine():
    n = 64
    y = core.grid(n)
    assert np.abs(core.diff(np.ones(n))).max() == 0.0
    err = np.abs(core.diff(np.sin(2 * np.pi * y)) - 2 * np.pi * np.cos(2 * np.pi * y)).max()
    assert err < 1e-12
    err2 = np.abs(core.diff(np.sin(2 * np.pi * y), 2) + 4 * np.pi**2 * np.sin(2 * np.pi * y)).max()
    assert err2 < 1e-10


def test_diff_rejects_nonfinite():
    f = np.ones(16)
    f[3] = np.nan
    with pytest.raises(NumericalError, match="non-finite field"):
        core.diff(f)


def test_antiderivative_examples():
    n = 32
    y = core.grid(n)
    a = core.antiderivative(np.zeros(n))
    assert a.slope == 0.0 and np.abs(a.periodic).max() == 0.0
    a = core.antiderivative(np.ones(n))
    assert a.slope == pytest.approx(1.0) and np.abs(a.periodic).max() < 1e-15
    assert np.allclose(a.full(), y)
    a = core.antiderivative(np.cos(2 * np.pi * y))
    assert abs(a.slope) < 1e-15
    assert np.abs(a.periodic - np.sin(2 * np.pi * y) / (2 * np.pi)).max() < 1e-14


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6), st.sampled_from([16, 32, 64]))
def test_diff_mean_zero_and_inverse(coefs, n):
    y = core.grid(n)
    f = sum(c * np.cos(2 * np.pi * (j + 1) * y + j) for j, c in enumerate(coefs)) + 0.3
    assert abs(core.mean(core.diff(f))) < 1e-12
    # differentiating the periodic antiderivative recovers f - mean(f)
    a = core.antiderivative(f)
    assert np.abs(core.diff(a.periodic) - (f - core.mean(f))).max() < 1e-11
    assert a.periodic[0] == 0.0


def test_diff_matrix_matches_fft(rng):
    f = rng.standard_normal(32)
    f -= np.fft.ifft(np.where(np.abs(core.wavenumbers(32)) >= 16, np.fft.fft(f), 0)).real
    for order in (1, 2):
        assert np.allclose(core.diff_matrix(32, order) @ f, core.diff(f, order), atol=1e-11)


def test_interp_and_resample(rng):
    n = 32
    y = core.grid(n)
    f = np.cos(2 * np.pi * 3 * y) + 0.5 * np.sin(2 * np.pi * 5 * y)
    yy = rng.uniform(0, 1, 17)
    g = core.interp_eval(core.interp_coeffs(f), yy)[:, 0]
    assert np.abs(g - (np.cos(6 * np.pi * yy) + 0.5 * np.sin(10 * np.pi * yy))).max() < 1e-13
    f2 = core.resample(f, 128)
    assert np.allclose(f2[::4], f, atol=1e-14)


def test_parseval(rng):
    a, b = core.parseval_energy(rng.standard_normal(64))
    assert a == pytest.approx(b, rel=1e-13)
