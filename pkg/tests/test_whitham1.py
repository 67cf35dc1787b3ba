import numpy as np
import pytest

from rollwave import whitham1 as w1
from rollwave.errors import NumericalError


def test_main_point_hyperbolic(main_profile):
    W = w1.assemble(main_profile)
    assert W.hyperbolic
    s = W.speeds()
    assert np.all(np.isreal(s)) and s[0] != s[1]
    sp, V = W.eigenvectors()
    for j in range(2):
        lhs = W.A1 @ V[:, j]
        rhs = sp[j] * (W.A0 @ V[:, j])
        assert np.allclose(lhs, rhs, atol=1e-10)


def test_dispersion_matches_quasilinear_speeds(main_profile):
    W = w1.assemble(main_profile)
    D = w1.dispersion_cq(main_profile)
    assert D.hyperbolic
    assert np.allclose(np.sort(D.comoving_speeds().real), np.sort(W.comoving_speeds().real),
                       rtol=1e-6, atol=1e-9)
    for r in D.roots:
        assert abs(D(r, 1.0)) < 1e-10


def test_linear_wave_speed(main_profile):
    """Small-amplitude eigen-modulation travels at its characteristic speed."""
    W = w1.assemble(main_profile)
    sp, V = W.eigenvectors()
    model = w1.FluxModel(main_profile, 1e-3, 1e-3)
    X = np.arange(64) / 64
    a = 1e-6
    for j in range(2):
        k0 = 0.16 + a * V[0, j] * np.sin(2 * np.pi * X)
        q0 = 1.0 + a * V[1, j] * np.sin(2 * np.pi * X)
        T = 0.2
        tr = w1.solve_whitham(model, k0, q0, T)
        ratio = np.fft.fft(tr.k[-1] - 0.16)[1] / np.fft.fft(k0 - 0.16)[1]
        shift = -np.angle(ratio) / (2 * np.pi)
        assert shift / T == pytest.approx(sp[j].real, rel=1e-3)
        # the wavenumber is conserved
        assert abs(np.mean(tr.k[-1]) - np.mean(k0)) < 1e-12


def test_flux_model_reproduces_center(main_profile):
    model = w1.FluxModel(main_profile, 1e-3, 1e-3)
    fl = model.fluxes(np.array([0.16]), np.array([1.0]))
    c, M = fl["c"], fl["M"]
    assert c[0] == pytest.approx(main_profile.c, abs=1e-9)
    assert M[0] == pytest.approx(np.mean(main_profile.H), abs=1e-9)


def test_box_exit_detected(main_profile):
    model = w1.FluxModel(main_profile, 1e-3, 1e-3)
    X = np.arange(16) / 16
    with pytest.raises(NumericalError, match="flux-model box"):
        w1.solve_whitham(model, 0.16 + 0.05 * np.sin(2 * np.pi * X), np.ones(16), 0.01)
