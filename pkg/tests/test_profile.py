import numpy as np
import pytest

from rollwave import core
from rollwave import profile as pf
from rollwave.core import PhysicalParams, WaveKey
from rollwave.errors import RegimeError


def test_converged_profile(main_profile):
    p = main_profile
    assert p.residual < 1e-10
    r = pf.profile_residual(p.H, p.c, p.key.k, p.key.qbar, p.params.F, p.params.delta)
    assert np.abs(r).max() < 1e-9
    assert p.c == pytest.approx(1.9062329, abs=1e-6)
    assert np.all(p.H > 0) and p.amplitude > 0.01
    assert np.allclose(p.Q, p.c * p.H - p.key.qbar)


def test_json_roundtrip(main_profile):
    back = pf.RollWaveProfile.from_json(main_profile.to_json())
    assert back.c == main_profile.c
    assert np.array_equal(back.H, main_profile.H)


def test_refinement_is_consistent(main_profile):
    fine = pf.solve_profile(main_profile.params, main_profile.key, main_profile, 256)
    assert fine.c == pytest.approx(main_profile.c, abs=1e-9)


def test_inviscid_rejected():
    with pytest.raises(RegimeError):
        pf.newton_profile(PhysicalParams(3.0, 0.0), WaveKey(0.5, 1.0), np.ones(64), 2.0)


def test_operator_identities(main_profile, rng):
    la = pf.linear_algebra(main_profile)
    dH = core.diff(main_profile.H)
    assert abs(np.mean(la.H_adj * dH) - 1.0) < 1e-10
    for _ in range(20):
        f = rng.standard_normal(main_profile.n)
        Pi = la.Pi(f)
        assert np.abs(la.L @ la.K(f) - Pi).max() < 1e-9 * np.linalg.norm(f)
        assert np.abs(la.Pi(Pi) - Pi).max() < 1e-10 * max(1.0, np.abs(Pi).max())
        assert abs(la.p(Pi)) < 1e-10 * np.linalg.norm(f)
    # L annihilates H'
    assert np.abs(la.L @ dH).max() < 1e-8 * np.abs(dH).max()


def test_parameter_derivatives(main_profile):
    assert pf.check_derivatives(main_profile) < 1e-4
    av = pf.averaged(main_profile)
    assert av.evolution_ok
    assert av.omega == pytest.approx(main_profile.omega)
    assert av.M == pytest.approx(np.mean(main_profile.H))


def test_continuation_in_delta_small_step():
    key = WaveKey(0.6, 1.0)
    profs = pf.continue_in_delta(PhysicalParams(3.0, 0.01), key, [0.01, 0.004])
    assert [p.params.delta for p in profs] == [0.01, 0.004]
    assert all(p.residual < 1e-9 for p in profs)
