import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rollwave import modsim
from rollwave.errors import NumericalError, RegimeError
from rollwave.whitham1 import WhithamTrajectory

from conftest import MAIN_PARAMS


def _constant_traj(profile, nT=5, nX=16, length=1.25):
    X = np.arange(nX) * length / nX
    T = np.linspace(0.0, 0.01, nT)
    k = np.full((nT, nX), profile.key.k)
    q = np.full((nT, nX), profile.key.qbar)
    return WhithamTrajectory(X, T, k, q, length)


# --- simulator ------------------------------------------------------------


def test_uniform_equilibrium_exact():
    st_ = modsim.uniform_state(6.25, 256)
    tr = modsim.simulate(MAIN_PARAMS, st_, 0.3)
    fin = tr.states[-1]
    assert np.abs(fin.h - 1).max() <= 1e-12 and np.abs(fin.q - 1).max() <= 1e-12


def test_mass_conserved_over_many_steps(main_profile):
    h0, q0 = modsim.profile_cell_averages(main_profile, 256)
    s0 = modsim.SimState(1 / main_profile.key.k, h0, q0)
    tr = modsim.simulate(MAIN_PARAMS, s0, 0.3, fixed_dt=3e-4, record_mass=True)
    assert tr.steps == 1000
    m0 = s0.mass()
    assert max(abs(m - m0) for m in tr.masses) <= 1e-12 * m0


def test_output_times_and_csv(main_profile):
    h0, q0 = modsim.profile_cell_averages(main_profile, 64)
    s0 = modsim.SimState(1 / main_profile.key.k, h0, q0)
    tr = modsim.simulate(MAIN_PARAMS, s0, 0.1, output_times=[0.0, 0.05])
    assert tr.times == pytest.approx([0.0, 0.05, 0.1])
    rows = list(tr.to_csv_rows(stride=16))
    assert len(rows) == 3 * 4 and len(rows[0]) == 4


def test_traveling_wave_transport(main_profile):
    rep = modsim.traveling_wave_convergence(main_profile, (128, 256, 512), t_end=0.05)
    assert min(rep.factors) > 3.0


def test_positivity_rejected():
    with pytest.raises(RegimeError, match="positivity"):
        modsim.simulate(MAIN_PARAMS, modsim.SimState(1.0, -np.ones(16), np.ones(16)), 0.1)


def test_step_budget():
    with pytest.raises(NumericalError, match="step budget"):
        modsim.simulate(MAIN_PARAMS, modsim.uniform_state(1.0, 64), 1.0, max_steps=3)


@settings(max_examples=20, deadline=None)
@given(st.integers(16, 64), st.floats(0.0, 1.0))
def test_cell_averages_preserve_mean(n_x, t):
    from rollwave.profile import solve_profile
    from conftest import MAIN_KEY
    prof = _cached(solve_profile, MAIN_PARAMS, MAIN_KEY)
    h, q = modsim.profile_cell_averages(prof, n_x, t=t)
    assert np.mean(h) == pytest.approx(np.mean(prof.H), abs=1e-13)
    assert np.mean(q) == pytest.approx(np.mean(prof.Q), abs=1e-13)


_CACHE = {}


def _cached(fn, *args):
    if args not in _CACHE:
        _CACHE[args] = fn(*args)
    return _CACHE[args]


def test_gauss_cell_averages_exact_for_cubics():
    edges = np.linspace(0.0, 2.0, 9)
    avg = modsim.gauss_cell_averages(lambda x: (x**3, np.ones_like(x)), edges)
    exact = (edges[1:] ** 4 - edges[:-1] ** 4) / 4 / np.diff(edges)
    assert np.allclose(avg[0], exact, rtol=1e-14)


# --- ansatz ---------------------------------------------------------------


def test_constant_modulation_is_the_wave(main_profile):
    fam = modsim.ProfileFamily(main_profile)
    traj = _constant_traj(main_profile)
    for order in (0, 1):
        ans = modsim.build_ansatz(fam, traj, 0.1, order)
        t = float(traj.T[2]) / 0.1
        x = np.linspace(0.0, ans.domain, 200, endpoint=False)
        h, q = ans(x, t)
        y = main_profile.key.k * x + main_profile.omega * t
        from rollwave import core
        co = core.interp_coeffs(np.array([main_profile.H, main_profile.Q]))
        ref = core.interp_eval(co, np.mod(y, 1.0))
        assert np.abs(h - ref[:, 0]).max() < 1e-10
        assert np.abs(q - ref[:, 1]).max() < 1e-10


def test_y_phi_inversion(macro_setup):
    fam, traj = macro_setup
    ans = modsim.build_ansatz(fam, traj, 0.05)
    for t in (0.0, float(traj.T[-1]) / 0.05):
        s = np.linspace(0.0, ans.k_star * ans.domain, 257)
        back = ans.X_phi(ans.Y_phi(s, t), t)
        assert np.abs(back - s).max() <= 1e-12 * max(1.0, np.abs(s).max())
        assert ans.phi_slope(t) < modsim.PHASE_SLOPE_MAX


def test_grid_time_required(macro_setup):
    fam, traj = macro_setup
    ans = modsim.build_ansatz(fam, traj, 0.1)
    with pytest.raises(ValueError, match="macro trajectory grid"):
        ans(np.zeros(3), 0.123456)


def test_large_modulation_rejected(main_profile):
    fam = modsim.ProfileFamily(main_profile)
    traj = _constant_traj(main_profile)
    k = traj.k.copy()
    k[:, :8] *= 2.2
    with pytest.raises(RegimeError):
        modsim.build_ansatz(fam, WhithamTrajectory(traj.X, traj.T, k, traj.qbar, traj.length), 0.1)


def test_residual_orders(macro_setup):
    fam, traj = macro_setup
    r0 = modsim.residual_scaling(fam, traj, (0.1, 0.05, 0.025), order=0)
    r1 = modsim.residual_scaling(fam, traj, (0.1, 0.05, 0.025), order=1)
    assert r0.slope >= 0.9
    assert r1.slope >= 1.8
    assert r1.solvability < 1e-12
    assert r1.residual[-1] < r0.residual[-1]


def test_residual_floor_for_constant_modulation(main_profile):
    fam = modsim.ProfileFamily(main_profile)
    rep = modsim.residual_scaling(fam, _constant_traj(main_profile), (0.1,), order=1)
    assert rep.residual[0] < 1e-9


def test_planned_cells(macro_setup):
    fam, traj = macro_setup
    assert modsim.planned_cells(traj, 0.1, 64) == (2, 128)
    with pytest.raises(RegimeError, match="integer number of waves"):
        modsim.planned_cells(traj, 0.07, 64)
    with pytest.raises(RegimeError, match="reduce 1/eps or resolution"):
        modsim.validate(fam, traj, 0.025, 0.01, n_per_period=128, max_cells=512)


def test_short_validation_beats_naive(macro_setup):
    fam, traj = macro_setup
    run = modsim.validate(fam, traj, 0.1, 0.005, n_per_period=128)
    assert run.sup_error < 0.05 * run.naive_sup_error
    assert run.errors[0] < 1e-3
