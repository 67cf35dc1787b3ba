"""Acceptance criteria, one test and one printed PASS/FAIL line each.

Tolerances are fixed targets; nothing here is tuned to the results.
"""
import numpy as np
import pytest

from rollwave import bloch as bl
from rollwave import core, modsim
from rollwave import dressler as dr
from rollwave import evans as ev
from rollwave import profile as pf
from rollwave import whitham1 as w1
from rollwave import whitham2 as w2
from rollwave.core import PhysicalParams, WaveKey

from conftest import MAIN_PARAMS

SMALL_DELTAS = (1e-2, 1e-3, 1e-4)
# fixed wave for the small-viscosity limit: same point as the Evans check
LIMIT_F, LIMIT_K, LIMIT_Q = 3.0, 0.6, 1.0


@pytest.fixture
def report(capsys):
    def emit(number: int, checks: list):
        """``checks`` is a list of ``(label, value, ok)``."""
        ok = all(c[2] for c in checks)
        detail = "; ".join(f"{lab}={val}" for lab, val, _ in checks)
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        failed = [lab for lab, _, good in checks if not good]
        assert ok, f"criterion {number} failed: {', '.join(failed)}"
    return emit


def _fmt(x) -> str:
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    return f"{x:.4g}"


@pytest.fixture(scope="module")
def small_delta_profiles():
    return pf.continue_in_delta(PhysicalParams(LIMIT_F, SMALL_DELTAS[0]),
                                WaveKey(LIMIT_K, LIMIT_Q), SMALL_DELTAS)


def test_criterion_1_dressler_closed_forms(report):
    c = dr.dressler_speed(4.0, 1.0)
    hm = dr.hmin_threshold(2.0)
    hminus = dr.rh_conjugate(0.5)
    mismatch = max(abs(w.M - w.mean_by_x_quadrature())
                   for w in (dr.dressler_wave(4.0, 1.0, 0.6), dr.dressler_wave(3.0, 1.0, 0.65),
                             dr.dressler_wave(8.0, 2.0, 0.35)))
    report(1, [("c*(4,1)", _fmt(c), abs(c - 1.984251) <= 1e-6),
               ("h_m(2)", repr(float(hm)), abs(hm - 1.0) <= 1e-12),
               ("h_minus(0.5)", _fmt(hminus), abs(hminus - 1.765564) <= 1e-6),
               ("M mismatch", _fmt(mismatch), mismatch <= 1e-7)])


def test_criterion_2_inviscid_limit(report, small_delta_profiles):
    cs = dr.wave_for_wavenumber(LIMIT_F, LIMIT_Q, LIMIT_K).c_star
    gaps = [abs(p.c - cs) for p in small_delta_profiles]
    report(2, [("|c_delta - c*|", _fmt(gaps), bool(np.all(np.diff(gaps) < 0))),
               ("final/c*", _fmt(gaps[-1] / cs), gaps[-1] < 0.05 * cs)])


def test_criterion_3_operator_identities(report, main_profile):
    la = pf.linear_algebra(main_profile)
    norm = float(np.mean(la.H_adj * core.diff(main_profile.H)))
    rng = np.random.default_rng(2024)
    lk, idem = 0.0, 0.0
    for _ in range(20):
        f = rng.standard_normal(main_profile.n)
        Pi = la.Pi(f)
        lk = max(lk, np.abs(la.L @ la.K(f) - Pi).max() / np.linalg.norm(f))
        idem = max(idem, np.abs(la.Pi(Pi) - Pi).max())
    report(3, [("<H~;H'>-1", _fmt(norm - 1), abs(norm - 1) <= 1e-10),
               ("|LKf-Pi f|/|f|", _fmt(lk), lk <= 1e-9),
               ("|Pi^2-Pi|", _fmt(idem), idem <= 1e-10)])


def test_criterion_4_evans_whitham(report, evans_profile):
    ctx = ev.EvansContext(evans_profile)
    rep = ev.evans_expansion(ctx, r=1e-4, radii=(1e-2, 1e-3, 1e-4))
    m0 = ctx.monodromy(0.0)
    scale = np.linalg.norm(m0.Psi)
    e1, erho = abs(m0.evans(1.0)), abs(m0.evans(ctx.rho))
    D = rep.D
    data = ev.appendix_data(ctx)
    pts = [(1e-3, 2e-3j), (2e-3j, 1e-3), (1e-3 + 1e-3j, -1e-3), (1e-2, 5e-3j)]
    ratio = np.array([ev.appendix_det3(data, a, b) / D(a, b) for a, b in pts])
    prop = float(np.abs(ratio / ratio[0] - 1).max())
    report(4, [("Gamma spread", _fmt(rep.spread), rep.spread < 1e-3),
               ("|E-Gamma D| slope", _fmt(rep.slope), rep.slope >= 2.7),
               ("E(0,1)/scale", _fmt(e1 / scale), e1 <= 1e-7 * scale),
               ("E(0,rho)/scale", _fmt(erho / scale), erho <= 1e-7 * scale),
               ("det3/D variation", _fmt(prop), prop <= 1e-3)])


def test_criterion_5_bloch_structure(report, main_profile):
    j = bl.jordan_structure(main_profile)
    left = bl.kernel_residuals(main_profile)["left"]
    report(5, [("sv ratio", _fmt(j.sv_ratio), j.sv_ratio > 1e6),
               ("Jordan height", str(j.height), j.height == 2),
               ("left kernel residual", _fmt(left), left < 1e-8)])


def test_criterion_6_spectral_expansion(report, main_profile):
    l = np.geomspace(1e-3, 1e-1, 11)
    roots = w1.dispersion_cq(main_profile).roots / main_profile.key.k
    cur = bl.critical_curves(main_profile, l, order=roots)
    first = bl.first_order_ratios(cur, main_profile.key.k)[0]
    rel = float(np.abs((first - roots) / roots).max())
    so = w2.second_order_eigen(main_profile)
    dist = np.abs(cur.lam - so.mu(l))
    slopes = [bl.fitted_slope(l, dist[:, i]) for i in range(2)]
    vec = bl.eigenvector_expansion_check(main_profile, cur)
    report(6, [("first-order rel err at l=1e-3", _fmt(rel), rel <= 0.01),
               ("|lam-mu| slopes", _fmt(slopes), min(slopes) >= 2.7),
               ("v1 exponent", _fmt(vec.slope1), vec.slope1 >= 1.8),
               ("v2 exponent", _fmt(vec.slope2), vec.slope2 >= 0.9)])


def test_criterion_7_simulator(report, main_profile):
    u = modsim.simulate(MAIN_PARAMS, modsim.uniform_state(6.25, 256), 0.3).states[-1]
    eq = max(np.abs(u.h - 1).max(), np.abs(u.q - 1).max())
    h0, q0 = modsim.profile_cell_averages(main_profile, 256)
    s0 = modsim.SimState(1 / main_profile.key.k, h0, q0)
    tr = modsim.simulate(MAIN_PARAMS, s0, 0.3, fixed_dt=3e-4, record_mass=True)
    m0 = s0.mass()
    drift = max(abs(m - m0) for m in tr.masses) / m0
    conv = modsim.traveling_wave_convergence(main_profile, (256, 512, 1024), t_end=0.1)
    report(7, [("equilibrium drift", _fmt(eq), eq <= 1e-12),
               (f"mass drift over {tr.steps} steps", _fmt(drift),
                drift <= 1e-12 and tr.steps >= 1000),
               ("transport factors", _fmt(conv.factors), min(conv.factors) >= 3.5)])


def test_criterion_8_modulation_validation(report, macro_setup):
    fam, traj = macro_setup
    eps = (0.1, 0.05, 0.025)
    r0 = modsim.residual_scaling(fam, traj, eps, order=0)
    r1 = modsim.residual_scaling(fam, traj, eps, order=1)
    sweep = modsim.validate_sweep(fam, traj, eps, T0=0.01, n_per_period=512, compare_every=4)
    report(8, [("order-0 residual slope", _fmt(r0.slope), r0.slope >= 0.9),
               ("order-1 residual slope", _fmt(r1.slope), r1.slope >= 1.8),
               ("sup errors", _fmt(sweep.sup_err), True),
               ("sup-error slope", _fmt(sweep.slope), sweep.slope >= 0.9)])


def test_criterion_9_small_delta_hyperbolicity(report, small_delta_profiles):
    systems = [w1.assemble(p) for p in small_delta_profiles]
    small = [float(np.abs(W.comoving_speeds()).min()) for W in systems]
    report(9, [("smallest co-moving |speed|", _fmt(small), bool(np.all(np.diff(small) < 0))),
               ("hyperbolic at delta=1e-4", _fmt(systems[-1].hyperbolic),
                bool(systems[-1].hyperbolic))])
