import numpy as np
import pytest

from rollwave import evans as ev
from rollwave.errors import RegimeError


@pytest.fixture(scope="module")
def ctx(evans_profile):
    return ev.EvansContext(evans_profile)


def test_liouville(ctx):
    for lam in (0.0, 1e-3 + 2e-3j, -0.05j):
        assert ev.liouville_check(ctx, lam) < 1e-8


def test_exact_solutions_solve_the_ode(ctx, evans_profile):
    scale = np.abs(ctx.y1(np.linspace(0, 1 / ctx.k, 64))).max()
    assert ev.ode_residual(ctx, ctx.y1) < 1e-6 * scale
    y3 = lambda x: ev.y3_solution(evans_profile, x)
    assert ev.ode_residual(ctx, y3) < 1e-6 * max(1.0, np.abs(y3(np.linspace(0, 1, 8))).max())


def test_evans_vanishes_on_trivial_multipliers(ctx):
    m0 = ctx.monodromy(0.0)
    scale = np.linalg.norm(m0.Psi)
    assert abs(m0.evans(1.0)) < 1e-7 * scale
    assert abs(m0.evans(ctx.rho)) < 1e-7 * scale
    assert 0 < ctx.rho < 1


def test_polydisc_points_symmetric():
    p = ev.polydisc_points(1e-3, 5, np.random.default_rng(0))
    assert p.shape == (11, 2)
    assert np.allclose(np.sort_complex(p[:, 0]), np.sort_complex(-p[:, 0]))


def test_appendix_determinant_matches_dispersion(ctx):
    from rollwave.whitham1 import dispersion_cq
    D = dispersion_cq(ctx.profile)
    data = ev.appendix_data(ctx)
    pts = [(1e-3, 2e-3j), (2e-3j, 1e-3), (1e-3 + 1e-3j, -1e-3), (1e-2, 5e-3j)]
    r = np.array([ev.appendix_det3(data, a, b) / D(a, b) for a, b in pts])
    assert np.abs(r / r[0] - 1).max() < 1e-3
    for a, b in pts:
        d3, d4 = ev.appendix_det3(data, a, b), ev.appendix_det4(data, a, b)
        assert abs(d4 - d3) < 1e-8 * abs(d3) + 1e-14


def test_inviscid_rejected(main_profile):
    from dataclasses import replace
    from rollwave.core import PhysicalParams
    bad = replace(main_profile, params=PhysicalParams(2.5, 0.0))
    with pytest.raises(RegimeError):
        ev.spectral_matrix(bad, 0.1)
