import numpy as np
import pytest

from rollwave import bloch as bl
from rollwave import whitham1 as w1


@pytest.fixture(scope="module")
def curve(main_profile):
    ref = w1.dispersion_cq(main_profile).roots / main_profile.key.k
    return bl.critical_curves(main_profile, np.geomspace(1e-3, 1e-1, 11), order=ref), ref


def test_kernels_at_zero(main_profile):
    r = bl.kernel_residuals(main_profile)
    assert r["left"] < 1e-8
    assert r["right"] < 1e-8 * r["scale"]


def test_jordan_chain(main_profile):
    j = bl.jordan_structure(main_profile)
    assert j.height == 2
    assert j.sv_ratio > 1e6


def test_reversal_symmetry(main_profile):
    assert bl.reversal_error(main_profile, 0.03) < 1e-10


def test_floquet_range(main_profile):
    with pytest.raises(ValueError):
        bl.bloch_matrix(main_profile, 4.0)
    with pytest.raises(ValueError):
        bl.critical_curves(main_profile, [0.0, 0.1])


def test_first_order_ratios(curve, main_profile):
    cur, ref = curve
    r = bl.first_order_ratios(cur, main_profile.key.k)[0]
    assert np.all(np.abs(r - ref) < 0.01 * np.abs(ref))
    assert cur.biorth_error < 1e-8


def test_eigenvector_expansion(curve, main_profile):
    rep = bl.eigenvector_expansion_check(main_profile, curve[0])
    assert rep.slope1 >= 1.8
    assert rep.slope2 >= 0.9


def test_fitted_slope():
    x = np.geomspace(1e-3, 1e-1, 5)
    assert bl.fitted_slope(x, 3 * x**2) == pytest.approx(2.0)
