"""Inviscid (delta = 0) roll-waves in closed form.

Heights are handled in the scaled variable ``h = H / H_c`` with
``H_c = (qbar F)^(2/3)``.  A wave consists of a smooth branch on which ``h``
increases from ``h_plus`` to ``h_minus`` followed by a Lax shock back to
``h_plus``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import RegimeError

QUAD_RTOL = 1e-10


def _check_F(F: float) -> None:
    if not np.isfinite(F) or F <= 2.0:
        raise RegimeError(f"outside Dressler regime: F={F}")


def dressler_speed(F: float, qbar: float) -> float:
    """Wave speed ``qbar^(1/3) (F^(1/3) + F^(-2/3))``."""
    _check_F(F)
    if qbar < 0:
        raise RegimeError("qbar must be non-negative for Dressler waves")
    return np.cbrt(qbar) * (np.cbrt(F) + F ** (-2.0 / 3.0))


def hmin_threshold(F: float) -> float:
    """Smallest admissible scaled minimum height ``h_m(F)``."""
    if F <= 0:
        raise ValueError("F must be positive")
    return 1.0 / F + (1.0 + np.sqrt(1.0 + 4.0 * F)) / (2.0 * F * F)


def rh_conjugate(h_plus: float) -> float:
    """Post-shock height paired with ``h_plus`` by the jump condition.

    Positive root of ``h_plus h^2 + h_plus^2 h - 2 = 0``.
    """
    if h_plus <= 0:
        raise ValueError("h_plus must be positive")
    return (-h_plus**2 + np.sqrt(h_plus**4 + 8.0 * h_plus)) / (2.0 * h_plus)


def _denominator(h, F):
    return h * h - (F**-2 + 2.0 / F) * h + F**-2


def _integrand(h, F):
    return (h * h + h + 1.0) / _denominator(h, F)


def _quad(fun, a, b, hm):
    """Integrate over ``[a, b]`` in the variable ``s = log(h - h_m)``.

    The integrand has a simple pole at ``h_m``; the substitution keeps it
    smooth when ``a`` approaches the threshold.
    """
    def g(s):
        e = np.exp(s)
        return fun(hm + e) * e
    val, _ = integrate.quad(g, np.log(a - hm), np.log(b - hm), epsabs=0.0,
                            epsrel=QUAD_RTOL, limit=200)
    return val


@dataclass(frozen=True)
class DresslerWave:
    F: float
    qbar: float
    h_plus: float
    h_minus: float
    H_c: float
    c_star: float
    k: float
    M: float

    @property
    def period(self) -> float:
        return 1.0 / self.k

    def profile(self, x_pts: int = 2001, rtol: float = 1e-12):
        """Smooth branch sampled in ``x``: returns ``(x, H)`` on ``[0, L]``.

        Integrates ``dh/dx = F^2 / (H_c P'(h))`` from ``h_plus`` until the
        branch reaches ``h_minus``.
        """
        sol = self._branch(rtol)
        x = np.linspace(0.0, sol.t[-1], x_pts)
        return x, self.H_c * sol.sol(x)[0]

    def _branch(self, rtol):
        F, Hc, hmi = self.F, self.H_c, self.h_minus

        def rhs(x, z):
            return [F * F / (Hc * _integrand(z[0], F)), z[0]]

        def reach(x, z):
            return z[0] - hmi
        reach.terminal = True
        reach.direction = 1
        # the branch hits h_minus at x = L exactly; overshoot the horizon slightly
        return integrate.solve_ivp(rhs, (0.0, 1.5 * self.period), [self.h_plus, 0.0],
                                   method="DOP853", rtol=rtol, atol=1e-14,
                                   events=reach, dense_output=True)

    def mean_by_x_quadrature(self, rtol: float = 1e-12) -> float:
        """Mean height recomputed by integrating the profile in ``x``."""
        sol = self._branch(rtol)
        L = sol.t_events[0][0]
        area = sol.y_events[0][0][1]
        return self.H_c * area / L

    def sample(self, y) -> np.ndarray:
        """Height at phases ``y`` in ``[0, 1)`` (smooth branch, shock at ``y = 1``)."""
        sol = self._branch(1e-12)
        L = sol.t_events[0][0]
        y = np.mod(np.asarray(y, dtype=float), 1.0)
        return self.H_c * sol.sol(y * L)[0]


def dressler_wave(F: float, qbar: float, h_plus: float) -> DresslerWave:
    """Wave with scaled minimum height ``h_plus``; ``k`` and ``M`` by quadrature."""
    _check_F(F)
    if qbar <= 0:
        raise RegimeError("qbar must be positive for a nondegenerate wave")
    hm = hmin_threshold(F)
    if h_plus <= hm:
        raise RegimeError(f"below minimum height: h_plus={h_plus} <= h_m={hm}")
    if h_plus >= 1.0:
        raise RegimeError("h_plus >= 1 gives a zero-amplitude wave")
    h_minus = rh_conjugate(h_plus)
    # the larger root of the denominator is h_m, so it stays positive above it
    if _denominator(h_plus, F) <= 0 or _denominator(h_minus, F) <= 0:
        raise RegimeError("quadrature through critical point")
    Hc = (qbar * F) ** (2.0 / 3.0)
    P = _quad(lambda h: _integrand(h, F), h_plus, h_minus, hm)
    Qh = _quad(lambda h: h * _integrand(h, F), h_plus, h_minus, hm)
    k = F * F / (Hc * P)
    return DresslerWave(F=F, qbar=qbar, h_plus=h_plus, h_minus=h_minus, H_c=Hc,
                        c_star=dressler_speed(F, qbar), k=k, M=Hc * Qh / P)


def wave_for_wavenumber(F: float, qbar: float, k: float) -> DresslerWave:
    """Invert ``k(h_plus)`` (monotone increasing) by bracketing."""
    _check_F(F)
    lo = hmin_threshold(F) * (1.0 + 1e-6)
    hi = 1.0 - 1e-6
    g = lambda h: dressler_wave(F, qbar, h).k - k
    if g(lo) > 0 or g(hi) < 0:
        raise RegimeError(f"no Dressler wave with k={k} at F={F}, qbar={qbar}")
    h_plus = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-13)
    return dressler_wave(F, qbar, h_plus)
