"""Second-order modulation data and the curvature of the critical Bloch curves.

The first corrector of the modulation expansion is driven by a remainder
``R0`` that is linear in the slow derivatives of ``(k, qbar)``:

    R0 = B_T (d_T k, d_T qbar) + B_X (d_X k, d_X qbar).

Antiderivatives of fields with non-zero mean are not periodic.  Every term
that contains one enters through ``(1/k) dG_q[I(f)]``, whose non-periodic
part is ``mean(f) * y * A^qbar / k``.  Fields are therefore stored as a
periodic part plus the coefficient of ``y * A^qbar``, and every scalar
reduction checks that this coefficient cancels.

For a Whitham mode ``(k0, qbar0)`` with first-order coefficient ``lam0`` the
next coefficient ``lam1`` of ``lam(l) = k (i l) (lam0 + i l lam1 + ...)``
follows from two solvability conditions (one from the phase, one from the
mass average), with ``(k1, qbar1)`` fixed up to the mode direction by a
gauge.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core
from .errors import NumericalError, RegimeError
from .profile import (ParameterDerivatives, RollWaveProfile, averaged, dG_matrices,
                      flux_G, flux_partials, linear_algebra, newton_profile,
                      parameter_derivatives, profile_dQ)
from .core import WaveKey

RAMP_TOL = 1e-8


@dataclass(frozen=True)
class RampField:
    """``periodic + ramp * y * A^qbar``; columns index the direction basis."""

    periodic: np.ndarray
    ramp: np.ndarray

    def __add__(self, other: "RampField") -> "RampField":
        return RampField(self.periodic + other.periodic, self.ramp + other.ramp)

    def __sub__(self, other: "RampField") -> "RampField":
        return RampField(self.periodic - other.periodic, self.ramp - other.ramp)

    def scale(self, a) -> "RampField":
        return RampField(a * self.periodic, a * self.ramp)

    def apply(self, direction) -> "RampField":
        """Evaluate the linear map on a direction ``(k, qbar)``."""
        d = np.asarray(direction)
        return RampField(self.periodic @ d, self.ramp @ d)

    def periodic_part(self, scale: float, what: str) -> np.ndarray:
        if np.any(np.abs(self.ramp) > RAMP_TOL * max(scale, 1.0)):
            raise NumericalError(f"antiderivative convention mismatch in {what}: "
                                 f"ramp {np.abs(self.ramp).max():.2e}")
        return self.periodic


@dataclass(frozen=True)
class SecondOrderData:
    """``B_T``, ``B_X``, ``hat B_X = B_X - c B_T`` and the grouped family ``B^0, B^1, B^2``."""

    profile: RollWaveProfile
    der: ParameterDerivatives
    B_T: RampField
    B_X: RampField
    B_Xhat: RampField
    B0: RampField
    B1: RampField
    B2: RampField

    def grouped(self, lam0, direction) -> RampField:
        """``B[lam0](k0, qbar0) = B^0 + lam0 B^1 + lam0^2 B^2``."""
        d = np.asarray(direction)
        return self.B0.apply(d) + self.B1.apply(d).scale(lam0) + self.B2.apply(d).scale(lam0 * lam0)

    def combined(self, lam0, direction) -> RampField:
        """``(lam0 B_T + hat B_X)(k0, qbar0)``; equals :meth:`grouped` on Whitham modes."""
        d = np.asarray(direction)
        return self.B_T.apply(d).scale(lam0) + self.B_Xhat.apply(d)


class _Ops:
    """Shared pieces: ``(1/k) dG_q[I(f)]`` with ramp bookkeeping and friends."""

    def __init__(self, profile: RollWaveProfile):
        self.profile = profile
        self.k, self.c = profile.key.k, profile.c
        self.delta, self.F = profile.params.delta, profile.params.F
        _, self.Aq = dG_matrices(profile)
        self.Gh, self.Gq, self.Sh, self.Sq = flux_partials(profile.H, profile.Q, self.F)

    def dGq_I(self, f: np.ndarray) -> tuple[np.ndarray, float]:
        """``(1/k) dG_q[I(f)]`` as (periodic part, ramp coefficient)."""
        I = core.antiderivative(f)
        # dG_q[y] = y A^qbar - k G_q
        per = (self.Aq @ I.periodic) / self.k - I.slope * self.Gq
        return per, I.slope / self.k

    def columns(self, cols) -> RampField:
        per = np.stack([c[0] for c in cols], axis=1)
        ramp = np.array([c[1] for c in cols])
        return RampField(per, ramp)


def assemble_BT_BX(profile: RollWaveProfile, der: ParameterDerivatives | None = None) -> SecondOrderData:
    """Coefficient fields of ``R0`` on the direction basis ``(1, 0), (0, 1)``."""
    if der is None:
        der = parameter_derivatives(profile)
    op = _Ops(profile)
    H, k, c, d = profile.H, op.k, op.c, op.delta
    Hp = core.diff(H)
    dQ = profile_dQ(profile, der)
    ones = np.ones_like(H)
    IH = op.dGq_I(H)
    I1 = op.dGq_I(ones)

    BT, BX, B0, B1, B2 = [], [], [], [], []
    for j in range(2):
        dH, dc = der.dH[:, j], der.dc[j]
        e_k, e_q = (1.0, 0.0) if j == 0 else (0.0, 1.0)
        IdH = op.dGq_I(dH)
        IdQ = op.dGq_I(dQ[:, j])
        dHp = core.diff(dH)
        dGdir = op.Gh * dH + op.Gq * c * dH
        BT.append((2 * c * dH + dc * H - e_q + IdH[0], IdH[1]))
        bx = (op.Gh * dH + op.Gq * dQ[:, j] - 2 * d * k * core.diff(dQ[:, j])
              - d * c * Hp * e_k + c * dQ[:, j] + IdQ[0])
        BX.append((bx, IdQ[1]))
        B0.append((-c * c * dH + dGdir - 2 * d * k * c * dHp - d * c * Hp * e_k
                   - (I1[0] + op.Gq) * e_q, -I1[1] * e_q))
        B1.append((-(e_k / k) * (IH[0] + op.Gq * H - 2 * d * k * Hp) + 2 * c * dH + IdH[0] - e_q,
                   -(e_k / k) * IH[1] + IdH[1]))
        B2.append((-(e_k / k) * H, 0.0))
    B_T, B_X = op.columns(BT), op.columns(BX)
    B_Xhat = B_X - B_T.scale(c)
    return SecondOrderData(profile, der, B_T, B_X, B_Xhat,
                           op.columns(B0), op.columns(B1), op.columns(B2))


# ---------------------------------------------------------------------------
# independent oracles


def r0_fd(profile: RollWaveProfile, dT=(0.0, 0.0), dX=(0.0, 0.0), step: float = 2.5e-4) -> RampField:
    """``R0`` for linear manufactured fields, with slow derivatives by finite differences.

    ``(k0, qbar0)(X, T) = (k, qbar) + dT * T + dX * X`` evaluated at the
    origin.  Profiles are re-solved at ``(k, qbar) +/- step * direction`` and
    every ``d_T``/``d_X`` is a fourth-order centered difference along ``dT``/``dX``.
    """
    k, qbar, c = profile.key.k, profile.key.qbar, profile.c
    op = _Ops(profile)
    d, F = op.delta, op.F

    def along(direction):
        direction = np.asarray(direction, dtype=float)
        if not np.any(direction):
            z = np.zeros_like(profile.H)
            return {"H": z, "Q": z, "G": z, "kQp": z, "Qp": z}
        def sample(h):
            kk, qq = np.array([k, qbar]) + h * direction
            p = newton_profile(profile.params, WaveKey(kk, qq), profile.H, profile.c, 1e-12)
            return {"H": p.H, "Q": p.Q, "G": flux_G(p.H, p.Q, F),
                    "kQp": kk * core.diff(p.Q), "Qp": core.diff(p.Q)}

        pts = {h: sample(h) for h in (step, -step, 2 * step, -2 * step)}
        # Richardson-extrapolated centered differences, error O(step^4)
        return {key: (8 * (pts[step][key] - pts[-step][key])
                      - (pts[2 * step][key] - pts[-2 * step][key])) / (12 * step)
                for key in pts[step]}

    T, X = along(dT), along(dX)
    f = T["H"] + X["Q"]
    per_I, ramp = op.dGq_I(f)
    R = (T["Q"] + X["G"] - d * k * X["Qp"] - d * X["kQp"] + c * f + per_I)
    return RampField(R, np.asarray(ramp))


def bloch_remainder_direct(profile: RollWaveProfile, der: ParameterDerivatives,
                           lam0: complex, mode) -> RampField:
    """Order-two Bloch remainder built from the expanded operator itself.

    Independent of the ``B`` assembly: it expands the Bloch symbol in ``nu``
    (``L^nu = L + nu L1 + nu^2 L2``) and collects every term not carried by
    ``A^k``, ``A^qbar`` or ``A^omega``.  Equals ``k * B[lam0](k0, qbar0)``.
    """
    op = _Ops(profile)
    H, k, c, d = profile.H, op.k, op.c, op.delta
    k0, q0 = mode
    Hp = core.diff(H)
    dH0 = der.dH @ np.asarray(mode)
    Gsum = op.Gh + c * op.Gq

    def L1(h):
        return k * c * c * h - k * Gsum * h + 2 * c * d * k * k * core.diff(h)

    def M1(g):
        return k * c * g + 2 * d * k * k * core.diff(g) - k * op.Gq * g

    def transport(f):
        """``(k c d_y + dG_q)[I(f)]`` as (periodic, ramp in units of y*A^qbar)."""
        I = core.antiderivative(f)
        per = k * c * core.diff(I.periodic) + op.Aq @ I.periodic + I.slope * (k * c - k * op.Gq)
        return per, I.slope

    t1 = transport(lam0 * dH0 - lam0 * (k0 / k) * H - q0 * np.ones_like(H))
    g1 = lam0 * (k0 / k) * H + q0
    per = (-L1(dH0) - (k0 / k) * c * d * k * k * Hp + c * k * lam0 * dH0
           + t1[0] + M1(g1) - k * lam0 * g1)
    return RampField(per, np.asarray(t1[1]))


# ---------------------------------------------------------------------------
# second-order eigenvalues


@dataclass(frozen=True)
class SecondOrderEigen:
    k: float
    lam0: np.ndarray
    lam1: np.ndarray
    modes: np.ndarray        # columns (k0, qbar0)
    corrections: np.ndarray  # columns (k1, qbar1)

    def mu(self, l) -> np.ndarray:
        """``mu_j(l) = k (i l) (lam0_j + i l lam1_j)``, shape ``l.shape + (2,)``."""
        nu = 1j * np.asarray(l, dtype=float)[..., None]
        return self.k * nu * (self.lam0 + nu * self.lam1)

    def to_dict(self) -> dict:
        enc = lambda z: [[float(v.real), float(v.imag)] for v in np.asarray(z, dtype=complex)]
        return {"lambda0": enc(self.lam0), "lambda1": enc(self.lam1)}


def first_order_modes(profile: RollWaveProfile, der: ParameterDerivatives):
    """Roots ``lam0`` and modes of ``lam0 P U + Qm U = 0``.

    ``P = [[1, 0], [M_k - M/k, M_q]]`` and ``Qm = [[k c_k, k c_q], [0, -1]]``.
    """
    av = averaged(profile, der)
    k, M = profile.key.k, av.M
    P = np.array([[1.0, 0.0], [av.dM[0] - M / k, av.dM[1]]])
    Qm = np.array([[k * der.dc[0], k * der.dc[1]], [0.0, -1.0]])
    lam0, V = np.linalg.eig(-np.linalg.solve(P, Qm))
    order = np.lexsort((lam0.imag, lam0.real))
    lam0, V = lam0[order], V[:, order]
    if abs(lam0[0] - lam0[1]) <= 1e-10 * max(np.abs(lam0).max(), 1e-300):
        raise RegimeError("non-strict hyperbolicity: second-order expansion undefined")
    return lam0, V, av


def second_order_eigen(profile: RollWaveProfile, data: SecondOrderData | None = None,
                       gauge=None) -> SecondOrderEigen:
    """Solve the two solvability conditions for ``lam1`` on each branch.

    ``gauge`` maps a mode ``(k0, qbar0)`` to the direction along which
    ``(k1, qbar1)`` is sought; the default is the orthogonal complement.
    """
    if data is None:
        data = assemble_BT_BX(profile)
    der = data.der
    la = linear_algebra(profile)
    lam0s, V, av = first_order_modes(profile, der)
    k, M = profile.key.k, av.M
    dM = av.dM
    scale = np.abs(profile.H).max()
    if gauge is None:
        gauge = lambda m: np.array([-m[1], m[0]])
    lam1s, corr = [], []
    for j in range(2):
        lam0 = lam0s[j]
        mode = V[:, j] / np.linalg.norm(V[:, j])
        if np.isrealobj(mode) or np.all(np.abs(mode.imag) < 1e-14):
            mode = mode.real
        R1 = data.grouped(lam0, mode).scale(k).periodic_part(scale, "order-two remainder")
        pR1 = la.p(R1)
        KR1 = np.mean(la.K(R1))
        # mean terms: periodic parts only, their ramps cancel by the first-order relation
        ramp = lam0 * (dM @ mode) - lam0 * (mode[0] / k) * M - mode[1]
        if abs(ramp) > RAMP_TOL * max(1.0, abs(lam0) * abs(dM).max()):
            raise NumericalError("antiderivative convention mismatch in mass average")
        Ip = lambda f: np.mean(core.antiderivative(f).periodic)
        rhs_mass = (lam0 * Ip(der.dH @ mode) - lam0 * (mode[0] / k) * Ip(profile.H)
                    - mode[1] * Ip(np.ones_like(profile.H)))
        g = gauge(mode)
        dc_g = der.dc @ g
        A = np.array([
            [mode[0], lam0 * g[0] + k * dc_g],
            [dM @ mode - M / k * mode[0], lam0 * (dM @ g) - lam0 * M / k * g[0] - g[1]],
        ], dtype=complex)
        b = np.array([-pR1, rhs_mass - lam0 * KR1], dtype=complex)
        lam1, s = np.linalg.solve(A, b)
        lam1s.append(lam1)
        corr.append(s * g)
    return SecondOrderEigen(k, lam0s, np.array(lam1s), V, np.array(corr).T)
