"""Bloch spectrum of the linearized operator near the origin.

In the co-moving coordinate ``y`` the linearized system reads

    h_t = k (c h - q)_y,
    q_t = k c q_y + dG_h[h] + dG_q[q],

and the Bloch symbol at Floquet number ``l`` replaces ``d/dy`` by
``d/dy + i l``.  The operator is represented on the ``n - 1`` Fourier modes
``|m| < n/2`` of each field.  Dropping the Nyquist mode keeps the discrete
operator free of the spurious zero eigenvalue that the collocation matrix of
an odd derivative introduces.

Near ``l = 0`` the two critical eigenvalues split from a Jordan block.  They
are computed after the similarity scaling ``h_0 -> h_0 / (i l)`` of the mean
height, which turns the block into a semisimple double eigenvalue and makes
``lambda(l) / l`` well conditioned.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import core
from .errors import NumericalError
from .profile import RollWaveProfile, flux_partials, parameter_derivatives, profile_dQ

GAP_FACTOR = 10.0
OVERLAP_MIN = 0.9
JORDAN_THRESHOLD = 1e-6


def _modes(n: int) -> np.ndarray:
    h = n // 2
    return np.arange(-(h - 1), h)


@dataclass(frozen=True)
class FourierBasis:
    """Maps between grid samples and the retained Fourier modes."""

    n: int
    m: np.ndarray
    T: np.ndarray    # samples -> coefficients
    Ti: np.ndarray   # coefficients -> samples

    @classmethod
    def build(cls, n: int) -> "FourierBasis":
        m = _modes(n)
        y = core.grid(n)
        E = np.exp(2j * np.pi * np.outer(y, m))
        return cls(n, m, E.conj().T / n, E)

    def coeffs(self, f: np.ndarray) -> np.ndarray:
        return self.T @ f

    def samples(self, c: np.ndarray) -> np.ndarray:
        return self.Ti @ c

    def pair(self, h: np.ndarray, q: np.ndarray) -> np.ndarray:
        return np.concatenate([self.coeffs(h), self.coeffs(q)])

    def split(self, z: np.ndarray):
        k = self.m.size
        return self.samples(z[:k]), self.samples(z[k:])

    @property
    def mean_index(self) -> int:
        return int(np.flatnonzero(self.m == 0)[0])


@dataclass(frozen=True)
class BlochOperator:
    l: float
    matrix: np.ndarray
    basis: FourierBasis


class _Builder:
    """Precomputed multiplication operators for a fixed profile."""

    def __init__(self, profile: RollWaveProfile):
        self.profile = profile
        n = profile.n
        self.basis = FourierBasis.build(n)
        T, Ti = self.basis.T, self.basis.Ti
        F, k, c, d = profile.params.F, profile.key.k, profile.c, profile.params.delta
        Gh, Gq, Sh, Sq = flux_partials(profile.H, profile.Q, F)
        mult = lambda a: T @ (a[:, None] * Ti)
        self.MGh, self.MGq, self.MSh, self.MSq = mult(Gh), mult(Gq), mult(Sh), mult(Sq)
        self.k, self.c, self.delta = k, c, d
        self.d = 2j * np.pi * self.basis.m

    def matrix(self, l: float) -> np.ndarray:
        k, c, d = self.k, self.c, self.delta
        D = np.diag(self.d + 1j * l)
        D2 = D @ D
        hh = k * c * D
        hq = -k * D
        qh = -k * D @ self.MGh + self.MSh
        qq = d * k * k * D2 - k * D @ self.MGq + self.MSq + k * c * D
        return np.block([[hh, hq], [qh, qq]])


def bloch_matrix(profile: RollWaveProfile, l: float) -> BlochOperator:
    """Bloch symbol at Floquet number ``l`` on the retained Fourier modes."""
    if abs(l) > np.pi:
        raise ValueError("Floquet number must lie in [-pi, pi]")
    b = _Builder(profile)
    return BlochOperator(float(l), b.matrix(l), b.basis)


def kernel_residuals(profile: RollWaveProfile) -> dict:
    """Right kernel ``(H', Q')`` and left kernel ``(1, 0)`` residuals at ``l = 0``."""
    op = bloch_matrix(profile, 0.0)
    B = op.basis
    v = B.pair(core.diff(profile.H), core.diff(profile.Q))
    v /= np.linalg.norm(v)
    e = np.zeros(op.matrix.shape[0], dtype=complex)
    e[B.mean_index] = 1.0
    return {"right": float(np.linalg.norm(op.matrix @ v)),
            "left": float(np.linalg.norm(e.conj() @ op.matrix)),
            "scale": float(np.linalg.norm(op.matrix, 2))}


def reversal_error(profile: RollWaveProfile, l: float) -> float:
    """``|conj(A(l)) - R A(-l) R|`` with ``R`` the mode reversal ``m -> -m``."""
    b = _Builder(profile)
    nm = b.basis.m.size
    perm = np.concatenate([np.arange(nm)[::-1], nm + np.arange(nm)[::-1]])
    A, Am = b.matrix(l), b.matrix(-l)
    return float(np.abs(A.conj() - Am[np.ix_(perm, perm)]).max() / np.abs(A).max())


# ---------------------------------------------------------------------------
# Jordan structure at l = 0


@dataclass(frozen=True)
class JordanReport:
    sv_ratio: float
    smallest_sv: tuple
    generalized_residual: float
    mean_pairing: float
    rung2_pairing: float
    height: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def jordan_structure(profile: RollWaveProfile, threshold: float = JORDAN_THRESHOLD) -> JordanReport:
    """Certify a one-dimensional kernel carrying a single Jordan chain of height two.

    The generalized eigenvector solves ``A u = v`` through the bordered system
    ``[[A, e], [v*, 0]]``, where ``e`` is the left null vector.  The chain
    stops at height two iff ``e* u`` (the mean of ``u_h``) does not vanish.
    """
    op = bloch_matrix(profile, 0.0)
    A, B = op.matrix, op.basis
    s = linalg.svdvals(A)
    ratio = s[-2] / max(s[-1], np.finfo(float).tiny)
    v = B.pair(core.diff(profile.H), core.diff(profile.Q))
    v /= np.linalg.norm(v)
    e = np.zeros(A.shape[0], dtype=complex)
    e[B.mean_index] = 1.0
    N = A.shape[0]
    bord = np.zeros((N + 1, N + 1), dtype=complex)
    bord[:N, :N] = A
    bord[:N, N] = e
    bord[N, :N] = v.conj()
    sol = linalg.solve(bord, np.concatenate([v, [0.0]]))
    u = sol[:N]
    resid = np.linalg.norm(A @ u - v)
    pairing0 = float(abs(np.mean(core.diff(profile.H))))
    rung2 = float(abs(e.conj() @ u) / np.linalg.norm(u))
    if rung2 <= threshold:
        raise NumericalError("Jordan height > 2: regime violated")
    return JordanReport(float(ratio), (float(s[-2]), float(s[-1])), float(resid),
                        pairing0, rung2, 2)


# ---------------------------------------------------------------------------
# critical curves


@dataclass
class BlochCurve:
    """Critical eigenvalues ``lam[:, j]`` at Floquet numbers ``l``.

    ``right[i][:, j]`` and ``left[i][:, j]`` are Fourier-coefficient vectors
    with ``left^* right = I``.  ``subspace[i]`` is an orthonormal basis of the
    critical invariant subspace.
    """

    l: np.ndarray
    lam: np.ndarray
    right: list
    left: list
    subspace: list
    overlaps: np.ndarray
    gap: float
    residuals: np.ndarray
    biorth_error: float
    basis: FourierBasis

    def fields(self, i: int, j: int):
        """Right eigenfield ``(h, q)`` on the grid."""
        return self.basis.split(self.right[i][:, j])

    def to_rows(self, d1=None, d2=None):
        rows = []
        for i, l in enumerate(self.l):
            a, b = self.lam[i]
            row = [l, a.real, a.imag, b.real, b.imag]
            row += [np.nan if d1 is None else d1[i], np.nan if d2 is None else d2[i]]
            rows.append(row)
        return rows


def _scaled_eig(A: np.ndarray, idx: int, l: float):
    """Eigen-decomposition of ``S^-1 A S`` with ``S = diag(.., i l, ..)`` at ``idx``."""
    nu = 1j * l
    As = A.copy()
    As[idx, :] /= nu
    As[:, idx] *= nu
    w, vl, vr = linalg.eig(As, left=True, right=True)
    return As, w, vl, vr


def _biorthonormalize(R: np.ndarray, Lf: np.ndarray):
    R = R / np.linalg.norm(R, axis=0)
    P = Lf.conj().T @ R
    Lf = Lf @ np.linalg.inv(P).conj().T
    return R, Lf


def _critical_pair(A: np.ndarray, idx: int, l: float):
    """Two smallest eigenvalues with biorthonormal eigenvectors of the scaled matrix."""
    As, w, vl, vr = _scaled_eig(A, idx, l)
    order = np.argsort(np.abs(w))
    sel = order[:2]
    gap = np.abs(w[order[2]]) / max(np.abs(w[sel]).max(), np.finfo(float).tiny)
    lam = w[sel]
    Rs, Ls = _biorthonormalize(vr[:, sel], vl[:, sel])
    res = np.array([np.linalg.norm(As @ Rs[:, j] - lam[j] * Rs[:, j])
                    for j in range(2)]) / np.linalg.norm(As, 2)
    return lam, Rs, Ls, gap, res


def _unscale(Rs: np.ndarray, Ls: np.ndarray, idx: int, l: float):
    nu = 1j * l
    R, Lf = Rs.copy(), Ls.copy()
    R[idx, :] *= nu
    Lf[idx, :] /= np.conj(nu)
    scale = np.linalg.norm(R, axis=0)
    R /= scale
    Lf *= scale
    err = np.abs(Lf.conj().T @ R - np.eye(2)).max()
    return R, Lf, float(err)


def critical_curves(profile: RollWaveProfile, l_grid=None, order=None) -> BlochCurve:
    """Track the two critical eigenvalues along increasing ``|l|``.

    Near the Jordan point the two right eigenvectors are almost parallel, so
    branches are matched by the biorthogonal overlap ``|<w~_i(prev), w_j>|``
    of consecutive steps, which stays close to ``delta_ij`` along a branch.
    ``order`` optionally gives reference values of ``lam / (i k l)`` used to
    label the branches at the first grid point.
    """
    if l_grid is None:
        l_grid = np.geomspace(1e-3, 1e-1, 11)
    l_grid = np.asarray(l_grid, dtype=float)
    if np.any(l_grid == 0) or np.any(np.abs(l_grid) > np.pi):
        raise ValueError("Floquet numbers must be non-zero and within [-pi, pi]")
    if np.any(np.diff(np.abs(l_grid)) <= 0) or np.any(np.sign(l_grid) != np.sign(l_grid[0])):
        raise ValueError("l_grid must be one-signed with increasing modulus")
    b = _Builder(profile)
    idx = b.basis.mean_index
    k = profile.key.k
    lams, rights, lefts, subs, overlaps, resids = [], [], [], [], [], []
    prev_left = None
    biorth = 0.0
    gap = np.inf
    for i, l in enumerate(l_grid):
        lam, Rs, Ls, g, res = _critical_pair(b.matrix(l), idx, l)
        if i == 0:
            gap = g
            if g < GAP_FACTOR:
                raise NumericalError(f"no spectral gap around the critical eigenvalues (ratio {g:.2f})")
            perm = [0, 1]
            if order is not None:
                ratio = lam / (1j * k * l)
                ref = np.asarray(order, dtype=complex)
                if abs(ratio[0] - ref[1]) + abs(ratio[1] - ref[0]) < abs(ratio[0] - ref[0]) + abs(ratio[1] - ref[1]):
                    perm = [1, 0]
            ov = np.ones(2)
        else:
            O = np.abs(prev_left.conj().T @ Rs)
            keep, swap = O[0, 0] * O[1, 1], O[0, 1] * O[1, 0]
            perm = [0, 1] if keep >= swap else [1, 0]
            ov = np.array([O[0, perm[0]], O[1, perm[1]]])
            if ov.min() < OVERLAP_MIN or min(keep, swap) > 0.5 * max(keep, swap):
                raise NumericalError(f"branch tracking failed at l={l:g}")
        lam, Rs, Ls, res = lam[perm], Rs[:, perm], Ls[:, perm], res[perm]
        if prev_left is not None:
            # phase alignment keeps the eigenfields continuous in l
            ph = np.einsum("ij,ij->j", prev_left.conj(), Rs)
            ph /= np.abs(ph)
            Rs = Rs / ph
            Ls = Ls * np.conj(ph)
        prev_left = Ls
        R, Lf, err = _unscale(Rs, Ls, idx, l)
        biorth = max(biorth, err)
        Qb, _ = np.linalg.qr(R)
        lams.append(lam)
        rights.append(R)
        lefts.append(Lf)
        subs.append(Qb)
        overlaps.append(ov)
        resids.append(res)
    return BlochCurve(l_grid, np.array(lams), rights, lefts, subs, np.array(overlaps),
                      float(gap), np.array(resids), biorth, b.basis)


def first_order_ratios(curve: BlochCurve, k: float) -> np.ndarray:
    """``lam_j(l) / (i k l)``, which tends to the first-order coefficients."""
    return curve.lam / (1j * k * curve.l[:, None])


def fitted_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# ---------------------------------------------------------------------------
# eigenvector expansion


@dataclass(frozen=True)
class EigenvectorReport:
    l: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    slope1: float
    slope2: float
    d0: float

    def to_dict(self) -> dict:
        return {"l": self.l.tolist(), "d1": self.d1.tolist(), "d2": self.d2.tolist(),
                "slope1": self.slope1, "slope2": self.slope2, "d0": self.d0}


def _distance(Qb: np.ndarray, v: np.ndarray) -> float:
    v = v / np.linalg.norm(v)
    return float(np.linalg.norm(v - Qb @ (Qb.conj().T @ v)))


def eigenvector_expansion_check(profile: RollWaveProfile, curve: BlochCurve, der=None) -> EigenvectorReport:
    """Distances from the predicted basis fields to the critical subspace.

    The first predicted field is ``(H'/k + i l H_k, Q'/k + i l Q_k)`` and
    should lie in the subspace up to ``O(l^2)``; the second,
    ``(H_qbar, Q_qbar)``, up to ``O(l)``.
    """
    if der is None:
        der = parameter_derivatives(profile)
    B = curve.basis
    k = profile.key.k
    dQ = profile_dQ(profile, der)
    Hp, Qp = core.diff(profile.H), core.diff(profile.Q)
    d1, d2 = [], []
    for i, l in enumerate(curve.l):
        v1 = B.pair(Hp / k + 1j * l * der.dH[:, 0], Qp / k + 1j * l * dQ[:, 0])
        v2 = B.pair(der.dH[:, 1].astype(complex), dQ[:, 1].astype(complex))
        d1.append(_distance(curve.subspace[i], v1))
        d2.append(_distance(curve.subspace[i], v2))
    d1, d2 = np.array(d1), np.array(d2)
    # kernel direction at l = 0
    A0 = bloch_matrix(profile, 0.0).matrix
    _, _, vh = linalg.svd(A0)
    kern = vh[-1].conj()[:, None]
    d0 = _distance(kern, B.pair(Hp, Qp).astype(complex))
    return EigenvectorReport(curve.l, d1, d2, fitted_slope(curve.l, d1), fitted_slope(curve.l, d2), d0)
