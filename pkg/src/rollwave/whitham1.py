"""First-order Whitham modulation system for ``U = (k, qbar)``.

In the laboratory frame the system reads

    k_t + (k c)_x = 0,      M_t + N_x = 0,

with ``M = mean(H)`` and ``N = c M - qbar``.  Its quasilinear form is
``A0 U_t + A1 U_x = 0`` with ``A0 = [[1, 0], [M_k, M_q]]`` and
``A1 = [[-omega_k, -omega_q], [N_k, N_q]]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import core
from .core import WaveKey
from .errors import NumericalError, RegimeError
from .profile import AveragedQuantities, RollWaveProfile, averaged, newton_profile


@dataclass(frozen=True)
class WhithamSystem:
    """Quasilinear coefficients at a reference point (lab frame)."""

    k: float
    qbar: float
    c: float
    A0: np.ndarray
    A1: np.ndarray
    averages: AveragedQuantities

    def speeds(self) -> np.ndarray:
        """Characteristic speeds, eigenvalues of ``A0^{-1} A1`` (sorted)."""
        s = np.linalg.eigvals(np.linalg.solve(self.A0, self.A1))
        return _sort(s)

    def comoving_speeds(self) -> np.ndarray:
        return self.speeds() - self.c

    def eigenvectors(self):
        """Right eigenvectors (columns) in ``(k, qbar)`` ordered like :meth:`speeds`."""
        s, v = np.linalg.eig(np.linalg.solve(self.A0, self.A1))
        order = np.lexsort((s.imag, s.real))
        return s[order], v[:, order]

    @property
    def hyperbolic(self) -> bool:
        s = self.speeds()
        return bool(np.all(np.abs(s.imag) <= 1e-12 * np.abs(s).max())
                    and abs(s[0].real - s[1].real) > 1e-12 * np.abs(s).max())


@dataclass(frozen=True)
class DispersionResult:
    """``D(lam, nu) = a lam^2 + b lam nu + c nu^2`` (normalized so ``c = 1``)."""

    a: complex
    b: complex
    c: complex
    roots: np.ndarray
    hyperbolic: bool
    L: float

    def __call__(self, lam, nu):
        return self.a * lam * lam + self.b * lam * nu + self.c * nu * nu

    def comoving_speeds(self) -> np.ndarray:
        """Speeds in the co-moving frame implied by the roots ``lam/nu``."""
        return _sort(-self.roots * self.L)


def _sort(s):
    s = np.asarray(s, dtype=complex)
    s = s[np.lexsort((s.imag, s.real))]
    return s.real if np.all(s.imag == 0) else s


def assemble(profile: RollWaveProfile, av: AveragedQuantities | None = None) -> WhithamSystem:
    """Quasilinear Whitham system at the profile's ``(k, qbar)``."""
    if av is None:
        av = averaged(profile)
    if not av.evolution_ok:
        raise RegimeError("not evolution-type: d M / d qbar vanishes")
    A0 = np.array([[1.0, 0.0], [av.dM[0], av.dM[1]]])
    A1 = np.array([[-av.domega[0], -av.domega[1]], [av.dN[0], av.dN[1]]])
    return WhithamSystem(profile.key.k, profile.key.qbar, profile.c, A0, A1, av)


def cq_chart(profile: RollWaveProfile, av: AveragedQuantities | None = None) -> dict:
    """Period ``L`` and mean ``M`` differentiated in the ``(c, qbar)`` chart."""
    if av is None:
        av = averaged(profile)
    if not av.cparam_ok:
        raise RegimeError("(c, qbar) chart unavailable: use (k, qbar) route")
    k = profile.key.k
    c_k, c_q = av.dc
    # k as a function of (c, qbar)
    k_c = 1.0 / c_k
    k_q = -c_q / c_k
    L = 1.0 / k
    return dict(L=L, L_c=-k_c / k**2, L_q=-k_q / k**2,
                M=av.M, M_c=av.dM[0] * k_c, M_q=av.dM[0] * k_q + av.dM[1])


def dispersion_cq(profile: RollWaveProfile, av: AveragedQuantities | None = None) -> DispersionResult:
    """Dispersion relation of the linearized co-moving system in the ``(c, qbar)`` chart.

    With perturbations ``exp(lam t + k nu x)`` the determinant equals
    ``lam^2 X - lam nu Y + nu^2 / L``; multiplying by ``L`` normalizes the
    ``nu^2`` coefficient to one.
    """
    ch = cq_chart(profile, av)
    L, Lc, Lq, M, Mc, Mq = ch["L"], ch["L_c"], ch["L_q"], ch["M"], ch["M_c"], ch["M_q"]
    X = Lc * Mq - Lq * Mc
    Y = Lc / L + Mq + M * Lq / L
    a, b, c = L * X, -L * Y, 1.0
    roots = np.roots([a, b, c]) if a != 0 else np.array([-c / b])
    disc = b * b - 4 * a * c
    return DispersionResult(a, b, c, _sort(roots), bool(disc > 0), L)


# ---------------------------------------------------------------------------
# local flux model


@dataclass
class FluxModel:
    """Biquadratic model of ``c``, ``M`` (and profiles) around a center.

    Profiles are solved on a 3x3 stencil ``(k0 + i hk, q0 + j hq)``,
    ``i, j in {-1, 0, 1}``, by Newton continuation from the center profile.
    """

    center: RollWaveProfile
    hk: float
    hq: float
    tol: float = 1e-10
    profiles: list = field(default_factory=list, repr=False)
    c_tab: np.ndarray = field(default=None, repr=False)
    M_tab: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self._build(self.center)

    def _build(self, center: RollWaveProfile):
        self.center = center
        k0, q0 = center.key.k, center.key.qbar
        self.k0, self.q0 = k0, q0
        prof = [[None] * 3 for _ in range(3)]
        for i in range(3):
            for j in range(3):
                if i == 1 and j == 1:
                    prof[i][j] = center
                    continue
                key = WaveKey(k0 + (i - 1) * self.hk, q0 + (j - 1) * self.hq)
                prof[i][j] = newton_profile(center.params, key, center.H, center.c, self.tol)
        self.profiles = prof
        self.c_tab = np.array([[p.c for p in row] for row in prof])
        self.M_tab = np.array([[p.H.mean() for p in row] for row in prof])

    @staticmethod
    def _basis(t):
        """Quadratic Lagrange basis on nodes -1, 0, 1 and its derivative."""
        t = np.asarray(t, dtype=float)
        b = np.stack([0.5 * t * (t - 1), 1 - t * t, 0.5 * t * (t + 1)])
        db = np.stack([t - 0.5, -2 * t, t + 0.5])
        return b, db

    def contains(self, k, q, slack: float = 1.5) -> bool:
        return bool(np.all(np.abs(k - self.k0) <= slack * self.hk)
                    and np.all(np.abs(q - self.q0) <= slack * self.hq))

    def evaluate(self, tab, k, q):
        """Value and gradient of a tabulated quantity at arrays ``(k, q)``."""
        bk, dbk = self._basis((np.asarray(k) - self.k0) / self.hk)
        bq, dbq = self._basis((np.asarray(q) - self.q0) / self.hq)
        val = np.einsum("i...,ij,j...->...", bk, tab, bq)
        dk = np.einsum("i...,ij,j...->...", dbk, tab, bq) / self.hk
        dq = np.einsum("i...,ij,j...->...", bk, tab, dbq) / self.hq
        return val, dk, dq

    def fluxes(self, k, q):
        """``(k c, N)`` and the ``(k, qbar)`` Jacobians at arrays ``(k, q)``."""
        c, ck, cq = self.evaluate(self.c_tab, k, q)
        M, Mk, Mq = self.evaluate(self.M_tab, k, q)
        return dict(c=c, c_k=ck, c_q=cq, M=M, M_k=Mk, M_q=Mq, kc=k * c,
                    kc_k=c + k * ck, kc_q=k * cq, N=c * M - q,
                    N_k=ck * M + c * Mk, N_q=cq * M + c * Mq - 1.0)

    def qbar_from(self, k, M_target, q_guess, tol: float = 1e-13, maxit: int = 30):
        """Invert ``M(k, qbar) = M_target`` for ``qbar`` pointwise."""
        q = np.array(q_guess, dtype=float)
        for _ in range(maxit):
            M, _, Mq = self.evaluate(self.M_tab, k, q)
            dq = (M - M_target) / Mq
            q = q - dq
            if np.abs(dq).max() < tol:
                return q
        raise NumericalError("qbar inversion did not converge")

    def speeds(self, k, q):
        """Characteristic speeds at each point, shape ``(..., 2)`` complex."""
        f = self.fluxes(k, q)
        # A0^{-1} A1 with A0 = [[1,0],[Mk,Mq]], A1 = [[kc_k,kc_q],[N_k,N_q]]
        a11, a12 = f["kc_k"], f["kc_q"]
        a21 = (f["N_k"] - f["M_k"] * a11) / f["M_q"]
        a22 = (f["N_q"] - f["M_k"] * a12) / f["M_q"]
        tr = a11 + a22
        det = a11 * a22 - a12 * a21
        disc = tr * tr - 4 * det
        sq = np.sqrt(disc.astype(complex))
        return np.stack([(tr - sq) / 2, (tr + sq) / 2], axis=-1), disc


# ---------------------------------------------------------------------------
# hyperbolic solver


class ShockFormation(NumericalError):
    def __init__(self, t_stop, trajectory):
        super().__init__(f"shock forming: stop time t_s={t_stop:.6g}")
        self.t_stop = t_stop
        self.trajectory = trajectory


class EllipticityError(RegimeError):
    pass


@dataclass
class WhithamTrajectory:
    X: np.ndarray
    T: np.ndarray
    k: np.ndarray          # shape (nT, nX)
    qbar: np.ndarray
    length: float

    def to_csv_rows(self):
        for it, t in enumerate(self.T):
            for ix, x in enumerate(self.X):
                yield (t, x, self.k[it, ix], self.qbar[it, ix])


def _spectral_filter(nX, strength=36.0, order=16):
    m = np.abs(core.wavenumbers(nX))
    dealias = m <= nX / 3.0
    filt = np.exp(-strength * (m / (nX / 2.0)) ** order)
    return dealias, filt


def solve_whitham(model: FluxModel, k0: np.ndarray, q0: np.ndarray, T_end: float,
                  length: float = 1.0, dt: float | None = None, cfl: float = 0.4,
                  store_every: int = 1, growth_limit: float = 100.0) -> WhithamTrajectory:
    """Integrate the conservative Whitham system on a periodic macro-domain.

    The conserved pair ``(k, M)`` is advanced by SSP-RK3 with spectral
    flux derivatives (2/3 dealiasing and a weak exponential filter).
    ``qbar`` is recovered from ``(k, M)`` through the flux model.
    """
    k0 = np.asarray(k0, dtype=float)
    q0 = np.asarray(q0, dtype=float)
    nX = k0.size
    dX = length / nX
    X = np.arange(nX) * dX
    dealias, filt = _spectral_filter(nX)
    sym = 2j * np.pi * core.wavenumbers(nX) / length
    sym[nX // 2] = 0.0

    def ddx(f):
        fh = np.fft.fft(f)
        return np.fft.ifft(sym * dealias * fh).real

    def smooth(f):
        return np.fft.ifft(filt * np.fft.fft(f)).real

    def check(k, q):
        if not model.contains(k, q):
            raise NumericalError("modulation left the flux-model box; enlarge hk/hq")
        s, disc = model.speeds(k, q)
        if np.any(disc < 0):
            raise EllipticityError("ellipticity encountered")
        return np.abs(s).max()

    smax = check(k0, q0)
    if dt is None:
        dt = cfl * dX / max(smax, 1e-12)
    nsteps = max(1, int(np.ceil(T_end / dt - 1e-12)))
    dt = T_end / nsteps

    k = k0.copy()
    M = model.evaluate(model.M_tab, k0, q0)[0]
    q = q0.copy()

    def rhs(k, M, qg):
        qq = model.qbar_from(k, M, qg)
        f = model.fluxes(k, qq)
        return -ddx(f["kc"]), -ddx(f["N"]), qq

    g0 = max(np.abs(ddx(k0)).max() / k0.mean(), np.abs(ddx(q0)).max() / max(abs(q0.mean()), 1e-300))
    Ts, ks, qs = [0.0], [k.copy()], [q.copy()]
    t = 0.0
    for step in range(1, nsteps + 1):
        r1k, r1M, q = rhs(k, M, q)
        k1, M1 = k + dt * r1k, M + dt * r1M
        r2k, r2M, q = rhs(k1, M1, q)
        k2 = 0.75 * k + 0.25 * (k1 + dt * r2k)
        M2 = 0.75 * M + 0.25 * (M1 + dt * r2M)
        r3k, r3M, q = rhs(k2, M2, q)
        k = k / 3.0 + 2.0 / 3.0 * (k2 + dt * r3k)
        M = M / 3.0 + 2.0 / 3.0 * (M2 + dt * r3M)
        k, M = smooth(k), smooth(M)
        q = model.qbar_from(k, M, q)
        t = step * dt
        check(k, q)
        g = max(np.abs(ddx(k)).max() / k.mean(), np.abs(ddx(q)).max() / max(abs(q.mean()), 1e-300))
        if g0 > 0 and g > growth_limit * g0:
            traj = WhithamTrajectory(X, np.array(Ts), np.array(ks), np.array(qs), length)
            raise ShockFormation(t, traj)
        if step % store_every == 0 or step == nsteps:
            Ts.append(t)
            ks.append(k.copy())
            qs.append(q.copy())
    return WhithamTrajectory(X, np.array(Ts), np.array(ks), np.array(qs), length)
