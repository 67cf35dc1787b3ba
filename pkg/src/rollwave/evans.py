"""Evans function of a roll-wave via the monodromy of a 3x3 spectral ODE.

In the co-moving frame with period ``L = 1/k`` the eigenvalue problem is
written for ``Y = (q, h, h')``:

    q'  = c h' - lam h
    h'' = [(G_q' + lam - S_q) q + (G_h' - S_h - lam (G_q - c)) h
           + (G_h + c (G_q - c) + delta lam) h'] / (delta c)

where primes on ``G_h``, ``G_q`` denote ``x``-derivatives of the coefficient
fields.  The monodromy is integrated in a basis adapted to the Floquet
structure at ``lam = 0``; the Evans function ``det(Psi - sigma I)`` is basis
independent while the adapted basis avoids the cancellation caused by the
strongly contracting Floquet mode.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import core
from .errors import NumericalError, RegimeError
from .profile import RollWaveProfile, averaged, flux_partials, parameter_derivatives
from .whitham1 import DispersionResult, cq_chart, dispersion_cq

RTOL = 1e-11
ATOL = 1e-13


@dataclass(frozen=True)
class SpectralODE:
    """``Y' = A(lam)(x) Y`` with ``L``-periodic coefficients."""

    lam: complex
    c: float
    delta: float
    k: float
    coeffs: np.ndarray = field(repr=False)   # interpolants of Gh, Gq, Gh_x, Gq_x, Sh, Sq
    mean_trace0: float = 0.0

    @property
    def period(self) -> float:
        return 1.0 / self.k

    def coefficients(self, x):
        return core.interp_eval(self.coeffs, np.asarray(x) * self.k)

    def matrix(self, x: float) -> np.ndarray:
        gh, gq, ghx, gqx, sh, sq = self.coefficients(x)
        lam, c, d = self.lam, self.c, self.delta
        A = np.zeros((3, 3), dtype=complex)
        A[0, 1] = -lam
        A[0, 2] = c
        A[1, 2] = 1.0
        A[2, 0] = (gqx + lam - sq) / (d * c)
        A[2, 1] = (ghx - sh - lam * (gq - c)) / (d * c)
        A[2, 2] = (gh + c * (gq - c) + d * lam) / (d * c)
        return A

    def trace_integral(self) -> complex:
        """``int_0^L tr A``, exact for the interpolated coefficients."""
        return self.period * (self.mean_trace0 + self.lam / self.c)

    def rhs(self, x, y):
        m = y.size // 3
        return (self.matrix(x) @ y.reshape(3, m)).ravel()


def spectral_matrix(profile: RollWaveProfile, lam: complex) -> SpectralODE:
    d, c, k = profile.params.delta, profile.c, profile.key.k
    if d <= 0:
        raise RegimeError("spectral ODE needs delta > 0")
    if c == 0:
        raise RegimeError("degenerate reduction: c = 0")
    Gh, Gq, Sh, Sq = flux_partials(profile.H, profile.Q, profile.params.F)
    fields = np.array([Gh, Gq, k * core.diff(Gh), k * core.diff(Gq), Sh, Sq])
    mean_tr = float(np.mean(Gh + c * (Gq - c)) / (d * c))
    return SpectralODE(complex(lam), c, d, k, core.interp_coeffs(fields), mean_tr)


def _flow(ode: SpectralODE, Y0: np.ndarray, rtol: float, atol: float, dense: bool = False):
    m = Y0.shape[1]
    sol = integrate.solve_ivp(ode.rhs, (0.0, ode.period), Y0.astype(complex).ravel(),
                              method="DOP853", rtol=rtol, atol=atol, dense_output=dense)
    if sol.status != 0:
        raise NumericalError(f"stiff integration failure (reduce delta floor): {sol.message}")
    return sol if dense else sol.y[:, -1].reshape(3, m)


@dataclass(frozen=True)
class Monodromy:
    """Monodromy ``Psi(L; lam)``; ``Psi_hat = S^{-1} Psi S`` in the basis ``S``."""

    lam: complex
    Psi_hat: np.ndarray
    S: np.ndarray
    trace_integral: complex

    @property
    def Psi(self) -> np.ndarray:
        return self.S @ self.Psi_hat @ np.linalg.inv(self.S)

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.Psi_hat))

    @property
    def liouville_error(self) -> float:
        return float(abs(self.det / np.exp(self.trace_integral) - 1.0))

    @property
    def cond(self) -> float:
        return float(np.linalg.cond(self.S) * np.abs(self.Psi_hat).max())

    def evans(self, sigma: complex) -> complex:
        return complex(np.linalg.det(self.Psi_hat - sigma * np.eye(3)))


@dataclass(frozen=True)
class EvansSample:
    lam: complex
    sigma: complex
    E: complex
    cond: float


class EvansContext:
    """Profile data shared by all Evans evaluations at one wave.

    The reference basis is ``(Y1(0), Y_rho(0), e_q)`` where ``Y1`` is the
    translation mode and ``Y_rho`` the contracting Floquet mode at ``lam = 0``.
    """

    def __init__(self, profile: RollWaveProfile, rtol: float = RTOL, atol: float = ATOL):
        self.profile = profile
        self.rtol, self.atol = rtol, atol
        self.k, self.c = profile.key.k, profile.c
        self.L = 1.0 / self.k
        self.ode0 = spectral_matrix(profile, 0.0)
        self.rho = float(np.exp(self.ode0.trace_integral().real))
        Hx = self.k * core.diff(profile.H)
        Hxx = self.k**2 * core.diff(profile.H, 2)
        self.Hx0, self.Hxx0 = Hx[0], Hxx[0]
        Y1 = np.array([self.c * Hx[0], Hx[0], Hxx[0]])
        Psi0 = _flow(self.ode0, np.eye(3), rtol, atol)
        w, V = np.linalg.eig(Psi0)
        i = int(np.argmin(np.abs(w - self.rho)))
        vr = V[:, i].real
        vr = vr / vr[1]
        self.v_rho = vr
        S = np.stack([Y1, vr, np.array([1.0, 0.0, 0.0])], axis=1)
        self.S0 = S / np.linalg.norm(S, axis=0)

    def ode(self, lam) -> SpectralODE:
        return SpectralODE(complex(lam), self.ode0.c, self.ode0.delta, self.k,
                           self.ode0.coeffs, self.ode0.mean_trace0)

    def monodromy(self, lam: complex, refine: bool | None = None,
                  rtol: float | None = None, atol: float | None = None) -> Monodromy:
        """Monodromy at ``lam``.

        With ``refine`` a second pass integrates from the eigenbasis of the
        first-pass monodromy; by default this is done when ``|lam| > 1e-2``.
        """
        rtol = self.rtol if rtol is None else rtol
        atol = self.atol if atol is None else atol
        ode = self.ode(lam)
        S = self.S0.astype(complex)
        Ph = np.linalg.solve(S, _flow(ode, S, rtol, atol))
        if refine is None:
            refine = abs(lam) > 1e-2
        if refine:
            w, V = np.linalg.eig(Ph)
            if np.linalg.cond(V) < 1e8:
                S = S @ V
                S = S / np.linalg.norm(S, axis=0)
                Ph = np.linalg.solve(S, _flow(ode, S, rtol, atol))
        return Monodromy(complex(lam), Ph, S, ode.trace_integral())

    def evans(self, lam: complex, sigma: complex) -> EvansSample:
        m = self.monodromy(lam)
        return EvansSample(complex(lam), complex(sigma), m.evans(sigma), m.cond)

    # -- lam = 0 solutions ------------------------------------------------

    def y1(self, x) -> np.ndarray:
        """Translation mode ``(c H', H', H'')`` at points ``x``."""
        p = self.profile
        co = core.interp_coeffs(np.array([core.diff(p.H), core.diff(p.H, 2)]))
        v = core.interp_eval(co, np.asarray(x) * self.k)
        Hx, Hxx = self.k * v[..., 0], self.k**2 * v[..., 1]
        return np.stack([self.c * Hx, Hx, Hxx], axis=-1)

    def floquet_h2(self, npts: int = 0):
        """Contracting Floquet mode ``h2`` (normalized by ``h2(0) = 1``).

        Returns ``(h2(0), h2'(0), [h2], [h2'], <h2>_L)``.
        """
        Y0 = np.concatenate([self.v_rho, [0.0]])[:, None]
        ode = self.ode0

        def rhs(x, y):
            z = y[:3]
            return np.concatenate([ode.matrix(x) @ z, [z[1]]])

        sol = integrate.solve_ivp(rhs, (0.0, self.L), Y0[:, 0].astype(complex), method="DOP853",
                                  rtol=self.rtol, atol=self.atol)
        yL = sol.y[:, -1].real
        h0, hp0 = self.v_rho[1], self.v_rho[2]
        return dict(h0=h0, hp0=hp0, jump_h=yL[1] - h0, jump_hp=yL[2] - hp0, mean=yL[3] / self.L)


def liouville_check(ctx: EvansContext, lam: complex) -> float:
    return ctx.monodromy(lam, refine=True).liouville_error


# ---------------------------------------------------------------------------
# (c, qbar)-chart quantities at lam = 0


def y3_solution(profile: RollWaveProfile, x, der=None, av=None) -> np.ndarray:
    """``(c dH/dqbar - 1, dH/dqbar, d/dx dH/dqbar)`` at fixed ``c``, points ``x``.

    In ``x`` the profile is ``H_y(k x; k, qbar)`` with ``k = k(c, qbar)``, so the
    derivative carries the stretch term ``x k_q H_y'``.
    """
    der = parameter_derivatives(profile) if der is None else der
    av = averaged(profile, der) if av is None else av
    k, c = profile.key.k, profile.c
    k_q = -av.dc[1] / av.dc[0]
    Hy = core.diff(profile.H)
    Hyy = core.diff(profile.H, 2)
    fields = np.array([der.dH[:, 0], der.dH[:, 1], core.diff(der.dH[:, 0]),
                       core.diff(der.dH[:, 1]), Hy, Hyy])
    x = np.asarray(x, dtype=float)
    v = core.interp_eval(core.interp_coeffs(fields), k * x)
    dHk, dHq, dHk_y, dHq_y, hy, hyy = (v[..., i] for i in range(6))
    h = k_q * (dHk + x * hy) + dHq
    hx = k * (k_q * (dHk_y + x * hyy) + dHq_y) + k_q * hy
    return np.stack([c * h - 1.0, h, hx], axis=-1)


def ode_residual(ctx: EvansContext, fun, lam: complex = 0.0, npts: int = 64,
                 h: float = 1e-5) -> float:
    """Max of ``|Y' - A Y|`` over sample points, ``Y'`` by 4th-order differences."""
    ode = ctx.ode(lam)
    xs = np.linspace(0.1, 0.9, npts) * ctx.L
    res = 0.0
    for x in xs:
        dY = (-fun(x + 2 * h) + 8 * fun(x + h) - 8 * fun(x - h) + fun(x - 2 * h)) / (12 * h)
        res = max(res, float(np.abs(dY - ode.matrix(x) @ fun(x)).max()))
    return res


# ---------------------------------------------------------------------------
# low-frequency expansion


@dataclass(frozen=True)
class ExpansionReport:
    Gamma: complex
    spread: float
    quad_coeffs: np.ndarray
    D: DispersionResult
    linear_coeffs: np.ndarray
    radius: float
    fit_residual: float
    radii: np.ndarray = field(default_factory=lambda: np.array([]))
    residuals: np.ndarray = field(default_factory=lambda: np.array([]))
    slope: float = float("nan")

    def to_dict(self) -> dict:
        cx = lambda z: [float(np.real(z)), float(np.imag(z))]
        return dict(Gamma=cx(self.Gamma), spread=self.spread,
                    D_coeffs=[cx(self.D.a), cx(self.D.b), cx(self.D.c)],
                    fit_quadratic=[cx(z) for z in self.quad_coeffs],
                    fit_residual=self.fit_residual, radius=self.radius,
                    radii=self.radii.tolist(), residuals=self.residuals.tolist(),
                    slope=self.slope)


def polydisc_points(r: float, npairs: int, rng: np.random.Generator) -> np.ndarray:
    """Point set symmetric under ``p -> -p`` (so odd terms do not bias the fit)."""
    pts = []
    while len(pts) < npairs:
        z = rng.uniform(-1.0, 1.0, 4) * r
        lam, nu = z[0] + 1j * z[1], z[2] + 1j * z[3]
        if abs(lam) <= r and abs(nu) <= r:
            pts.append((lam, nu))
    pts = np.array(pts)
    return np.concatenate([pts, -pts, [[0.0, 0.0]]])


def evans_expansion(ctx: EvansContext, r: float = 1e-3, npts: int = 25,
                    radii=(1e-2, 1e-3, 1e-4), seed: int = 0, map_fn=map) -> ExpansionReport:
    """Fit ``E(lam, e^nu)`` by a quadratic form and compare with ``D``."""
    D = dispersion_cq(ctx.profile)
    rng = np.random.default_rng(seed)
    pts = polydisc_points(r, (npts - 1) // 2, rng)
    lam, nu = pts[:, 0], pts[:, 1]
    vals = np.array(list(map_fn(lambda p: ctx.monodromy(p[0]).evans(np.exp(p[1])), pts)))
    V = np.stack([lam**2, lam * nu, nu**2, lam, nu, np.ones_like(lam)], axis=1)
    full = np.linalg.lstsq(V, vals, rcond=None)[0]
    scale = np.abs(full[:3]).max()
    lin = full[3:]
    if np.abs(lin).max() > 1e-3 * scale:
        raise NumericalError("expansion inconsistent (profile not converged?)")
    quad = np.linalg.lstsq(V[:, :3], vals, rcond=None)[0]
    fit_res = float(np.abs(V[:, :3] @ quad - vals).max())
    G = quad / np.array([D.a, D.b, D.c])
    Gamma = complex(np.mean(G))
    spread = float(np.abs(G - Gamma).max() / abs(Gamma))
    res = []
    for rr in radii:
        p = polydisc_points(rr, (npts - 1) // 2, rng)
        e = np.array(list(map_fn(lambda q: ctx.monodromy(q[0]).evans(np.exp(q[1])), p)))
        res.append(float(np.abs(e - Gamma * D(p[:, 0], p[:, 1])).max()))
    radii = np.asarray(radii, dtype=float)
    res = np.asarray(res)
    slope = float(np.polyfit(np.log(radii), np.log(res), 1)[0]) if len(radii) > 1 else float("nan")
    return ExpansionReport(Gamma, spread, quad, D, lin, r, fit_res, radii, res, slope)


# ---------------------------------------------------------------------------
# geometric determinant (tangent-space form of E)


def appendix_data(ctx: EvansContext) -> dict:
    profile = ctx.profile
    ch = cq_chart(profile)
    h2 = ctx.floquet_h2()
    return dict(k=ctx.k, M=ch["M"], Mc=ch["M_c"], Mq=ch["M_q"], L_c=ch["L_c"], L_q=ch["L_q"],
                Hx0=ctx.Hx0, Hxx0=ctx.Hxx0, h2=h2)


def appendix_det4(data: dict, lam: complex, nu: complex) -> complex:
    """``det((T(lam, nu), Z))`` on ``R^3 x R``."""
    k, M, h2 = data["k"], data["M"], data["h2"]
    jHc, jHcp = -data["L_c"] * data["Hx0"], -data["L_c"] * data["Hxx0"]
    jHq, jHqp = -data["L_q"] * data["Hx0"], -data["L_q"] * data["Hxx0"]
    T = np.array([
        [nu * k * k, 0.0, 0.0, -lam * k * k],
        [lam * data["Mc"] + nu * k * M, lam * h2["mean"], lam * data["Mq"] - k * nu, 0.0],
        [jHc, h2["jump_h"], jHq, data["Hx0"]],
        [jHcp, h2["jump_hp"], jHqp, data["Hxx0"]],
    ], dtype=complex)
    return complex(np.linalg.det(T))


def appendix_det3(data: dict, lam: complex, nu: complex) -> complex:
    """Reduced 3x3 form of :func:`appendix_det4` (equal to it by a column step).

    Eliminating the first row of the 4x4 determinant leaves
    ``lam <dH/dqbar> - k nu`` in the (1, 3) entry.
    """
    k, M, h2 = data["k"], data["M"], data["h2"]
    jHc, jHcp = -data["L_c"] * data["Hx0"], -data["L_c"] * data["Hxx0"]
    jHq, jHqp = -data["L_q"] * data["Hx0"], -data["L_q"] * data["Hxx0"]
    T = np.array([
        [lam * lam * data["Mc"] + lam * nu * k * M, lam * h2["mean"], lam * data["Mq"] - k * nu],
        [lam * jHc + nu * data["Hx0"], h2["jump_h"], jHq],
        [lam * jHcp + nu * data["Hxx0"], h2["jump_hp"], jHqp],
    ], dtype=complex)
    return complex(k * k * np.linalg.det(T))
