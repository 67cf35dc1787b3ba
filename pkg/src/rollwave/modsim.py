"""Direct simulation of the viscous Saint-Venant system and modulated-wave ansatz.

Simulation
----------
Cell averages of ``(h, q)`` on a periodic interval are advanced by Strang
splitting: a Crank-Nicolson half step of ``delta q_xx`` (diagonal in Fourier
space), an SSP-RK2 step of the MUSCL / local Lax-Friedrichs flux divergence
plus source, and another diffusion half step.

Ansatz
------
A slowly modulated wave train with macro fields ``(k, qbar)(X, T)``,
``X = eps x``, ``T = eps t``, is

    h(x, t) = H(theta; k, qbar) + eps h1(theta; X, T),

with fast phase ``theta = (Theta0(T) + int_0^X k dZ) / eps + phi1(X, T)``.
``Theta0`` integrates the frequency at ``X = 0`` so that ``d_t theta = omega``
and ``d_x theta = k`` hold exactly at leading order.  In the co-moving
coordinate ``s = k* x + omega* t`` the same map is written ``theta = Y(s, t)``
with inverse ``X(theta, t) = theta - phi(theta, t)``.

Every field of the ansatz is a function on the torus ``(theta, X)``, so the
PDE residual is evaluated there with spectral derivatives in both variables
and explicit powers of ``eps``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, core
from .core import PhysicalParams, WaveKey
from .errors import NumericalError, RegimeError
from .profile import (RollWaveProfile, averaged, flux_partials, linear_algebra,
                      newton_profile, parameter_derivatives, profile_dQ)
from .whitham1 import WhithamTrajectory
from .whitham2 import assemble_BT_BX

CFL = 0.45
CFL_MAX = 0.9
DT_FLOOR = 1e-9
PHASE_SLOPE_MAX = 0.5
MAX_CELLS = 1 << 16
RAMP_LIMIT = 1e-6


# ---------------------------------------------------------------------------
# simulator


@dataclass
class SimState:
    """Cell averages on ``[0, length)`` with ``h.size`` uniform cells."""

    length: float
    h: np.ndarray
    q: np.ndarray
    t: float = 0.0

    @property
    def n_x(self) -> int:
        return self.h.size

    @property
    def dx(self) -> float:
        return self.length / self.h.size

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_x) + 0.5) * self.dx

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.n_x + 1) * self.dx

    def mass(self) -> float:
        return float(math.fsum(self.h) * self.dx)

    def copy(self) -> "SimState":
        return SimState(self.length, self.h.copy(), self.q.copy(), self.t)


@dataclass
class SimTrajectory:
    """Snapshots at the requested output times plus bookkeeping."""

    times: list
    states: list
    steps: int
    masses: list = field(default_factory=list)

    def to_csv_rows(self, stride: int = 1):
        for s in self.states:
            x = s.centers
            for i in range(0, s.n_x, stride):
                yield (s.t, x[i], s.h[i], s.q[i])


class _Diffusion:
    """Crank-Nicolson factors for ``delta q_xx`` with the 3-point Laplacian."""

    def __init__(self, n: int, dx: float, delta: float):
        m = np.fft.rfftfreq(n, 1.0 / n)
        self.sym = 4.0 * np.sin(np.pi * m / n) ** 2 / (dx * dx)
        self.delta = delta
        self._tau = None
        self._fac = None

    def __call__(self, q: np.ndarray, tau: float) -> np.ndarray:
        if self.delta == 0.0 or tau == 0.0:
            return q
        if tau != self._tau:
            a = 0.5 * tau * self.delta * self.sym
            self._fac = (1.0 - a) / (1.0 + a)
            self._tau = tau
        return np.fft.irfft(self._fac * np.fft.rfft(q), n=q.size)


def _cell_speed(h, q, F):
    return float(np.max(np.abs(q / h) + np.sqrt(h) / F))


def _ssp_rk2(h, q, dt, F, dx, limiter, backend):
    """One SSP-RK2 step of the flux/source part; ``None`` on failure."""
    r1h, r1q, a1 = _kernels.explicit_rhs(h, q, F, dx, limiter, backend)
    if a1 < 0 or a1 * dt / dx > CFL_MAX:
        return None
    h1, q1 = h + dt * r1h, q + dt * r1q
    if np.any(h1 <= 0):
        return None
    r2h, r2q, a2 = _kernels.explicit_rhs(h1, q1, F, dx, limiter, backend)
    if a2 < 0 or a2 * dt / dx > CFL_MAX:
        return None
    hn = 0.5 * (h + h1 + dt * r2h)
    qn = 0.5 * (q + q1 + dt * r2q)
    if np.any(hn <= 0):
        return None
    return hn, qn


def simulate(params: PhysicalParams, state: SimState, t_end: float, *,
             output_times=None, cfl: float = CFL, limiter: str = "none",
             backend: str | None = None, max_steps: int = 10_000_000,
             fixed_dt: float | None = None, record_mass: bool = False) -> SimTrajectory:
    """Advance ``state`` to ``t_end`` (a copy is returned in the trajectory).

    The step is ``cfl * dx / max(|q/h| + sqrt(h)/F)``, shortened to land on
    every output time.  A step that loses positivity or exceeds the hard
    CFL bound is retried with half the step down to ``DT_FLOOR``.

    Raises
    ------
    RegimeError
        Non-positive initial depth.
    NumericalError
        ``"positivity loss"`` or a time step below the floor.
    """
    if not np.all(state.h > 0):
        raise RegimeError("positivity loss: initial depth must be positive")
    if limiter not in _kernels.LIMITERS:
        raise ValueError(f"unknown limiter {limiter!r}")
    F, dx = params.F, state.dx
    diff = _Diffusion(state.n_x, dx, params.delta)
    cur = state.copy()
    outs = sorted(set(float(t) for t in (output_times or [])) | {float(t_end)})
    outs = [t for t in outs if t >= cur.t - 1e-14]
    times, states, masses = [], [], []
    if outs and abs(outs[0] - cur.t) <= 1e-14:
        times.append(cur.t)
        states.append(cur.copy())
        outs = outs[1:]
    steps = 0
    h, q, t = cur.h, cur.q, cur.t
    for target in outs:
        while t < target - 1e-13 * max(1.0, abs(target)):
            if steps >= max_steps:
                raise NumericalError("step budget exhausted")
            dt = fixed_dt if fixed_dt is not None else cfl * dx / _cell_speed(h, q, F)
            dt = min(dt, target - t)
            while True:
                qh = diff(q, 0.5 * dt)
                out = _ssp_rk2(h, qh, dt, F, dx, limiter, backend)
                if out is not None:
                    break
                dt *= 0.5
                if dt < DT_FLOOR:
                    bad = np.any(h <= 0) or _kernels.explicit_rhs(h, qh, F, dx, limiter, backend)[2] < 0
                    raise NumericalError("positivity loss" if bad else
                                         "time step below floor (CFL cannot be met)")
            h, q = out[0], diff(out[1], 0.5 * dt)
            # landing exactly on the target avoids drift in the output times
            t = target if target - (t + dt) <= 1e-13 * max(1.0, abs(target)) else t + dt
            steps += 1
            if not np.all(np.isfinite(h)) or not np.all(np.isfinite(q)):
                raise NumericalError("non-finite state")
            if record_mass:
                masses.append(float(math.fsum(h) * dx))
        times.append(t)
        states.append(SimState(state.length, h.copy(), q.copy(), t))
    return SimTrajectory(times, states, steps, masses)


def uniform_state(length: float, n_x: int, h0: float = 1.0, q0: float = 1.0) -> SimState:
    return SimState(length, np.full(n_x, float(h0)), np.full(n_x, float(q0)))


# ---------------------------------------------------------------------------
# cell averages


def profile_cell_averages(profile: RollWaveProfile, n_x: int, periods: int = 1,
                          t: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Exact cell averages of ``(H, Q)(k x + omega t)`` on ``periods`` waves.

    Each Fourier mode of the interpolant is averaged analytically over the
    cell (a sinc factor), so there is no quadrature error.
    """
    n = profile.n
    k = profile.key.k
    dx = periods / k / n_x
    Hh = np.fft.fft(profile.H) / n
    m = core.wavenumbers(n).astype(float)
    Hh[n // 2] = 0.0
    x0 = np.arange(n_x) * dx
    # average of exp(2 pi i m (k x + omega t)) over [x0, x0 + dx]
    a = np.pi * m * k * dx
    sinc = np.where(a == 0, 1.0, np.sin(a) / np.where(a == 0, 1.0, a))
    phase = np.exp(2j * np.pi * np.outer(k * (x0 + 0.5 * dx) + profile.omega * t, m))
    h = (phase * (Hh * sinc)[None, :]).sum(axis=1).real
    return h, profile.c * h - profile.key.qbar


def gauss_cell_averages(fn, edges: np.ndarray, nodes: int = 4):
    """Cell averages of a vector-valued ``fn(x) -> (h, q)`` by Gauss-Legendre."""
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    h, q = fn(pts)
    h = (h.reshape(-1, nodes) * wg).sum(axis=1) / 2.0
    q = (q.reshape(-1, nodes) * wg).sum(axis=1) / 2.0
    return h, q


@dataclass(frozen=True)
class TransportReport:
    cells: list
    errors: list
    factors: list
    limiter: str
    t_end: float


def traveling_wave_convergence(profile: RollWaveProfile, cells=(256, 512, 1024),
                               t_end: float = 0.1, limiter: str = "none",
                               cfl: float = CFL, backend: str | None = None) -> TransportReport:
    """Transport one period of the exact wave and measure the sup error."""
    errs = []
    for n_x in cells:
        h0, q0 = profile_cell_averages(profile, n_x)
        st = SimState(1.0 / profile.key.k, h0, q0)
        traj = simulate(profile.params, st, t_end, cfl=cfl, limiter=limiter, backend=backend)
        he, qe = profile_cell_averages(profile, n_x, t=t_end)
        fin = traj.states[-1]
        errs.append(float(max(np.abs(fin.h - he).max(), np.abs(fin.q - qe).max())))
    factors = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    return TransportReport(list(cells), errs, factors, limiter, t_end)


# ---------------------------------------------------------------------------
# profile family and macro slices


class ProfileFamily:
    """Exact profiles for arbitrary ``(k, qbar)`` by continuation from solved ones."""

    def __init__(self, seed: RollWaveProfile, tol: float = 1e-11):
        self.params = seed.params
        self.seed = seed
        self.tol = tol
        self._cache: dict = {}
        self._solved = [seed]

    def at(self, k: float, qbar: float) -> RollWaveProfile:
        key = (round(float(k), 14), round(float(qbar), 14))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        near = min(self._solved, key=lambda p: (p.key.k - k) ** 2 + (p.key.qbar - qbar) ** 2)
        p = newton_profile(self.params, WaveKey(float(k), float(qbar)), near.H, near.c, self.tol)
        self._cache[key] = p
        self._solved.append(p)
        return p


@dataclass
class _Node:
    profile: RollWaveProfile
    dH: np.ndarray
    dQ: np.ndarray
    dc: np.ndarray
    dM: np.ndarray
    data: object = None
    la: object = None


class _Spectral:
    """Fourier derivatives on the macro grid of length ``length``."""

    def __init__(self, nX: int, length: float):
        m = core.wavenumbers(nX).astype(float)
        self.sym = 2j * np.pi * m / length
        self.sym[nX // 2] = 0.0

    def d(self, f: np.ndarray, axis: int = 0) -> np.ndarray:
        fh = np.fft.fft(f, axis=axis)
        shape = [1] * f.ndim
        shape[axis] = -1
        return np.fft.ifft(fh * self.sym.reshape(shape), axis=axis).real


def _theta_d(f: np.ndarray, order: int = 1) -> np.ndarray:
    """Derivatives in the fast variable along the last axis."""
    n = f.shape[-1]
    fh = np.fft.fft(f, axis=-1)
    return np.fft.ifft(fh * core._symbol(n, order)[None, :], axis=-1).real


@dataclass
class MacroSlice:
    """Exact local profiles along ``X`` at one slow time, with first corrector."""

    T: float
    X: np.ndarray
    length: float
    k: np.ndarray
    qbar: np.ndarray
    nodes: list
    k_T: np.ndarray
    q_T: np.ndarray
    k_X: np.ndarray
    q_X: np.ndarray
    H0: np.ndarray          # (nX, n) torus fields
    Q0: np.ndarray
    h1: np.ndarray | None = None
    q1: np.ndarray | None = None
    omega1: np.ndarray | None = None
    ramp: float = 0.0
    solvability: float = 0.0

    @property
    def c(self) -> np.ndarray:
        return np.array([nd.profile.c for nd in self.nodes])

    @property
    def omega(self) -> np.ndarray:
        return -self.k * self.c


def _nodes(family: ProfileFamily, k: np.ndarray, qbar: np.ndarray, order: int) -> list:
    out = []
    for kk, qq in zip(k, qbar):
        p = family.at(kk, qq)
        der = parameter_derivatives(p)
        av = averaged(p, der)
        nd = _Node(p, der.dH, profile_dQ(p, der), der.dc, av.dM)
        if order >= 1:
            nd.data = assemble_BT_BX(p, der)
            nd.la = linear_algebra(p)
        out.append(nd)
    return out


def whitham_rates(nodes: list, k: np.ndarray, qbar: np.ndarray, sp: _Spectral):
    """``d_T (k, qbar)`` from the exact conservation laws at one slice."""
    c = np.array([nd.profile.c for nd in nodes])
    M = np.array([nd.profile.H.mean() for nd in nodes])
    dM = np.array([nd.dM for nd in nodes])
    k_T = -sp.d(k * c)
    M_T = -sp.d(c * M - qbar)
    q_T = (M_T - dM[:, 0] * k_T) / dM[:, 1]
    return k_T, q_T


def build_slice(family: ProfileFamily, T: float, X: np.ndarray, length: float,
                k: np.ndarray, qbar: np.ndarray, order: int = 0) -> MacroSlice:
    """Torus fields at one slow time; ``order = 1`` adds ``(h1, q1, omega1)``."""
    k = np.asarray(k, dtype=float)
    qbar = np.asarray(qbar, dtype=float)
    sp = _Spectral(k.size, length)
    nodes = _nodes(family, k, qbar, order)
    k_T, q_T = whitham_rates(nodes, k, qbar, sp)
    k_X, q_X = sp.d(k), sp.d(qbar)
    H0 = np.stack([nd.profile.H for nd in nodes])
    Q0 = np.stack([nd.profile.Q for nd in nodes])
    sl = MacroSlice(T, np.asarray(X, dtype=float), length, k, qbar, nodes,
                    k_T, q_T, k_X, q_X, H0, Q0)
    if order >= 1:
        _first_corrector(sl)
    return sl


def _first_corrector(sl: MacroSlice) -> None:
    """``h1 = K R0``, ``omega1 = -p(R0)`` and ``q1`` from the mass balance."""
    h1, q1, w1 = [], [], []
    ramp = solv = 0.0
    for j, nd in enumerate(sl.nodes):
        p, la = nd.profile, nd.la
        dT = np.array([sl.k_T[j], sl.q_T[j]])
        dX = np.array([sl.k_X[j], sl.q_X[j]])
        R = nd.data.B_T.apply(dT) + nd.data.B_X.apply(dX)
        ramp = max(ramp, float(abs(R.ramp)))
        R0 = R.periodic
        om1 = -la.p(R0)
        rhs = R0 + om1 * la.A_om
        solv = max(solv, abs(la.p(rhs)) / max(np.abs(R0).max(), 1e-300))
        h = la.K(R0)
        f = nd.dH @ dT + nd.dQ @ dX
        If = core.antiderivative(f)
        ramp = max(ramp, abs(If.slope))
        kk, c = p.key.k, p.c
        q1.append(c * h - (If.periodic + om1 * p.H) / kk)
        h1.append(h)
        w1.append(om1)
    if ramp > RAMP_LIMIT:
        raise NumericalError(f"antiderivative convention mismatch in ansatz corrector: "
                             f"ramp {ramp:.2e} (macro fields not a Whitham solution?)")
    sl.h1, sl.q1, sl.omega1 = np.stack(h1), np.stack(q1), np.array(w1)
    sl.ramp, sl.solvability = ramp, solv


# ---------------------------------------------------------------------------
# torus residual


def _torus_fields(sl: MacroSlice, eps: float, order: int):
    h, q = sl.H0.copy(), sl.Q0.copy()
    if order >= 1:
        h = h + eps * sl.h1
        q = q + eps * sl.q1
    return h, q


def torus_residual(params: PhysicalParams, slices: tuple, tau: float, eps: float,
                   order: int) -> tuple[float, float]:
    """Sup-norm residual of both equations on the torus at the middle slice.

    ``slices = (minus, mid, plus)`` are the macro slices at ``T - tau``,
    ``T`` and ``T + tau``; slow time derivatives at fixed ``(theta, X)`` use
    a second-order centered difference, accurate for the leading fields
    up to ``O(tau^2)``.  Returns ``(r_mass, r_momentum)``.
    """
    lo, sl, hi = slices
    F, d = params.F, params.delta
    sp = _Spectral(sl.k.size, sl.length)
    h, q = _torus_fields(sl, eps, order)
    hm, qm = _torus_fields(lo, eps, order)
    hp, qp = _torus_fields(hi, eps, order)
    h_T = (hp - hm) / (2 * tau)
    q_T = (qp - qm) / (2 * tau)
    th_t = sl.omega.copy()
    if order >= 1:
        th_t = th_t + eps * sl.omega1
    th_x = sl.k
    h_th, q_th = _theta_d(h), _theta_d(q)
    q_thth = _theta_d(q, 2)
    h_X, q_X = sp.d(h), sp.d(q)
    q_thX = sp.d(q_th)
    q_XX = sp.d(q_X)
    Gh, Gq, Sh, Sq = flux_partials(h, q, F)
    G_th = Gh * h_th + Gq * q_th
    G_X = Gh * h_X + Gq * q_X
    S = h - q * q / (h * h)
    r1 = th_t[:, None] * h_th + eps * h_T + th_x[:, None] * q_th + eps * q_X
    lap = (th_x[:, None] ** 2 * q_thth + eps * sl.k_X[:, None] * q_th
           + 2 * eps * th_x[:, None] * q_thX + eps * eps * q_XX)
    r2 = (th_t[:, None] * q_th + eps * q_T + th_x[:, None] * G_th + eps * G_X
          - S - d * lap)
    return float(np.abs(r1).max()), float(np.abs(r2).max())


def _rk4_whitham(family: ProfileFamily, X, length, k, qbar, dT):
    sp = _Spectral(k.size, length)

    def rate(kk, qq):
        return whitham_rates(_nodes(family, kk, qq, 0), kk, qq, sp)

    a = rate(k, qbar)
    b = rate(k + 0.5 * dT * a[0], qbar + 0.5 * dT * a[1])
    c = rate(k + 0.5 * dT * b[0], qbar + 0.5 * dT * b[1])
    e = rate(k + dT * c[0], qbar + dT * c[1])
    return (k + dT / 6 * (a[0] + 2 * b[0] + 2 * c[0] + e[0]),
            qbar + dT / 6 * (a[1] + 2 * b[1] + 2 * c[1] + e[1]))


@dataclass(frozen=True)
class ResidualReport:
    order: int
    eps: list
    residual: list
    residual_mass: list
    residual_momentum: list
    slope: float
    ramp: float
    solvability: float

    def to_dict(self) -> dict:
        return dict(order=self.order, eps=self.eps, residual=self.residual,
                    residual_mass=self.residual_mass,
                    residual_momentum=self.residual_momentum, slope=self.slope,
                    ramp=self.ramp, solvability=self.solvability)


def fitted_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if lx.size < 2:
        return float("nan")
    return float(np.polyfit(lx, ly, 1)[0])


def residual_scaling(family: ProfileFamily, traj: WhithamTrajectory,
                     eps_list=(0.1, 0.05, 0.025), order: int = 0,
                     tau: float = 1e-3) -> ResidualReport:
    """Ansatz residual at ``t = 0`` for each ``eps`` and its fitted slope.

    The initial macro slice of ``traj`` is used; neighbouring slices at
    ``T = +/- tau`` come from an RK4 step of the exact Whitham system, so
    the slow time derivative of every torus field is available.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    X, L = traj.X, traj.length
    k0, q0 = traj.k[0], traj.qbar[0]
    km, qm = _rk4_whitham(family, X, L, k0, q0, -tau)
    kp, qp = _rk4_whitham(family, X, L, k0, q0, tau)
    slices = tuple(build_slice(family, T, X, L, kk, qq, order)
                   for T, kk, qq in ((-tau, km, qm), (0.0, k0, q0), (tau, kp, qp)))
    r1s, r2s, rs = [], [], []
    for eps in eps_list:
        a, b = torus_residual(family.params, slices, tau, eps, order)
        r1s.append(a)
        r2s.append(b)
        rs.append(max(a, b))
    mid = slices[1]
    return ResidualReport(order, [float(e) for e in eps_list], rs, r1s, r2s,
                          fitted_slope(eps_list, rs), mid.ramp, mid.solvability)


# ---------------------------------------------------------------------------
# physical-space ansatz


@dataclass
class ModulatedAnsatz:
    """Evaluator of the modulated wave train on the physical line.

    Built by :func:`build_ansatz`; ``slices`` are the macro slices at the
    trajectory times, ``Theta0`` the integrated anchor frequency at each.
    """

    params: PhysicalParams
    eps: float
    order: int
    length: float          # macro period; the physical domain is length / eps
    k_star: float
    omega_star: float
    slices: list
    Theta0: np.ndarray
    phi1: list
    anchor_phase: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def domain(self) -> float:
        return self.length / self.eps

    @property
    def times(self) -> np.ndarray:
        return np.array([s.T for s in self.slices]) / self.eps

    def _slice_index(self, t: float) -> int:
        T = self.eps * t
        Ts = np.array([s.T for s in self.slices])
        i = int(np.argmin(np.abs(Ts - T)))
        if abs(Ts[i] - T) > 1e-9 * max(1.0, abs(T)):
            raise ValueError(f"time {t} is not on the macro trajectory grid")
        return i

    def _coeffs(self, i: int):
        hit = self._cache.get(i)
        if hit is not None:
            return hit
        sl = self.slices[i]
        h, q = _torus_fields(sl, self.eps, self.order)
        nX, n = h.shape
        # Nyquist rows/columns dropped: fields are resolved far below them
        Ch = np.fft.fft2(h) / (nX * n)
        Cq = np.fft.fft2(q) / (nX * n)
        for C in (Ch, Cq):
            C[nX // 2, :] = 0.0
            C[:, n // 2] = 0.0
        sp = _Spectral(nX, sl.length)
        Kc = np.fft.fft(sl.k) / nX
        Kc[nX // 2] = 0.0
        kbar = Kc[0].real
        Kc = Kc.copy()
        Kc[0] = 0.0
        Pc = None
        if self.order >= 1 and self.phi1[i] is not None:
            Pc = np.fft.fft(self.phi1[i]) / nX
            Pc[nX // 2] = 0.0
        out = (Ch, Cq, kbar, Kc, Pc, sp)
        self._cache[i] = out
        return out

    @staticmethod
    def _macro_basis(X, nX, length):
        m = core.wavenumbers(nX).astype(float)
        return np.exp(2j * np.pi * np.outer(X, m) / length), m

    def phase(self, x, t: float) -> np.ndarray:
        """Fast phase ``theta(x, t)`` (exact leading-order wave count)."""
        i = self._slice_index(t)
        Ch, Cq, kbar, Kc, Pc, sp = self._coeffs(i)
        nX = Kc.size
        X = self.eps * np.asarray(x, dtype=float)
        E, m = self._macro_basis(X, nX, self.length)
        # periodic antiderivative of k - kbar, zero at X = 0
        nz = m != 0
        A = np.zeros(nX, dtype=complex)
        A[nz] = Kc[nz] / (2j * np.pi * m[nz] / self.length)
        integral = kbar * X + (E @ A).real - A.sum().real
        th = (self.Theta0[i] + integral) / self.eps
        if Pc is not None:
            th = th + (E @ Pc).real
        return th

    def wavenumber(self, x, t: float) -> np.ndarray:
        """``d theta / dx`` at ``(x, t)``."""
        i = self._slice_index(t)
        Ch, Cq, kbar, Kc, Pc, sp = self._coeffs(i)
        E, m = self._macro_basis(self.eps * np.asarray(x, dtype=float), Kc.size, self.length)
        kx = kbar + (E @ Kc).real
        if Pc is not None:
            kx = kx + self.eps * (E @ (Pc * 2j * np.pi * m / self.length)).real
        return kx

    # co-moving chart: s = k* x + omega* t
    def Y_phi(self, s, t: float) -> np.ndarray:
        x = (np.asarray(s, dtype=float) - self.omega_star * t) / self.k_star
        return self.phase(x, t)

    def X_phi(self, theta, t: float, tol: float = 1e-12, maxit: int = 50) -> np.ndarray:
        """Inverse of :meth:`Y_phi` by per-point Newton iteration."""
        theta = np.asarray(theta, dtype=float)
        x = (theta - self.phase(np.zeros(1), t)[0]) / self.k_star
        for _ in range(maxit):
            g = self.phase(x, t) - theta
            dx = g / self.wavenumber(x, t)
            x = x - dx
            if np.abs(dx).max() * self.k_star <= tol * max(1.0, np.abs(theta).max()):
                break
        else:
            raise NumericalError("Y^phi inversion did not converge")
        return self.k_star * x + self.omega_star * t

    def phi(self, theta, t: float) -> np.ndarray:
        """Phase shift ``phi = theta - X(theta, t)``."""
        return np.asarray(theta, dtype=float) - self.X_phi(theta, t)

    def phi_slope(self, t: float, samples: int = 2048) -> float:
        """``sup |d phi / d theta| = sup |1 - k*/k_local|``."""
        x = np.linspace(0.0, self.domain, samples, endpoint=False)
        return float(np.abs(1.0 - self.k_star / self.wavenumber(x, t)).max())

    def __call__(self, x, t: float):
        """Point values ``(h, q)`` at positions ``x`` and time ``t``."""
        i = self._slice_index(t)
        Ch, Cq, kbar, Kc, Pc, sp = self._coeffs(i)
        nX, n = Ch.shape
        x = np.asarray(x, dtype=float)
        th = self.phase(x, t)
        X = self.eps * x
        E, _ = self._macro_basis(X, nX, self.length)
        mth = core.wavenumbers(n).astype(float)
        Eth = np.exp(2j * np.pi * np.outer(np.mod(th, 1.0), mth))
        h = ((E @ Ch) * Eth).sum(axis=1).real
        q = ((E @ Cq) * Eth).sum(axis=1).real
        return h, q

    def naive(self, x, t: float):
        """Local profiles at the unmodulated phase ``k* x + omega* t``."""
        i = self._slice_index(t)
        Ch, Cq, kbar, Kc, Pc, sp = self._coeffs(i)
        nX, n = Ch.shape
        x = np.asarray(x, dtype=float)
        th = self.k_star * x + self.omega_star * t
        E, _ = self._macro_basis(self.eps * x, nX, self.length)
        mth = core.wavenumbers(n).astype(float)
        Eth = np.exp(2j * np.pi * np.outer(np.mod(th, 1.0), mth))
        return ((E @ Ch) * Eth).sum(axis=1).real, ((E @ Cq) * Eth).sum(axis=1).real

    def cell_averages(self, n_x: int, t: float, naive: bool = False):
        edges = np.linspace(0.0, self.domain, n_x + 1)
        fn = (lambda x: self.naive(x, t)) if naive else (lambda x: self(x, t))
        return gauss_cell_averages(fn, edges)


def build_ansatz(family: ProfileFamily, traj: WhithamTrajectory, eps: float,
                 order: int = 0, anchor_phase: bool = True,
                 T_max: float | None = None) -> ModulatedAnsatz:
    """Modulated wave train for the macro trajectory ``traj`` at scale ``eps``.

    ``anchor_phase=False`` freezes the global phase offset at zero, so the
    anchor point at ``X = 0`` moves with the unperturbed wave; the default
    integrates the local frequency there.

    Raises
    ------
    RegimeError
        ``"modulation amplitude too large for Y^phi"`` if the phase slope
        reaches ``PHASE_SLOPE_MAX``.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    if not 0 < eps <= 1:
        raise RegimeError("eps must lie in (0, 1]")
    idx = [i for i, T in enumerate(traj.T) if T_max is None or T <= T_max + 1e-12]
    slope = max(float(np.abs(1.0 - family.seed.key.k / np.asarray(traj.k[i])).max()) for i in idx)
    if slope >= PHASE_SLOPE_MAX:
        raise RegimeError("modulation amplitude too large for Y^phi")
    slices = [build_slice(family, float(traj.T[i]), traj.X, traj.length,
                          traj.k[i], traj.qbar[i], order) for i in idx]
    Ts = np.array([s.T for s in slices])
    k_star, omega_star = family.seed.key.k, family.seed.omega
    w0 = np.array([s.omega[0] for s in slices])
    if anchor_phase:
        Theta0 = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(Ts) * (w0[1:] + w0[:-1]))])
    else:
        Theta0 = omega_star * Ts
    phi1 = [None] * len(slices)
    if order >= 1:
        acc = np.zeros_like(slices[0].k)
        phi1[0] = acc.copy()
        for j in range(1, len(slices)):
            acc = acc + 0.5 * (Ts[j] - Ts[j - 1]) * (slices[j].omega1 + slices[j - 1].omega1)
            phi1[j] = acc.copy()
    return ModulatedAnsatz(family.params, float(eps), order, traj.length, k_star,
                           omega_star, slices, Theta0, phi1, anchor_phase)


# ---------------------------------------------------------------------------
# validation against direct simulation


@dataclass(frozen=True)
class ValidationRun:
    eps: float
    cells: int
    periods: int
    times: list
    errors: list
    naive_errors: list
    steps: int
    final: SimState | None = None

    @property
    def sup_error(self) -> float:
        return float(max(self.errors))

    @property
    def naive_sup_error(self) -> float:
        return float(max(self.naive_errors))


@dataclass(frozen=True)
class ErrorReport:
    eps: list
    sup_err: list
    naive_sup_err: list
    slope: float
    fixed_time: float
    fixed_time_err: list
    fixed_time_slope: float
    runs: list = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return dict(eps=self.eps, sup_err=self.sup_err, slope=self.slope,
                    naive_sup_err=self.naive_sup_err, fixed_time=self.fixed_time,
                    fixed_time_err=self.fixed_time_err,
                    fixed_time_slope=self.fixed_time_slope)


def planned_cells(traj: WhithamTrajectory, eps: float, n_per_period: int) -> tuple[int, int]:
    """``(periods, cells)`` of the physical domain for scale ``eps``."""
    waves = float(np.mean(traj.k[0])) * traj.length / eps
    periods = int(round(waves))
    if periods < 1 or abs(waves - periods) > 1e-6 * max(1.0, waves):
        raise RegimeError("domain must hold an integer number of waves: "
                          f"mean(k) * length / eps = {waves:.8g}")
    return periods, periods * n_per_period


def validate(family: ProfileFamily, traj: WhithamTrajectory, eps: float, T0: float, *,
             order: int = 0, n_per_period: int = 128, max_cells: int = MAX_CELLS,
             cfl: float = CFL, limiter: str = "none", backend: str | None = None,
             compare_every: int = 1, keep_times=()) -> ValidationRun:
    """Simulate from the ansatz and record the sup error over ``[0, T0/eps]``.

    Comparison times are the trajectory times ``T <= T0`` (divided by
    ``eps``), every ``compare_every``-th of them plus the last and any that
    match ``keep_times``.  Raises
    ``RegimeError("reduce 1/eps or resolution")`` when the grid would exceed
    ``max_cells``.
    """
    if n_per_period < 32:
        raise RegimeError("need at least 32 cells per period")
    periods, cells = planned_cells(traj, eps, n_per_period)
    if cells > max_cells:
        raise RegimeError(f"reduce 1/eps or resolution ({cells} cells > cap {max_cells})")
    if traj.T[-1] < T0 - 1e-12:
        raise RegimeError("Whitham trajectory shorter than T0")
    ans = build_ansatz(family, traj, eps, order, T_max=T0)
    times = [float(T) / eps for T in traj.T if T <= T0 + 1e-12]
    # comparisons are the expensive part; thin them but keep the endpoints
    keep = set(range(0, len(times), max(1, compare_every))) | {len(times) - 1}
    for tk in keep_times:
        keep |= {i for i, t in enumerate(times) if abs(t - tk) <= 1e-9 * max(1.0, tk)}
    keep = sorted(keep)
    times = [times[i] for i in keep]
    h0, q0 = ans.cell_averages(cells, 0.0)
    st = SimState(ans.domain, h0, q0)
    run = simulate(family.params, st, times[-1], output_times=times, cfl=cfl,
                   limiter=limiter, backend=backend)
    errs, naive = [], []
    for t, s in zip(run.times, run.states):
        ha, qa = ans.cell_averages(cells, t)
        hn, qn = ans.cell_averages(cells, t, naive=True)
        errs.append(float(max(np.abs(s.h - ha).max(), np.abs(s.q - qa).max())))
        naive.append(float(max(np.abs(s.h - hn).max(), np.abs(s.q - qn).max())))
    return ValidationRun(float(eps), cells, periods, list(run.times), errs, naive, run.steps,
                         run.states[-1])


def validate_sweep(family: ProfileFamily, traj: WhithamTrajectory,
                   eps_list=(0.1, 0.05, 0.025), T0: float = 0.01, **kw) -> ErrorReport:
    """Run :func:`validate` per ``eps``; also report the error at a common time.

    The common physical time is ``T0 / max(eps)``, the horizon of the
    coarsest scale; it lies on every run's output grid when the trajectory
    time step divides it.
    """
    t_fix = T0 / max(eps_list)
    runs = [validate(family, traj, e, T0, keep_times=(t_fix,), **kw) for e in eps_list]
    return summarize(eps_list, runs, T0)


def summarize(eps_list, runs: list, T0: float) -> ErrorReport:
    """Collect validation runs into an :class:`ErrorReport`."""
    t_fix = T0 / max(eps_list)
    fixed = []
    for r in runs:
        ts = np.array(r.times)
        i = int(np.argmin(np.abs(ts - t_fix)))
        if abs(ts[i] - t_fix) > 1e-9 * max(1.0, t_fix):
            raise RegimeError("common comparison time not on the trajectory grid; "
                              "choose a Whitham step dividing T0 * min(eps) / max(eps)")
        fixed.append(r.errors[i])
    sup = [r.sup_error for r in runs]
    return ErrorReport([float(e) for e in eps_list], sup, [r.naive_sup_error for r in runs],
                       fitted_slope(eps_list, sup), float(t_fix), fixed,
                       fitted_slope(eps_list, fixed), runs)


def sinusoidal_modulation(k_star: float, qbar_star: float, length: float, nX: int = 32,
                          amp_k: float = 0.02, amp_q: float = 0.02):
    """Smooth periodic macro data with mean wavenumber exactly ``k_star``."""
    X = np.arange(nX) * length / nX
    a = 2 * np.pi * X / length
    return X, k_star * (1 + amp_k * np.cos(a)), qbar_star * (1 + amp_q * np.sin(a))
