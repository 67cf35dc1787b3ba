"""Viscous periodic roll-wave profiles and the linear algebra around them.

A profile is a 1-periodic solution ``H(y)`` of

    k c^2 H' + delta k^2 c H'' - k G(H, Q)' + S(H, Q) = 0,   Q = c H - qbar,

with ``G = Q^2/H + H^2/(2F^2)`` and ``S = H - Q^2/H^2``.  The translation
freedom is removed by requiring ``H(0) = mean(H)``.

The linearized operator ``L``, its adjoint null vector, the projectors
``p``/``Pi`` and the pseudo-inverse ``K = L^{-1} Pi`` are assembled densely on
the collocation grid.  Inner products are grid means, so the discrete
adjoint of a matrix is its transpose.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import core
from .core import PhysicalParams, WaveKey
from .dressler import wave_for_wavenumber
from .errors import NumericalError, RegimeError

KERNEL_RATIO = 1e6
AMPLITUDE_FLOOR = 1e-6


# ---------------------------------------------------------------------------
# flux functions and their partial derivatives


def flux_G(H, Q, F):
    return Q * Q / H + H * H / (2.0 * F * F)


def source_S(H, Q):
    return H - Q * Q / (H * H)


def flux_partials(H, Q, F):
    """Return ``(G_h, G_q, S_h, S_q)`` evaluated pointwise."""
    Gh = -Q * Q / (H * H) + H / (F * F)
    Gq = 2.0 * Q / H
    Sh = 1.0 + 2.0 * Q * Q / H**3
    Sq = -2.0 * Q / (H * H)
    return Gh, Gq, Sh, Sq


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class RollWaveProfile:
    """Converged profile with its wave constants."""

    params: PhysicalParams
    key: WaveKey
    c: float
    H: np.ndarray
    residual: float = 0.0

    @property
    def n(self) -> int:
        return self.H.size

    @property
    def Q(self) -> np.ndarray:
        return self.c * self.H - self.key.qbar

    @property
    def omega(self) -> float:
        return -self.key.k * self.c

    @property
    def period(self) -> float:
        return 1.0 / self.key.k

    @property
    def amplitude(self) -> float:
        return float(self.H.max() - self.H.min())

    def to_json(self) -> str:
        data = dict(F=self.params.F, delta=self.params.delta, k=self.key.k,
                    qbar=self.key.qbar, c=self.c, omega=self.omega, n=self.n,
                    H=self.H.tolist(), Q=self.Q.tolist(), residual=self.residual,
                    normalization="H0_eq_mean")
        return json.dumps(data)

    @classmethod
    def from_json(cls, text: str) -> "RollWaveProfile":
        d = json.loads(text)
        if d.get("normalization") != "H0_eq_mean":
            raise ValueError("unsupported profile normalization")
        return cls(PhysicalParams(d["F"], d["delta"]), WaveKey(d["k"], d["qbar"]),
                   d["c"], np.array(d["H"], dtype=float), d["residual"])


@dataclass(frozen=True)
class LinearizedOperator:
    """Dense collocation matrix of ``L`` at a profile."""

    profile: RollWaveProfile
    matrix: np.ndarray

    def __call__(self, f: np.ndarray) -> np.ndarray:
        return self.matrix @ f

    def adjoint(self, g: np.ndarray) -> np.ndarray:
        return self.matrix.T @ g


@dataclass(frozen=True)
class ParameterDerivatives:
    """Derivatives of ``(H, c, omega)`` along the unit directions ``(k, qbar)``.

    ``dH`` has shape ``(n, 2)``; column 0 is ``d/dk``, column 1 ``d/dqbar``.
    """

    dH: np.ndarray
    dc: np.ndarray
    domega: np.ndarray


@dataclass(frozen=True)
class AveragedQuantities:
    M: float
    N: float
    omega: float
    c: float
    dM: np.ndarray
    dN: np.ndarray
    domega: np.ndarray
    dc: np.ndarray
    evolution_ok: bool
    cparam_ok: bool
    threshold: float = 1e-8


# ---------------------------------------------------------------------------
# residual and Jacobian


def _ops(n):
    return core.diff_matrix(n, 1), core.diff_matrix(n, 2)


def profile_residual(H, c, k, qbar, F, delta) -> np.ndarray:
    """Collocated profile residual (spectral derivatives via FFT)."""
    Q = c * H - qbar
    return (k * c * c * core.diff(H, 1) + delta * k * k * c * core.diff(H, 2)
            - k * core.diff(flux_G(H, Q, F), 1) + source_S(H, Q))


def _jacobian(H, c, k, qbar, F, delta):
    n = H.size
    D1, D2 = _ops(n)
    Q = c * H - qbar
    Gh, Gq, Sh, Sq = flux_partials(H, Q, F)
    J = k * c * c * D1 + delta * k * k * c * D2 - k * D1 * (Gh + c * Gq)[None, :]
    J[np.diag_indices(n)] += Sh + c * Sq
    # derivative in c at fixed H (Q depends on c)
    jc = 2 * k * c * (D1 @ H) + delta * k * k * (D2 @ H) - k * D1 @ (Gq * H) + Sq * H
    return J, jc


def _bordered(J, col):
    n = J.shape[0]
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = J
    A[:n, n] = col
    A[n, :n] = -1.0 / n
    A[n, 0] += 1.0
    return A


def _full_residual(H, c, key, params):
    r = profile_residual(H, c, key.k, key.qbar, params.F, params.delta)
    return np.concatenate([r, [H[0] - H.mean()]])


# ---------------------------------------------------------------------------
# seeds


def _rotate_to_mean_crossing(H):
    """Shift samples so that index 0 sits where H crosses its mean upward."""
    s = H - H.mean()
    up = np.nonzero((s[:-1] < 0) & (s[1:] >= 0))[0]
    i = up[0] + 1 if up.size else int(np.argmin(np.abs(s)))
    # pick whichever neighbour is closer to the mean
    if abs(s[i - 1]) < abs(s[i]):
        i -= 1
    return np.roll(H, -i)


def dressler_seed(params: PhysicalParams, key: WaveKey, n: int, width: float | None = None):
    """Smoothed inviscid wave at the same ``(k, qbar)`` as a Newton seed.

    ``width`` is the Gaussian Fourier filter length in ``y``; by default it is
    matched to the viscous layer thickness ``~5 delta k``.
    """
    w = wave_for_wavenumber(params.F, key.qbar, key.k)
    if width is None:
        width = 5.0 * params.delta * key.k
    y = core.grid(n)
    # resolve the shock: sample on a fine grid before filtering
    nf = max(4 * n, 1024)
    hf = w.sample(core.grid(nf))
    m = core.wavenumbers(nf)
    hh = np.fft.fft(hf) * np.exp(-(m * width) ** 2)
    H = np.real(np.fft.ifft(hh))[:: nf // n][: y.size]
    return _rotate_to_mean_crossing(H), w.c_star


def cosine_seed(mean_height: float, amplitude: float, c: float, n: int):
    y = core.grid(n)
    return mean_height * (1.0 + amplitude * np.sin(2 * np.pi * y)), c


# ---------------------------------------------------------------------------
# Newton solver


def newton_profile(params: PhysicalParams, key: WaveKey, H0: np.ndarray, c0: float,
                   tol: float = 1e-10, maxit: int = 60,
                   amplitude_floor: float = AMPLITUDE_FLOOR) -> RollWaveProfile:
    """Damped Newton on ``(H, c)`` with the normalization ``H(0) = mean(H)``."""
    if params.delta <= 0:
        raise RegimeError("viscous profiles need delta > 0")
    H, c = np.array(H0, dtype=float), float(c0)
    n = H.size
    core.check_grid_size(n)
    r = _full_residual(H, c, key, params)
    for _ in range(maxit):
        err = np.abs(r).max()
        if err < tol:
            break
        J, jc = _jacobian(H, c, key.k, key.qbar, params.F, params.delta)
        A = _bordered(J, jc)
        try:
            lu = linalg.lu_factor(A, check_finite=True)
        except (ValueError, linalg.LinAlgError) as exc:
            raise NumericalError("degenerate parametrization point") from exc
        step = linalg.lu_solve(lu, -r)
        if not np.all(np.isfinite(step)):
            raise NumericalError("degenerate parametrization point")
        lam, norm0 = 1.0, np.linalg.norm(r)
        while True:
            Hn, cn = H + lam * step[:n], c + lam * step[n]
            if np.all(Hn > 0):
                rn = _full_residual(Hn, cn, key, params)
                if np.linalg.norm(rn) < (1 - 0.25 * lam) * norm0 or np.abs(rn).max() < tol:
                    break
            lam *= 0.5
            if lam < 1e-4:
                if not np.all(Hn > 0):
                    raise NumericalError("loss of positivity")
                raise NumericalError("no convergence (try continuation)")
        H, c, r = Hn, cn, rn
    else:
        raise NumericalError(f"no convergence (try continuation): residual {np.abs(r).max():.3e}")
    if H.max() - H.min() < amplitude_floor * H.mean():
        raise NumericalError("zero-amplitude solution (constant state), not a roll-wave")
    return RollWaveProfile(params, key, c, H, float(np.abs(r).max()))


def solve_profile(params: PhysicalParams, key: WaveKey, init="dressler", n: int = 128,
                  tol: float = 1e-10, maxit: int = 60) -> RollWaveProfile:
    """Solve for the profile at ``(k, qbar)``.

    ``init`` is a converged :class:`RollWaveProfile` (resampled if needed),
    the string ``"dressler"``, or a tuple ``(H, c)``.  The Dressler seed is
    retried with several smoothing widths since a poor width lets Newton fall
    onto the constant state.
    """
    if isinstance(init, RollWaveProfile):
        H0 = init.H if init.n == n else core.resample(init.H, n)
        return newton_profile(params, key, _rotate_to_mean_crossing(H0), init.c, tol, maxit)
    if isinstance(init, tuple):
        return newton_profile(params, key, init[0], init[1], tol, maxit)
    if init != "dressler":
        raise ValueError(f"unknown seed {init!r}")
    base = 5.0 * params.delta * key.k
    last = None
    for factor in (1.0, 2.0, 0.5, 4.0, 0.25):
        H0, c0 = dressler_seed(params, key, n, factor * base)
        try:
            return newton_profile(params, key, H0, c0, tol, maxit)
        except NumericalError as exc:
            last = exc
    raise NumericalError(f"no convergence from Dressler seeds: {last}")


def resolution_tail(H: np.ndarray) -> float:
    """Largest Fourier magnitude above ``n/3`` relative to the first harmonic."""
    n = H.size
    a = np.abs(np.fft.fft(H))
    m = np.abs(core.wavenumbers(n))
    return float(a[m > n / 3].max() / a[1])


def continue_in_delta(params: PhysicalParams, key: WaveKey, targets, n0: int = 128,
                      tol: float = 1e-10, tail_tol: float = 1e-11, n_max: int = 4096,
                      start: RollWaveProfile | None = None):
    """Natural continuation in ``delta`` towards each value in ``targets``.

    Steps are geometric (factor 1/2); the grid doubles whenever the spectral
    tail exceeds ``tail_tol``.  Returns the profiles at the targets.
    """
    targets = sorted(targets, reverse=True)
    prof = start if start is not None else solve_profile(
        PhysicalParams(params.F, targets[0]), key, "dressler", n0, tol)
    out = []
    for target in targets:
        while True:
            d = max(prof.params.delta * 0.5, target) if prof.params.delta > target else target
            n = prof.n
            cand = solve_profile(PhysicalParams(params.F, d), key, prof, n, tol)
            while resolution_tail(cand.H) > tail_tol and n < n_max:
                n *= 2
                cand = solve_profile(PhysicalParams(params.F, d), key, cand, n, tol)
            prof = cand
            if d == target:
                break
        out.append(prof)
    return out


# ---------------------------------------------------------------------------
# linear machinery


def dG_matrices(profile: RollWaveProfile):
    """Matrices of ``d_h calG`` and ``d_q calG`` acting on periodic fields."""
    n, k, F, d = profile.n, profile.key.k, profile.params.F, profile.params.delta
    D1, D2 = _ops(n)
    Gh, Gq, Sh, Sq = flux_partials(profile.H, profile.Q, F)
    Ah = -k * D1 * Gh[None, :] + np.diag(Sh)
    Aq = d * k * k * D2 - k * D1 * Gq[None, :] + np.diag(Sq)
    return Ah, Aq


def linearize(profile: RollWaveProfile) -> LinearizedOperator:
    J, _ = _jacobian(profile.H, profile.c, profile.key.k, profile.key.qbar,
                     profile.params.F, profile.params.delta)
    J.flags.writeable = False
    return LinearizedOperator(profile, J)


def source_terms(profile: RollWaveProfile) -> dict:
    """Fields ``A^omega``, ``A^qbar``, ``A^k`` and ``hat A^k``."""
    H, Q, c, k, d = profile.H, profile.Q, profile.c, profile.key.k, profile.params.delta
    _, Aq = dG_matrices(profile)
    Hp = core.diff(H, 1)
    dk_calG = 2 * d * k * core.diff(Q, 2) - core.diff(flux_G(H, Q, profile.params.F), 1)
    A_om = 2 * c * Hp + (Aq @ H) / k
    A_q = Aq @ np.ones_like(H)
    A_k_hat = -c * c * Hp - dk_calG
    return {"omega": A_om, "qbar": A_q, "k": A_k_hat + c * A_om, "k_hat": A_k_hat}


def _two_smallest_sv(A):
    s = linalg.svdvals(A)
    return s[-2], s[-1]


def kernel_ratio(profile: RollWaveProfile) -> float:
    s2, s1 = _two_smallest_sv(linearize(profile).matrix)
    return s2 / max(s1, np.finfo(float).tiny)


@dataclass(frozen=True)
class ProfileLinearAlgebra:
    """Cached ``L``, ``H~``, ``A^omega`` and an LU of the bordered operator."""

    profile: RollWaveProfile
    L: np.ndarray
    H_adj: np.ndarray
    A_om: np.ndarray
    sources: dict
    _lu: tuple = field(repr=False)

    def p(self, f: np.ndarray) -> float:
        return np.mean(self.H_adj * f) / np.mean(self.H_adj * self.A_om)

    def Pi(self, f: np.ndarray) -> np.ndarray:
        return f - self.p(f) * self.A_om

    def K(self, f: np.ndarray) -> np.ndarray:
        """``h`` with ``L h = Pi f`` and ``<H~; h> = 0``."""
        n = self.profile.n
        rhs = np.concatenate([f, [0.0]])
        return linalg.lu_solve(self._lu, rhs)[:n]


def adjoint_null(profile: RollWaveProfile, ratio: float = KERNEL_RATIO) -> np.ndarray:
    """Null vector of the adjoint normalized by ``<H~; H'> = 1``."""
    L = linearize(profile).matrix
    _, s, vh = linalg.svd(L.T)
    if s[-2] < ratio * s[-1]:
        raise NumericalError("Jordan structure violated at l=0: kernel of L is not one-dimensional")
    v = vh[-1]
    return v / np.mean(v * core.diff(profile.H, 1))


def linear_algebra(profile: RollWaveProfile, ratio: float = KERNEL_RATIO) -> ProfileLinearAlgebra:
    L = linearize(profile).matrix
    Ht = adjoint_null(profile, ratio)
    src = source_terms(profile)
    A_om = src["omega"]
    denom = np.mean(Ht * A_om)
    if abs(denom) < 1e-10 * np.linalg.norm(Ht) * np.linalg.norm(A_om) / profile.n:
        raise NumericalError("A^omega in range: parametrization assumption fails")
    n = profile.n
    B = np.zeros((n + 1, n + 1))
    B[:n, :n] = L
    B[:n, n] = A_om
    B[n, :n] = Ht / n
    lu = linalg.lu_factor(B)
    return ProfileLinearAlgebra(profile, L, Ht, A_om, src, lu)


def projectors(profile: RollWaveProfile):
    la = linear_algebra(profile)
    return la.p, la.Pi


def pseudo_inverse(profile: RollWaveProfile, f: np.ndarray) -> np.ndarray:
    return linear_algebra(profile).K(f)


def parameter_derivatives(profile: RollWaveProfile) -> ParameterDerivatives:
    """Linearized-solve derivatives of ``(H, c, omega)`` in ``(k, qbar)``.

    Differentiating the profile equation gives
    ``L dH + dR/dc dc = -dR/dk`` (resp. ``-dR/dqbar``) together with the
    differentiated normalization ``dH(0) = mean(dH)``.
    """
    H, c, k, qbar = profile.H, profile.c, profile.key.k, profile.key.qbar
    F, d = profile.params.F, profile.params.delta
    n = profile.n
    J, jc = _jacobian(H, c, k, qbar, F, d)
    src = source_terms(profile)
    R_k = -src["k_hat"]
    R_q = -src["qbar"]
    A = _bordered(J, jc)
    rhs = np.zeros((n + 1, 2))
    rhs[:n, 0] = -R_k
    rhs[:n, 1] = -R_q
    sol = linalg.solve(A, rhs)
    dH, dc = sol[:n], sol[n]
    domega = np.array([-c - k * dc[0], -k * dc[1]])
    return ParameterDerivatives(dH, dc, domega)


def parameter_derivatives_fd(profile: RollWaveProfile, step: float = 1e-5,
                             tol: float | None = None) -> ParameterDerivatives:
    """Centered finite differences of :func:`solve_profile` (cross-check)."""
    k, qbar = profile.key.k, profile.key.qbar
    tol = profile.residual * 10 + 1e-12 if tol is None else tol
    tol = max(tol, 1e-10)
    cols_H, cols_c = [], []
    for dk, dq in ((step, 0.0), (0.0, step)):
        sols = []
        for s in (1, -1):
            key = WaveKey(k + s * dk, qbar + s * dq)
            sols.append(newton_profile(profile.params, key, profile.H, profile.c, tol))
        cols_H.append((sols[0].H - sols[1].H) / (2 * step))
        cols_c.append((sols[0].c - sols[1].c) / (2 * step))
    dH = np.stack(cols_H, axis=1)
    dc = np.array(cols_c)
    domega = np.array([-profile.c - k * dc[0], -k * dc[1]])
    return ParameterDerivatives(dH, dc, domega)


def check_derivatives(profile: RollWaveProfile, rel: float = 1e-4) -> float:
    """Relative mismatch between linearized and finite-difference routes."""
    a = parameter_derivatives(profile)
    b = parameter_derivatives_fd(profile)
    err = max(np.abs(a.dc - b.dc).max() / np.abs(a.dc).max(),
              np.abs(a.dH - b.dH).max() / np.abs(a.dH).max())
    if err > rel:
        raise NumericalError(f"derivative inconsistency (grid too coarse?): {err:.2e}")
    return err


def profile_dQ(profile: RollWaveProfile, der: ParameterDerivatives) -> np.ndarray:
    """Derivatives of ``Q = c H - qbar`` along ``(k, qbar)``, shape ``(n, 2)``."""
    dQ = profile.c * der.dH + np.outer(profile.H, der.dc)
    dQ[:, 1] -= 1.0
    return dQ


def averaged(profile: RollWaveProfile, der: ParameterDerivatives | None = None,
             threshold: float = 1e-8) -> AveragedQuantities:
    if der is None:
        der = parameter_derivatives(profile)
    M = float(np.mean(profile.H))
    c = profile.c
    dM = der.dH.mean(axis=0)
    dN = der.dc * M + c * dM - np.array([0.0, 1.0])
    return AveragedQuantities(
        M=M, N=c * M - profile.key.qbar, omega=profile.omega, c=c, dM=dM, dN=dN,
        domega=der.domega, dc=der.dc,
        evolution_ok=bool(abs(dM[1]) > threshold),
        cparam_ok=bool(abs(der.dc[0]) > threshold and abs(der.dc[1]) > threshold),
        threshold=threshold)
