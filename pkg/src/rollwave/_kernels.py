"""Finite-volume flux kernels with a numba and a pure-numpy backend.

The backend is chosen once at import time:

* ``ROLLWAVE_BACKEND=numpy`` or ``ROLLWAVE_NO_NUMBA=1`` forces numpy;
* ``ROLLWAVE_BACKEND=numba`` requires numba (import error otherwise);
* by default numba is used when importable.

Both backends evaluate the same arithmetic in the same order per cell, so
results agree to round-off.
"""
from __future__ import annotations

import os

import numpy as np

LIMITERS = {"none": 0, "minmod": 1, "mc": 2, "vanleer": 3}


def _want_numba() -> bool:
    backend = os.environ.get("ROLLWAVE_BACKEND", "").strip().lower()
    if os.environ.get("ROLLWAVE_NO_NUMBA", "").strip() not in ("", "0"):
        return False
    if backend == "numpy":
        return False
    if backend not in ("", "numba"):
        raise ValueError(f"unknown ROLLWAVE_BACKEND {backend!r}")
    try:
        import numba  # noqa: F401
    except ImportError:
        if backend == "numba":
            raise
        return False
    return True


# ---------------------------------------------------------------------------
# numpy backend


def _limit_np(a, b, code):
    if code == 0:
        return 0.5 * (a + b)
    if code == 1:
        return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)
    if code == 2:
        m = np.minimum(np.minimum(2 * np.abs(a), 2 * np.abs(b)), 0.5 * np.abs(a + b))
        return np.where(a * b > 0, np.sign(a) * m, 0.0)
    den = np.where(a + b == 0, 1.0, a + b)
    return np.where(a * b > 0, 2 * a * b / den, 0.0)


def _rhs_numpy(h, q, F, dx, code):
    invF2 = 1.0 / (F * F)
    dh_m = h - np.roll(h, 1)
    dh_p = np.roll(h, -1) - h
    dq_m = q - np.roll(q, 1)
    dq_p = np.roll(q, -1) - q
    sh = _limit_np(dh_m, dh_p, code)
    sq = _limit_np(dq_m, dq_p, code)
    # interface i+1/2: left state from cell i, right state from cell i+1
    hL, qL = h + 0.5 * sh, q + 0.5 * sq
    hR, qR = np.roll(h - 0.5 * sh, -1), np.roll(q - 0.5 * sq, -1)
    if np.any(hL <= 0) or np.any(hR <= 0):
        return None, None, -1.0
    uL, uR = qL / hL, qR / hR
    aL = np.abs(uL) + np.sqrt(hL * invF2)
    aR = np.abs(uR) + np.sqrt(hR * invF2)
    a = np.maximum(aL, aR)
    f1 = 0.5 * (qL + qR) - 0.5 * a * (hR - hL)
    GL = qL * uL + 0.5 * hL * hL * invF2
    GR = qR * uR + 0.5 * hR * hR * invF2
    f2 = 0.5 * (GL + GR) - 0.5 * a * (qR - qL)
    rh = -(f1 - np.roll(f1, 1)) / dx
    rq = -(f2 - np.roll(f2, 1)) / dx + (h - q * q / (h * h))
    return rh, rq, float(a.max())


# ---------------------------------------------------------------------------
# numba backend


def _make_numba():
    from numba import njit

    @njit(cache=True, inline="always")
    def limit(a, b, code):
        if code == 0:
            return 0.5 * (a + b)
        if a * b <= 0.0:
            return 0.0
        s = 1.0 if a > 0 else -1.0
        if code == 1:
            return s * min(abs(a), abs(b))
        if code == 2:
            return s * min(min(2 * abs(a), 2 * abs(b)), 0.5 * abs(a + b))
        return 2 * a * b / (a + b)

    @njit(cache=True)
    def rhs(h, q, F, dx, code):
        n = h.size
        invF2 = 1.0 / (F * F)
        sh = np.empty(n)
        sq = np.empty(n)
        for i in range(n):
            im = i - 1 if i > 0 else n - 1
            ip = i + 1 if i < n - 1 else 0
            sh[i] = limit(h[i] - h[im], h[ip] - h[i], code)
            sq[i] = limit(q[i] - q[im], q[ip] - q[i], code)
        f1 = np.empty(n)
        f2 = np.empty(n)
        amax = 0.0
        for i in range(n):
            ip = i + 1 if i < n - 1 else 0
            hL = h[i] + 0.5 * sh[i]
            qL = q[i] + 0.5 * sq[i]
            hR = h[ip] - 0.5 * sh[ip]
            qR = q[ip] - 0.5 * sq[ip]
            if hL <= 0.0 or hR <= 0.0:
                return f1, f2, -1.0
            uL = qL / hL
            uR = qR / hR
            aL = abs(uL) + np.sqrt(hL * invF2)
            aR = abs(uR) + np.sqrt(hR * invF2)
            a = max(aL, aR)
            amax = max(amax, a)
            f1[i] = 0.5 * (qL + qR) - 0.5 * a * (hR - hL)
            GL = qL * uL + 0.5 * hL * hL * invF2
            GR = qR * uR + 0.5 * hR * hR * invF2
            f2[i] = 0.5 * (GL + GR) - 0.5 * a * (qR - qL)
        rh = np.empty(n)
        rq = np.empty(n)
        for i in range(n):
            im = i - 1 if i > 0 else n - 1
            rh[i] = -(f1[i] - f1[im]) / dx
            rq[i] = -(f2[i] - f2[im]) / dx + (h[i] - q[i] * q[i] / (h[i] * h[i]))
        return rh, rq, amax

    return rhs


_NUMBA_RHS = None
BACKEND = "numba" if _want_numba() else "numpy"
if BACKEND == "numba":
    _NUMBA_RHS = _make_numba()


def explicit_rhs(h: np.ndarray, q: np.ndarray, F: float, dx: float, limiter: str = "mc",
                 backend: str | None = None):
    """Flux divergence plus source; returns ``(rh, rq, max_speed)``.

    ``max_speed < 0`` signals a non-positive reconstructed depth.
    """
    code = LIMITERS[limiter]
    use = backend or BACKEND
    if use == "numba":
        if _NUMBA_RHS is None:
            raise RuntimeError("numba backend unavailable")
        return _NUMBA_RHS(h, q, float(F), float(dx), code)
    return _rhs_numpy(h, q, F, dx, code)
