"""Shared numeric substrate: parameters and Fourier collocation on [0, 1).

Periodic fields are plain 1-D numpy arrays sampled at ``y_i = i/n``.  All
derivatives, antiderivatives and means use the discrete Fourier
representation of the trigonometric interpolant.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import NumericalError, RegimeError


@dataclass(frozen=True)
class PhysicalParams:
    """Froude number ``F`` and viscosity ``delta`` of the flow."""

    F: float
    delta: float

    def __post_init__(self):
        if not np.isfinite(self.F) or self.F <= 2.0:
            raise RegimeError(f"outside roll-wave regime: F={self.F} must exceed 2")
        if not np.isfinite(self.delta) or self.delta < 0.0:
            raise RegimeError(f"viscosity must be non-negative, got {self.delta}")


@dataclass(frozen=True)
class WaveKey:
    """Wavenumber ``k`` and relative discharge ``qbar`` labelling a wave."""

    k: float
    qbar: float

    def __post_init__(self):
        if not np.isfinite(self.k) or self.k <= 0.0:
            raise RegimeError(f"wavenumber must be positive, got {self.k}")
        if not np.isfinite(self.qbar):
            raise RegimeError("qbar must be finite")


class Antiderivative(NamedTuple):
    """``I(f)(y) = slope * y + periodic(y)`` with ``periodic(0) = 0``."""

    slope: float
    periodic: np.ndarray

    def full(self) -> np.ndarray:
        """Samples of the (possibly non-periodic) antiderivative on the grid."""
        n = self.periodic.size
        return self.slope * grid(n) + self.periodic


def grid(n: int) -> np.ndarray:
    """Collocation points ``i/n``."""
    return np.arange(n) / n


def check_grid_size(n: int) -> None:
    if n < 16 or n & (n - 1):
        raise ValueError(f"grid size must be a power of two >= 16, got {n}")


def _check_finite(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f)
    if not np.all(np.isfinite(f)):
        raise NumericalError("non-finite field")
    return f


def wavenumbers(n: int) -> np.ndarray:
    """Integer Fourier indices in FFT order."""
    return np.fft.fftfreq(n, 1.0 / n)


def _symbol(n: int, order: int) -> np.ndarray:
    sym = (2j * np.pi * wavenumbers(n)) ** order
    if order % 2 == 1:
        # odd derivatives of the Nyquist cosine are not representable on the grid
        sym[n // 2] = 0.0
    return sym


def diff(f: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral derivative of a real or complex periodic field."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    f = _check_finite(f)
    out = np.fft.ifft(_symbol(f.size, order) * np.fft.fft(f))
    return out.real if np.isrealobj(f) else out


def mean(f: np.ndarray) -> float:
    """Grid mean, exact for band-limited fields."""
    return np.mean(f)


def antiderivative(f: np.ndarray) -> Antiderivative:
    """Antiderivative vanishing at ``y = 0``, split into ramp and periodic part."""
    f = _check_finite(f)
    n = f.size
    fh = np.fft.fft(f)
    m = wavenumbers(n)
    slope = fh[0] / n
    gh = np.zeros_like(fh)
    nz = m != 0
    gh[nz] = fh[nz] / (2j * np.pi * m[nz])
    gh[n // 2] = 0.0
    g = np.fft.ifft(gh)
    g = g - g[0]
    if np.isrealobj(f):
        return Antiderivative(float(slope.real), g.real)
    return Antiderivative(complex(slope), g)


@lru_cache(maxsize=16)
def _diff_matrix(n: int, order: int) -> np.ndarray:
    eye = np.eye(n)
    mat = np.fft.ifft(_symbol(n, order)[:, None] * np.fft.fft(eye, axis=0), axis=0).real
    mat.flags.writeable = False
    return mat


def diff_matrix(n: int, order: int) -> np.ndarray:
    """Dense collocation differentiation matrix (read-only, cached)."""
    check_grid_size(n)
    return _diff_matrix(n, order)


def interp_coeffs(f: np.ndarray) -> np.ndarray:
    """Fourier coefficients for :func:`interp_eval`; rows are fields."""
    f = np.atleast_2d(f)
    n = f.shape[-1]
    c = np.fft.fft(f, axis=-1) / n
    c[..., n // 2] *= 0.5
    return c


def interp_eval(coeffs: np.ndarray, y, real: bool = True) -> np.ndarray:
    """Evaluate trigonometric interpolants at arbitrary points ``y``.

    Returns an array of shape ``y.shape + (nfields,)``.  The Nyquist term is
    split symmetrically so the interpolant of real samples is real.
    """
    n = coeffs.shape[-1]
    m = wavenumbers(n)
    y = np.asarray(y, dtype=float)
    ph = np.exp(2j * np.pi * np.multiply.outer(y, m))
    out = ph @ coeffs.T
    out = out + np.multiply.outer(np.exp(1j * np.pi * n * y), coeffs[:, n // 2])
    return out.real if real else out


def resample(f: np.ndarray, n_new: int) -> np.ndarray:
    """Spectral resampling of a real periodic field to ``n_new`` points."""
    if n_new == f.size:
        return f.copy()
    return interp_eval(interp_coeffs(f), grid(n_new))[:, 0]


def parseval_energy(f: np.ndarray) -> tuple[float, float]:
    """Physical-space and Fourier-space mean energies (equal by Parseval)."""
    n = f.size
    fh = np.fft.fft(f) / n
    return float(np.sum(np.abs(f) ** 2) / n), float(np.sum(np.abs(fh) ** 2))
