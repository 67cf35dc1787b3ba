import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rollwave import _kernels

numba_only = pytest.mark.skipif(_kernels.BACKEND != "numba", reason="numba unavailable")


def _state(seed, n):
    r = np.random.default_rng(seed)
    x = np.arange(n) / n
    h = 1.0 + 0.3 * np.sin(2 * np.pi * x) + 0.05 * r.standard_normal(n)
    q = h * (1.0 + 0.2 * np.cos(2 * np.pi * x))
    return h, q


@numba_only
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([16, 64, 256]),
       st.sampled_from(sorted(_kernels.LIMITERS)))
def test_backends_agree(seed, n, limiter):
    h, q = _state(seed, n)
    a = _kernels.explicit_rhs(h, q, 2.5, 0.1, limiter, backend="numba")
    b = _kernels.explicit_rhs(h, q, 2.5, 0.1, limiter, backend="numpy")
    assert a[2] == pytest.approx(b[2], rel=1e-15)
    scale = np.abs(b[1]).max()
    assert np.abs(a[0] - b[0]).max() <= 1e-13 * scale
    assert np.abs(a[1] - b[1]).max() <= 1e-13 * scale


@pytest.mark.parametrize("backend", ["numpy", pytest.param("numba", marks=numba_only)])
def test_uniform_state_is_steady(backend):
    h = np.ones(32)
    rh, rq, a = _kernels.explicit_rhs(h, h.copy(), 2.5, 0.1, "mc", backend=backend)
    assert np.abs(rh).max() == 0.0 and np.abs(rq).max() == 0.0
    assert a == pytest.approx(1.0 + 1.0 / 2.5)


@pytest.mark.parametrize("backend", ["numpy", pytest.param("numba", marks=numba_only)])
def test_flux_telescopes(backend):
    h, q = _state(3, 128)
    rh, _, _ = _kernels.explicit_rhs(h, q, 3.0, 0.01, "none", backend=backend)
    assert abs(np.sum(rh)) < 1e-9


@pytest.mark.parametrize("backend", ["numpy", pytest.param("numba", marks=numba_only)])
def test_nonpositive_reconstruction_flagged(backend):
    h = np.ones(16)
    h[5] = 1e-3
    h[6] = 2.0
    _, _, a = _kernels.explicit_rhs(h, np.ones(16), 2.5, 0.1, "none", backend=backend)
    assert a < 0


def _backend_in_subprocess(env):
    code = "from rollwave import _kernels; print(_kernels.BACKEND)"
    full = {**os.environ, **env}
    out = subprocess.run([sys.executable, "-c", code], env=full, capture_output=True, text=True)
    return out.stdout.strip(), out.returncode


def test_env_selects_numpy():
    assert _backend_in_subprocess({"ROLLWAVE_NO_NUMBA": "1"})[0] == "numpy"
    assert _backend_in_subprocess({"ROLLWAVE_BACKEND": "numpy"})[0] == "numpy"
    assert _backend_in_subprocess({"ROLLWAVE_BACKEND": "fortran"})[1] != 0
