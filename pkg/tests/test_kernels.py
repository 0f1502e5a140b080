import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stc_dmt import kernels
from stc_dmt.kernels import python_backend

compiled = kernels.compiled_backend
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def _chol(seed, k):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(k, k + 2))
    return np.ascontiguousarray(np.linalg.cholesky(a @ a.T).T)


def _sorted(coords):
    return coords[np.lexsort(coords.T[::-1])]


def test_backend_flag():
    assert kernels.BACKEND in ("cython", "python")
    assert (kernels.BACKEND == "cython") == (compiled is not None)


def test_pure_python_env_switch():
    env = dict(os.environ, STC_DMT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import stc_dmt.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("seed", range(20))
def test_python_enumeration_on_identity_box(seed):
    k = 1 + seed % 4
    r = 1.0 + seed / 4
    count, coords = python_backend.fp_enumerate(np.eye(k), r * r, 10**6, True)
    grid = np.array(np.meshgrid(*[np.arange(-int(r), int(r) + 1)] * k, indexing="ij")).reshape(k, -1).T
    want = grid[np.sum(grid**2, axis=1) <= r * r]
    assert count == len(want)
    assert np.array_equal(_sorted(coords), _sorted(want))


@needs_compiled
@pytest.mark.parametrize("seed", range(30))
def test_enumeration_backends_agree(seed):
    k = 1 + seed % 6
    R = _chol(seed, k)
    radius_sq = float(np.random.default_rng(seed).uniform(1, 30))
    a = python_backend.fp_enumerate(R, radius_sq, 10**6, True)
    b = compiled.fp_enumerate(R, radius_sq, 10**6, True)
    assert a[0] == b[0]
    assert np.array_equal(_sorted(a[1]), _sorted(b[1]))
    assert compiled.fp_enumerate(R, radius_sq, 10**6, False)[0] == a[0]


@needs_compiled
def test_enumeration_cap_signal():
    R = np.eye(3)
    for backend in (python_backend, compiled):
        count, _ = backend.fp_enumerate(R, 100.0, 50, False)
        assert count == 51


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(1, 60), st.integers(1, 300), st.integers(0, 2**32 - 1))
def test_ml_argmin_matches_direct(k, n_words, b, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(b, k, k))
    Q = A @ A.transpose(0, 2, 1)
    z = rng.normal(size=(b, k))
    C = rng.integers(-3, 4, size=(n_words, k)).astype(float)
    metric = np.einsum("na,bam,nm->bn", C, Q, C) - 2 * z @ C.T
    want = np.argmin(metric, axis=1)
    for backend in filter(None, (python_backend, compiled)):
        got = backend.ml_argmin(Q, z, C)
        picked = metric[np.arange(b), got]
        # equal up to rounding; exact ties resolve to the smallest index
        assert np.all(picked <= metric[np.arange(b), want] + 1e-9 * (1 + np.abs(picked)))


def test_ml_argmin_ties_go_low():
    Q = np.eye(2)[None]
    z = np.zeros((1, 2))
    C = np.array([[1.0, 0], [-1.0, 0], [0, 1.0]])
    for backend in filter(None, (python_backend, compiled)):
        assert backend.ml_argmin(Q, z, C)[0] == 0


@needs_compiled
def test_ml_argmin_backends_agree_on_channel_data():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(5000, 8, 8))
    Q = A @ A.transpose(0, 2, 1)
    z = rng.normal(size=(5000, 8)) * 3
    C = rng.integers(-1, 2, size=(81, 8)).astype(float)
    assert np.array_equal(python_backend.ml_argmin(Q, z, C), compiled.ml_argmin(Q, z, C))


def test_ml_argmin_empty_batch():
    for backend in filter(None, (python_backend, compiled)):
        out = backend.ml_argmin(np.zeros((0, 2, 2)), np.zeros((0, 2)), np.ones((3, 2)))
        assert out.shape == (0,)
