import subprocess
import sys

import numpy as np
import pytest

from sttgcn import _kernels_py, kernels

BACKENDS = kernels.available_backends()


def test_compiled_backend_is_built():
    # the repo ships a build step; a missing extension should be noticed, not silently tolerated
    assert "cython" in BACKENDS
    assert kernels.BACKEND == "cython"


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_jacobi_backends_agree(rng, name):
    m = rng.standard_normal((7, 7))
    sym = m + m.T
    w, v, sweeps = BACKENDS[name].jacobi_eigh(sym)
    w_ref, v_ref, sweeps_ref = _kernels_py.jacobi_eigh(sym)
    # the stopping test compares a rounding-level off-diagonal norm, so one extra sweep is allowed
    assert abs(sweeps - sweeps_ref) <= 1
    np.testing.assert_allclose(w, w_ref, atol=1e-12)
    np.testing.assert_allclose(v, v_ref, atol=1e-10)


@pytest.mark.parametrize("name", sorted(BACKENDS))
@pytest.mark.parametrize("order", ["C", "F"])
def test_batch_matmul_backends_agree(rng, name, order):
    a = np.array(rng.standard_normal((6, 3, 4)), order=order)
    b = np.array(rng.standard_normal((6, 4, 5)), order=order)
    np.testing.assert_allclose(BACKENDS[name].batch_matmul(a, b), np.matmul(a, b), atol=1e-12)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_batch_matmul_empty_and_broadcast_views(name):
    mod = BACKENDS[name]
    assert mod.batch_matmul(np.zeros((0, 2, 3)), np.zeros((0, 3, 2))).shape == (0, 2, 2)
    b = np.broadcast_to(np.eye(3), (4, 3, 3))
    a = np.ones((4, 2, 3))
    np.testing.assert_array_equal(mod.batch_matmul(a, b), a)


def test_pure_python_selected_by_environment():
    code = "from sttgcn import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"STTGCN_PURE_PYTHON": "1", "PATH": ""}, check=True)
    assert out.stdout.strip() == "python"
