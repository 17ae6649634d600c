"""Backend selection for the hot kernels.

The compiled Cython module is used when it was built and importable;
otherwise the numpy fallback is used. Set ``STTGCN_PURE_PYTHON=1`` to
force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("STTGCN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def available_backends():
    backends = {"python": _kernels_py}
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        backends["cython"] = _compiled
    return backends


def jacobi_eigh(a, tol=1e-15, max_sweeps=60):
    """Eigenpairs of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors, sweeps)`` unsorted; column ``i``
    of ``eigenvectors`` pairs with ``eigenvalues[i]``.
    """
    return _impl.jacobi_eigh(a, tol, max_sweeps)


def batch_matmul(a, b):
    """Slice-wise product ``out[k] = a[k] @ b[k]``.

    numpy's stacked matmul is already compiled and matches the loop kernel
    on C-ordered stacks, so the loop kernel only takes Fortran-ordered ones,
    where matmul falls off its fast path.
    """
    if BACKEND == "cython" and np.isfortran(a):
        return _impl.batch_matmul(a, b)
    return _kernels_py.batch_matmul(a, b)
