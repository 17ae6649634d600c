"""Dense 3-mode tensors: matricization, n-mode products and Tucker reconstruction.

Tensors are plain ``float64`` ndarrays of shape ``(I1, I2, I3)``. Their
canonical linear layout is first-index-fastest: element ``(i1, i2, i3)``
sits at offset ``i1 + I1*(i2 + I2*i3)`` of :func:`to_flat`. Modes are
1-based throughout, matching the usual tensor notation.
"""
import numpy as np

from . import kernels


class DataError(ValueError):
    """Input data is malformed or contains non-finite values."""


def _check_mode(mode):
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode!r}")


def as_tensor3(x, check_finite=True):
    """Coerce ``x`` to a float64 3-way array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"expected a 3-way tensor, got shape {x.shape}")
    if check_finite and not np.all(np.isfinite(x)):
        raise DataError("tensor contains non-finite values")
    return x


def to_flat(x):
    """Linear data in first-index-fastest order."""
    return np.ravel(as_tensor3(x, check_finite=False), order="F")


def from_flat(data, dims):
    data = np.asarray(data, dtype=np.float64).ravel()
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1 or data.size != dims[0] * dims[1] * dims[2]:
        raise ValueError(f"{data.size} values cannot fill a tensor of dims {dims}")
    return np.reshape(data, dims, order="F")


def as_mat(m, check_finite=True):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {m.shape}")
    if check_finite and not np.all(np.isfinite(m)):
        raise DataError("matrix contains non-finite values")
    return m


def unfold(x, mode):
    """Mode-``mode`` matricization with Kolda-Bader column ordering.

    Row index is ``i_mode``; the remaining indices form the column index in
    increasing mode order with the smaller mode varying fastest.
    """
    _check_mode(mode)
    x = as_tensor3(x, check_finite=False)
    return np.reshape(np.moveaxis(x, mode - 1, 0), (x.shape[mode - 1], -1), order="F")


def fold(m, mode, dims):
    """Inverse of :func:`unfold` for the given mode and tensor dims."""
    _check_mode(mode)
    m = as_mat(m, check_finite=False)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise ValueError(f"dims must have three entries, got {dims}")
    rest = [d for i, d in enumerate(dims) if i != mode - 1]
    if m.shape != (dims[mode - 1], rest[0] * rest[1]):
        raise ValueError(
            f"matrix of shape {m.shape} cannot fold into {dims} at mode {mode}"
        )
    moved = np.reshape(m, (dims[mode - 1], rest[0], rest[1]), order="F")
    return np.asfortranarray(np.moveaxis(moved, 0, mode - 1))


def mode_product(x, u, mode):
    """n-mode product ``x ×_mode u``; ``u`` has shape ``(J, I_mode)``."""
    _check_mode(mode)
    x = as_tensor3(x, check_finite=False)
    u = as_mat(u, check_finite=False)
    if u.shape[1] != x.shape[mode - 1]:
        raise ValueError(
            f"matrix with {u.shape[1]} columns cannot multiply mode {mode} "
            f"of size {x.shape[mode - 1]}"
        )
    # each branch equals fold(u @ unfold(x, mode)); the paths differ only in
    # how they keep BLAS on contiguous memory for C- or Fortran-ordered input
    n, d, t = x.shape
    j = u.shape[0]
    fortran = x.flags.f_contiguous and not x.flags.c_contiguous
    if mode == 1:
        if fortran or not x.flags.c_contiguous:
            return np.reshape(u @ np.reshape(x, (n, d * t), order="F"), (j, d, t), order="F")
        return np.reshape(u @ np.reshape(x, (n, d * t)), (j, d, t))
    if mode == 2:
        if fortran:
            return np.matmul(u, x.T).T
        return np.matmul(u, x)
    if fortran:
        return np.reshape(u @ np.reshape(x.T, (t, d * n)), (j, d, n)).T
    if x.flags.c_contiguous:
        return np.reshape(np.reshape(x, (n * d, t)) @ u.T, (n, d, j))
    return np.matmul(x, u.T)


def batch_mode3_product(a, b):
    """Node-batched product: ``result[k] = a[k] @ b[k]``.

    ``a`` is ``N×D×T`` and ``b`` is ``N×T×T2``; the result is ``N×D×T2``.
    """
    a = as_tensor3(a, check_finite=False)
    b = as_tensor3(b, check_finite=False)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"first dims differ: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[2] != b.shape[1]:
        raise ValueError(f"inner dims differ: {a.shape[2]} vs {b.shape[1]}")
    return kernels.batch_matmul(a, b)


def tucker_reconstruct(core, u1, u2, u3):
    """``core ×1 u1 ×2 u2 ×3 u3``."""
    core = as_tensor3(core, check_finite=False)
    for i, u in enumerate((u1, u2, u3)):
        if np.ndim(u) != 2 or np.shape(u)[1] != core.shape[i]:
            raise ValueError(
                f"factor {i + 1} of shape {np.shape(u)} does not match core dim {core.shape[i]}"
            )
    out = mode_product(core, u1, 1)
    out = mode_product(out, u2, 2)
    return mode_product(out, u3, 3)


def frobenius(x):
    return float(np.sqrt(np.sum(np.square(x))))
