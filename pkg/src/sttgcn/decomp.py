"""Truncated singular bases, HOSVD and HOOI Tucker decomposition."""
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .tensor import DataError, as_mat, as_tensor3, frobenius, mode_product, tucker_reconstruct, unfold

DEFAULT_MAX_ITER = 50
DEFAULT_TOL = 1e-7

RANK_EXPONENTS = {"full": 1.0, "sqrt": 1.0 / 2.0, "cbrt": 1.0 / 3.0}


@dataclass
class TuckerFactors:
    """Core tensor plus column-orthonormal spatial, feature and temporal factors."""

    core: np.ndarray
    uS: np.ndarray
    uF: np.ndarray
    uT: np.ndarray
    errors: tuple = field(default=())

    @property
    def ranks(self):
        return self.core.shape

    @property
    def factors(self):
        return (self.uS, self.uF, self.uT)

    def reconstruct(self):
        return tucker_reconstruct(self.core, self.uS, self.uF, self.uT)


def _fix_signs(u):
    # largest-magnitude entry of each column made positive; argmax picks the lowest row on ties
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def _top_eigvecs(gram, r, warm=None):
    # warm: eigenvectors from a previous, similar Gram matrix; rotating into that
    # basis first leaves Jacobi only a nearly diagonal matrix to clean up
    if warm is not None and warm.shape[0] == gram.shape[0]:
        w, v, _ = kernels.jacobi_eigh(warm.T @ gram @ warm)
        v = warm @ v
    else:
        w, v, _ = kernels.jacobi_eigh(gram)
    order = np.argsort(-w, kind="stable")
    return w[order[:r]], v[:, order[:r]], v[:, order]


def leading_singular_basis(m, r):
    """Orthonormal basis of the top-``r`` left singular subspace of ``m``.

    Singular vectors come from a Jacobi eigendecomposition of the smaller of
    the two Gram matrices. When ``m`` is tall the right vectors are mapped
    back through ``m``; this falls back to ``m mᵀ`` if the requested
    subspace is numerically rank deficient.
    """
    m = as_mat(m, check_finite=False)
    if not np.all(np.isfinite(m)):
        raise DataError("matrix contains non-finite values")
    rows, cols = m.shape
    if not isinstance(r, (int, np.integer)) or not 1 <= r <= min(rows, cols):
        raise ValueError(f"rank {r!r} out of range 1..{min(rows, cols)}")
    return _leading_basis(m, r)[0]


def _leading_basis(m, r, warm=None):
    # r may exceed cols here: the extra columns complete the basis from the null space of m mᵀ.
    # Returns the basis and the full eigenvector matrix usable as the next warm start.
    rows, cols = m.shape
    if rows > cols and r <= cols:
        w, v, full = _top_eigvecs(m.T @ m, r, warm)
        sigma = np.sqrt(np.clip(w, 0.0, None))
        if sigma[0] > 0.0 and sigma[-1] > 1e-8 * sigma[0]:
            u = (m @ v) / sigma
            u, _ = np.linalg.qr(u)
            return _fix_signs(u), full
    _, u, full = _top_eigvecs(m @ m.T, r, warm)
    return _fix_signs(u), full


def tucker_ranks(dims, rule):
    """Ranks ``ceil(I**s)`` per mode for a named rule or a numeric exponent."""
    s = RANK_EXPONENTS[rule] if isinstance(rule, str) else float(rule)
    out = []
    for d in dims:
        val = d ** s
        near = round(val)
        out.append(int(near) if abs(val - near) < 1e-9 else int(math.ceil(val)))
    return tuple(max(1, min(v, d)) for v, d in zip(out, dims))


def _check_ranks(shape, ranks):
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != 3:
        raise ValueError(f"need three ranks, got {ranks}")
    for i, (r, d) in enumerate(zip(ranks, shape)):
        if not 1 <= r <= d:
            raise ValueError(f"rank {r} for mode {i + 1} out of range 1..{d}")
    return ranks


def _project_except(x, factors, skip):
    y = x
    for mode, u in enumerate(factors, start=1):
        if mode != skip:
            y = mode_product(y, u.T, mode)
    return y


def _core(x, factors):
    return _project_except(x, factors, skip=None)


def hosvd(x, ranks):
    """Truncated HOSVD: leading basis of each unfolding, no iteration."""
    x = as_tensor3(x)
    ranks = _check_ranks(x.shape, ranks)
    factors = [_leading_basis(unfold(x, m), r)[0] for m, r in zip((1, 2, 3), ranks)]
    core = _core(x, factors)
    f = TuckerFactors(core, *factors)
    f.errors = (reconstruction_error(x, f),)
    return f


def reconstruction_error(x, f):
    """Relative Frobenius error ``||x - recon|| / ||x||`` (0 when ``x`` is 0)."""
    x = as_tensor3(x, check_finite=False)
    recon = f.reconstruct()
    if recon.shape != x.shape:
        raise ValueError(f"decomposition shape {recon.shape} does not match tensor {x.shape}")
    nx = frobenius(x)
    if nx == 0.0:
        return 0.0
    return frobenius(x - recon) / nx


def _sweep_error(x, f, x_norm):
    # orthonormal factors: ||x - recon||^2 = ||x||^2 - ||core||^2; cancellation makes
    # this inaccurate for small errors, where the explicit residual is used instead
    if x_norm == 0.0:
        return 0.0
    rel_sq = 1.0 - (frobenius(f.core) / x_norm) ** 2
    if rel_sq > 1e-4:
        return float(np.sqrt(rel_sq))
    return reconstruction_error(x, f)


def hooi(x, ranks, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL):
    """Tucker decomposition by higher-order orthogonal iteration.

    Factors start from HOSVD and are swept in mode order 1, 2, 3, each
    update using the latest estimates of the others. Stops when the relative
    improvement of the reconstruction error drops below ``tol`` or after
    ``max_iter`` sweeps; per-sweep errors are kept in ``errors``.
    """
    x = as_tensor3(x)
    ranks = _check_ranks(x.shape, ranks)
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")

    # the spatial HOSVD factor is overwritten before it is read, so it is never formed
    factors = [None]
    warm = [None]
    for mode in (2, 3):
        u, full = _leading_basis(unfold(x, mode), ranks[mode - 1])
        factors.append(u)
        warm.append(full)
    x_norm = frobenius(x)
    errors = []
    f = None
    for _ in range(max_iter):
        for mode in (1, 2, 3):
            y = _project_except(x, factors, skip=mode)
            factors[mode - 1], warm[mode - 1] = _leading_basis(
                unfold(y, mode), ranks[mode - 1], warm[mode - 1]
            )
        f = TuckerFactors(_core(x, factors), *factors)
        err = _sweep_error(x, f, x_norm)
        errors.append(err)
        if err == 0.0:
            break
        if len(errors) > 1:
            prev = errors[-2]
            if prev == 0.0 or (prev - err) / prev < tol:
                break
    f.errors = tuple(errors)
    return f


def project(x, f):
    """Recompute the core of ``x`` against fixed factors (reuses a cached basis)."""
    x = as_tensor3(x)
    return TuckerFactors(_core(x, f.factors), f.uS, f.uF, f.uT)
