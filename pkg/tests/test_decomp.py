import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sttgcn.decomp import (
    TuckerFactors,
    hooi,
    hosvd,
    leading_singular_basis,
    project,
    reconstruction_error,
    tucker_ranks,
)
from sttgcn.kernels import jacobi_eigh
from sttgcn.tensor import DataError, tucker_reconstruct

from oracles import hosvd_svd, projector, tucker_einsum

seeds = st.integers(0, 2**32 - 1)


def low_rank_tensor(rng, dims, ranks):
    us = [np.linalg.qr(rng.standard_normal((d, r)))[0] for d, r in zip(dims, ranks)]
    return tucker_einsum(rng.standard_normal(ranks), *us)


def assert_orthonormal(u, tol=1e-10):
    np.testing.assert_allclose(u.T @ u, np.eye(u.shape[1]), atol=tol)


@given(st.integers(1, 9), seeds)
def test_jacobi_matches_numpy_eigenvalues(n, seed):
    m = np.random.default_rng(seed).standard_normal((n, n))
    sym = m + m.T
    w, v, _ = jacobi_eigh(sym)
    np.testing.assert_allclose(np.sort(w), np.linalg.eigvalsh(sym), atol=1e-10 * max(1.0, np.abs(sym).max()))
    np.testing.assert_allclose(v.T @ v, np.eye(n), atol=1e-12)
    np.testing.assert_allclose(sym @ v, v * w, atol=1e-9 * max(1.0, np.abs(sym).max()))


def test_jacobi_diagonal_input_needs_no_sweeps():
    w, v, sweeps = jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
    assert sweeps == 0
    np.testing.assert_array_equal(w, [3.0, -1.0, 2.0])
    np.testing.assert_array_equal(v, np.eye(3))


@pytest.mark.parametrize("shape", [(7, 3), (3, 7), (5, 5)])
def test_leading_basis_spans_svd_subspace(rng, shape):
    m = rng.standard_normal(shape)
    for r in range(1, min(shape) + 1):
        u = leading_singular_basis(m, r)
        ref = np.linalg.svd(m)[0][:, :r]
        assert_orthonormal(u)
        np.testing.assert_allclose(projector(u), projector(ref), atol=1e-9)


def test_leading_basis_sign_convention(rng):
    u = leading_singular_basis(rng.standard_normal((6, 4)), 3)
    for col in u.T:
        assert col[np.argmax(np.abs(col))] > 0


def test_leading_basis_rank_deficient_tall_matrix(rng):
    m = rng.standard_normal((8, 1)) @ rng.standard_normal((1, 3))
    u = leading_singular_basis(m, 2)
    assert_orthonormal(u)
    np.testing.assert_allclose(projector(u) @ m, m, atol=1e-10)


def test_leading_basis_errors(rng):
    with pytest.raises(ValueError):
        leading_singular_basis(rng.standard_normal((4, 3)), 4)
    with pytest.raises(ValueError):
        leading_singular_basis(rng.standard_normal((4, 3)), 0)
    bad = np.ones((3, 3))
    bad[0, 0] = np.inf
    with pytest.raises(DataError):
        leading_singular_basis(bad, 1)


def test_tucker_ranks_rules():
    assert tucker_ranks((156, 128, 12), "sqrt") == (13, 12, 4)
    assert tucker_ranks((156, 128, 12), "full") == (156, 128, 12)
    assert tucker_ranks((27, 8, 12), "cbrt") == (3, 2, 3)
    assert tucker_ranks((16, 9, 4), 0.5) == (4, 3, 2)
    assert tucker_ranks((1, 1, 1), "cbrt") == (1, 1, 1)


def test_hosvd_matches_svd_oracle(rng):
    x = rng.standard_normal((6, 5, 4))
    ranks = (3, 2, 2)
    f = hosvd(x, ranks)
    core_ref, us_ref = hosvd_svd(x, ranks)
    for u, ref in zip(f.factors, us_ref):
        np.testing.assert_allclose(projector(u), projector(ref), atol=1e-9)
    np.testing.assert_allclose(f.reconstruct(), tucker_einsum(core_ref, *us_ref), atol=1e-9)


def test_hooi_full_rank_is_exact(rng):
    x = rng.standard_normal((4, 3, 5))
    f = hooi(x, x.shape)
    np.testing.assert_allclose(f.reconstruct(), x, atol=1e-10 * np.linalg.norm(x))
    assert reconstruction_error(x, f) <= 1e-10


def test_hooi_rank_one_is_exact(rng):
    a, b, c = rng.standard_normal(5), rng.standard_normal(4), rng.standard_normal(3)
    x = np.einsum("i,j,k->ijk", a, b, c)
    f = hooi(x, (1, 1, 1))
    assert reconstruction_error(x, f) <= 1e-10


def test_hooi_full_rank_when_mode_exceeds_other_dims(rng):
    x = rng.standard_normal((9, 2, 3))
    f = hooi(x, x.shape)
    assert reconstruction_error(x, f) <= 1e-10
    assert_orthonormal(f.uS)


def test_hooi_recovers_exact_low_rank(rng):
    x = low_rank_tensor(rng, (8, 6, 5), (3, 2, 2))
    f = hooi(x, (3, 2, 2))
    assert reconstruction_error(x, f) <= 1e-10


def test_hooi_argument_errors(rng):
    x = rng.standard_normal((3, 3, 3))
    with pytest.raises(ValueError):
        hooi(x, (4, 1, 1))
    with pytest.raises(ValueError):
        hooi(x, (1, 1))
    with pytest.raises(ValueError):
        hooi(x, (1, 1, 1), max_iter=0)
    with pytest.raises(ValueError):
        hooi(x, (1, 1, 1), tol=0.0)


def test_hooi_zero_tensor(rng):
    f = hooi(np.zeros((3, 2, 2)), (1, 1, 1))
    np.testing.assert_array_equal(f.reconstruct(), 0.0)


def test_hooi_stops_at_max_iter_without_error(rng):
    x = rng.standard_normal((6, 5, 4))
    f = hooi(x, (2, 2, 2), max_iter=2, tol=1e-300)
    assert len(f.errors) == 2


def test_project_keeps_factors_and_recomputes_core(rng):
    x = low_rank_tensor(rng, (6, 4, 3), (2, 2, 2))
    f = hooi(x, (2, 2, 2))
    g = project(2.0 * x, f)
    assert g.uS is f.uS
    np.testing.assert_allclose(g.core, 2.0 * f.core, atol=1e-12)
    np.testing.assert_allclose(
        g.reconstruct(), tucker_reconstruct(g.core, f.uS, f.uF, f.uT), atol=0
    )


def test_tucker_factors_ranks_property(rng):
    f = TuckerFactors(np.zeros((2, 3, 1)), np.eye(4)[:, :2], np.eye(3), np.eye(2)[:, :1])
    assert f.ranks == (2, 3, 1)


@given(seeds, st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_hooi_properties(seed, r1, r2, r3):
    x = np.random.default_rng(seed).standard_normal((5, 4, 3))
    ranks = (r1, r2, r3)
    f = hooi(x, ranks)
    for u in f.factors:
        assert_orthonormal(u)
    errs = np.array(f.errors)
    assert np.all(np.diff(errs) <= 1e-12)
    assert reconstruction_error(x, f) <= reconstruction_error(x, hosvd(x, ranks)) + 1e-12
