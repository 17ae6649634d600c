import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sttgcn.graph import (
    SpatialGraph,
    build_temporal_adjacency,
    normalize_adjacency,
    spatial_powers,
    temporal_powers,
)

from oracles import matrix_power_loops


def test_no_edges_with_self_loops_is_identity():
    np.testing.assert_array_equal(normalize_adjacency(np.zeros((4, 4))), np.eye(4))


def test_path_graph_without_self_loops():
    a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    s = 1.0 / np.sqrt(2.0)
    expected = np.array([[0, s, 0], [s, 0, s], [0, s, 0]])
    np.testing.assert_allclose(normalize_adjacency(a, add_self_loops=False), expected, atol=1e-15)


def test_complete_graph_with_self_loops():
    a = np.ones((3, 3)) - np.eye(3)
    np.testing.assert_allclose(normalize_adjacency(a), np.full((3, 3), 1.0 / 3.0), atol=1e-15)


def test_isolated_node_without_self_loops_is_zero():
    a = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=float)
    out = normalize_adjacency(a, add_self_loops=False)
    assert np.all(out[2] == 0) and np.all(out[:, 2] == 0)
    assert np.all(np.isfinite(out))


def test_normalize_rejects_bad_adjacency():
    with pytest.raises(ValueError):
        normalize_adjacency(np.ones((2, 3)))
    with pytest.raises(ValueError):
        normalize_adjacency(-np.ones((2, 2)))


def test_spatial_powers_examples():
    assert len(spatial_powers(np.eye(3), 0)) == 1
    for m in spatial_powers(np.eye(3), 3):
        np.testing.assert_array_equal(m, np.eye(3))
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    powers = spatial_powers(swap, 2)
    np.testing.assert_array_equal(powers[0], np.eye(2))
    np.testing.assert_array_equal(powers[1], swap)
    np.testing.assert_array_equal(powers[2], np.eye(2))
    with pytest.raises(ValueError):
        spatial_powers(swap, -1)


def test_backward_chain_hand_case():
    at = build_temporal_adjacency(2, 3)
    expected = [[1, 0, 0], [0.5, 0.5, 0], [0, 0.5, 0.5]]
    for k in range(2):
        np.testing.assert_allclose(at.tensor[k], expected, atol=1e-15)


def test_backward_chain_square_matches_loop_power():
    at = build_temporal_adjacency(3, 3, p=2)
    ref = matrix_power_loops(at.tensor[0], 2)
    for k in range(3):
        np.testing.assert_allclose(at.powers[2][k], ref, atol=1e-15)


def test_identity_scheme_and_zero_order():
    at = build_temporal_adjacency(4, 5, scheme="identity", p=3)
    for power in at.powers:
        for k in range(4):
            np.testing.assert_array_equal(power[k], np.eye(5))
    at0 = build_temporal_adjacency(2, 3, p=0)
    assert len(at0.powers) == 1
    np.testing.assert_array_equal(at0.powers[0][1], np.eye(3))


def test_temporal_errors():
    with pytest.raises(ValueError):
        build_temporal_adjacency(2, 3, scheme="cyclic")
    with pytest.raises(ValueError):
        build_temporal_adjacency(0, 3)
    with pytest.raises(ValueError):
        temporal_powers(np.ones((2, 3, 4)), 1)


def test_temporal_powers_per_node(rng):
    t = rng.random((3, 4, 4))
    powers = temporal_powers(t, 3)
    for k in range(3):
        for order in range(4):
            np.testing.assert_allclose(powers[order][k], matrix_power_loops(t[k], order), atol=1e-12)


def test_identity_like_ablation_graphs(rng):
    a = (rng.random((5, 5)) < 0.5).astype(float)
    sg = SpatialGraph.build(np.maximum(a, a.T), 2)
    for m in sg.identity_like().powers:
        np.testing.assert_array_equal(m, np.eye(5))
    at = build_temporal_adjacency(5, 4, p=2).identity_like()
    for m in at.powers:
        np.testing.assert_array_equal(m[3], np.eye(4))


@given(st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_normalized_graph_properties(n, seed):
    rng = np.random.default_rng(seed)
    a = np.triu((rng.random((n, n)) < 0.4) * rng.random((n, n)), 1)
    a = a + a.T
    sg = SpatialGraph.build(a, 2)
    np.testing.assert_array_equal(sg.powers[0], np.eye(n))
    assert np.max(np.abs(sg.a_norm - sg.a_norm.T)) <= 1e-12
    # power iteration for the spectral radius
    v = rng.standard_normal(n)
    lam = 0.0
    for _ in range(500):
        w = sg.a_norm @ v
        nrm = np.linalg.norm(w)
        if nrm == 0:
            break
        lam = nrm / np.linalg.norm(v)
        v = w / nrm
    assert lam <= 1.0 + 1e-10


@given(st.integers(1, 12))
def test_backward_chain_rows_are_stochastic(t):
    at = build_temporal_adjacency(2, t, p=2)
    np.testing.assert_allclose(at.tensor.sum(axis=2), 1.0, atol=1e-12)
    assert np.all(at.tensor >= 0)
    np.testing.assert_array_equal(at.tensor[0], at.tensor[1])
