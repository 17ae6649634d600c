import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sttgcn.metrics import compute_metrics
from sttgcn.tensor import DataError

from oracles import metrics_one_pass


def test_perfect_prediction():
    y = np.array([3.0, 1.0, 4.0, 1.5])
    r = compute_metrics(y, y)
    assert (r.rmse, r.mae, r.accuracy, r.r2, r.var) == (0.0, 0.0, 1.0, 1.0, 1.0)


def test_hand_case_against_oracle():
    y, y_hat = [1.0, 2.0, 3.0], [2.0, 2.0, 4.0]
    r = compute_metrics(y, y_hat)
    ref = metrics_one_pass(y, y_hat)
    closed = {"rmse": math.sqrt(2 / 3), "mae": 2 / 3, "accuracy": 1 - math.sqrt(2 / 14), "r2": 0.0, "var": 2 / 3}
    for key, value in closed.items():
        assert abs(ref[key] - value) <= 1e-12
        assert abs(getattr(r, key) - value) <= 1e-12


def test_mean_prediction_scores_zero():
    y = np.array([1.0, 4.0, 2.0, 7.0])
    r = compute_metrics(y, np.full(4, y.mean()))
    assert abs(r.r2) <= 1e-12
    assert abs(r.var) <= 1e-12


def test_undefined_scores_are_flagged():
    r = compute_metrics([2.0, 2.0], [1.0, 3.0])
    assert r.r2 is None and r.var is None
    assert r.accuracy is not None
    z = compute_metrics([0.0, 0.0], [1.0, 0.0])
    assert z.accuracy is None
    assert "undefined" in z.to_kv()
    assert "undefined" in z.to_table()


def test_input_errors():
    with pytest.raises(ValueError):
        compute_metrics([], [])
    with pytest.raises(ValueError):
        compute_metrics([1.0, 2.0], [1.0])
    with pytest.raises(DataError):
        compute_metrics([1.0, np.nan], [1.0, 2.0])


def test_report_formats():
    r = compute_metrics([1.0, 2.0, 3.0], [2.0, 2.0, 4.0])
    kv = dict(line.split("=") for line in r.to_kv().splitlines())
    assert set(kv) == {"rmse", "mae", "accuracy", "r2", "var"}
    assert float(kv["mae"]) == r.mae
    table = r.to_table("scores")
    assert table.splitlines()[0] == "scores"
    assert "RMSE" in table


def test_rmse_at_least_mae_on_random_arrays(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 50))
        y, y_hat = rng.standard_normal(n) * 10, rng.standard_normal(n) * 10
        r = compute_metrics(y, y_hat)
        assert r.rmse >= r.mae - 1e-12


arrays = st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=40)


@given(arrays, st.integers(0, 2**32 - 1))
def test_matches_oracle_and_is_permutation_invariant(values, seed):
    rng = np.random.default_rng(seed)
    y = np.array(values)
    y_hat = y + rng.standard_normal(y.size)
    r = compute_metrics(y, y_hat)
    perm = rng.permutation(y.size)
    rp = compute_metrics(y[perm], y_hat[perm])
    for key in ("rmse", "mae"):
        assert math.isclose(getattr(r, key), getattr(rp, key), rel_tol=1e-12, abs_tol=1e-12)
    if np.ptp(y) > 1e-6 and np.linalg.norm(y) > 0:
        ref = metrics_one_pass(y, y_hat)
        for key, value in ref.items():
            assert math.isclose(getattr(r, key), value, rel_tol=1e-9, abs_tol=1e-9)
            assert math.isclose(getattr(rp, key), value, rel_tol=1e-9, abs_tol=1e-9)
    assert r.rmse >= r.mae - 1e-12


@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_var_equals_r2_for_zero_mean_residual(n, seed):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(n) * 5
    resid = rng.standard_normal(n)
    resid -= resid.mean()
    r = compute_metrics(y, y - resid)
    assert abs(r.var - r.r2) <= 1e-10
