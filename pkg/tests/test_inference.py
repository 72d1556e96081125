import csv
import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import linear_data, logistic_data
from hdma.data import Dataset
from hdma.inference import (S_FLOOR, bootstrap_norms, bootstrap_quantile, clime, debias,
                            default_gamma_n, hessian_matrix, multipliers,
                            post_average_inference, s_hat, simultaneous_ci, symmetrize,
                            upper_quantile)
from hdma.loss import LossKind

METHODS = ["lp", "admm"]


@pytest.mark.parametrize("method", METHODS)
def test_clime_identity(method):
    est = clime(np.eye(4), 0.1, method)
    np.testing.assert_allclose(est.W, 0.9 * np.eye(4), atol=1e-6)
    assert est.all_feasible


@pytest.mark.parametrize("method", METHODS)
def test_clime_large_gamma_gives_zero(method):
    est = clime(np.eye(3), 1.0, method)
    np.testing.assert_allclose(est.W, 0.0, atol=1e-6)


@pytest.mark.parametrize("method", METHODS)
def test_clime_diagonal(method):
    est = clime(np.diag([2.0, 1.0, 0.5]), 0.1, method)
    np.testing.assert_allclose(est.W, np.diag([0.45, 0.9, 1.8]), atol=1e-6)


@pytest.mark.parametrize("method", METHODS)
def test_clime_feasible_on_sample_hessian(method):
    rng = np.random.default_rng(0)
    d, _ = linear_data(rng, 200, 12)
    J = hessian_matrix(d, np.zeros(12))
    gamma = default_gamma_n(200, 12)
    est = clime(J, gamma, method)
    assert np.max(np.abs(est.W @ J - np.eye(12))) <= gamma + 1e-6


def test_clime_lp_matches_admm():
    rng = np.random.default_rng(1)
    d, _ = linear_data(rng, 150, 8)
    J = hessian_matrix(d, np.zeros(8))
    lp = clime(J, 0.1, "lp")
    admm = clime(J, 0.1, "admm")
    np.testing.assert_allclose(np.abs(lp.W).sum(axis=1), np.abs(admm.W).sum(axis=1), atol=1e-4)


def test_clime_rejects_bad_input():
    with pytest.raises(ValueError):
        clime(np.eye(2), 0.0)
    with pytest.raises(ValueError):
        clime(np.eye(2), 0.1, "simplex")


def test_clime_flags_infeasible_rows():
    J = np.zeros((2, 2))
    J[0, 0] = 1.0
    est = clime(J, 0.1)
    assert est.infeasible_rows() == [1]
    assert not est.all_feasible
    np.testing.assert_array_equal(est.W[1], 0.0)


def test_symmetrize_examples():
    W = np.array([[1.0, 0.2], [-0.1, 3.0]])
    np.testing.assert_array_equal(symmetrize(W), [[1.0, -0.1], [-0.1, 3.0]])
    S = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_array_equal(symmetrize(S), S)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-5, 5)))
def test_symmetrize_properties(W):
    S = symmetrize(W)
    np.testing.assert_array_equal(S, S.T)
    np.testing.assert_array_equal(symmetrize(S), S)
    assert np.all(np.abs(S) <= np.abs(W) + 0.0)


def test_debias_examples():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((30, 3))
    b = np.array([1.0, -1.0, 0.0])
    d = Dataset(X @ b, X)
    np.testing.assert_allclose(debias(d, b, rng.standard_normal((3, 3))), b, atol=1e-12)
    d2, _ = linear_data(rng, 30, 3)
    np.testing.assert_array_equal(debias(d2, b, np.zeros((3, 3))), b)


def test_debias_orthonormal_is_ols():
    rng = np.random.default_rng(3)
    n = 40
    Q, _ = np.linalg.qr(rng.standard_normal((n, 4)))
    X = math.sqrt(n) * Q               # X^T X / n = I
    y = rng.standard_normal(n)
    d = Dataset(y, X)
    ols = np.linalg.lstsq(X, y, rcond=None)[0]
    for start in (np.zeros(4), rng.standard_normal(4)):
        np.testing.assert_allclose(debias(d, start, np.eye(4)), ols, atol=1e-10)


def test_s_hat_examples():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((50, 3))
    X = (X - X.mean(0)) / X.std(0)
    d = Dataset(rng.standard_normal(50), X)
    np.testing.assert_allclose(s_hat(d, np.zeros(3)), 1.0)
    dl, _ = logistic_data(rng, 80, 3)
    np.testing.assert_allclose(s_hat(dl, np.zeros(3), LossKind.LOGISTIC),
                               0.25 * np.mean(dl.X**2, axis=0))
    Xz = X.copy()
    Xz[:, 1] = 0.0
    with pytest.warns(RuntimeWarning, match="floored"):
        s = s_hat(Dataset(d.y, Xz), np.zeros(3))
    assert s[1] == S_FLOOR


def test_multipliers_are_keyed():
    a = multipliers(7, 3, 100)
    np.testing.assert_array_equal(a, multipliers(7, 3, 100))
    np.testing.assert_array_equal(a[:10], multipliers(7, 3, 10))
    assert not np.allclose(a, multipliers(7, 4, 100))
    assert not np.allclose(a, multipliers(8, 3, 100))


def test_upper_quantile_index():
    norms = np.arange(1.0, 101.0)
    assert upper_quantile(norms, 0.05) == 95.0
    assert upper_quantile(np.arange(1.0, 501.0), 0.05) == 475.0
    assert upper_quantile([3.0], 0.05) == 3.0
    assert upper_quantile([1.0, 2.0], 0.5) == 1.0


def test_bootstrap_zero_gradient():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((25, 4))
    b = rng.standard_normal(4)
    d = Dataset(X @ b, X)
    assert bootstrap_quantile(d, b, np.eye(4), np.ones(4), [0, 1, 2, 3], B=50) == 0.0


def test_bootstrap_single_replicate_and_validation():
    rng = np.random.default_rng(6)
    d, _ = linear_data(rng, 40, 5)
    q = bootstrap_quantile(d, np.zeros(5), np.eye(5), np.ones(5), [0, 2], B=1, seed=3)
    assert q == bootstrap_norms(d, np.zeros(5), np.eye(5), np.ones(5), [0, 2], 1, 3)[0]
    with pytest.raises(ValueError):
        bootstrap_quantile(d, np.zeros(5), np.eye(5), np.ones(5), [], B=10)
    with pytest.raises(ValueError):
        bootstrap_quantile(d, np.zeros(5), np.eye(5), np.ones(5), [0], B=0)


def test_bootstrap_quantile_close_to_gaussian_oracle():
    rng = np.random.default_rng(7)
    n, p = 200, 20
    d, beta = linear_data(rng, n, p)
    W, s = np.eye(p), np.ones(p)
    G = np.arange(p)
    # conditionally on the data the statistic is max|N(0, M M^T)|
    g = d.y - d.X @ beta
    M = (d.X * g[:, None]).T / math.sqrt(n)
    draws = np.random.default_rng(99).standard_normal((50000, n)) @ M.T
    oracle = np.quantile(np.max(np.abs(draws), axis=1), 0.95)
    q = bootstrap_quantile(d, beta, W, s, G, B=2000, alpha=0.05, seed=1)
    assert abs(q - oracle) / oracle < 0.05


def test_simultaneous_ci_examples():
    res = simultaneous_ci([1.0], [1.0], 2.0, [0], 100)
    assert res.intervals == [(pytest.approx(0.8), pytest.approx(1.2))]
    res0 = simultaneous_ci([1.0, 2.0], [1.0, 1.0], 0.0, [0, 1], 10)
    np.testing.assert_array_equal(res0.lower, res0.upper)
    a = simultaneous_ci([0.0], [1.0], 1.5, [0], 50)
    b = simultaneous_ci([0.0], [2.0], 1.5, [0], 50)
    assert b.half_width[0] == pytest.approx(a.half_width[0] / 2)
    with pytest.raises(ValueError):
        simultaneous_ci([0.0], [1.0], -1.0, [0], 10)


def test_result_helpers(tmp_path):
    res = simultaneous_ci([0.5, -0.01, 0.0], [1.0, 1.0, 1.0], 1.0, [0, 1], 100)
    assert res.significant().tolist() == [True, False]
    assert res.covers([0.45, 0.05, 9.0])
    assert not res.covers([0.0, 0.0, 0.0])
    doc = json.loads(res.to_json())
    assert doc["G"] == [0, 1] and doc["q_hat"] == 1.0
    path = tmp_path / "ci.csv"
    res.write_csv(path, ["a", "b", "c"])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["index", "feature", "estimate", "lower", "upper", "significant"]
    assert rows[1][1] == "a" and rows[1][5] == "1"


def test_full_chain_width_shrinks_with_alpha():
    rng = np.random.default_rng(8)
    d, beta = linear_data(rng, 150, 10)
    r05 = post_average_inference(d, beta, B=300, alpha=0.05, seed=2)
    r50 = post_average_inference(d, beta, B=300, alpha=0.5, seed=2)
    assert np.all(r50.half_width < r05.half_width)
    assert r05.meta["infeasible_rows"] == [] and r05.meta["symmetrized"]
    again = post_average_inference(d, beta, B=300, alpha=0.05, seed=2)
    np.testing.assert_array_equal(again.lower, r05.lower)


def test_full_chain_logistic_runs():
    rng = np.random.default_rng(9)
    d, beta = logistic_data(rng, 300, 5)
    res = post_average_inference(d, beta, G=[0, 1], B=200, kind="logistic")
    assert res.lower.shape == (2,) and np.all(res.lower < res.upper)
    assert res.meta["loss"] == "logistic"
