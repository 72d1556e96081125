import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hdma.data import (Dataset, ScalingInfo, load_csv, make_folds, standardize,
                       unstandardize, write_csv)
from hdma.errors import DataError


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_three_row_file(tmp_path):
    d = load_csv(write(tmp_path, "y,x1\n1,2\n0,4\n1,6"))
    np.testing.assert_array_equal(d.y, [1, 0, 1])
    np.testing.assert_array_equal(d.X, [[2], [4], [6]])
    assert d.feature_names == ("x1",)


def test_load_na_cell_names_row_and_column(tmp_path):
    path = write(tmp_path, "y,x1,x2\n1,2,3\n0,NA,5\n")
    with pytest.raises(DataError, match=r"row 3, column 2"):
        load_csv(path)


def test_load_headerless_first_column_is_response(tmp_path):
    d = load_csv(write(tmp_path, "1,2,3\n4,5,6\n"), response_col=0, has_header=False)
    np.testing.assert_array_equal(d.y, [1, 4])
    np.testing.assert_array_equal(d.X, [[2, 3], [5, 6]])
    assert d.feature_names is None


def test_load_response_by_name_keeps_file_order(tmp_path):
    d = load_csv(write(tmp_path, "a,resp,b\n1,9,2\n3,8,4\n"), response_col="resp")
    np.testing.assert_array_equal(d.y, [9, 8])
    np.testing.assert_array_equal(d.X, [[1, 2], [3, 4]])
    assert d.feature_names == ("a", "b")


def test_load_errors(tmp_path):
    with pytest.raises(DataError, match="nope.csv"):
        load_csv(tmp_path / "nope.csv")
    path = write(tmp_path, "y,x\n1,2\n3,4\n")
    with pytest.raises(DataError, match="'z' not in header"):
        load_csv(path, response_col="z")
    with pytest.raises(DataError, match="out of range"):
        load_csv(path, response_col=5)
    with pytest.raises(DataError, match="row 3 has 1 cells"):
        load_csv(write(tmp_path, "y,x\n1,2\n3\n", "ragged.csv"))


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    y, X = rng.standard_normal(5), rng.standard_normal((5, 3))
    path = tmp_path / "rt.csv"
    write_csv(path, ["y", "a", "b", "c"], [[repr(float(v)) for v in np.r_[y[i], X[i]]]
                                         for i in range(5)])
    d = load_csv(path)
    np.testing.assert_array_equal(d.y, y)
    np.testing.assert_array_equal(d.X, X)


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset([1.0], [[1.0]])
    with pytest.raises(DataError, match="non-finite"):
        Dataset([1.0, 2.0], [[1.0], [np.inf]])
    with pytest.raises(DataError, match="rows"):
        Dataset([1.0, 2.0, 3.0], [[1.0], [2.0]])
    d = Dataset([1.0, 2.0], [[1.0], [2.0]])
    assert not d.X.flags.writeable
    with pytest.raises(DataError, match="y in"):
        d.check_binary()


def test_standardize_hand_example():
    d = Dataset([0.0, 0.0], [[1.0], [3.0]])
    s, info = standardize(d)
    np.testing.assert_allclose(s.X[:, 0], [-1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-15)
    assert info.means[0] == 2.0
    assert info.scales[0] == pytest.approx(np.sqrt(2))


def test_standardize_idempotent():
    rng = np.random.default_rng(1)
    s1, _ = standardize(Dataset(rng.standard_normal(30), rng.standard_normal((30, 4))))
    s2, info = standardize(s1)
    np.testing.assert_allclose(s2.X, s1.X, atol=1e-12)
    np.testing.assert_allclose(info.scales, 1.0, atol=1e-12)


def test_standardize_constant_column_flagged():
    d = Dataset([1.0, 2.0, 3.0], [[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]])
    s, info = standardize(d)
    np.testing.assert_array_equal(s.X[:, 0], [5.0, 5.0, 5.0])
    assert info.constant.tolist() == [True, False]
    assert info.scales[0] == 1.0


def test_standardize_without_centering_scales_only():
    d = Dataset([1.0, 2.0, 3.0], [[1.0], [2.0], [4.0]])
    s, info = standardize(d, center=False)
    np.testing.assert_allclose(s.X[:, 0], d.X[:, 0] / np.std(d.X[:, 0], ddof=1))
    assert np.all(info.shift == 0)


def test_coef_to_original_reproduces_predictions():
    rng = np.random.default_rng(2)
    d = Dataset(rng.standard_normal(20), rng.normal(3.0, 2.0, (20, 4)))
    s, info = standardize(d)
    b_std = rng.standard_normal(4)
    beta, icpt = info.coef_to_original(b_std, 0.7)
    np.testing.assert_allclose(d.X @ beta + icpt, s.X @ b_std + 0.7, atol=1e-12)
    back = ScalingInfo.from_dict(info.to_dict())
    np.testing.assert_array_equal(back.scales, info.scales)
    np.testing.assert_array_equal(back.shift, info.shift)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 5)),
              elements=st.floats(-1e3, 1e3, allow_subnormal=False)))
def test_unstandardize_round_trip(X):
    d = Dataset(np.zeros(X.shape[0]), X)
    s, info = standardize(d)
    back = unstandardize(s, info)
    np.testing.assert_allclose(back.X, X, atol=1e-10 * max(1.0, np.abs(X).max()))


def test_make_folds_examples():
    f = make_folds(6, 3, seed=0)
    assert f.sizes().tolist() == [2, 2, 2]
    f = make_folds(7, 3, seed=0)
    assert sorted(f.sizes().tolist()) == [2, 2, 3]
    assert f.sizes().tolist() == [3, 2, 2]  # remainder to the lowest-indexed fold
    np.testing.assert_array_equal(make_folds(7, 3, seed=4).fold_of,
                                  make_folds(7, 3, seed=4).fold_of)


def test_make_folds_errors():
    with pytest.raises(DataError):
        make_folds(5, 1)
    with pytest.raises(DataError):
        make_folds(5, 6)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 200), st.integers(2, 20), st.integers(0, 2**32 - 1))
def test_folds_partition(n, J, seed):
    if J > n:
        J = n
    f = make_folds(n, J, seed)
    sizes = f.sizes()
    assert sizes.min() >= 1 and sizes.max() - sizes.min() <= 1
    idx = np.concatenate([f.test_index(m) for m in range(J)])
    np.testing.assert_array_equal(np.sort(idx), np.arange(n))
    for m in range(J):
        assert np.intersect1d(f.test_index(m), f.train_index(m)).size == 0
