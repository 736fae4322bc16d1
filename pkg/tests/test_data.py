import math

import numpy as np
import pytest

from hotinfer.data import Dataset, OracleTruth, load_csv, standardize
from hotinfer.exceptions import DegenerateColumn, DimensionMismatch, NonFiniteInput


def test_random_columns_have_mean_zero_and_norm_sqrt_n():
    rng = np.random.default_rng(1)
    raw = rng.normal(3.0, 2.0, size=(10, 3))
    d = standardize(raw, rng.standard_normal(10))
    for k in range(3):
        col = d.X[:, k]
        assert abs(col.sum() / 10) <= 1e-12
        assert math.sqrt(float(col @ col)) == pytest.approx(math.sqrt(10), abs=1e-10)


def test_already_standardized_column_is_unchanged():
    rng = np.random.default_rng(2)
    raw = rng.standard_normal((8, 2))
    raw -= raw.mean(axis=0)
    raw *= math.sqrt(8) / np.linalg.norm(raw, axis=0)
    d = standardize(raw, np.ones(8))
    np.testing.assert_array_equal(d.X, raw)
    np.testing.assert_array_equal(d.column_means, 0.0)
    np.testing.assert_array_equal(d.column_scales, 1.0)


def test_idempotent():
    rng = np.random.default_rng(3)
    d1 = standardize(rng.exponential(size=(15, 4)), rng.standard_normal(15))
    d2 = standardize(d1.X, d1.y)
    np.testing.assert_allclose(d2.X, d1.X, rtol=1e-12, atol=1e-12)


def test_constant_column_raises():
    X = np.column_stack([np.arange(6.0), np.full(6, 4.2)])
    with pytest.raises(DegenerateColumn) as info:
        standardize(X, np.arange(6.0))
    assert info.value.columns == [1]


def test_dimension_and_finiteness_guards():
    with pytest.raises(DimensionMismatch):
        standardize(np.ones((5, 2)), np.ones(4))
    X = np.random.default_rng(0).standard_normal((5, 2))
    X[1, 1] = np.nan
    with pytest.raises(NonFiniteInput):
        standardize(X, np.ones(5))
    with pytest.raises(DimensionMismatch):
        Dataset(np.ones((3, 2)), np.ones(3))


def test_back_transformation_reproduces_raw_predictions():
    rng = np.random.default_rng(4)
    raw = rng.normal(5, 3, size=(30, 6))
    y = rng.standard_normal(30) * 4 + 10
    for scale_response in (False, True):
        d = standardize(raw, y, scale_response=scale_response)
        coef = rng.standard_normal(6)
        pred_std = d.X @ coef
        coef_raw, intercept = d.coef_to_raw(coef)
        pred_raw = raw @ coef_raw + intercept
        expected = pred_std * d.y_scale + d.y_mean
        np.testing.assert_allclose(pred_raw, expected, rtol=1e-10, atol=1e-10 * np.abs(expected).max())


def test_response_scaling_flags():
    rng = np.random.default_rng(5)
    raw = rng.standard_normal((12, 3))
    y = rng.standard_normal(12) + 7
    d = standardize(raw, y, scale_response=True)
    assert abs(d.y.mean()) < 1e-12
    assert np.linalg.norm(d.y) == pytest.approx(math.sqrt(12), rel=1e-10)
    c = standardize(raw, y, center_response=True)
    assert abs(c.y.mean()) < 1e-12
    assert c.y_mean == pytest.approx(y.mean())
    np.testing.assert_array_equal(standardize(raw, y).y, y)


def test_arrays_are_read_only(small_data):
    with pytest.raises(ValueError):
        small_data.X[0, 0] = 1.0
    with pytest.raises(ValueError):
        small_data.y[0] = 1.0


def test_gram_matches_direct_product(small_data):
    d = small_data
    np.testing.assert_allclose(d.gram, d.X.T @ d.X / d.n, rtol=1e-13, atol=1e-13)


def test_oracle_truth_dimension_check(small_data):
    t = OracleTruth(np.zeros(small_data.p + 1), 1.0, np.zeros(small_data.n))
    with pytest.raises(DimensionMismatch):
        t.check_against(small_data)
    with pytest.raises(ValueError):
        OracleTruth(np.zeros(3), 0.0, np.zeros(3))


def test_subset_rows_restandardizes(small_data):
    half = small_data.subset_rows(np.arange(30))
    assert half.n == 30
    np.testing.assert_allclose(np.linalg.norm(half.X, axis=0), math.sqrt(30), rtol=1e-10)


def test_load_csv_separate_response(tmp_path):
    x = tmp_path / "x.csv"
    y = tmp_path / "y.csv"
    x.write_text("a,b\n1,2\n3,5\n4,4\n")
    y.write_text("r\n1\n0\n2\n")
    X, yv, names = load_csv(x, y, header=True)
    np.testing.assert_array_equal(X, [[1, 2], [3, 5], [4, 4]])
    np.testing.assert_array_equal(yv, [1, 0, 2])
    assert names == ["a", "b"]


def test_load_csv_named_and_indexed_response(tmp_path):
    x = tmp_path / "x.csv"
    x.write_text("a,resp,b\n1,9,2\n3,8,5\n")
    X, yv, names = load_csv(x, header=True, response="resp")
    np.testing.assert_array_equal(yv, [9, 8])
    assert names == ["a", "b"]
    X2, y2, _ = load_csv(x, header=True, response=1)
    np.testing.assert_array_equal(X2, X)
    np.testing.assert_array_equal(y2, yv)


@pytest.mark.parametrize("body", ["1,2\n3,\n", "1,2\n3,abc\n", "1,2\n3\n"])
def test_load_csv_rejects_bad_rows(tmp_path, body):
    x = tmp_path / "x.csv"
    x.write_text(body)
    y = tmp_path / "y.csv"
    y.write_text("1\n2\n")
    with pytest.raises((NonFiniteInput, DimensionMismatch)):
        load_csv(x, y)
