import math

import numpy as np
import pytest

from hotinfer.data import Dataset, standardize
from hotinfer.exceptions import AllRankDeficient, IndexOutOfRange, SingularGram
from hotinfer.screening import (
    ScreenSet,
    bic_select,
    default_d_max,
    holp_coefficients,
    holp_rank,
    nested_bic,
    screen,
    sis_rank,
    user_screen,
)
from oracles import bic_oracle, holp_oracle, pearson_abs


def _std(seed, n, p):
    rng = np.random.default_rng(seed)
    return standardize(rng.standard_normal((n, p)), rng.standard_normal(n)), rng


def test_sis_finds_noiseless_predictor():
    d, rng = _std(0, 40, 10)
    d = standardize(d.X, d.X[:, 3])
    assert sis_rank(d)[0] == 3


def test_sis_matches_pearson_oracle():
    rng = np.random.default_rng(1)
    raw = rng.standard_normal((50, 20))
    y = raw @ rng.standard_normal(20) + rng.standard_normal(50)
    d = standardize(raw, y)
    expected = np.argsort(-pearson_abs(raw, y), kind="stable")
    np.testing.assert_array_equal(sis_rank(d), expected)


def test_sis_ties_break_by_index():
    rng = np.random.default_rng(2)
    raw = rng.standard_normal((20, 5))
    raw[:, 4] = raw[:, 1]
    d = standardize(raw, raw[:, 1] + 0.01 * rng.standard_normal(20))
    r = list(sis_rank(d))
    assert r.index(1) < r.index(4)


def test_holp_matches_direct_solve():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((30, 200))
    y = rng.standard_normal(30)
    d = Dataset(X, y)
    np.testing.assert_allclose(holp_coefficients(d), holp_oracle(X, y), rtol=1e-10, atol=1e-10)


def test_holp_on_centered_design_is_minimum_norm_solution():
    rng = np.random.default_rng(4)
    d = standardize(rng.standard_normal((30, 120)), rng.standard_normal(30))
    expected = np.linalg.pinv(d.X) @ d.y
    np.testing.assert_allclose(holp_coefficients(d), expected, rtol=1e-8, atol=1e-10)


def test_holp_with_scaled_orthonormal_rows_equals_sis_order():
    rng = np.random.default_rng(5)
    Q, _ = np.linalg.qr(rng.standard_normal((60, 12)))
    X = 3.0 * Q.T
    y = rng.standard_normal(12)
    d = Dataset(X, y)
    np.testing.assert_array_equal(holp_rank(d), np.argsort(-np.abs(X.T @ y), kind="stable"))


def test_holp_singular_and_ridge():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((10, 30))
    X[5] = X[4]
    d = Dataset(X, rng.standard_normal(10))
    with pytest.raises(SingularGram):
        holp_rank(d)
    assert sorted(holp_rank(d, ridge_eps=1e-3)) == list(range(30))


def test_holp_duplicate_columns_lower_index_first():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((10, 30))
    X[:, 20] = X[:, 7]
    r = list(holp_rank(Dataset(X, rng.standard_normal(10))))
    assert r.index(7) < r.index(20)


def test_bic_exact_fit_minimum():
    rng = np.random.default_rng(8)
    raw = rng.standard_normal((40, 8))
    d = standardize(raw, np.zeros(40))
    d = Dataset(d.X, 2 * d.X[:, 1] + d.X[:, 2], standardized=True)
    ranking = [1, 2] + [k for k in range(8) if k not in (1, 2)]
    s = bic_select(d, ranking, d_max=6)
    assert s.indices == (1, 2)
    assert np.all(np.diff(s.bic[1:]) > 0)


def test_bic_values_match_ols_oracle():
    d, rng = _std(9, 50, 20)
    ranking = sis_rank(d)
    s = bic_select(d, ranking, d_max=12)
    np.testing.assert_allclose(s.bic, bic_oracle(d.X, d.y, ranking, 12), rtol=1e-10)
    assert s.d == int(np.argmin(s.bic)) + 1


def test_bic_forced_size_and_prefix_property():
    d, rng = _std(10, 30, 15)
    ranking = rng.permutation(15)
    s = bic_select(d, ranking, d_max=1)
    assert s.indices == (int(ranking[0]),)
    s2 = bic_select(d, ranking, d_max=10)
    assert set(s2.indices) == set(int(k) for k in ranking[: s2.d])
    assert sorted(s2.ranking) == list(range(15))


def test_bic_rank_deficient_prefixes_skipped_and_all_deficient():
    rng = np.random.default_rng(11)
    raw = rng.standard_normal((30, 6))
    raw[:, 3] = raw[:, 0] - raw[:, 1]
    d = standardize(raw, raw[:, 0] + rng.standard_normal(30))
    s = bic_select(d, [0, 1, 2, 3, 4, 5], d_max=5)
    assert s.warnings and "d = [4, 5]" in s.warnings[0]
    assert s.d <= 3
    raw2 = raw.copy()
    raw2[:, 1] = raw2[:, 0]
    d2 = standardize(raw2, raw2[:, 0] + rng.standard_normal(30))
    bic, _ = nested_bic(d2, [0, 1, 2, 3, 4, 5], 3)
    assert np.isnan(bic[1]) and np.isnan(bic[2])
    d3 = Dataset(np.column_stack([np.zeros(30), raw[:, 1:]]), raw[:, 1])
    with pytest.raises(AllRankDeficient):
        bic_select(d3, [0, 1, 2, 3, 4, 5], d_max=1)


def test_bic_select_guards():
    d, rng = _std(12, 20, 8)
    with pytest.raises(ValueError):
        bic_select(d, [0, 0, 1, 2, 3, 4, 5, 6])
    with pytest.raises(ValueError):
        bic_select(d, list(range(8)), d_max=0)


def test_default_d_max():
    assert default_d_max(100) == 50
    assert default_d_max(4) == 2
    assert default_d_max(201) == 100


def test_screen_front_end_and_rank_data():
    d, rng = _std(13, 60, 30)
    s = screen(d, "sis", d_max=5)
    assert s.method == "SIS" and 1 <= s.d <= 5 and s.d < d.n
    other, _ = _std(14, 60, 30)
    s2 = screen(d, "SIS", d_max=5, rank_data=other)
    np.testing.assert_array_equal(s2.ranking, sis_rank(other))
    with pytest.raises(ValueError):
        screen(d, "lasso")


def test_user_screen():
    s = user_screen([4, 1, 4], 10, 20)
    assert s.indices == (1, 4) and s.method == "user"
    assert sorted(s.ranking) == list(range(10))
    assert s.ranking[:2] == (1, 4)
    np.testing.assert_array_equal(s.complement(10), [0, 2, 3, 5, 6, 7, 8, 9])
    with pytest.raises(IndexOutOfRange):
        user_screen([10], 10)
    with pytest.raises(ValueError):
        user_screen(range(5), 10, 5)
