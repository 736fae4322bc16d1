import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from hotinfer import HOLPScreener, HOTRegressor, LDPERegressor, ScaledLasso, SISScreener
from hotinfer.simulation import gen_design


@pytest.fixture
def raw():
    rng = np.random.default_rng(9)
    X = 3.0 * gen_design(80, 30, 0.4, rng) + 5.0
    beta = np.zeros(30)
    beta[[0, 4, 9]] = [2.0, -1.5, 1.0]
    y = 4.0 + X @ beta + 0.5 * rng.standard_normal(80)
    return X, y, beta


def test_clone_and_params():
    est = HOTRegressor(alpha=0.1, screening="HOLP", d_max=10)
    c = clone(est)
    assert c.get_params() == est.get_params()
    assert c.get_params()["screening"] == "HOLP"
    c.set_params(one_step=True)
    assert c.one_step and not est.one_step


@pytest.mark.parametrize("est", [HOTRegressor(), HOTRegressor(one_step=True), LDPERegressor()])
def test_debiased_fit_on_raw_scale(raw, est):
    X, y, beta = raw
    est.fit(X, y)
    assert est.coef_.shape == (30,) and est.conf_int_.shape == (30, 2)
    assert set(est.significant()) >= {0, 4, 9}
    np.testing.assert_allclose(est.coef_[[0, 4, 9]], beta[[0, 4, 9]], atol=0.2)
    assert est.sigma_ == pytest.approx(0.5, rel=0.3)
    inside = (est.conf_int_[:, 0] <= beta) & (beta <= est.conf_int_[:, 1])
    assert inside.mean() >= 0.8
    resid = y - est.predict(X)
    assert np.std(resid) < 1.0


def test_hot_reports_screened_set(raw):
    X, y, _ = raw
    est = HOTRegressor(screening=[0, 4]).fit(X, y)
    assert est.screened_.tolist() == [0, 4]


def test_scaled_lasso_estimator(raw):
    X, y, beta = raw
    m = ScaledLasso().fit(X, y)
    assert m.sigma_ == pytest.approx(0.5, rel=0.3)
    assert np.flatnonzero(np.abs(m.coef_) > 0.3).tolist() == [0, 4, 9]
    assert m.score(X, y) > 0.9
    with pytest.raises(ValueError):
        m.predict(X[:, :5])


@pytest.mark.parametrize("make", [lambda: SISScreener(d_max=10),
                                  lambda: HOLPScreener(d_max=10, ridge_eps=1.0)])
def test_screeners(raw, make):
    X, y, _ = raw
    s = make().fit(X, y)
    assert set(s.get_support(indices=True)) >= {0, 4, 9}
    mask = s.get_support()
    assert mask.dtype == bool and mask.sum() == s.support_.size
    assert s.transform(X).shape == (80, s.support_.size)
    assert s.bic_.shape == (10,)


def test_screener_in_pipeline(raw):
    X, y, _ = raw
    pipe = make_pipeline(SISScreener(d_max=8), ScaledLasso()).fit(X, y)
    assert pipe.predict(X).shape == (80,)


def test_shape_validation():
    with pytest.raises(ValueError):
        HOTRegressor().fit(np.ones((5, 3)), np.ones(4))


def test_holp_needs_ridge_when_rows_exceed_columns(raw):
    from hotinfer.exceptions import SingularGram
    X, y, _ = raw
    with pytest.raises(SingularGram):
        HOLPScreener(d_max=10).fit(X, y)
