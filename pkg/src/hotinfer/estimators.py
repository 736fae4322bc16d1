"""scikit-learn style wrappers around the functional core.

The estimators accept raw arrays, standardize the columns internally and
report coefficients, intervals and standard errors on the raw scale.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import Dataset, standardize
from .inference import InferenceConfig, InferenceReport, infer_all
from .orthogonalization import Tuning
from .screening import screen
from .solvers import scaled_lasso


def _dataset(X, y) -> Dataset:
    X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
    return standardize(X, y, center_response=True)


def _tuning(lam, c) -> Tuning:
    return Tuning(lam=lam, c=c)


class _LinearPredictMixin:
    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ np.nan_to_num(self.coef_) + self.intercept_


class _DebiasedRegressor(_LinearPredictMixin, RegressorMixin, BaseEstimator):
    _method = "HOT"

    def _config(self) -> InferenceConfig:
        raise NotImplementedError

    def fit(self, X, y):
        """Estimate every coefficient with a confidence interval and p-value.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_features)
        y : array-like of shape (n_samples,)

        Returns
        -------
        self
        """
        data = _dataset(X, y)
        report = infer_all(data, self._config())
        scale = data.y_scale / data.column_scales
        p = data.p
        beta = np.full(p, np.nan)
        se = np.full(p, np.nan)
        ci = np.full((p, 2), np.nan)
        pv = np.full(p, np.nan)
        for r in report.results:
            if r is None:
                continue
            beta[r.j], se[r.j], pv[r.j] = r.beta_hat, r.se, r.p_value
            ci[r.j] = r.ci_lower, r.ci_upper
        self.coef_ = beta * scale
        self.stderr_ = se * scale
        self.conf_int_ = ci * scale[:, None]
        self.pvalues_ = pv
        self.intercept_ = data.y_mean - float(data.column_means @ np.nan_to_num(self.coef_))
        self.sigma_ = report.sigma_hat * data.y_scale
        self.report_: InferenceReport = report
        self.n_features_in_ = p
        return self

    def significant(self):
        """Indices whose p-value falls below ``alpha``."""
        check_is_fitted(self, "pvalues_")
        return np.flatnonzero(self.pvalues_ < self.alpha)


class HOTRegressor(_DebiasedRegressor):
    """De-biased linear regression through hybrid orthogonalization.

    Parameters
    ----------
    alpha : float, default=0.05
        Level of the two-sided intervals.
    screening : {"SIS", "HOLP"} or sequence of int, default="SIS"
        Screening rule for the strong columns, or the columns themselves.
    d_max : int, optional
        Largest screened set considered by BIC.
    one_step : bool, default=False
        Correct a scaled-lasso fit along the hybrid direction instead of
        using the direct ratio estimate.
    route : {"two-step", "partial"}, default="two-step"
    split : bool, default=False
        Screen on the first half of the rows, infer on the second.
    sigma : float, optional
        Known noise level; estimated by the scaled lasso when None.
    lambda0 : float or {"quantile", "universal"}, optional
        Scaled-lasso penalty level.
    lam, c : float, optional
        Fixed direction penalty, or multiplier of ``sqrt(2 log p / n)``.
        GIC tuning is used when both are None.
    n_jobs : int, optional
    """

    def __init__(self, alpha=0.05, screening="SIS", d_max=None, one_step=False, route="two-step",
                 split=False, sigma=None, lambda0=None, lam=None, c=None, n_jobs=1):
        self.alpha = alpha
        self.screening = screening
        self.d_max = d_max
        self.one_step = one_step
        self.route = route
        self.split = split
        self.sigma = sigma
        self.lambda0 = lambda0
        self.lam = lam
        self.c = c
        self.n_jobs = n_jobs

    def _config(self):
        return InferenceConfig(
            method="HOT-A" if self.one_step else "HOT", screening=self.screening,
            alpha=self.alpha, tuning=_tuning(self.lam, self.c), sigma=self.sigma,
            route=self.route, split=self.split, d_max=self.d_max, lambda0=self.lambda0,
            n_jobs=self.n_jobs,
        )

    def fit(self, X, y):
        super().fit(X, y)
        screen_set = self.report_.screen
        self.screened_ = np.asarray(screen_set.indices if screen_set else (), dtype=int)
        return self


class LDPERegressor(_DebiasedRegressor):
    """De-biased lasso with plain lasso-residual directions.

    Parameters
    ----------
    alpha : float, default=0.05
    sigma : float, optional
        Known noise level; estimated by the scaled lasso when None.
    lambda0 : float or {"quantile", "universal"}, optional
    lam, c : float, optional
        Fixed direction penalty, or multiplier of ``sqrt(2 log p / n)``.
    n_jobs : int, optional
    """

    def __init__(self, alpha=0.05, sigma=None, lambda0=None, lam=None, c=None, n_jobs=1):
        self.alpha = alpha
        self.sigma = sigma
        self.lambda0 = lambda0
        self.lam = lam
        self.c = c
        self.n_jobs = n_jobs

    def _config(self):
        return InferenceConfig(method="LDPE", alpha=self.alpha, tuning=_tuning(self.lam, self.c),
                               sigma=self.sigma, lambda0=self.lambda0, n_jobs=self.n_jobs)


class ScaledLasso(_LinearPredictMixin, RegressorMixin, BaseEstimator):
    """Lasso with a jointly estimated noise level.

    Attributes
    ----------
    coef_, intercept_ : raw-scale fit
    sigma_ : float
        Noise standard deviation estimate.
    """

    def __init__(self, lambda0=None, tol=1e-6, max_iter=200):
        self.lambda0 = lambda0
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        data = _dataset(X, y)
        fit = scaled_lasso(data, self.lambda0, tol=self.tol, max_iter=self.max_iter)
        self.coef_, self.intercept_ = data.coef_to_raw(fit.beta_init)
        self.sigma_ = fit.sigma_hat * data.y_scale
        self.lambda0_ = fit.lambda0
        self.n_iter_ = fit.iterations
        self.n_features_in_ = data.p
        return self


class _Screener(TransformerMixin, BaseEstimator):
    _method = "SIS"

    def fit(self, X, y):
        data = _dataset(X, y)
        s = screen(data, self._method, self.d_max, **self._extra())
        self.support_ = np.asarray(s.indices, dtype=int)
        self.ranking_ = np.asarray(s.ranking, dtype=int)
        self.bic_ = None if s.bic is None else np.asarray(s.bic)
        self.n_features_in_ = data.p
        return self

    def _extra(self):
        return {}

    def get_support(self, indices=False):
        check_is_fitted(self, "support_")
        if indices:
            return self.support_.copy()
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.support_] = True
        return mask

    def transform(self, X):
        check_is_fitted(self, "support_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X[:, self.support_]


class SISScreener(_Screener):
    """Keep the BIC-chosen prefix of the marginal-correlation ranking."""

    def __init__(self, d_max=None):
        self.d_max = d_max


class HOLPScreener(_Screener):
    """Keep the BIC-chosen prefix of the ``X'(XX' + eps I)^-1 y`` ranking."""

    _method = "HOLP"

    def __init__(self, d_max=None, ridge_eps=0.0):
        self.d_max = d_max
        self.ridge_eps = ridge_eps

    def _extra(self):
        return {"ridge_eps": self.ridge_eps}
