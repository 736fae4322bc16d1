"""Marginal (SIS) and HOLP screening with BIC choice of the screened-set size."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .data import Dataset
from .exceptions import AllRankDeficient, IndexOutOfRange, SingularGram

log = logging.getLogger(__name__)

METHODS = ("SIS", "HOLP", "user")


@dataclass(frozen=True)
class ScreenSet:
    """Screened index set together with the ranking it was cut from.

    ``indices`` is sorted; as a set it equals ``ranking[:d]``.
    """

    indices: tuple
    method: str
    ranking: tuple
    bic: Optional[tuple] = field(default=None, repr=False)
    warnings: tuple = ()

    @property
    def d(self) -> int:
        return len(self.indices)

    def complement(self, p: int) -> np.ndarray:
        mask = np.ones(p, dtype=bool)
        mask[list(self.indices)] = False
        return np.flatnonzero(mask)


def _rank_by_magnitude(scores) -> np.ndarray:
    # stable sort on -|score| keeps ascending index order among ties
    return np.argsort(-np.abs(scores), kind="stable")


def sis_rank(data: Dataset) -> np.ndarray:
    """Rank predictors by ``|x_k' y|``, largest first."""
    return _rank_by_magnitude(data.X.T @ data.y)


def holp_coefficients(data: Dataset, ridge_eps: float = 0.0) -> np.ndarray:
    """``X' (X X' + eps I)^-1 y``.

    Centered columns leave the constant vector in the null space of
    ``X X'``. For such designs the known null direction is filled in with
    ``kappa * 11' / n`` before factoring; since ``X' 1 = 0`` this does not
    change the result, which is then the minimum-norm interpolant.
    """
    if ridge_eps < 0:
        raise ValueError("ridge_eps must be nonnegative")
    X = data.X
    n = data.n
    K = X @ X.T
    if ridge_eps:
        K[np.diag_indices_from(K)] += ridge_eps
    else:
        col_sums = np.abs(X.sum(axis=0))
        if np.all(col_sums <= 1e-8 * np.sqrt(n) * np.linalg.norm(X, axis=0).clip(min=1.0)):
            K += np.trace(K) / n / n
    try:
        c, low = scipy.linalg.cho_factor(K, check_finite=False)
        u = scipy.linalg.cho_solve((c, low), data.y, check_finite=False)
        # Cholesky can succeed on numerically singular K
        d = np.abs(np.diag(c))
        if d.min() <= 1e-7 * d.max():
            raise np.linalg.LinAlgError
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        raise SingularGram("X X' is singular; use ridge_eps > 0") from None
    return data.X.T @ u


def holp_rank(data: Dataset, ridge_eps: float = 0.0) -> np.ndarray:
    """Rank predictors by the magnitude of the HOLP estimate."""
    return _rank_by_magnitude(holp_coefficients(data, ridge_eps))


def default_d_max(n: int) -> int:
    """``floor(n / 2)``, capped at ``n - 2``."""
    return max(1, min(n // 2, n - 2))


def nested_bic(data: Dataset, ranking, d_max: int):
    """BIC of least squares on each prefix ``ranking[:d]``, ``d = 1..d_max``.

    Returns ``(bic, rss)`` arrays of length ``d_max``; entries for prefixes
    whose columns are linearly dependent are ``nan``.
    """
    n = data.n
    cols = np.asarray(ranking[:d_max])
    Q, R = np.linalg.qr(data.X[:, cols])
    diag = np.abs(np.diag(R))
    scale = np.linalg.norm(data.X[:, cols], axis=0).max()
    yy = float(data.y @ data.y)
    floor = 1e-20 * yy
    bic = np.full(d_max, np.nan)
    rss = np.full(d_max, np.nan)
    for d in range(1, d_max + 1):
        if diag[:d].min() <= 1e-10 * scale:
            continue
        Qd = Q[:, :d]
        resid = data.y - Qd @ (Qd.T @ data.y)
        rss[d - 1] = float(resid @ resid)
        bic[d - 1] = n * math.log(max(rss[d - 1], floor) / n) + d * math.log(n)
    return bic, rss


def bic_select(data: Dataset, ranking, d_max: Optional[int] = None, method: str = "user") -> ScreenSet:
    """Cut ``ranking`` at the prefix length minimizing BIC.

    ``BIC(d) = n log(RSS_d / n) + d log(n)`` with ``RSS_d`` from least squares
    on the first ``d`` ranked columns. Rank-deficient prefixes are skipped
    with a warning; ties go to the smaller ``d``.
    """
    ranking = np.asarray(ranking, dtype=np.int64)
    p = data.p
    if ranking.shape != (p,) or not np.array_equal(np.sort(ranking), np.arange(p)):
        raise ValueError("ranking must be a permutation of range(p)")
    if d_max is None:
        d_max = default_d_max(data.n)
    d_max = min(int(d_max), p)
    if not 1 <= d_max < data.n:
        raise ValueError(f"d_max must satisfy 1 <= d_max < n, got {d_max}")
    bic, _ = nested_bic(data, ranking, d_max)
    skipped = np.flatnonzero(np.isnan(bic)) + 1
    warnings = ()
    if skipped.size:
        msg = f"rank-deficient screened sets skipped at d = {skipped.tolist()}"
        log.warning(msg)
        warnings = (msg,)
    if skipped.size == d_max:
        raise AllRankDeficient("every candidate screened set is rank deficient")
    d = int(np.nanargmin(bic)) + 1
    return ScreenSet(tuple(sorted(int(k) for k in ranking[:d])), method,
                     tuple(int(k) for k in ranking), tuple(float(v) for v in bic), warnings)


def user_screen(indices: Sequence[int], p: int, n: Optional[int] = None) -> ScreenSet:
    """Screen set supplied directly by the caller."""
    idx = sorted({int(k) for k in indices})
    if idx and (idx[0] < 0 or idx[-1] >= p):
        raise IndexOutOfRange(f"screen indices must lie in [0, {p})")
    if n is not None and len(idx) >= n:
        raise ValueError(f"screened set size {len(idx)} must be < n = {n}")
    rest = [k for k in range(p) if k not in set(idx)]
    return ScreenSet(tuple(idx), "user", tuple(idx + rest))


def screen(data: Dataset, method: str = "SIS", d_max: Optional[int] = None,
           ridge_eps: float = 0.0, rank_data: Optional[Dataset] = None) -> ScreenSet:
    """Rank with SIS or HOLP, then choose the size by BIC.

    ``rank_data`` (same columns, independent rows) is used for both ranking
    and BIC when given; otherwise ``data`` is reused.
    """
    src = data if rank_data is None else rank_data
    if src.p != data.p:
        raise ValueError("screening data must have the same columns")
    method = method.upper()
    if method == "SIS":
        ranking = sis_rank(src)
    elif method == "HOLP":
        ranking = holp_rank(src, ridge_eps)
    else:
        raise ValueError(f"unknown screening method {method!r}")
    return bic_select(src, ranking, d_max, method)
