"""Weighted lasso with unpenalized coordinates, scaled lasso and GIC tuning."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.optimize

from . import _cd
from .data import Dataset
from .exceptions import (
    AllFitsFailed,
    DimensionMismatch,
    NotConverged,
    RankDeficientFreeSet,
    SigmaCollapse,
)

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 10_000
DEFAULT_N_LAMBDA = 50
DEFAULT_LAMBDA_RATIO = 0.01


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty ``lam * sum_k weights[k] |b_k|`` over the non-free coordinates.

    ``weights`` has one entry per design column; entries listed in
    ``free_set`` are ignored (those coordinates are unpenalized).
    """

    lam: float = 0.0
    weights: Optional[np.ndarray] = None
    free_set: tuple = ()

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")
        free = tuple(sorted({int(k) for k in self.free_set}))
        object.__setattr__(self, "free_set", free)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ValueError("penalty weights must be finite and nonnegative")
            object.__setattr__(self, "weights", w)

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(lam, self.weights, self.free_set)

    def resolve(self, q: int):
        """Return ``(weights, free_mask)`` expanded to ``q`` coordinates."""
        w = np.ones(q) if self.weights is None else self.weights
        if w.shape[0] != q:
            raise DimensionMismatch(f"penalty has {w.shape[0]} weights for {q} columns")
        free = np.zeros(q, dtype=bool)
        if self.free_set:
            idx = np.asarray(self.free_set)
            if idx.min() < 0 or idx.max() >= q:
                raise DimensionMismatch("free_set index out of range")
            free[idx] = True
        w = np.where(free, 0.0, w)
        return w, free


@dataclass
class LassoFit:
    coefficients: np.ndarray
    residual: np.ndarray
    lambda_used: float
    iterations: int
    converged: bool
    kkt_violation: float

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.coefficients)


@dataclass
class ScaledLassoFit:
    beta_init: np.ndarray
    sigma_hat: float
    lambda0: float
    iterations: int
    residual: np.ndarray = field(repr=False, default=None)


@dataclass
class GICPath:
    lambdas: np.ndarray
    gic: np.ndarray
    rss: np.ndarray
    support_size: np.ndarray
    fits: list = field(repr=False, default_factory=list)
    best_index: int = 0


def _kkt_from_gradient(g, coef, lam, weights, free_mask) -> float:
    pen = lam * weights
    viol = np.where(
        free_mask,
        np.abs(g),
        np.where(coef != 0, np.abs(g - pen * np.sign(coef)), np.maximum(np.abs(g) - pen, 0.0)),
    )
    return float(viol.max()) if viol.size else 0.0


def kkt_violation(design, residual, coef, lam, weights, free_mask) -> float:
    """Largest violation of the lasso subgradient conditions."""
    n = design.shape[0]
    return _kkt_from_gradient(design.T @ residual / n, coef, lam, weights, free_mask)


def lasso_objective(design, target, coef, lam, weights) -> float:
    n = design.shape[0]
    r = target - design @ coef
    return 0.5 * float(r @ r) / n + lam * float(np.sum(weights * np.abs(coef)))


class _Problem:
    """Validated design/target pair with its (lazily computed) Gram matrix."""

    def __init__(self, design, target, penalty: PenaltySpec, gram=None):
        D = np.asarray(design, dtype=float)
        t = np.asarray(target, dtype=float).ravel()
        if D.ndim != 2:
            raise DimensionMismatch(f"design must be 2-D, got shape {D.shape}")
        n, q = D.shape
        if q < 1:
            raise DimensionMismatch("design needs at least one column")
        if t.shape[0] != n:
            raise DimensionMismatch(f"design has {n} rows, target has {t.shape[0]}")
        self.D = D
        self.t = t
        self.n, self.q = n, q
        self.weights, self.free = penalty.resolve(q)
        if gram is not None:
            gram = np.ascontiguousarray(gram, dtype=float)
            if gram.shape != (q, q):
                raise DimensionMismatch(f"gram must be {q} x {q}")
            self.col_sq = np.diag(gram).copy()
        else:
            self.col_sq = np.einsum("ij,ij->j", D, D) / n
        self._gram = gram
        self.free_idx = np.flatnonzero(self.free)
        if self.free_idx.size:
            self._check_free_rank()

    @property
    def gram(self) -> np.ndarray:
        if self._gram is None:
            self._gram = np.ascontiguousarray(self.D.T @ self.D) / self.n
        return self._gram

    def _check_free_rank(self):
        F = self.D[:, self.free_idx]
        if self.free_idx.size > self.n:
            raise RankDeficientFreeSet(f"{self.free_idx.size} free columns exceed n={self.n}")
        R = scipy.linalg.qr(F, mode="r", pivoting=True)[0]
        scale = math.sqrt(self.n * float(self.col_sq.max()))
        d = np.abs(np.diag(R))
        if d.size < self.free_idx.size or d.min() <= 1e-10 * scale:
            raise RankDeficientFreeSet("free columns are linearly dependent")

    def null_residual(self):
        """Residual after fitting the free coordinates alone."""
        if not self.free_idx.size:
            return self.t.copy(), np.zeros(self.q)
        F = self.D[:, self.free_idx]
        coef_free = scipy.linalg.lstsq(F, self.t)[0]
        b = np.zeros(self.q)
        b[self.free_idx] = coef_free
        return self.t - F @ coef_free, b

    def lambda_max(self) -> float:
        r0, _ = self.null_residual()
        g = np.abs(self.D.T @ r0) / self.n
        pen = ~self.free & (self.weights > 0)
        if not np.any(pen):
            return 0.0
        return float(np.max(g[pen] / self.weights[pen]))

    def solve(self, lam, warm_start=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> LassoFit:
        if warm_start is None:
            b = np.zeros(self.q)
        else:
            b = np.array(warm_start, dtype=float).ravel()
            if b.shape[0] != self.q:
                raise DimensionMismatch("warm_start has wrong length")
        pen = lam * self.weights
        G = self.gram
        r = self.t - self.D @ b
        total = 0
        sweep_tol = tol
        converged = False
        viol = math.inf
        # tighten the sweep criterion until the KKT certificate, recomputed
        # from the residual, meets tol
        g = self.D.T @ r / self.n
        for _ in range(6):
            sweeps, converged = _cd.cd_kernel(G, pen, b, g, sweep_tol, max_iter - total)
            total += sweeps
            r = self.t - self.D @ b
            g = self.D.T @ r / self.n
            viol = _kkt_from_gradient(g, b, lam, self.weights, self.free)
            if not converged or viol <= tol or total >= max_iter:
                break
            sweep_tol *= 0.1
        fit = LassoFit(b, r, float(lam), int(total), bool(converged and viol <= tol), viol)
        if not fit.converged:
            raise NotConverged(max_iter, best=fit)
        return fit


def weighted_lasso(design, target, penalty: PenaltySpec, warm_start=None,
                   tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                   gram=None) -> LassoFit:
    """Solve ``min_b (2n)^-1 ||target - design b||^2 + lam sum_k w_k |b_k|``.

    Coordinates in ``penalty.free_set`` carry no penalty. The returned fit
    carries its KKT certificate in ``kkt_violation`` (``<= tol``).

    Raises
    ------
    NotConverged
        ``max_iter`` sweeps exhausted; the last iterate is on ``.best``.
    RankDeficientFreeSet, DimensionMismatch

    ``gram`` may supply a precomputed ``design' design / n``.
    """
    prob = _Problem(design, target, penalty, gram)
    return prob.solve(penalty.lam, warm_start, tol, max_iter)


def default_grid(lambda_max: float, n_lambda: int = DEFAULT_N_LAMBDA,
                 ratio: float = DEFAULT_LAMBDA_RATIO) -> np.ndarray:
    if lambda_max <= 0:
        return np.array([0.0])
    return np.geomspace(lambda_max, ratio * lambda_max, n_lambda)


def gic_value(rss: float, support_size: int, n: int, q: int, rss_floor: float = 0.0) -> float:
    """``log(RSS/n) + |support| log(log n) log(q) / n``."""
    rss = max(rss, rss_floor)
    if rss <= 0:
        return -math.inf
    return math.log(rss / n) + support_size * math.log(math.log(n)) * math.log(q) / n


def gic_tune(design, target, penalty_template: PenaltySpec, grid: Optional[Sequence[float]] = None,
             tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER, return_path: bool = False,
             n_lambda: int = DEFAULT_N_LAMBDA, ratio: float = DEFAULT_LAMBDA_RATIO, gram=None):
    """Pick the penalty level on ``grid`` minimizing the GIC.

    The grid must be strictly decreasing; fits are warm-started along it. The
    support size and ``q`` count penalized coordinates only. Ties go to the
    larger penalty. Without ``grid``, ``n_lambda`` log-spaced points from
    ``lambda_max`` down to ``ratio * lambda_max`` are used.

    Returns ``(lambda_star, fit)``, plus a :class:`GICPath` when
    ``return_path`` is set.
    """
    prob = _Problem(design, target, penalty_template, gram)
    if grid is None:
        grid = default_grid(prob.lambda_max(), n_lambda, ratio)
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    if grid.size > 1 and np.any(np.diff(grid) >= 0):
        raise ValueError("grid must be strictly decreasing")
    if np.any(grid < 0):
        raise ValueError("grid values must be nonnegative")
    n = prob.n
    q_pen = max(int(np.count_nonzero(~prob.free)), 1)
    rss_floor = 1e-24 * float(prob.t @ prob.t)
    pen_mask = ~prob.free
    _, warm = prob.null_residual()
    fits, gics, rss_list, sizes = [], [], [], []
    best = None
    last_err = None
    for i, lam in enumerate(grid):
        try:
            fit = prob.solve(lam, warm, tol, max_iter)
        except NotConverged as err:
            last_err = err
            fits.append(None)
            gics.append(math.nan)
            rss_list.append(math.nan)
            sizes.append(-1)
            continue
        warm = fit.coefficients
        rss = float(fit.residual @ fit.residual)
        size = int(np.count_nonzero(fit.coefficients[pen_mask]))
        g = gic_value(rss, size, n, q_pen, rss_floor)
        fits.append(fit)
        gics.append(g)
        rss_list.append(rss)
        sizes.append(size)
        if best is None or g < gics[best]:
            best = i
    if best is None:
        raise AllFitsFailed(f"all {grid.size} grid fits failed") from last_err
    path = GICPath(grid, np.array(gics), np.array(rss_list), np.array(sizes),
                   fits if return_path else [], best)
    if return_path:
        return float(grid[best]), fits[best], path
    return float(grid[best]), fits[best]


def universal_lambda(n: int, p: int) -> float:
    """``sqrt(2 log(p) / n)``."""
    return math.sqrt(2.0 * math.log(p) / n)


def quantile_lambda(n: int, p: int) -> float:
    """Quantile-based penalty level for the scaled lasso.

    ``sqrt(2 / n) * L`` with ``L = Phi^-1(1 - k / p)``, where ``k`` solves
    ``k = L^4 + 2 L^2``. Smaller than :func:`universal_lambda`, which reduces
    the upward bias of the noise estimate.
    """
    inv = NormalDist().inv_cdf

    def level(k):
        return inv(1.0 - k / p)

    k = scipy.optimize.brentq(lambda k: k - (level(k) ** 4 + 2.0 * level(k) ** 2), 1e-6, p / 2.0)
    return math.sqrt(2.0 / n) * level(k)


def resolve_lambda0(lambda0: Union[float, str, None], n: int, p: int) -> float:
    """Numeric ``lambda0`` from a value, ``"quantile"`` (default) or ``"universal"``."""
    if lambda0 is None or lambda0 == "quantile":
        return quantile_lambda(n, p)
    if lambda0 == "universal":
        return universal_lambda(n, p)
    if isinstance(lambda0, str):
        raise ValueError(f"lambda0 must be a number, 'quantile' or 'universal', got {lambda0!r}")
    return float(lambda0)


def scaled_lasso(data: Dataset, lambda0: Union[float, str, None] = None, tol: float = 1e-6,
                 max_iter: int = 200, lasso_tol: float = DEFAULT_TOL) -> ScaledLassoFit:
    """Joint estimate of coefficients and noise level.

    Alternates a lasso fit at penalty ``sigma * lambda0`` with the update
    ``sigma = ||y - X b||_2 / sqrt(n)``, starting from ``||y||_2 / sqrt(n)``,
    until the relative change in ``sigma`` is at most ``tol``. ``lambda0``
    is a number or the name of a rule (see :func:`resolve_lambda0`).
    """
    lambda0 = resolve_lambda0(lambda0, data.n, data.p)
    if not lambda0 > 0:
        raise ValueError("lambda0 must be positive")
    prob = _Problem(data.X, data.y, PenaltySpec(), data.gram)
    sqrt_n = math.sqrt(data.n)
    sigma = float(np.linalg.norm(data.y)) / sqrt_n
    if sigma < 1e-12:
        raise SigmaCollapse("response is identically zero")
    b = np.zeros(data.p)
    for it in range(1, max_iter + 1):
        fit = prob.solve(sigma * lambda0, b, lasso_tol)
        b = fit.coefficients
        sigma_new = float(np.linalg.norm(fit.residual)) / sqrt_n
        if sigma_new < 1e-12:
            raise SigmaCollapse("scaled lasso residual vanished (interpolating fit)")
        done = abs(sigma_new - sigma) <= tol * sigma
        sigma = sigma_new
        if done:
            return ScaledLassoFit(b, sigma, float(lambda0), it, fit.residual)
    raise NotConverged(max_iter, best=ScaledLassoFit(b, sigma, float(lambda0), max_iter, fit.residual))
