"""Score directions for de-biased estimation of single coefficients.

Three constructions of the direction ``z_j``:

* ``hybrid_direction``: project ``x_j`` and the unscreened columns off the
  screened columns (excluding ``j``), then take the residual of a weighted
  lasso of the projected ``x_j`` on the other projected columns.
* ``partial_penalized_direction``: residual of a single lasso of ``x_j`` on
  all other columns in which the screened columns are left unpenalized. It
  yields the same ``z_j`` as the hybrid route and serves as a cross-check.
* ``ldpe_direction``: plain lasso residual of ``x_j`` on all other columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .data import Dataset
from .exceptions import DegenerateDirection, IndexOutOfRange, RankDeficientScreenSet
from .screening import ScreenSet
from .solvers import (
    DEFAULT_LAMBDA_RATIO,
    DEFAULT_MAX_ITER,
    DEFAULT_N_LAMBDA,
    DEFAULT_TOL,
    LassoFit,
    PenaltySpec,
    _Problem,
    gic_tune,
    universal_lambda,
)

HOT = "HOT"
LDPE = "LDPE"
PARTIAL = "PartialPenalized"


@dataclass(frozen=True)
class Tuning:
    """How the lasso penalty of a direction is chosen.

    ``lam`` fixes the penalty outright; ``c`` fixes it at
    ``c * sqrt(2 log(p) / n)``; with neither, the GIC picks it from a
    ``n_lambda``-point log grid down to ``ratio * lambda_max``.
    """

    lam: Optional[float] = None
    c: Optional[float] = None
    n_lambda: int = DEFAULT_N_LAMBDA
    ratio: float = DEFAULT_LAMBDA_RATIO
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    @property
    def mode(self) -> str:
        if self.lam is not None:
            return "fixed"
        if self.c is not None:
            return "universal"
        return "gic"


def _as_tuning(tuning) -> Tuning:
    if tuning is None:
        return Tuning()
    if isinstance(tuning, Tuning):
        return tuning
    return Tuning(lam=float(tuning))


@dataclass
class ProjectedFeatures:
    j: int
    columns: np.ndarray          # j first, then the unscreened columns other than j
    psi: np.ndarray              # n x len(columns), column-aligned with ``columns``
    projection_set: tuple
    psi_norms: np.ndarray        # ||psi_k||_2 / sqrt(n)

    def psi_of(self, k: int) -> np.ndarray:
        pos = np.flatnonzero(self.columns == k)
        if not pos.size:
            raise IndexOutOfRange(f"column {k} has no projected feature for j={self.j}")
        return self.psi[:, pos[0]]


@dataclass
class HybridDirection:
    j: int
    z: np.ndarray
    tau: float
    eta: float
    omega_support: np.ndarray
    lambda_j: float
    method: str
    z_dot_xj: float
    coef_columns: np.ndarray = field(repr=False, default=None)
    coef: np.ndarray = field(repr=False, default=None)
    penalized_columns: np.ndarray = field(repr=False, default=None)
    weights: np.ndarray = field(repr=False, default=None)
    kkt_violation: float = 0.0
    projection_set: tuple = ()


def _check_j(data: Dataset, j: int) -> int:
    j = int(j)
    if not 0 <= j < data.p:
        raise IndexOutOfRange(f"j={j} outside [0, {data.p})")
    return j


def _orthonormal_basis(A: np.ndarray) -> np.ndarray:
    if A.shape[1] == 0:
        return A
    Q, R, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    scale = np.linalg.norm(A, axis=0).max()
    if A.shape[1] >= A.shape[0] or d.min() <= 1e-10 * scale:
        raise RankDeficientScreenSet("screened columns are linearly dependent")
    return Q


def _residualize(Q: np.ndarray, M: np.ndarray) -> np.ndarray:
    if Q.shape[1] == 0:
        return M.copy()
    out = M - Q @ (Q.T @ M)
    # second Gram-Schmidt pass keeps orthogonality at rounding level
    return out - Q @ (Q.T @ out)


class Projector:
    """Exact projections against ``X[:, S \\ {j}]`` with a cache for ``j`` outside ``S``."""

    def __init__(self, data: Dataset, screen: ScreenSet):
        self.data = data
        self.screen = screen
        self.S = np.asarray(screen.indices, dtype=np.int64)
        if self.S.size and (self.S.min() < 0 or self.S.max() >= data.p):
            raise IndexOutOfRange("screened index outside [0, p)")
        self.in_S = np.zeros(data.p, dtype=bool)
        self.in_S[self.S] = True
        self.Sc = np.flatnonzero(~self.in_S)
        self._shared = None
        self._shared_gram = None

    def _shared_projection(self):
        if self._shared is None:
            Q = _orthonormal_basis(self.data.X[:, self.S])
            self._shared = _residualize(Q, self.data.X[:, self.Sc])
        return self._shared

    def _gram_of_shared(self):
        if self._shared_gram is None:
            P = self._shared_projection()
            self._shared_gram = P.T @ P / self.data.n
        return self._shared_gram

    def design_gram(self, pf: ProjectedFeatures):
        """Gram of ``pf.psi[:, 1:]`` taken from the shared cache, or None."""
        if self.in_S[pf.j]:
            return None
        pos = np.searchsorted(self.Sc, pf.columns[1:])
        return self._gram_of_shared()[np.ix_(pos, pos)]

    def project(self, j: int) -> ProjectedFeatures:
        data = self.data
        j = _check_j(data, j)
        others = self.Sc[self.Sc != j]
        columns = np.concatenate([[j], others]).astype(np.int64)
        if self.in_S[j]:
            proj_set = self.S[self.S != j]
            Q = _orthonormal_basis(data.X[:, proj_set])
            psi = _residualize(Q, data.X[:, columns])
        else:
            proj_set = self.S
            shared = self._shared_projection()
            pos = np.searchsorted(self.Sc, columns)
            psi = shared[:, pos]
        psi = np.asfortranarray(psi)
        norms = np.linalg.norm(psi, axis=0) / math.sqrt(data.n)
        return ProjectedFeatures(j, columns, psi, tuple(int(s) for s in proj_set), norms)


def exact_orthogonalize(data: Dataset, screen: ScreenSet, j: int) -> ProjectedFeatures:
    """Residualize ``x_j`` and every unscreened column against ``X[:, S \\ {j}]``."""
    return Projector(data, screen).project(j)


def _drop(G: np.ndarray, j: int) -> np.ndarray:
    keep = np.delete(np.arange(G.shape[0]), j)
    return G[np.ix_(keep, keep)]


def _solve(design, target, penalty: PenaltySpec, tuning: Tuning, n: int, p: int, gram=None):
    if tuning.mode == "fixed":
        lam = tuning.lam
    elif tuning.mode == "universal":
        lam = tuning.c * universal_lambda(n, p)
    else:
        return gic_tune(design, target, penalty, None, tuning.tol, tuning.max_iter,
                        n_lambda=tuning.n_lambda, ratio=tuning.ratio, gram=gram)
    prob = _Problem(design, target, penalty, gram)
    return lam, prob.solve(lam, None, tuning.tol, tuning.max_iter)


def _finish(data: Dataset, j: int, z: np.ndarray, lam: float, method: str, fit: LassoFit,
            coef_columns, penalized_mask, weights, projection_set=()) -> HybridDirection:
    norm_z = float(np.linalg.norm(z))
    if norm_z <= 1e-10 * math.sqrt(data.n):
        raise DegenerateDirection(f"direction for j={j} vanished (||z|| = {norm_z:.3g})")
    zx = data.X.T @ z
    z_dot_xj = float(zx[j])
    tau = norm_z / abs(z_dot_xj) if z_dot_xj != 0 else math.inf
    zx[j] = 0.0
    eta = float(np.max(np.abs(zx))) / norm_z
    coef_columns = np.asarray(coef_columns, dtype=np.int64)
    support = coef_columns[penalized_mask & (fit.coefficients != 0)]
    return HybridDirection(
        j=j, z=z, tau=tau, eta=eta, omega_support=np.sort(support), lambda_j=float(lam),
        method=method, z_dot_xj=z_dot_xj, coef_columns=coef_columns, coef=fit.coefficients,
        penalized_columns=coef_columns[penalized_mask], weights=weights[penalized_mask],
        kkt_violation=fit.kkt_violation, projection_set=tuple(projection_set),
    )


def hybrid_direction(data: Dataset, screen: ScreenSet, j: int,
                     tuning: Union[Tuning, float, None] = None,
                     projector: Optional[Projector] = None) -> HybridDirection:
    """Two-step direction: exact projection, then weighted-lasso residual.

    The lasso regresses the projected ``x_j`` on the projected unscreened
    columns with weights ``||psi_k||_2 / sqrt(n)``.
    """
    tuning = _as_tuning(tuning)
    proj = projector if projector is not None else Projector(data, screen)
    pf = proj.project(j)
    target = pf.psi[:, 0]
    design = pf.psi[:, 1:]
    weights = pf.psi_norms[1:]
    if design.shape[1] == 0:
        fit = LassoFit(np.zeros(0), target.copy(), 0.0, 0, True, 0.0)
        lam = 0.0
    else:
        lam, fit = _solve(design, target, PenaltySpec(0.0, weights), tuning, data.n, data.p,
                          proj.design_gram(pf))
    return _finish(data, pf.j, fit.residual, lam, HOT, fit, pf.columns[1:],
                   np.ones(design.shape[1], dtype=bool), weights, pf.projection_set)


def partial_penalized_direction(data: Dataset, screen: ScreenSet, j: int,
                                lambda_j: Union[Tuning, float, None] = None,
                                projector: Optional[Projector] = None) -> HybridDirection:
    """One-step direction: lasso of ``x_j`` on ``X_{-j}`` with ``S \\ {j}`` unpenalized.

    Penalty weights are the projected-column norms of the two-step route, so
    both routes share the same optimization problem.
    """
    tuning = _as_tuning(lambda_j)
    proj = projector if projector is not None else Projector(data, screen)
    pf = proj.project(j)
    j = pf.j
    others = np.delete(np.arange(data.p), j)
    free_mask = proj.in_S[others]
    weights = np.zeros(others.size)
    pos = np.searchsorted(others, pf.columns[1:])
    weights[pos] = pf.psi_norms[1:]
    penalty = PenaltySpec(0.0, weights, tuple(np.flatnonzero(free_mask)))
    lam, fit = _solve(data.X[:, others], data.X[:, j], penalty, tuning, data.n, data.p,
                      _drop(data.gram, j))
    return _finish(data, j, fit.residual, lam, PARTIAL, fit, others, ~free_mask, weights,
                   pf.projection_set)


def ldpe_direction(data: Dataset, j: int, tuning: Union[Tuning, float, None] = None) -> HybridDirection:
    """Plain lasso residual of ``x_j`` on all other columns, unit weights."""
    tuning = _as_tuning(tuning)
    j = _check_j(data, j)
    others = np.delete(np.arange(data.p), j)
    weights = np.ones(others.size)
    lam, fit = _solve(data.X[:, others], data.X[:, j], PenaltySpec(0.0, weights), tuning,
                      data.n, data.p, _drop(data.gram, j))
    return _finish(data, j, fit.residual, lam, LDPE, fit, others,
                   np.ones(others.size, dtype=bool), weights)
