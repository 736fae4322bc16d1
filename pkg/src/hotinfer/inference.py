"""De-biased estimates, confidence intervals and the per-coefficient pipeline."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import List, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .data import Dataset, OracleTruth
from .exceptions import (
    DegenerateInnerProduct,
    HotInferError,
    InvalidAlpha,
    NotConverged,
    SigmaCollapse,
)
from .orthogonalization import (
    HybridDirection,
    Projector,
    Tuning,
    hybrid_direction,
    ldpe_direction,
    partial_penalized_direction,
)
from .parallel import parallel_map
from .screening import ScreenSet, screen as run_screen, user_screen
from .solvers import ScaledLassoFit, scaled_lasso

log = logging.getLogger(__name__)

_STD_NORMAL = NormalDist()

METHODS = ("HOT", "LDPE", "HOT-A")
ROUTES = ("two-step", "partial")


def normal_quantile(prob: float) -> float:
    """Standard normal quantile (Wichura's AS241 via :mod:`statistics`)."""
    return _STD_NORMAL.inv_cdf(prob)


def normal_two_sided_pvalue(t: float) -> float:
    """``2 (1 - Phi(|t|))``, computed without cancellation."""
    return math.erfc(abs(t) / math.sqrt(2.0))


@dataclass
class InferenceResult:
    j: int
    beta_hat: float
    se: float
    ci_lower: float
    ci_upper: float
    p_value: float
    method: str
    tau: float
    eta: float

    def covers(self, value: float) -> bool:
        return self.ci_lower <= value <= self.ci_upper

    @property
    def length(self) -> float:
        return self.ci_upper - self.ci_lower


@dataclass
class DecompositionDiagnostic:
    """``beta_hat - beta_j`` split into noise ``W`` and bias ``Delta``."""

    j: int
    W: float
    Delta: float
    identity_gap: float


def _check_inner(direction: HybridDirection, data: Dataset) -> float:
    xj = data.X[:, direction.j]
    zx = float(direction.z @ xj)
    if abs(zx) <= 1e-12 * np.linalg.norm(direction.z) * np.linalg.norm(xj):
        raise DegenerateInnerProduct(f"z'x_j is numerically zero for j={direction.j}")
    return zx


def hot_estimate(direction: HybridDirection, data: Dataset) -> float:
    """``z' y / z' x_j``."""
    zx = _check_inner(direction, data)
    return float(direction.z @ data.y) / zx


def _one_step(direction: HybridDirection, init_beta, data: Dataset) -> float:
    zx = _check_inner(direction, data)
    init_beta = np.asarray(init_beta, dtype=float)
    if init_beta.shape != (data.p,):
        raise ValueError("initial estimate must have length p")
    resid = data.y - data.X @ init_beta
    return float(init_beta[direction.j]) + float(direction.z @ resid) / zx


def _init_vector(init):
    return init.beta_init if isinstance(init, ScaledLassoFit) else init


def ldpe_estimate(direction: HybridDirection, init: Union[ScaledLassoFit, np.ndarray],
                  data: Dataset) -> float:
    """``b_j + z' (y - X b) / z' x_j`` for an initial estimate ``b``."""
    return _one_step(direction, _init_vector(init), data)


def hot_alternative_estimate(direction: HybridDirection, init: Union[ScaledLassoFit, np.ndarray],
                             data: Dataset) -> float:
    """One-step correction of an initial estimate along a hybrid direction.

    Same formula as :func:`ldpe_estimate`. Because the hybrid ``z`` is
    orthogonal to the screened columns, the initial values on ``S \\ {j}``
    drop out.
    """
    return _one_step(direction, _init_vector(init), data)


def confidence_interval(beta_hat: float, tau: float, sigma_hat: float, alpha: float = 0.05,
                        quantile=normal_quantile):
    """Two-sided normal interval and p-value.

    Returns ``(lower, upper, p_value)`` with half-width
    ``Phi^-1(1 - alpha/2) * sigma_hat * tau`` and the p-value for
    ``beta_j = 0``.
    """
    if not (isinstance(alpha, (int, float)) and 0 < alpha < 1):
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha!r}")
    if not (tau > 0 and sigma_hat > 0):
        raise ValueError("tau and sigma_hat must be positive")
    se = sigma_hat * tau
    half = quantile(1.0 - alpha / 2.0) * se
    return beta_hat - half, beta_hat + half, normal_two_sided_pvalue(beta_hat / se)


def decomposition(direction: HybridDirection, data: Dataset, truth: OracleTruth,
                  init_beta=None) -> DecompositionDiagnostic:
    """Split the estimation error of one coefficient into noise and bias.

    ``W = z' eps / z' x_j`` and ``Delta`` sums ``z' x_k (beta_k - b_k) / z' x_j``
    over ``k`` outside ``{j}`` and the projection set of the direction, with
    ``b`` the initial estimate (zero when ``init_beta`` is None). The gap
    measures how far ``beta_hat - beta_j`` is from ``W + Delta``.
    """
    truth.check_against(data)
    j = direction.j
    zx = _check_inner(direction, data)
    if init_beta is None:
        b = np.zeros(data.p)
        est = hot_estimate(direction, data)
    else:
        b = np.asarray(_init_vector(init_beta), dtype=float)
        est = _one_step(direction, b, data)
    W = float(direction.z @ truth.noise) / zx
    keep = np.ones(data.p, dtype=bool)
    keep[j] = False
    keep[list(direction.projection_set)] = False
    zxk = data.X[:, keep].T @ direction.z
    Delta = float(zxk @ (truth.beta[keep] - b[keep])) / zx
    gap = abs((est - truth.beta[j]) - (W + Delta))
    return DecompositionDiagnostic(j, W, Delta, gap)


@dataclass
class InferenceConfig:
    """Settings for :func:`infer_all`.

    ``screening`` is ``"SIS"``, ``"HOLP"``, a :class:`ScreenSet` or a sequence
    of user indices. ``sigma`` fixes the noise level; ``None`` estimates it by
    the scaled lasso. ``split`` screens on the first half of the rows and
    infers on the second half.
    """

    method: str = "HOT"
    screening: Union[str, ScreenSet, Sequence[int]] = "SIS"
    alpha: float = 0.05
    tuning: Tuning = field(default_factory=Tuning)
    sigma: Optional[float] = None
    route: str = "two-step"
    split: bool = False
    d_max: Optional[int] = None
    lambda0: Optional[float] = None
    n_jobs: Optional[int] = 1

    def validate(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.route not in ROUTES:
            raise ValueError(f"route must be one of {ROUTES}, got {self.route!r}")
        if not (isinstance(self.alpha, (int, float)) and 0 < self.alpha < 1):
            raise InvalidAlpha(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("fixed sigma must be positive")


@dataclass
class InferenceReport:
    method: str
    alpha: float
    sigma_hat: float
    results: List[Optional[InferenceResult]]
    warnings: List[str]
    screen: Optional[ScreenSet] = None
    directions: list = field(default=None, repr=False)
    failed: List[int] = field(default_factory=list)
    feature_names: Optional[tuple] = None

    @property
    def significant(self) -> List[int]:
        return [r.j for r in self.results if r is not None and r.p_value < self.alpha]

    def to_dict(self) -> dict:
        rows = []
        for j, r in enumerate(self.results):
            if r is None:
                rows.append({"j": j, "beta_hat": None, "se": None, "ci": [None, None],
                             "p_value": None, "tau": None, "eta": None})
            else:
                rows.append({"j": r.j, "beta_hat": r.beta_hat, "se": r.se,
                             "ci": [r.ci_lower, r.ci_upper], "p_value": r.p_value,
                             "tau": r.tau, "eta": r.eta})
        out = {
            "method": self.method,
            "alpha": self.alpha,
            "sigma_hat": self.sigma_hat,
            "results": rows,
            "warnings": list(self.warnings),
            "screen": None if self.screen is None else list(self.screen.indices),
            "significant": {"count": len(self.significant), "indices": self.significant},
        }
        if self.feature_names is not None:
            out["feature_names"] = list(self.feature_names)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def to_csv(self) -> str:
        lines = ["j,beta_hat,se,ci_lower,ci_upper,p_value,tau,eta"]
        for row in self.to_dict()["results"]:
            vals = [row["j"], row["beta_hat"], row["se"], row["ci"][0], row["ci"][1],
                    row["p_value"], row["tau"], row["eta"]]
            lines.append(",".join("" if v is None else repr(v) for v in vals))
        return "\n".join(lines) + "\n"


def _resolve_screen(data: Dataset, cfg: InferenceConfig, screen_data: Optional[Dataset]) -> ScreenSet:
    s = cfg.screening
    if isinstance(s, ScreenSet):
        return s
    if isinstance(s, str):
        return run_screen(data, s, cfg.d_max, rank_data=screen_data)
    return user_screen(s, data.p, data.n)


def _scaled_lasso_or_floor(data: Dataset, lambda0, warnings: List[str]) -> ScaledLassoFit:
    # a noiseless response drives the noise estimate to zero; keep going at
    # the resolution of double precision instead of failing every coefficient
    try:
        return scaled_lasso(data, lambda0)
    except (SigmaCollapse, NotConverged) as err:
        floor = math.sqrt(np.finfo(float).eps) * float(np.linalg.norm(data.y)) / math.sqrt(data.n)
        best = getattr(err, "best", None)
        if isinstance(err, NotConverged) and (best is None or best.sigma_hat > 1e3 * floor):
            raise
        if floor <= 0:
            raise SigmaCollapse("response is identically zero") from None
        beta = np.asarray(scipy.linalg.lstsq(data.X, data.y)[0]) if data.p < data.n else np.zeros(data.p)
        warnings.append(f"noise level estimate collapsed ({type(err).__name__}); "
                        f"using numerical floor sigma_hat={floor:.3g}")
        return ScaledLassoFit(beta, floor, math.nan, 0, data.y - data.X @ beta)


def split_rows(data: Dataset):
    """Screening half (first ``n // 2`` rows) and inference half (the rest)."""
    h = data.n // 2
    return data.subset_rows(np.arange(h)), data.subset_rows(np.arange(h, data.n))


def infer_all(data: Dataset, config: Optional[InferenceConfig] = None,
              init: Optional[ScaledLassoFit] = None, keep_directions: bool = False,
              screen_data: Optional[Dataset] = None) -> InferenceReport:
    """Confidence intervals and p-values for every coefficient.

    A failure on one coordinate is recorded in ``warnings``/``failed`` and
    its result is ``None``; other coordinates are unaffected.
    """
    cfg = config or InferenceConfig()
    cfg.validate()
    warnings: List[str] = []
    if cfg.split and screen_data is None:
        screen_data, data = split_rows(data)
    screen = None
    if cfg.method in ("HOT", "HOT-A"):
        screen = _resolve_screen(data, cfg, screen_data)
        warnings.extend(screen.warnings)
    need_init = cfg.method in ("LDPE", "HOT-A")
    if init is None and (need_init or cfg.sigma is None):
        init = _scaled_lasso_or_floor(data, cfg.lambda0, warnings)
    sigma_hat = float(cfg.sigma) if cfg.sigma is not None else init.sigma_hat

    projector = None
    if screen is not None:
        projector = Projector(data, screen)
        if cfg.route == "two-step" and len(screen.indices) < data.p:
            projector._shared_projection()

    def one(j):
        try:
            if cfg.method == "LDPE":
                direction = ldpe_direction(data, j, cfg.tuning)
            elif cfg.route == "partial":
                direction = partial_penalized_direction(data, screen, j, cfg.tuning, projector)
            else:
                direction = hybrid_direction(data, screen, j, cfg.tuning, projector)
            if cfg.method == "HOT":
                est = hot_estimate(direction, data)
            else:
                est = ldpe_estimate(direction, init, data)
            lo, hi, pv = confidence_interval(est, direction.tau, sigma_hat, cfg.alpha)
            res = InferenceResult(j, est, sigma_hat * direction.tau, lo, hi, pv, cfg.method,
                                  direction.tau, direction.eta)
            return res, (direction if keep_directions else None), None
        except HotInferError as err:
            return None, None, f"j={j}: {type(err).__name__}: {err}"

    out = parallel_map(one, range(data.p), cfg.n_jobs)
    results = [o[0] for o in out]
    failed = [j for j, o in enumerate(out) if o[0] is None]
    warnings.extend(o[2] for o in out if o[2] is not None)
    for msg in warnings:
        log.warning(msg)
    directions = [o[1] for o in out] if keep_directions else None
    return InferenceReport(cfg.method, cfg.alpha, sigma_hat, results, warnings, screen,
                           directions, failed, data.feature_names)
