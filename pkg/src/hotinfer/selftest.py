"""Quick smoke checks on one seeded instance, used by ``hotinfer selftest``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List

import numpy as np
from scipy.special import ndtri

from .data import standardize
from .inference import confidence_interval, normal_quantile
from .orthogonalization import Projector, Tuning, hybrid_direction, partial_penalized_direction
from .screening import user_screen
from .simulation import gen_design
from .solvers import PenaltySpec, kkt_violation, weighted_lasso


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _instance():
    rng = np.random.default_rng(20240607)
    n, p = 60, 40
    X = gen_design(n, p, 0.5, rng)
    beta = np.zeros(p)
    beta[:5] = [2.0, -1.5, 1.0, 1.0, -0.5]
    y = X @ beta + rng.standard_normal(n)
    return standardize(X, y, center_response=True)


def _check_kkt(data) -> CheckResult:
    weights = np.linspace(0.5, 1.5, data.p - 1)
    pen = PenaltySpec(0.1, weights, free_set=(0, 1))
    fit = weighted_lasso(data.X[:, 1:], data.X[:, 0], pen, tol=1e-10)
    viol = kkt_violation(data.X[:, 1:], fit.residual, fit.coefficients, 0.1, weights,
                         pen.resolve(data.p - 1)[1])
    return CheckResult("lasso-kkt", viol <= 1e-9, f"max violation {viol:.2e}")


def _check_orthogonality(data, screen, projector) -> CheckResult:
    worst = 0.0
    ok = True
    for j in (0, 3, 10, 25):
        d = hybrid_direction(data, screen, j, projector=projector)
        scale = np.linalg.norm(d.z) * np.sqrt(data.n)
        others = [s for s in screen.indices if s != j]
        if others:
            worst = max(worst, float(np.abs(data.X[:, others].T @ d.z).max()) / scale)
        zz = float(d.z @ d.z)
        ok &= d.z_dot_xj >= zz * (1 - 1e-8)
    ok &= worst <= 1e-8
    return CheckResult("exact-orthogonality", bool(ok), f"max scaled |z'x_s| {worst:.2e}")


def _check_routes(data, screen, projector) -> CheckResult:
    worst = 0.0
    for j in (0, 3, 10, 25):
        h = hybrid_direction(data, screen, j, Tuning(lam=0.2, tol=1e-10), projector)
        pp = partial_penalized_direction(data, screen, j, Tuning(lam=0.2, tol=1e-10), projector)
        worst = max(worst, float(np.abs(h.z - pp.z).max() / np.abs(h.z).max()))
    return CheckResult("route-equivalence", worst <= 1e-6, f"max relative gap {worst:.2e}")


def _check_quantile(quantile: Callable[[float], float]) -> CheckResult:
    probs = (0.9, 0.95, 0.975, 0.995, 0.9995)
    worst = max(abs(quantile(q) - float(ndtri(q))) for q in probs)
    lo, hi, _ = confidence_interval(0.0, 1.0, 1.0, 0.05, quantile)
    worst = max(worst, abs(hi - float(ndtri(0.975))), abs(lo + float(ndtri(0.975))))
    return CheckResult("normal-quantile", worst <= 1e-9, f"max deviation {worst:.2e}")


def run_selftest(quantile: Callable[[float], float] = normal_quantile) -> List[CheckResult]:
    """Run every check; ``quantile`` can be swapped to exercise a failure."""
    data = _instance()
    screen = user_screen(range(5), data.p, data.n)
    projector = Projector(data, screen)
    return [
        _check_kkt(data),
        _check_orthogonality(data, screen, projector),
        _check_routes(data, screen, projector),
        _check_quantile(quantile),
    ]
