"""Synthetic designs, coefficient patterns and coverage replication campaigns."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .data import Dataset, OracleTruth, standardize
from .exceptions import ConfigError, FatalSimFailure, HotInferError, InvalidPattern
from .inference import (
    InferenceConfig,
    decomposition,
    infer_all,
)
from .orthogonalization import Tuning
from .parallel import parallel_map
from .screening import screen as run_screen
from .solvers import resolve_lambda0, scaled_lasso, universal_lambda

log = logging.getLogger(__name__)


def gen_design(n: int, p: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Rows i.i.d. ``N(0, Sigma)`` with ``Sigma_jk = rho^|j-k|``.

    Each row follows the AR(1) recursion ``x_1 = e_1``,
    ``x_{k+1} = rho x_k + sqrt(1 - rho^2) e_{k+1}``, which is exact for this
    covariance.
    """
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    E = rng.standard_normal((n, p))
    X = np.empty((n, p))
    X[:, 0] = E[:, 0]
    s = math.sqrt(1.0 - rho * rho)
    for k in range(1, p):
        X[:, k] = rho * X[:, k - 1] + s * E[:, k]
    return X


def precision_diag(rho: float, p: int) -> np.ndarray:
    """Diagonal of the inverse AR(1) covariance, by dense inversion."""
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    Sigma = scipy.linalg.toeplitz(rho ** np.arange(p))
    return np.diag(np.linalg.inv(Sigma)).copy()


@dataclass(frozen=True)
class SparseUniform:
    """First ``s`` coefficients drawn from ``U[lo, hi]``, the rest zero."""

    s: int = 15
    lo: float = 0.0
    hi: float = 2.0

    kind = "sparse-uniform"


@dataclass(frozen=True)
class ApproxSparse:
    """Spikes of ``spike_scale * lambda_univ`` at ``spike_indices`` (1-based);
    ``decay_scale * lambda_univ / j^2`` at every other position ``j``."""

    spike_indices: Optional[tuple] = None
    spike_scale: float = 3.0
    decay_scale: float = 3.0

    kind = "approx-sparse"

    def spikes(self, p: int) -> tuple:
        if self.spike_indices is None:
            return tuple(range(200, p + 1, 200))
        return tuple(int(i) for i in self.spike_indices)


Pattern = Union[SparseUniform, ApproxSparse]


def gen_coefficients(pattern: Pattern, p: int, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(pattern, SparseUniform):
        if not 0 <= pattern.s <= p or pattern.lo > pattern.hi:
            raise InvalidPattern(f"invalid sparse-uniform pattern {pattern}")
        beta = np.zeros(p)
        beta[: pattern.s] = rng.uniform(pattern.lo, pattern.hi, size=pattern.s)
        return beta
    if isinstance(pattern, ApproxSparse):
        spikes = pattern.spikes(p)
        if any(not 1 <= i <= p for i in spikes):
            raise InvalidPattern("spike indices must lie in [1, p] (1-based)")
        lam = universal_lambda(n, p)
        idx = np.arange(1, p + 1, dtype=float)
        beta = pattern.decay_scale * lam / idx ** 2
        beta[np.asarray(spikes, dtype=int) - 1] = pattern.spike_scale * lam
        return beta
    raise InvalidPattern(f"unknown pattern {pattern!r}")


def strong_set(pattern: Pattern, beta: np.ndarray, p: int, rule: str = "auto") -> np.ndarray:
    """Indices (0-based) over which ``cp_max`` is averaged."""
    if rule == "auto":
        rule = "spikes" if isinstance(pattern, ApproxSparse) else "nonzero"
    if rule == "nonzero":
        return np.flatnonzero(beta)
    if rule == "spikes":
        if not isinstance(pattern, ApproxSparse):
            raise ConfigError("cp_max rule 'spikes' needs an approx-sparse pattern")
        return np.asarray(pattern.spikes(p), dtype=int) - 1
    if rule == "largest":
        return np.flatnonzero(np.abs(beta) == np.abs(beta).max())
    raise ConfigError(f"unknown cp_max rule {rule!r}")


_METHOD_RE = re.compile(r"^(HOT-A|HOT|LDPE)(?:-(SIS|HOLP))?(\(I\))?$")


def parse_method(label: str, default_screen: str = "SIS", default_split: bool = False):
    """``"HOT-SIS(I)"`` -> ``("HOT", "SIS", True)``; ``"LDPE"`` -> ``("LDPE", None, False)``."""
    m = _METHOD_RE.match(label.strip().upper())
    if not m:
        raise ConfigError(f"unrecognised method label {label!r}")
    base, scr, indep = m.groups()
    if base == "LDPE":
        if scr or indep:
            raise ConfigError("LDPE takes no screening suffix")
        return "LDPE", None, False
    return base, scr or default_screen.upper(), bool(indep) or default_split


@dataclass
class SimConfig:
    n: int = 100
    p: int = 500
    rho: float = 0.9
    sigma: float = 1.0
    pattern: Pattern = field(default_factory=SparseUniform)
    reps: int = 100
    alpha: float = 0.05
    seed: int = 0
    methods: tuple = ("HOT-SIS", "LDPE")
    screening: str = "SIS"
    screening_mode: str = "reuse"
    sigma_mode: Union[str, float] = "scaled_lasso"
    cp_max_rule: str = "auto"
    lambda_c: Optional[float] = None
    lambda0: Union[float, str, None] = None
    d_max: Optional[int] = None
    tol: float = 1e-7

    def __post_init__(self):
        self.methods = tuple(self.methods)
        self.validate()

    def validate(self):
        if self.n < 4 or self.p < 2:
            raise ConfigError("need n >= 4 and p >= 2")
        if not 0 <= self.rho < 1:
            raise ConfigError("rho must lie in [0, 1)")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.screening.upper() not in ("SIS", "HOLP"):
            raise ConfigError("screening must be SIS or HOLP")
        if self.screening_mode not in ("reuse", "split"):
            raise ConfigError("screening_mode must be 'reuse' or 'split'")
        if not self.methods:
            raise ConfigError("at least one method is required")
        for m in self.methods:
            parse_method(m, self.screening, self.screening_mode == "split")
        self.fixed_sigma()
        try:
            resolve_lambda0(self.lambda0, self.n, self.p)
        except ValueError as err:
            raise ConfigError(str(err)) from None

    def fixed_sigma(self) -> Optional[float]:
        mode = self.sigma_mode
        if mode == "scaled_lasso":
            return None
        if isinstance(mode, dict) and set(mode) == {"fixed"}:
            mode = mode["fixed"]
        if isinstance(mode, (int, float)) and not isinstance(mode, bool) and mode > 0:
            return float(mode)
        raise ConfigError(f"sigma_mode must be 'scaled_lasso' or {{'fixed': value}}, got {mode!r}")

    @property
    def lambda_univ(self) -> float:
        return universal_lambda(self.n, self.p)

    def to_dict(self) -> dict:
        d = asdict(self)
        pat = asdict(self.pattern)
        if isinstance(self.pattern, ApproxSparse) and pat["spike_indices"] is not None:
            pat["spike_indices"] = list(pat["spike_indices"])
        d["pattern"] = {"type": self.pattern.kind, **pat}
        d["methods"] = list(self.methods)
        fs = self.fixed_sigma()
        d["sigma_mode"] = "scaled_lasso" if fs is None else {"fixed": fs}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        if "pattern" in d:
            d["pattern"] = pattern_from_dict(d["pattern"])
        try:
            return cls(**d)
        except TypeError as err:
            raise ConfigError(str(err)) from None

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as err:
            raise ConfigError(f"invalid JSON: {err}") from None


def pattern_from_dict(d) -> Pattern:
    if isinstance(d, (SparseUniform, ApproxSparse)):
        return d
    if isinstance(d, str):
        d = {"type": d}
    d = dict(d)
    kind = d.pop("type", None)
    try:
        if kind == SparseUniform.kind:
            return SparseUniform(**d)
        if kind == ApproxSparse.kind:
            if d.get("spike_indices") is not None:
                d["spike_indices"] = tuple(int(i) for i in d["spike_indices"])
            return ApproxSparse(**d)
    except TypeError as err:
        raise InvalidPattern(str(err)) from None
    raise InvalidPattern(f"unknown pattern type {kind!r}")


def child_rng(seed: int, rep: int) -> np.random.Generator:
    """Generator for replication ``rep``, independent of every other rep."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(rep),)))


def simulate_dataset(cfg: SimConfig, rng: np.random.Generator, beta: np.ndarray):
    """Standardized AR(1) design with ``y = X beta + sigma * eps`` on that design."""
    X = standardize(gen_design(cfg.n, cfg.p, cfg.rho, rng), np.zeros(cfg.n)).X
    noise = cfg.sigma * rng.standard_normal(cfg.n)
    y = X @ beta + noise
    data = Dataset(X, y, standardized=True)
    return data, OracleTruth(beta, cfg.sigma, noise)


@dataclass
class MethodSummary:
    cp_all: float
    cp_max: float
    mean_length: float
    mean_sigma_hat: float
    max_identity_gap: float
    failed_coordinates: int


@dataclass
class SimulationReport:
    config: SimConfig
    methods: dict
    reps_completed: int
    reps_failed: int
    per_rep: list
    warnings: list
    records: Optional[list] = None

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "lambda_univ": self.config.lambda_univ,
            "reps_completed": self.reps_completed,
            "reps_failed": self.reps_failed,
            "methods": {k: asdict(v) for k, v in self.methods.items()},
            "per_rep": self.per_rep,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def records_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rep", "method", "j", "beta_true", "beta_hat", "ci_lo", "ci_hi", "covered", "length"])
        for rec in self.records or []:
            w.writerow([repr(v) if isinstance(v, float) else v for v in rec])
        return buf.getvalue()


def run_one_rep(cfg: SimConfig, rep: int, keep_records: bool = False, n_jobs: int = 1) -> dict:
    """Generate one dataset, run every method and score its intervals."""
    rng = child_rng(cfg.seed, rep)
    beta = gen_coefficients(cfg.pattern, cfg.p, cfg.n, rng)
    data, truth = simulate_dataset(cfg, rng, beta)
    labels = [(m, *parse_method(m, cfg.screening, cfg.screening_mode == "split")) for m in cfg.methods]
    screen_data = None
    if any(split for _, _, _, split in labels):
        screen_data, _ = simulate_dataset(cfg, rng, beta)
    init = scaled_lasso(data, cfg.lambda0, lasso_tol=cfg.tol)
    fixed = cfg.fixed_sigma()
    strong = strong_set(cfg.pattern, beta, cfg.p, cfg.cp_max_rule)
    tuning = Tuning(c=cfg.lambda_c, tol=cfg.tol)
    out = {"rep": rep, "sigma_hat": init.sigma_hat, "methods": {}}
    records = []
    screens = {}
    for label, base, scr, split in labels:
        screen = None
        if base != "LDPE":
            key = (scr, split)
            if key not in screens:
                screens[key] = run_screen(data, scr, cfg.d_max,
                                          rank_data=screen_data if split else None)
            screen = screens[key]
        icfg = InferenceConfig(method=base, screening=screen if screen is not None else "SIS",
                               alpha=cfg.alpha, tuning=tuning, sigma=fixed, n_jobs=n_jobs)
        rpt = infer_all(data, icfg, init=init, keep_directions=True)
        covered = np.zeros(cfg.p, dtype=bool)
        lengths = np.zeros(cfg.p)
        ok = np.zeros(cfg.p, dtype=bool)
        gap = 0.0
        for j, (res, dirn) in enumerate(zip(rpt.results, rpt.directions)):
            if res is None:
                continue
            ok[j] = True
            covered[j] = res.covers(beta[j])
            lengths[j] = res.length
            diag = decomposition(dirn, data, truth, None if base == "HOT" else init)
            gap = max(gap, diag.identity_gap)
            if keep_records:
                records.append([rep, label, j, float(beta[j]), res.beta_hat, res.ci_lower,
                                res.ci_upper, int(covered[j]), res.length])
        strong_ok = strong[ok[strong]]
        out["methods"][label] = {
            "covered_all": int(covered.sum()),
            "n_all": int(ok.sum()),
            "covered_max": int(covered[strong_ok].sum()),
            "n_max": int(strong_ok.size),
            "length_sum": float(lengths.sum()),
            "sigma_used": float(rpt.sigma_hat),
            "identity_gap": gap,
            "failed": len(rpt.failed),
            "screen_size": None if screen is None else screen.d,
        }
    if keep_records:
        out["records"] = records
    return out


def _rep_task(args):
    cfg, rep, keep_records, n_jobs = args
    try:
        return run_one_rep(cfg, rep, keep_records, n_jobs)
    except HotInferError as err:
        return {"rep": rep, "error": f"{type(err).__name__}: {err}"}


def aggregate(cfg: SimConfig, per_rep: Sequence[dict]) -> dict:
    """Per-method means over completed replications (order-independent)."""
    done = sorted((r for r in per_rep if "error" not in r), key=lambda r: r["rep"])
    summaries = {}
    for label in cfg.methods:
        rows = [r["methods"][label] for r in done]
        n_all = sum(r["n_all"] for r in rows)
        n_max = sum(r["n_max"] for r in rows)
        summaries[label] = MethodSummary(
            cp_all=sum(r["covered_all"] for r in rows) / n_all if n_all else math.nan,
            cp_max=sum(r["covered_max"] for r in rows) / n_max if n_max else math.nan,
            mean_length=sum(r["length_sum"] for r in rows) / n_all if n_all else math.nan,
            mean_sigma_hat=sum(r["sigma_used"] for r in rows) / len(rows) if rows else math.nan,
            max_identity_gap=max((r["identity_gap"] for r in rows), default=math.nan),
            failed_coordinates=sum(r["failed"] for r in rows),
        )
    return summaries


def run_replications(config: SimConfig, n_jobs: Optional[int] = 1,
                     keep_records: bool = False, parallel: str = "reps") -> SimulationReport:
    """Run ``config.reps`` independent replications and aggregate coverage.

    Replication ``r`` draws everything from a generator seeded by
    ``(config.seed, r)``, so the report does not depend on ``n_jobs`` or on
    the order reps execute in. Failed reps are dropped with a warning while
    they stay under 5% of the total.

    ``parallel="reps"`` spreads replications over worker processes;
    ``"coordinates"`` runs reps in turn and spreads each rep's per-coefficient
    loop over threads instead.
    """
    config.validate()
    if parallel == "reps":
        tasks = [(config, r, keep_records, 1) for r in range(config.reps)]
        results = parallel_map(_rep_task, tasks, n_jobs, backend="loky")
    elif parallel == "coordinates":
        results = [_rep_task((config, r, keep_records, n_jobs)) for r in range(config.reps)]
    else:
        raise ValueError(f"parallel must be 'reps' or 'coordinates', got {parallel!r}")
    warnings = []
    failed = [r for r in results if "error" in r]
    for r in failed:
        warnings.append(f"rep {r['rep']} failed: {r['error']}")
    if failed and len(failed) >= 0.05 * config.reps:
        raise FatalSimFailure(f"{len(failed)} of {config.reps} replications failed; first: {failed[0]['error']}")
    for msg in warnings:
        log.warning(msg)
    records = None
    if keep_records:
        records = [rec for r in sorted(results, key=lambda r: r["rep"]) for rec in r.get("records", [])]
    per_rep = []
    for r in sorted(results, key=lambda r: r["rep"]):
        per_rep.append({k: v for k, v in r.items() if k != "records"})
    return SimulationReport(config, aggregate(config, per_rep), config.reps - len(failed),
                            len(failed), per_rep, warnings, records)
