"""Numeric containers, column standardization and CSV ingestion."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .exceptions import DegenerateColumn, DimensionMismatch, NonFiniteInput

# columns within these bounds of (mean 0, norm sqrt(n)) are left untouched so
# that standardizing twice is exact
_MEAN_SNAP = 1e-10
_SCALE_SNAP = 1e-12


def _frozen(a, order="C"):
    a = np.array(a, dtype=float, order=order, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix and response, optionally standardized.

    Columns of a standardized ``X`` have mean zero and Euclidean norm
    ``sqrt(n)``. ``column_means``/``column_scales`` (and ``y_mean``/``y_scale``)
    record the affine map from the raw data so fitted coefficients can be
    mapped back with :meth:`coef_to_raw`.
    """

    X: np.ndarray
    y: np.ndarray
    standardized: bool = False
    column_means: Optional[np.ndarray] = None
    column_scales: Optional[np.ndarray] = None
    y_mean: float = 0.0
    y_scale: float = 1.0
    feature_names: Optional[tuple] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2:
            raise DimensionMismatch(f"X must be 2-D, got shape {X.shape}")
        n, p = X.shape
        if y.shape[0] != n:
            raise DimensionMismatch(f"X has {n} rows but y has length {y.shape[0]}")
        if n < 4 or p < 2:
            raise DimensionMismatch(f"need n >= 4 and p >= 2, got n={n}, p={p}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise NonFiniteInput("X and y must be finite")
        means = np.zeros(p) if self.column_means is None else self.column_means
        scales = np.ones(p) if self.column_scales is None else self.column_scales
        if np.shape(means) != (p,) or np.shape(scales) != (p,):
            raise DimensionMismatch("column_means/column_scales must have length p")
        object.__setattr__(self, "X", _frozen(X, order="F"))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "column_means", _frozen(means))
        object.__setattr__(self, "column_scales", _frozen(scales))
        if self.feature_names is not None:
            names = tuple(str(s) for s in self.feature_names)
            if len(names) != p:
                raise DimensionMismatch("feature_names must have length p")
            object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @cached_property
    def gram(self) -> np.ndarray:
        """``X' X / n``, computed once and shared by every per-column fit."""
        return _frozen(self.X.T @ self.X / self.n)

    def coef_to_raw(self, coef):
        """Map coefficients fit on this dataset to the raw scale.

        Returns ``(coef_raw, intercept)`` such that
        ``raw_X @ coef_raw + intercept`` reproduces the standardized-scale
        predictions mapped back through the response transform.
        """
        coef = np.asarray(coef, dtype=float)
        coef_raw = coef * self.y_scale / self.column_scales
        intercept = self.y_mean - float(self.column_means @ coef_raw)
        return coef_raw, intercept

    def subset_rows(self, rows) -> "Dataset":
        """Restandardized dataset built from a subset of rows of this one.

        The response of the subset is recentered whenever this dataset's
        response was centered.
        """
        rows = np.asarray(rows)
        center = abs(float(self.y.mean())) <= 1e-10 * max(1.0, float(np.abs(self.y).max()))
        return standardize(self.X[rows], self.y[rows], center_response=center)


@dataclass(frozen=True, eq=False)
class OracleTruth:
    """True coefficients, noise level and realized noise of a simulated dataset."""

    beta: np.ndarray
    sigma: float
    noise: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "beta", _frozen(np.ravel(self.beta)))
        object.__setattr__(self, "noise", _frozen(np.ravel(self.noise)))

    def check_against(self, data: Dataset) -> None:
        if self.beta.shape[0] != data.p or self.noise.shape[0] != data.n:
            raise DimensionMismatch("truth dimensions do not match dataset")


def _standardize_columns(A):
    n = A.shape[0]
    means = A.mean(axis=0)
    centered = A - means
    scales = np.linalg.norm(centered, axis=0) / np.sqrt(n)
    amax = np.maximum(1.0, np.abs(A).max(axis=0))
    degenerate = np.flatnonzero(scales <= 1e-12 * amax)
    if degenerate.size:
        raise DegenerateColumn(degenerate)
    keep = (np.abs(means) <= _MEAN_SNAP * amax) & (np.abs(scales - 1.0) <= _SCALE_SNAP)
    means = np.where(keep, 0.0, means)
    scales = np.where(keep, 1.0, scales)
    out = np.where(keep, A, centered / scales)
    return out, means, scales


def standardize(raw_X, raw_y, scale_response: bool = False,
                feature_names: Optional[Sequence[str]] = None,
                center_response: bool = False) -> Dataset:
    """Center every column of ``raw_X`` and scale it to norm ``sqrt(n)``.

    The response is centered and scaled the same way when ``scale_response``
    is set, only centered when ``center_response`` is set, and otherwise
    passed through unchanged.

    Raises
    ------
    DimensionMismatch, NonFiniteInput, DegenerateColumn
    """
    X = np.asarray(raw_X, dtype=float)
    y = np.asarray(raw_y, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"X must be 2-D, got shape {X.shape}")
    y = y.ravel()
    if y.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"X has {X.shape[0]} rows but y has length {y.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("X and y must be finite")
    Xs, means, scales = _standardize_columns(X)
    y_mean, y_scale = 0.0, 1.0
    if scale_response:
        try:
            ys, ym, ysc = _standardize_columns(y[:, None])
        except DegenerateColumn:
            raise DegenerateColumn(["response"]) from None
        y, y_mean, y_scale = ys[:, 0], float(ym[0]), float(ysc[0])
    elif center_response:
        y_mean = float(y.mean())
        y = y - y_mean
    return Dataset(Xs, y, standardized=True, column_means=means,
                   column_scales=scales, y_mean=y_mean, y_scale=y_scale,
                   feature_names=feature_names)


def _read_numeric_csv(path, header: bool):
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    names = None
    if header:
        if not rows:
            raise DimensionMismatch(f"{path}: empty file")
        names, rows = [c.strip() for c in rows[0]], rows[1:]
    if not rows:
        raise DimensionMismatch(f"{path}: no data rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DimensionMismatch(f"{path}: row {i + 1} has {len(row)} fields, expected {width}")
        for k, cell in enumerate(row):
            cell = cell.strip()
            if not cell:
                raise NonFiniteInput(f"{path}: missing value at row {i + 1}, column {k + 1}")
            try:
                out[i, k] = float(cell)
            except ValueError:
                raise NonFiniteInput(f"{path}: non-numeric value {cell!r} at row {i + 1}, column {k + 1}") from None
    if not np.all(np.isfinite(out)):
        raise NonFiniteInput(f"{path}: non-finite entries")
    return out, names


def load_csv(x_path, y_path=None, *, header: bool = False,
             response: Union[str, int, None] = None):
    """Read a design matrix and response from CSV.

    The response comes either from ``y_path`` (a single-column file) or from
    the column of the design file named/indexed by ``response``.

    Returns ``(X, y, feature_names)``; ``feature_names`` is ``None`` when the
    files carry no header.
    """
    X, names = _read_numeric_csv(x_path, header)
    if y_path is not None:
        if response is not None:
            raise ValueError("give either y_path or response, not both")
        Y, _ = _read_numeric_csv(y_path, header)
        if Y.shape[1] != 1:
            raise DimensionMismatch(f"{y_path}: response file must have one column, found {Y.shape[1]}")
        y = Y[:, 0]
    elif response is not None:
        if isinstance(response, str) and not response.lstrip("-").isdigit():
            if names is None or response not in names:
                raise DimensionMismatch(f"response column {response!r} not found")
            col = names.index(response)
        else:
            col = int(response)
            if not -X.shape[1] <= col < X.shape[1]:
                raise DimensionMismatch(f"response column index {col} out of range")
            col %= X.shape[1]
        y = X[:, col]
        X = np.delete(X, col, axis=1)
        if names is not None:
            names = names[:col] + names[col + 1:]
    else:
        raise ValueError("a response is required (y_path or response column)")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"design has {X.shape[0]} rows, response has {y.shape[0]}")
    return X, y, names
