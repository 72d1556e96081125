"""Datasets, CSV ingestion, column standardization and fold assignment."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Response vector ``y`` (length n) and covariate matrix ``X`` (n x p)."""

    y: np.ndarray
    X: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        y = _frozen(self.y)
        X = _frozen(self.X)
        if X.ndim == 1:
            X = _frozen(X.reshape(-1, 1))
        if y.ndim != 1 or X.ndim != 2:
            raise DataError("y must be 1-d and X must be 2-d")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"y has {y.shape[0]} rows but X has {X.shape[0]}")
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise DataError(f"need n >= 2 and p >= 1, got X of shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("X contains non-finite entries")
        if not np.all(np.isfinite(y)):
            raise DataError("y contains non-finite entries")
        names = self.feature_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != X.shape[1]:
                raise DataError(
                    f"{len(names)} feature names given for {X.shape[1]} columns"
                )
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.y[rows], self.X[rows], self.feature_names)

    def check_binary(self):
        """Raise :class:`DataError` unless every response is 0 or 1."""
        bad = ~np.isin(self.y, (0.0, 1.0))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DataError(
                f"logistic loss needs y in {{0,1}}; row {i} has y={self.y[i]!r}"
            )


@dataclass(frozen=True)
class ScalingInfo:
    """Column means and scales used by :func:`standardize`.

    ``constant[j]`` is True for columns with zero sample SD; those keep
    scale 1 and are never shifted.
    """

    means: np.ndarray
    scales: np.ndarray
    constant: np.ndarray = field(default=None)
    centered: bool = True

    def __post_init__(self):
        object.__setattr__(self, "means", _frozen(self.means))
        object.__setattr__(self, "scales", _frozen(self.scales))
        const = self.constant
        if const is None:
            const = np.zeros(self.scales.shape, dtype=bool)
        object.__setattr__(self, "constant", _frozen(const, dtype=bool))
        if np.any(self.scales <= 0):
            raise DataError("scales must be positive")

    @property
    def shift(self):
        """Per-column offset actually subtracted (0 for constant columns)."""
        if not self.centered:
            return np.zeros_like(self.means)
        return np.where(self.constant, 0.0, self.means)

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        return (X - self.shift) / self.scales

    def inverse_transform(self, Xs):
        Xs = np.asarray(Xs, dtype=float)
        return Xs * self.scales + self.shift

    def coef_to_original(self, beta_std, intercept_std=0.0):
        """Map coefficients fitted on standardized columns back to raw columns.

        Returns ``(beta, intercept)`` such that
        ``X @ beta + intercept == transform(X) @ beta_std + intercept_std``.
        """
        beta = np.asarray(beta_std, dtype=float) / self.scales
        intercept = float(intercept_std) - float(self.shift @ beta)
        return beta, intercept

    def to_dict(self):
        return {
            "means": self.means.tolist(),
            "scales": self.scales.tolist(),
            "constant": self.constant.tolist(),
            "centered": self.centered,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["means"]),
            np.asarray(d["scales"]),
            np.asarray(d["constant"], dtype=bool),
            bool(d.get("centered", True)),
        )


@dataclass(frozen=True)
class FoldAssignment:
    """``fold_of[i]`` is the 0-based fold id of observation ``i``."""

    fold_of: np.ndarray
    J: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "fold_of", _frozen(self.fold_of, dtype=np.intp))

    def test_index(self, m):
        return np.flatnonzero(self.fold_of == m)

    def train_index(self, m):
        return np.flatnonzero(self.fold_of != m)

    def sizes(self):
        return np.bincount(self.fold_of, minlength=self.J)


def _parse_cell(text, row, col):
    try:
        value = float(text)
    except ValueError:
        raise DataError(
            f"non-numeric cell {text!r} at row {row}, column {col}"
        ) from None
    if not math.isfinite(value):
        raise DataError(f"non-finite cell {text!r} at row {row}, column {col}")
    return value


def load_csv(path, response_col=0, has_header=True):
    """Read a numeric CSV file into a :class:`Dataset`.

    Parameters
    ----------
    path : str or Path
        Comma-separated UTF-8 file with an optional single header row.
    response_col : str or int or None
        Column name (requires a header) or 0-based index of the response.
        ``None`` reads covariates only; ``y`` is then all zeros.
    has_header : bool
        Whether the first row holds column names.

    Rows and columns in error messages are 1-based, counting the header row.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")

    header = None
    first_data_row = 1
    if has_header:
        header = [h.strip() for h in rows[0]]
        rows = rows[1:]
        first_data_row = 2
    if not rows:
        raise DataError(f"{path}: no data rows")
    ncol = len(header) if header is not None else len(rows[0])

    if response_col is None:
        ycol = None
    elif isinstance(response_col, str) and not response_col.lstrip("-").isdigit():
        if header is None:
            raise DataError("response column given by name but file has no header")
        if response_col not in header:
            raise DataError(f"response column {response_col!r} not in header {header}")
        ycol = header.index(response_col)
    else:
        ycol = int(response_col)
        if not 0 <= ycol < ncol:
            raise DataError(f"response column index {ycol} out of range for {ncol} columns")

    values = np.empty((len(rows), ncol))
    for r, cells in enumerate(rows):
        lineno = r + first_data_row
        if len(cells) != ncol:
            raise DataError(f"row {lineno} has {len(cells)} cells, expected {ncol}")
        for c, text in enumerate(cells):
            values[r, c] = _parse_cell(text.strip(), lineno, c + 1)

    xcols = [c for c in range(ncol) if c != ycol]
    names = None
    if header is not None:
        names = [header[c] for c in xcols]
    y = values[:, ycol] if ycol is not None else np.zeros(len(rows))
    if not xcols:
        raise DataError(f"{path}: no covariate columns")
    return Dataset(y, values[:, xcols], names)


def write_csv(path, header, rows):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header is not None:
            w.writerow(header)
        w.writerows(rows)


def standardize(d: Dataset, center=True):
    """Center and scale every non-constant column to mean 0, sample SD 1.

    Constant columns are flagged in the returned :class:`ScalingInfo` and pass
    through unchanged. With ``center=False`` columns are only divided by their SD, which
    preserves a no-intercept model exactly.
    """
    X = d.X
    means = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    constant = ~(sd > 1e-12 * np.maximum(1.0, np.abs(means)))
    scales = np.where(constant, 1.0, sd)
    info = ScalingInfo(means, scales, constant, centered=center)
    return Dataset(d.y, info.transform(X), d.feature_names), info


def unstandardize(d: Dataset, info: ScalingInfo) -> Dataset:
    return Dataset(d.y, info.inverse_transform(d.X), d.feature_names)


def make_folds(n, J, seed=0) -> FoldAssignment:
    """Split ``range(n)`` into ``J`` folds of near-equal size.

    A seeded uniform permutation is cut into consecutive blocks; the first
    ``n % J`` folds get one extra member.
    """
    if not 2 <= J <= n:
        raise DataError(f"need 2 <= J <= n, got J={J}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    sizes = np.full(J, n // J)
    sizes[: n % J] += 1
    fold_of = np.empty(n, dtype=np.intp)
    start = 0
    for m, size in enumerate(sizes):
        fold_of[perm[start:start + size]] = m
        start += size
    return FoldAssignment(fold_of, int(J), int(seed))
