"""Regression data in canonical form: standardized design, centered response.

Columns of ``X`` are centered and scaled so that ``X_j' X_j = n`` (not
``n - 1``); ``y`` is centered and no intercept is fitted.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (DimensionError, MissingColumn, NonFiniteInput, ParseError,
                     ZeroVarianceColumn)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Standardized design ``X`` (n x p) and centered response ``y``.

    ``col_means``, ``col_scales`` and ``y_mean`` record the affine map that
    produced ``X`` and ``y`` from the raw inputs, so that
    ``raw_X = X * col_scales + col_means``.
    """

    X: np.ndarray
    y: np.ndarray
    col_means: np.ndarray
    col_scales: np.ndarray
    y_mean: float = 0.0
    names: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "X", _frozen(self.X))
        object.__setattr__(self, "y", _frozen(self.y))
        object.__setattr__(self, "col_means", _frozen(self.col_means))
        object.__setattr__(self, "col_scales", _frozen(self.col_scales))
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise DimensionError(
                f"X has shape {self.X.shape}, y has shape {self.y.shape}")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @cached_property
    def gram(self):
        """``X' X`` in Fortran order, computed once."""
        G = np.asfortranarray(self.X.T @ self.X)
        G.setflags(write=False)
        return G

    @cached_property
    def xty(self):
        v = self.X.T @ self.y
        v.setflags(write=False)
        return v

    def unscale(self):
        """Return ``(raw_X, raw_y)`` reconstructed from the stored map."""
        return (self.X * self.col_scales + self.col_means,
                self.y + self.y_mean)

    def check_invariants(self):
        n = self.n
        if n < 2 or self.p < 1:
            return False
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            return False
        sums = np.abs(self.X.sum(axis=0))
        norms = np.einsum("ij,ij->j", self.X, self.X)
        return bool(np.all(sums <= 1e-8 * n)
                    and np.all(np.abs(norms - n) <= 1e-6 * n)
                    and abs(self.y.sum()) <= 1e-8 * n)


def standardize(raw_X, raw_y, names=None):
    """Center every column, scale to squared norm ``n``, and center ``y``.

    Raises
    ------
    NonFiniteInput
        If any entry is NaN or infinite.
    ZeroVarianceColumn
        If a column of ``raw_X`` is constant.
    """
    X = np.asarray(raw_X, dtype=float)
    y = np.asarray(raw_y, dtype=float).reshape(-1)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionError(
            f"design shape {X.shape} does not match response length {y.shape[0]}")
    n, p = X.shape
    if n < 2 or p < 1:
        raise DimensionError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("design or response contains NaN or Inf")

    means = X.mean(axis=0)
    Xc = X - means
    scales = np.sqrt(np.einsum("ij,ij->j", Xc, Xc) / n)
    for j in range(p):
        # relative test so that large-offset constant columns are caught
        if scales[j] <= 1e-12 * max(1.0, abs(means[j])):
            raise ZeroVarianceColumn(j)
    y_mean = float(y.mean())
    return Dataset(X=Xc / scales, y=y - y_mean, col_means=means,
                   col_scales=scales, y_mean=y_mean,
                   names=tuple(names) if names is not None else None)


def _parse_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i, row) for i, row in enumerate(csv.reader(fh), start=1)
                if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ParseError(1, "empty file")

    header = None
    first_line, first = rows[0]
    try:
        [float(c) for c in first]
    except ValueError:
        header = [c.strip() for c in first]
        rows = rows[1:]

    width = len(header) if header is not None else len(rows[0][1]) if rows else 0
    values = []
    for line, row in rows:
        if len(row) != width:
            raise ParseError(line, f"expected {width} fields, found {len(row)}")
        try:
            values.append([float(c) for c in row])
        except ValueError:
            bad = next(c for c in row if not _is_float(c))
            raise ParseError(line, f"non-numeric value {bad!r}") from None
    if not values:
        raise ParseError(first_line, "no data rows")
    return header, np.array(values, dtype=float)


def _is_float(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def _column_index(header, width, column):
    if isinstance(column, (int, np.integer)):
        idx = int(column)
    elif header is not None and column in header:
        return header.index(column)
    elif isinstance(column, str) and column.lstrip("-").isdigit():
        idx = int(column)
    else:
        raise MissingColumn(f"no column named {column!r}")
    if idx < 0:
        idx += width
    if not 0 <= idx < width:
        raise MissingColumn(f"column index {column} out of range for {width} columns")
    return idx


def load_csv(path, response_column=None):
    """Read a numeric CSV and standardize it.

    ``response_column`` is a header name or a (0-based, negative allowed)
    column index. With ``None`` every column is a predictor and the response
    is all zeros, which is enough for precision estimation.
    """
    header, data = _parse_rows(path)
    width = data.shape[1]
    if response_column is None:
        X, y, cols = data, np.zeros(data.shape[0]), list(range(width))
    else:
        r = _column_index(header, width, response_column)
        cols = [c for c in range(width) if c != r]
        X, y = data[:, cols], data[:, r]
    if X.shape[1] == 0:
        raise MissingColumn("no predictor columns left after removing the response")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput(f"{path}: data contains NaN or Inf")
    names = [header[c] for c in cols] if header is not None else None
    return standardize(X, y, names=names)
