"""Dense data container, reproducible sampling, centering, and file ingestion.

Convention used throughout the package: a data matrix is a 2-D float64 numpy
array of shape (n_features, n_points) -- points are columns.
"""
from __future__ import annotations

import numpy as np

from .rng import SeedLike, rng_from


class ParseError(ValueError):
    """Malformed input file; `line` is the 1-based offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def check_matrix(X: np.ndarray) -> np.ndarray:
    """Validate the (n_features, n_points) convention; returns float64 view/copy."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"expected a 2-D matrix with at least one row and column, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix contains non-finite values")
    return X


def sample_indices(
    universe: int,
    count: int,
    seed: SeedLike | np.random.Generator,
    exclude: np.ndarray | None = None,
) -> np.ndarray:
    """Draw `count` distinct indices uniformly from range(universe) minus `exclude`.

    Deterministic given the seed. Raises ValueError when fewer than `count`
    indices remain available.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else rng_from(seed)
    if exclude is None or len(exclude) == 0:
        if count > universe:
            raise ValueError(f"cannot draw {count} distinct indices from a universe of {universe}")
        return rng.choice(universe, size=count, replace=False).astype(np.int64)
    exclude = np.asarray(exclude, dtype=np.int64)
    pool = np.setdiff1d(np.arange(universe, dtype=np.int64), exclude)
    if count > pool.size:
        raise ValueError(
            f"cannot draw {count} distinct indices: only {pool.size} remain after excluding {exclude.size}"
        )
    return pool[rng.choice(pool.size, size=count, replace=False)]


def _check_indices(idx: np.ndarray, bound: int, what: str) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError(f"{what} index set must be 1-D")
    if idx.size and (idx.min() < 0 or idx.max() >= bound):
        raise ValueError(f"{what} index out of range [0, {bound})")
    return idx


def restrict_rows(X: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Rows of X selected by idx, in idx order."""
    idx = _check_indices(idx, X.shape[0], "row")
    return X[idx]


def restrict_cols(X: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Columns of X selected by idx, in idx order."""
    idx = _check_indices(idx, X.shape[1], "column")
    return X[:, idx]


def center_columns(X: np.ndarray) -> np.ndarray:
    """Subtract the mean column so the columns sum to the zero vector."""
    X = np.asarray(X, dtype=np.float64)
    return X - X.mean(axis=1, keepdims=True)


def standardize_features(X: np.ndarray) -> np.ndarray:
    """Center each feature (row) and scale it to unit variance; constant rows stay centered."""
    X = center_columns(X)
    std = X.std(axis=1, keepdims=True)
    std[std == 0.0] = 1.0
    return X / std


def _parse_table(lines, sep: str | None, skip_header: int):
    rows = []
    width = None
    for lineno, raw in enumerate(lines, start=1):
        if lineno <= skip_header:
            continue
        text = raw.strip()
        if not text:
            continue
        tokens = text.split(sep) if sep else text.split()
        tokens = [t for t in tokens if t]
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise ParseError(f"expected {width} fields, found {len(tokens)}", lineno)
        try:
            rows.append([float(t) for t in tokens])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    if not rows:
        raise ParseError("no numeric rows found")
    return np.asarray(rows, dtype=np.float64)


def load_dense(
    path,
    fmt: str = "csv",
    points_as: str = "rows",
    skip_header: int = 0,
) -> np.ndarray:
    """Load a rectangular numeric table as an (n_features, n_points) matrix.

    fmt is "csv" (comma-separated) or "whitespace". `points_as` declares the
    file's orientation; the returned matrix always has points as columns.
    """
    if fmt not in ("csv", "whitespace"):
        raise ValueError(f"unknown format {fmt!r}")
    if points_as not in ("rows", "cols"):
        raise ValueError(f"points_as must be 'rows' or 'cols', got {points_as!r}")
    with open(path) as fh:
        table = _parse_table(fh, "," if fmt == "csv" else None, skip_header)
    X = table.T if points_as == "rows" else table
    return check_matrix(X)


def load_libsvm(path, dims: int) -> tuple[np.ndarray, np.ndarray]:
    """Load sparse "label idx:val ..." text into a dense (dims, n_points) matrix.

    Feature indices are 1-based and must not exceed `dims`; unspecified
    entries are zero. Returns (matrix, labels).
    """
    if dims < 1:
        raise ValueError("dims must be at least 1")
    cols = []
    labels = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            tokens = text.split()
            try:
                labels.append(float(tokens[0]))
            except ValueError:
                raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
            col = np.zeros(dims)
            for tok in tokens[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(f"bad feature pair {tok!r}", lineno) from None
                if not 1 <= idx <= dims:
                    raise ParseError(f"feature index {idx} outside [1, {dims}]", lineno)
                col[idx - 1] = val
            cols.append(col)
    if not cols:
        raise ParseError("no data lines found")
    X = np.column_stack(cols)
    return check_matrix(X), np.asarray(labels)
