"""Loaders for binary classification data sets.

Two text formats are accepted:

* dense CSV, one sample per line: ``label,f1,f2,...,fn``
* sparse rows: ``label idx:val idx:val ...`` with 1-based feature indices

Labels are mapped to ``{0, 1}``; ``-1`` is read as ``0``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .problems import ClassificationProblem


def _label(token: str) -> float:
    v = float(token)
    if v == -1.0:
        return 0.0
    if v not in (0.0, 1.0):
        raise ValueError(f"label {token!r} is not one of -1, 0, 1")
    return v


def load_dense_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(Path(path), delimiter=",", ndmin=2)
    labels = np.array([_label(str(v)) for v in data[:, 0]])
    return data[:, 1:].copy(), labels


def load_sparse_text(path, n_features: int | None = None) -> tuple[sp.csr_matrix, np.ndarray]:
    rows, cols, vals, labels = [], [], [], []
    for i, line in enumerate(Path(path).read_text().splitlines()):
        parts = line.split()
        if not parts:
            continue
        r = len(labels)
        labels.append(_label(parts[0]))
        for tok in parts[1:]:
            idx, val = tok.split(":")
            j = int(idx) - 1
            if j < 0:
                raise ValueError(f"line {i + 1}: feature indices are 1-based")
            rows.append(r)
            cols.append(j)
            vals.append(float(val))
    width = (max(cols) + 1 if cols else 0) if n_features is None else n_features
    X = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), width))
    return X, np.asarray(labels)


def load_dataset(path, n_features: int | None = None):
    """Dispatch on content: a comma in the first line means dense CSV."""
    first = Path(path).read_text().lstrip().split("\n", 1)[0]
    if "," in first:
        return load_dense_csv(path)
    return load_sparse_text(path, n_features=n_features)


def max_abs_scale(X):
    """Divide every feature column by its maximum absolute value (zero columns untouched)."""
    if sp.issparse(X):
        scale = np.asarray(abs(X).max(axis=0).todense()).ravel()
        scale[scale == 0.0] = 1.0
        return sp.csr_matrix(X @ sp.diags(1.0 / scale))
    scale = np.max(np.abs(X), axis=0)
    scale[scale == 0.0] = 1.0
    return X / scale


def split_indices(m: int, val_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 <= val_fraction < 1.0:
        raise ValueError("val_fraction must be in [0, 1)")
    perm = np.random.Generator(np.random.Philox(seed)).permutation(m)
    n_val = int(round(val_fraction * m))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def classification_from_file(path, val_fraction: float = 0.2, seed: int = 0,
                             scale: bool = False, n_features: int | None = None) -> ClassificationProblem:
    X, y = load_dataset(path, n_features=n_features)
    if scale:
        X = max_abs_scale(X)
    train, val = split_indices(X.shape[0], val_fraction, seed)
    return ClassificationProblem(X[train], y[train], X[val], y[val])
