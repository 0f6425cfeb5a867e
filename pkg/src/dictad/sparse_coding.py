"""Greedy sparse approximation (OMP), batch coding and code statistics.

Signals are columns of an m x N matrix; the dictionary holds n column atoms.
Sparse codes are stored as (support, values) pairs because the atom count
grows under dictionary concatenation in the unsupervised filters.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CodingError


@dataclass
class Dictionary:
    """m x n matrix of column atoms."""

    atoms: np.ndarray

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float)
        if self.atoms.ndim != 2 or self.atoms.shape[0] < 1 or self.atoms.shape[1] < 1:
            raise CodingError("dictionary must be a nonempty 2-d matrix")

    @property
    def m(self) -> int:
        return self.atoms.shape[0]

    @property
    def n(self) -> int:
        return self.atoms.shape[1]

    def validate(self, unit_norm: bool = True, tol: float = 1e-9):
        """Check column norms. Online (RLS-updated) dictionaries skip the
        unit-norm check: the rank-one update deliberately leaves atoms raw."""
        norms = np.linalg.norm(self.atoms, axis=0)
        if np.any(norms == 0.0):
            raise CodingError("dictionary contains an all-zero atom")
        if unit_norm and np.any(np.abs(norms - 1.0) > tol):
            j = int(np.argmax(np.abs(norms - 1.0)))
            raise CodingError(f"atom {j} has norm {norms[j]:.12g}, expected 1")


@dataclass
class SparseCode:
    """Support/value representation of one coefficient vector of length dim."""

    support: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        if self.support.shape != self.values.shape:
            raise CodingError("support and values must have equal length")
        if len(np.unique(self.support)) != self.support.size:
            raise CodingError("duplicate indices in sparse support")
        if self.support.size and (self.support.min() < 0 or self.support.max() >= self.dim):
            raise CodingError("sparse support index out of range")

    @property
    def nnz(self) -> int:
        return self.support.size

    def to_dense(self) -> np.ndarray:
        x = np.zeros(self.dim)
        x[self.support] = self.values
        return x


@dataclass
class SparseCodeMatrix:
    """A list of N sparse columns sharing the same dimension."""

    columns: list[SparseCode]

    def __post_init__(self):
        dims = {c.dim for c in self.columns}
        if len(dims) > 1:
            raise CodingError(f"inconsistent code dimensions: {sorted(dims)}")

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    @property
    def dim(self) -> int:
        return self.columns[0].dim if self.columns else 0

    def to_dense(self) -> np.ndarray:
        X = np.zeros((self.dim, len(self.columns)))
        for i, c in enumerate(self.columns):
            X[c.support, i] = c.values
        return X

    @classmethod
    def from_dense(cls, X: np.ndarray) -> "SparseCodeMatrix":
        X = np.asarray(X, dtype=float)
        cols = []
        for i in range(X.shape[1]):
            sup = np.flatnonzero(X[:, i])
            cols.append(SparseCode(sup, X[sup, i], X.shape[0]))
        return cls(cols)


@dataclass(frozen=True)
class CodingConfig:
    """OMP parameters: target sparsity and residual early-exit threshold.

    residual_tol is an absolute norm; the effective threshold is
    max(residual_tol, 1e-9 * ||y||) so exactly-representable signals
    terminate early instead of chasing rounding noise.
    """

    s: int
    residual_tol: float = 0.0

    def __post_init__(self):
        if self.s < 1:
            raise CodingError("sparsity must be >= 1")
        if self.residual_tol < 0:
            raise CodingError("residual_tol must be nonnegative")


def omp(D: Dictionary, y: np.ndarray, cfg: CodingConfig) -> SparseCode:
    """Orthogonal Matching Pursuit for one signal.

    Greedily selects the atom with largest |d_j^T r| (ties to the lowest
    index), re-solves least squares on the accumulated support through the
    Cholesky factor of the support Gram matrix, and updates the residual.
    Stops at s selected atoms or when the residual norm drops below the
    early-exit threshold.
    """
    A = D.atoms
    m, n = A.shape
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != m:
        raise CodingError(f"signal dimension {y.shape[0]} != dictionary dimension {m}")
    if cfg.s > n:
        raise CodingError(f"sparsity {cfg.s} exceeds atom count {n}")

    tol = max(cfg.residual_tol, 1e-9 * np.linalg.norm(y))
    support: list[int] = []
    coef = np.empty(0)
    r = y
    while len(support) < cfg.s and np.linalg.norm(r) > tol:
        corr = np.abs(A.T @ r)
        if support:
            corr[support] = -1.0
        j = int(np.argmax(corr))
        support.append(j)
        S = A[:, support]
        gram = S.T @ S
        try:
            np.linalg.cholesky(gram)  # positive-definiteness guard
            coef = np.linalg.solve(gram, S.T @ y)
        except np.linalg.LinAlgError:
            raise CodingError(
                f"singular support sub-matrix on atoms {support} "
                "(duplicate or collinear atoms)"
            ) from None
        r = y - S @ coef
    return SparseCode(np.array(support, dtype=int), coef, n)


def _coding_threads() -> int:
    raw = os.environ.get("DICTAD_THREADS", "1")
    try:
        k = int(raw)
    except ValueError:
        return 1
    if k == 0:
        return os.cpu_count() or 1
    return max(k, 1)


def batch_code(D: Dictionary, Y: np.ndarray, cfg: CodingConfig) -> SparseCodeMatrix:
    """Code every column of Y independently with omp.

    Columns are mutually independent; DICTAD_THREADS > 1 evaluates them in a
    thread pool. Output order is by column index regardless.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[1] < 1:
        raise CodingError("batch input must be an m x N matrix with N >= 1")

    def code_one(i):
        try:
            return omp(D, Y[:, i], cfg)
        except CodingError as e:
            raise CodingError(f"column {i}: {e}") from None

    threads = _coding_threads()
    if threads > 1 and Y.shape[1] > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cols = list(pool.map(code_one, range(Y.shape[1])))
    else:
        cols = [code_one(i) for i in range(Y.shape[1])]
    return SparseCodeMatrix(cols)


def representation_errors(D: Dictionary, Y: np.ndarray, X: SparseCodeMatrix) -> np.ndarray:
    """Per-signal residual norms e_i = ||y_i - D x_i||_2."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape[0] != D.m or Y.shape[1] != X.n_columns or (X.columns and X.dim != D.n):
        raise CodingError(
            f"dimension mismatch: Y {Y.shape}, D {D.atoms.shape}, X {X.dim}x{X.n_columns}"
        )
    return np.linalg.norm(Y - D.atoms @ X.to_dense(), axis=0)


def atom_popularity(X: SparseCodeMatrix) -> np.ndarray:
    """p_j = number of columns whose support contains atom j."""
    p = np.zeros(X.dim, dtype=int)
    for c in X.columns:
        p[c.support] += 1
    return p
