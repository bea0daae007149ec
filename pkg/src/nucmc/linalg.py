"""Dense matrix helpers: SVD, best rank-r truncation, norms and CSV I/O.

Matrices are plain ``float64`` numpy arrays. LAPACK's divide-and-conquer SVD
backs :func:`svd`; at the sizes this package targets (a few hundred rows) a
full decomposition is cheap enough to run inside every solver iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgument


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return `M` as a finite 2-D float64 array, raising InvalidArgument otherwise."""
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidArgument(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidArgument(f"{name} contains NaN or Inf")
    return A


@dataclass(frozen=True)
class TruncatedSVD:
    """Top-r singular triplets ``(U, sigma, V)`` of a matrix.

    ``U`` is m x r, ``V`` is n x r (columns, not the transposed factor) and
    ``sigma`` is nonincreasing.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.sigma.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.U.shape[0], self.V.shape[0]

    def to_matrix(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


def svd(M) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full SVD ``M = U diag(sigma) V^T``.

    Returns
    -------
    U : (m, m) ndarray
    sigma : (min(m, n),) ndarray, nonincreasing and nonnegative
    V : (n, n) ndarray
        Right singular vectors as columns.
    """
    A = as_matrix(M)
    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    return U, s, Vt.T


def singular_values(M) -> np.ndarray:
    return np.linalg.svd(as_matrix(M), compute_uv=False)


def truncate(M, r: int) -> TruncatedSVD:
    """Best rank-`r` approximation of `M` in Frobenius and spectral norm."""
    A = as_matrix(M)
    m, n = A.shape
    if not isinstance(r, (int, np.integer)) or not 1 <= r <= min(m, n):
        raise InvalidArgument(f"rank r must satisfy 1 <= r <= {min(m, n)}, got {r}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return TruncatedSVD(U=U[:, :r].copy(), sigma=s[:r].copy(), V=Vt[:r].T.copy())


def tail_norm(M, r: int) -> float:
    """``||M - M_r||_F``, i.e. the l2 norm of the discarded singular values."""
    s = singular_values(M)
    return float(np.sqrt(np.sum(s[r:] ** 2)))


def norms(M) -> dict[str, float]:
    A = as_matrix(M)
    s = np.linalg.svd(A, compute_uv=False)
    return {
        "nuclear": float(s.sum()),
        "frobenius": float(np.linalg.norm(A)),
        "spectral": float(s[0]),
        "max_abs": float(np.max(np.abs(A))),
    }


def nuclear_norm(M) -> float:
    return float(np.linalg.svd(M, compute_uv=False).sum())


def spectral_norm(M) -> float:
    return float(np.linalg.svd(M, compute_uv=False)[0])


def read_csv_matrix(path) -> np.ndarray:
    text = Path(path).read_text()
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise InvalidArgument(f"{path}: empty matrix file")
    data = [[float(tok) for tok in line.split(",")] for line in rows]
    if len({len(row) for row in data}) != 1:
        raise InvalidArgument(f"{path}: ragged rows")
    return as_matrix(np.array(data), name=str(path))


def write_csv_matrix(path, M) -> None:
    # repr() gives the shortest string that round-trips a float64 exactly
    A = as_matrix(M)
    lines = [",".join(repr(float(x)) for x in row) for row in A]
    Path(path).write_text("\n".join(lines) + "\n")
