"""Tangent space of a rank-r matrix, coherence, and sample-size conditions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .linalg import TruncatedSVD, as_matrix, truncate
from .sampling import SampleMultiset, make_rng

# Constant in front of the incoherence term of the full-rank sample-size
# condition, and the smaller one sufficient for the concentration statements
# alone.
SAMPLE_CONSTANT_FULL = 114.0
SAMPLE_CONSTANT_CONCENTRATION = 32.0


@dataclass(frozen=True, eq=False)
class TangentSpace:
    """The space ``{U X^T + Y V^T}`` at a rank-r point with orthonormal U (m x r), V (n x r)."""

    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=np.float64)
        V = np.asarray(self.V, dtype=np.float64)
        if U.ndim != 2 or V.ndim != 2 or U.shape[1] != V.shape[1]:
            raise InvalidArgument("U and V must be 2-D with the same number of columns")
        r = U.shape[1]
        if r < 1 or r > min(U.shape[0], V.shape[0]):
            raise InvalidArgument(f"rank {r} incompatible with {U.shape[0]}x{V.shape[0]}")
        eye = np.eye(r)
        if np.linalg.norm(U.T @ U - eye, 2) > 1e-10 or np.linalg.norm(V.T @ V - eye, 2) > 1e-10:
            raise InvalidArgument("U and V must have orthonormal columns")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @classmethod
    def from_svd(cls, factors: TruncatedSVD) -> "TangentSpace":
        return cls(U=factors.U, V=factors.V)

    @classmethod
    def from_matrix(cls, A, r: int) -> "TangentSpace":
        return cls.from_svd(truncate(A, r))

    @property
    def r(self) -> int:
        return self.U.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.U.shape[0], self.V.shape[0]

    @property
    def dim(self) -> int:
        m, n = self.shape
        return self.r * (m + n - self.r)


@dataclass(frozen=True)
class CoherenceProfile:
    mu0: float
    mu1: float
    r: int
    m: int
    n: int


def _check(ts: TangentSpace, Z) -> np.ndarray:
    Z = as_matrix(Z)
    if Z.shape != ts.shape:
        raise InvalidArgument(f"matrix shape {Z.shape} does not match tangent space {ts.shape}")
    return Z


def project_t(ts: TangentSpace, Z) -> np.ndarray:
    """``P_U Z + Z P_V - P_U Z P_V``."""
    Z = _check(ts, Z)
    U, V = ts.U, ts.V
    UtZ = U.T @ Z
    ZV = Z @ V
    return U @ UtZ + ZV @ V.T - U @ (UtZ @ V) @ V.T


def project_tperp(ts: TangentSpace, Z) -> np.ndarray:
    """``(I - P_U) Z (I - P_V)``."""
    Z = _check(ts, Z)
    U, V = ts.U, ts.V
    left = Z - U @ (U.T @ Z)
    return left - (left @ V) @ V.T


def coherence(ts: TangentSpace) -> CoherenceProfile:
    m, n = ts.shape
    r = ts.r
    row_u = np.sum(ts.U**2, axis=1)
    row_v = np.sum(ts.V**2, axis=1)
    mu0 = max(m / r * row_u.max(), n / r * row_v.max())
    mu1 = math.sqrt(m * n / r) * np.abs(ts.U @ ts.V.T).max()
    return CoherenceProfile(mu0=float(mu0), mu1=float(mu1), r=r, m=m, n=n)


def required_sample_size(
    profile: CoherenceProfile,
    max_abs_residual: float,
    frobenius_residual: float,
    beta: float = 2.0,
    constant: float = SAMPLE_CONSTANT_FULL,
) -> dict[str, float]:
    """Lower bounds on |Omega| for the full-rank recovery guarantee.

    ``bound1`` is the incoherence term ``C max(mu0, mu1^2) r (m+n) beta log^2(2n)``
    with ``C = constant`` (114 by default, 32 for the concentration-only
    variant). ``bound2`` is ``8 mn ||A - A_r||_inf^2 / (3 ||A - A_r||_F^2) beta log n``
    and is 0 when the residual vanishes.
    """
    if beta <= 1:
        raise InvalidArgument(f"beta must exceed 1, got {beta}")
    m, n, r = profile.m, profile.n, profile.r
    mu = max(profile.mu0, profile.mu1**2)
    bound1 = constant * mu * r * (m + n) * beta * math.log(2 * n) ** 2
    if frobenius_residual > 0:
        ratio = max_abs_residual**2 / frobenius_residual**2
        bound2 = 8.0 * m * n * ratio / 3.0 * beta * math.log(n)
    else:
        bound2 = 0.0
    return {"bound1": bound1, "bound2": bound2, "required": max(bound1, bound2)}


def pt_romega_pt_deviation_apply(ts: TangentSpace, omega: SampleMultiset, Z: np.ndarray) -> np.ndarray:
    """Apply ``(mn/|Omega|) P_T R_Omega P_T - P_T`` to `Z`."""
    m, n = ts.shape
    PZ = project_t(ts, Z)
    return (m * n / len(omega)) * project_t(ts, omega.counts * PZ) - PZ


def estimate_pt_romega_pt_deviation(
    ts: TangentSpace,
    omega: SampleMultiset,
    *,
    seed: int = 0,
    max_iters: int = 5000,
    tol: float = 1e-9,
) -> float:
    """Operator norm of ``(mn/|Omega|) P_T R_Omega P_T - P_T`` by power iteration.

    The operator is self-adjoint and vanishes on the orthogonal complement of
    T, so iterating on T only is exact. The start vector is a seeded Gaussian
    matrix projected onto T. The returned value is ``||S x||`` for the final
    unit iterate ``x``, which approaches the largest |eigenvalue| from below
    (it is the square root of a Rayleigh quotient of ``S^2``).
    """
    if omega.shape != ts.shape:
        raise InvalidArgument("sample grid and tangent space shapes differ")
    x = project_t(ts, make_rng(seed).standard_normal(ts.shape))
    x /= np.linalg.norm(x)
    estimate = 0.0
    for _ in range(max_iters):
        y = project_t(ts, pt_romega_pt_deviation_apply(ts, omega, x))
        norm_y = float(np.linalg.norm(y))
        if norm_y == 0.0:
            return 0.0
        if abs(norm_y - estimate) <= tol * norm_y:
            return norm_y
        estimate = norm_y
        x = y / norm_y
    return estimate
