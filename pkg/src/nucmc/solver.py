"""Nuclear-norm regularized least squares on sampled entries.

Minimizes ``(1/2) sum_{(i,j) in Omega} (B_ij - A_ij)^2 + lam ||B||_*`` with
proximal gradient steps and singular value thresholding. The smooth part has
a diagonal Hessian whose entries are the cell multiplicities, so
``1 / max_multiplicity`` is an exact safe step size.

With ``acceleration=True`` the solver runs Nesterov/FISTA momentum with
gradient-based adaptive restart, warm-started along a geometric path of
regularization values from ``||R_Omega(A)||`` down to ``lam``. Small ``lam``
makes the plain iteration stall: unobserved entries only move through the
thresholding, at a rate proportional to ``lam``. With ``acceleration=False``
it is plain ISTA on ``lam`` alone, which decreases the objective
monotonically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import InvalidArgument
from .linalg import TruncatedSVD, as_matrix, nuclear_norm
from .sampling import ObservationSet, max_multiplicity
from .tangent import TangentSpace, project_tperp

RANK_CUT = 1e-8
LAMBDA_FLOOR_FACTOR = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    max_iters: int = 5000
    rel_obj_tol: float = 1e-10
    step_size: Union[float, str] = "auto"
    acceleration: bool = True
    seed: int = 0
    # relative iterate change below which a continuation stage is finished
    step_tol: float = 1e-9
    continuation_factor: float = 0.25

    def __post_init__(self):
        if not self.lam > 0 or not math.isfinite(self.lam):
            raise InvalidArgument(f"lambda must be positive and finite, got {self.lam}")
        if self.rel_obj_tol <= 0 or self.step_tol <= 0:
            raise InvalidArgument("tolerances must be positive")
        if self.max_iters < 1:
            raise InvalidArgument("max_iters must be >= 1")
        if self.step_size != "auto" and not (isinstance(self.step_size, (int, float)) and self.step_size > 0):
            raise InvalidArgument(f"step_size must be 'auto' or a positive number, got {self.step_size!r}")
        if not 0 < self.continuation_factor < 1:
            raise InvalidArgument("continuation_factor must lie in (0, 1)")


@dataclass
class SolverResult:
    B_star: np.ndarray
    lam: float
    objective_trace: list[float]
    iterations: int
    kkt_residual: dict[str, float]
    converged: bool
    stages: list[float] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "iterations": self.iterations,
            "objective": self.objective,
            "kkt": dict(self.kkt_residual),
            "converged": self.converged,
        }


def _check(obs: ObservationSet, B) -> np.ndarray:
    B = as_matrix(B, "B")
    if B.shape != obs.shape:
        raise InvalidArgument(f"B has shape {B.shape}, observations are {obs.shape}")
    return B


def objective(obs: ObservationSet, B, lam: float) -> float:
    B = _check(obs, B)
    resid = B[obs.sample.rows, obs.sample.cols] - obs.values
    return 0.5 * float(resid @ resid) + lam * nuclear_norm(B)


def gradient(obs: ObservationSet, B) -> np.ndarray:
    """``R_Omega(B - A)``, the gradient of the data-fit term."""
    B = _check(obs, B)
    return obs.sample.counts * (B - obs.observed)


def svt_prox(Z, tau: float) -> np.ndarray:
    """Singular value soft-thresholding, the proximal map of ``tau ||.||_*``."""
    X, _ = _svt(as_matrix(Z), _check_tau(tau))
    return X


def _check_tau(tau: float) -> float:
    if not tau >= 0:
        raise InvalidArgument(f"threshold must be nonnegative, got {tau}")
    return float(tau)


def _svt(Z: np.ndarray, tau: float) -> tuple[np.ndarray, float]:
    """Return the thresholded matrix and its nuclear norm."""
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    s = s - tau
    k = int(np.count_nonzero(s > 0))
    return (U[:, :k] * s[:k]) @ Vt[:k], float(s[:k].sum())


def subgradient_residual(X, G, rank_cut: float = RANK_CUT) -> dict[str, float]:
    """How far `G` is from the nuclear-norm subdifferential at `X`.

    The subdifferential is ``{U V^T + W : U^T W = 0, W V = 0, ||W|| <= 1}``
    with ``U, V`` the singular vectors of X for singular values above
    ``rank_cut * sigma_1``. Returns ``tangent_gap = ||P_T(G) - U V^T||_F`` and
    ``spectral_slack = max(0, ||P_Tperp(G)|| - 1)``.
    """
    X = as_matrix(X)
    G = as_matrix(G)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    k = int(np.count_nonzero(s > rank_cut * s[0])) if s[0] > 0 else 0
    if k == 0:
        return {"tangent_gap": 0.0, "spectral_slack": max(0.0, float(np.linalg.norm(G, 2)) - 1.0)}
    ts = TangentSpace(U=U[:, :k], V=Vt[:k].T)
    perp = project_tperp(ts, G)
    tangent_part = G - perp
    gap = float(np.linalg.norm(tangent_part - ts.U @ ts.V.T))
    slack = max(0.0, float(np.linalg.norm(perp, 2)) - 1.0)
    return {"tangent_gap": gap, "spectral_slack": slack}


def kkt_residual(obs: ObservationSet, B, lam: float) -> dict[str, float]:
    """Optimality residual of `B`: checks ``-R_Omega(B - A) / lam`` is a subgradient of ``||B||_*``."""
    if not lam > 0:
        raise InvalidArgument(f"lambda must be positive, got {lam}")
    return subgradient_residual(B, -gradient(obs, B) / lam)


def select_lambda(m: int, n: int, r: int, omega_size: int, epsilon: float) -> float:
    """Regularization minimizing the tangent-complement error bound for a given tail mass."""
    if r < 1 or n < 1 or m < 1 or omega_size < 1:
        raise InvalidArgument("m, n, r and |Omega| must be positive")
    if epsilon < 0:
        raise InvalidArgument(f"epsilon must be nonnegative, got {epsilon}")
    return 2.0 * omega_size * epsilon / (m * n) * math.sqrt(2.0 / (3.0 * r * math.log(2 * n)))


def floor_lambda(obs: ObservationSet) -> float:
    """Small positive lambda for exactly low-rank targets."""
    return LAMBDA_FLOOR_FACTOR * obs.rms()


def _continuation_path(obs: ObservationSet, lam: float, factor: float) -> list[float]:
    lam_max = float(np.linalg.norm(obs.sample.counts * obs.observed, 2))
    path = []
    level = lam_max
    while level * factor > lam:
        level *= factor
        path.append(level)
    path.append(lam)
    return path


def solve(obs: ObservationSet, config: SolverConfig) -> SolverResult:
    counts = obs.sample.counts
    target = obs.observed
    lam = config.lam
    eta = 1.0 / max_multiplicity(obs.sample) if config.step_size == "auto" else float(config.step_size)

    def data_fit(B):
        D = B - target
        return 0.5 * float(np.sum(counts * D * D))

    def prox_step(Y, level):
        return _svt(Y - eta * counts * (Y - target), eta * level)

    B = np.zeros(obs.shape)
    trace = [data_fit(B)]
    path = _continuation_path(obs, lam, config.continuation_factor) if config.acceleration else [lam]
    iters = 0
    converged = False

    for stage, level in enumerate(path):
        final = stage == len(path) - 1
        Y = B
        t = 1.0
        prev_obj = data_fit(B) + level * nuclear_norm(B)
        while iters < config.max_iters:
            iters += 1
            B_new, nuc = prox_step(Y, level)
            if config.acceleration:
                if np.sum((Y - B_new) * (B_new - B)) > 0:
                    # momentum points uphill: restart from a plain step
                    t = 1.0
                    B_new, nuc = prox_step(B, level)
                t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
                Y = B_new + ((t - 1.0) / t_new) * (B_new - B)
                t = t_new
            else:
                Y = B_new
            step = float(np.linalg.norm(B_new - B))
            B = B_new
            fit = data_fit(B)
            obj = fit + level * nuc
            trace.append(obj if level == lam else fit + lam * nuc)
            small_step = step <= config.step_tol * max(float(np.linalg.norm(B)), 1e-300)
            small_change = abs(prev_obj - obj) <= config.rel_obj_tol * abs(obj)
            prev_obj = obj
            if final and small_change and (small_step or not config.acceleration):
                converged = True
                break
            if not final and small_step:
                break
        if iters >= config.max_iters and not converged:
            break

    return SolverResult(
        B_star=B,
        lam=lam,
        objective_trace=trace,
        iterations=iters,
        kkt_residual=kkt_residual(obs, B, lam),
        converged=converged,
        stages=path,
    )


def optimality_inequality(obs: ObservationSet, B, factors: TruncatedSVD, lam: float) -> dict[str, float]:
    """Evaluate both sides of the first-order inequality satisfied by the exact minimizer.

    ``lhs = lam <B - A_r, U V^T> + lam ||P_Tperp(B)||_*`` and
    ``rhs = <R_Omega(B - A), A_r - B>``, with T the tangent space of
    ``A_r = factors``. At an exact minimizer ``lhs <= rhs``. The returned
    ``excess`` is ``max(0, lhs - rhs)``, compared against ``1e-6 (1 + |rhs|)``.
    """
    B = _check(obs, B)
    ts = TangentSpace.from_svd(factors)
    A_r = factors.to_matrix()
    lhs = lam * float(np.sum((B - A_r) * (ts.U @ ts.V.T))) + lam * nuclear_norm(project_tperp(ts, B))
    rhs = float(np.sum(gradient(obs, B) * (A_r - B)))
    excess = max(0.0, lhs - rhs)
    allowed = 1e-6 * (1.0 + abs(rhs))
    return {"lhs": lhs, "rhs": rhs, "excess": excess, "allowed": allowed, "holds": excess <= allowed}
