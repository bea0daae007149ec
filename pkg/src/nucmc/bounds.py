"""Closed-form recovery bounds and a Monte-Carlo check of the tail concentration lemma.

All logarithms are natural. Competitor bounds are published only up to
``O(.)``; every suppressed constant is set to 1 and reports carry
``constants_are_unity = True``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgument
from .linalg import as_matrix, truncate
from .sampling import romega_inner, sample_uniform, trial_seed


@dataclass(frozen=True)
class BoundInputs:
    m: int
    n: int
    r: int
    omega_size: int
    beta: float
    epsilon: float
    lam: float
    perp_norm: float = 0.0

    def __post_init__(self):
        if min(self.m, self.n, self.r, self.omega_size) < 1:
            raise InvalidArgument("m, n, r and |Omega| must be positive")
        if not self.beta > 1:
            raise InvalidArgument(f"beta must exceed 1, got {self.beta}")
        if self.epsilon < 0 or self.lam < 0 or self.perp_norm < 0:
            raise InvalidArgument("epsilon, lambda and perp_norm must be nonnegative")

    @property
    def log2n(self) -> float:
        return math.log(2 * self.n)


@dataclass
class BoundReport:
    thm1_perp: float
    thm1_tangent: float
    cor1_perp: float
    cor1_tangent: float
    cor1_total: float
    gamma: float
    candes_plan: float
    keshavan_additive: float
    foygel_additive: float
    koltchinskii: float
    measured_perp: Optional[float] = None
    measured_tangent: Optional[float] = None
    measured_total: Optional[float] = None
    constants_are_unity: bool = True

    def to_dict(self, inputs: Optional[BoundInputs] = None) -> dict:
        out = asdict(self)
        if inputs is not None:
            out["inputs"] = asdict(inputs)
        return out


def theorem1_bounds(inp: BoundInputs) -> dict[str, float]:
    """Error bounds valid for any positive lambda.

    ``perp`` bounds ``||P_Tperp(B*)||_*`` and ``tangent`` bounds
    ``||P_T(A_r - B*)||_F``; the latter couples in the measured
    ``||P_Tperp(B*)||_F`` through ``inp.perp_norm``.
    """
    if not inp.lam > 0:
        raise InvalidArgument(f"lambda must be positive, got {inp.lam}")
    m, n, r, k = inp.m, inp.n, inp.r, inp.omega_size
    eps, lam = inp.epsilon, inp.lam
    perp = 8.0 * k * eps**2 / (m * n * lam) + 3.0 * m * n * r * inp.log2n * lam / k
    tangent = (
        4.0 * eps
        + 2.0 * m * n * lam / k * math.sqrt(3.0 * r * inp.log2n)
        + 64.0 * math.log(n) * math.sqrt(m * n * inp.beta / (6.0 * k)) * inp.perp_norm
    )
    return {"perp": perp, "tangent": tangent}


def theorem1_optimal_lambda(inp: BoundInputs) -> float:
    """Minimizer over lambda of ``theorem1_bounds(inp)['perp']``."""
    m, n = inp.m, inp.n
    return math.sqrt(8.0 * inp.epsilon**2 * inp.omega_size**2 / (3.0 * m**2 * n**2 * inp.r * inp.log2n))


def corollary1_bounds(inp: BoundInputs) -> dict[str, float]:
    m, n, r, k = inp.m, inp.n, inp.r, inp.omega_size
    eps = inp.epsilon
    perp = 4.0 * math.sqrt(6.0 * r * inp.log2n) * eps
    tangent = (10.0 + 256.0 * math.sqrt(m * n * r * inp.log2n**3 * inp.beta / k)) * eps
    return {"perp": perp, "tangent": tangent, "total": perp + tangent}


def gamma_terms(inp: BoundInputs) -> tuple[float, float]:
    m, n, k = inp.m, inp.n, inp.omega_size
    first = 2.0 * k * inp.epsilon**2 / (m * n)
    second = 3.0 * m * n * inp.r * inp.log2n * inp.lam**2 / (8.0 * k)
    return first, second


def gamma(inp: BoundInputs) -> float:
    return sum(gamma_terms(inp))


def competitor_bounds(
    inp: BoundInputs,
    sampled_residual: float,
    spectral_noise: float,
    max_abs_Ar: float,
) -> dict[str, float]:
    """Published bounds of other estimators, with unit constants.

    Parameters
    ----------
    inp : BoundInputs
    sampled_residual : float
        ``sqrt(sum over Omega of (A - A_r)_ij^2)``, the constraint radius of the
        ball-constrained program.
    spectral_noise : float
        Spectral norm standing in for the unspecified noise matrix of the
        spectral/manifold method; ``||A - A_r||`` is the usual choice.
    max_abs_Ar : float
        ``||A_r||_inf``.
    """
    m, n, r, k = inp.m, inp.n, inp.r, inp.omega_size
    eps = inp.epsilon
    candes_plan = (1.0 + m * math.sqrt(n / k)) * sampled_residual
    keshavan = max_abs_Ar * m**0.25 * n**1.25 * math.sqrt(r / k) + m * n * math.sqrt(r) / k * spectral_noise
    foygel = eps + n * math.sqrt(r * m / k) + math.sqrt(n * eps) * (r * m / k) ** 0.25
    koltchinskii = eps + math.sqrt(m * n**2 * math.log(n) * r / k)
    return {"candes_plan": candes_plan, "keshavan": keshavan, "foygel": foygel, "koltchinskii": koltchinskii}


def bound_report(
    inp: BoundInputs,
    *,
    sampled_residual: Optional[float] = None,
    spectral_noise: Optional[float] = None,
    max_abs_Ar: float = 0.0,
    measured: Optional[dict[str, float]] = None,
) -> BoundReport:
    """Evaluate every bound for `inp`.

    Missing competitor inputs fall back to their typical values:
    ``sampled_residual = epsilon sqrt(2|Omega|/(mn))`` (the high-probability
    tail concentration level) and ``spectral_noise = epsilon``.
    """
    if sampled_residual is None:
        sampled_residual = inp.epsilon * math.sqrt(2.0 * inp.omega_size / (inp.m * inp.n))
    if spectral_noise is None:
        spectral_noise = inp.epsilon
    thm1 = theorem1_bounds(inp) if inp.lam > 0 else {"perp": math.inf, "tangent": math.inf}
    cor1 = corollary1_bounds(inp)
    comp = competitor_bounds(inp, sampled_residual, spectral_noise, max_abs_Ar)
    measured = measured or {}
    return BoundReport(
        thm1_perp=thm1["perp"],
        thm1_tangent=thm1["tangent"],
        cor1_perp=cor1["perp"],
        cor1_tangent=cor1["tangent"],
        cor1_total=cor1["total"],
        gamma=gamma(inp),
        candes_plan=comp["candes_plan"],
        keshavan_additive=comp["keshavan"],
        foygel_additive=comp["foygel"],
        koltchinskii=comp["koltchinskii"],
        measured_perp=measured.get("perp"),
        measured_tangent=measured.get("tangent"),
        measured_total=measured.get("total"),
    )


def candes_plan_relative(m: int, n: int, omega_size: int) -> float:
    """Coefficient of epsilon in the ball-constrained bound after the tail concentration plug-in."""
    return (1.0 + m * math.sqrt(n / omega_size)) * math.sqrt(2.0 * omega_size / (m * n))


def corollary1_total_coefficient(m: int, n: int, r: int, omega_size: int, beta: float) -> float:
    return corollary1_bounds(BoundInputs(m, n, r, omega_size, beta, 1.0, 0.0))["total"]


def crossover_omega(m: int, n: int, r: int, beta: float) -> Optional[float]:
    """Smallest |Omega| <= mn at which the relative bound's coefficient is no larger
    than the ball-constrained one, or None if it never is.

    The relative coefficient decreases in |Omega| and the competitor's
    increases, so the crossover is found by bisection on the difference.
    """

    def diff(k: float) -> float:
        log2n = math.log(2 * n)
        ours = 4.0 * math.sqrt(6.0 * r * log2n) + 10.0 + 256.0 * math.sqrt(m * n * r * log2n**3 * beta / k)
        return ours - (1.0 + m * math.sqrt(n / k)) * math.sqrt(2.0 * k / (m * n))

    hi = float(m * n)
    if diff(hi) > 0:
        return None
    lo = 1.0
    if diff(lo) <= 0:
        return lo
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if diff(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-13:
            break
    return hi


def lemma2_condition(A, r: int, omega_size: int, beta: float) -> dict[str, float]:
    """Sample-size condition under which the tail concentration bound is claimed."""
    A = as_matrix(A)
    m, n = A.shape
    N = A - truncate(A, r).to_matrix()
    frob = float(np.linalg.norm(N))
    if frob == 0.0:
        required = 0.0
    else:
        required = 8.0 * m * n * float(np.abs(N).max()) ** 2 / (3.0 * frob**2) * beta * math.log(n)
    return {"required": required, "omega_size": omega_size, "satisfied": omega_size >= required}


def lemma2_check(
    A,
    r: int,
    omega_size: int,
    beta: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> dict:
    """Monte-Carlo frequency of ``sqrt(<R_Omega(N), N>) > eps sqrt(2|Omega|/(mn))`` for ``N = A - A_r``.

    Trial ``k`` samples Omega with seed ``seed ^ k``.
    """
    A = as_matrix(A)
    if trials < 1:
        raise InvalidArgument("trials must be >= 1")
    if not beta > 1:
        raise InvalidArgument(f"beta must exceed 1, got {beta}")
    m, n = A.shape
    N = A - truncate(A, r).to_matrix()
    eps = float(np.linalg.norm(N))
    if eps <= 1e-12 * float(np.linalg.norm(A)):
        # rounding residue of an exactly rank-r matrix
        N = np.zeros_like(A)
        eps = 0.0
    threshold = eps * math.sqrt(2.0 * omega_size / (m * n))

    def one(k: int) -> float:
        omega = sample_uniform(m, n, omega_size, trial_seed(seed, k))
        return math.sqrt(max(romega_inner(omega, N, N), 0.0))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, range(trials)))
    else:
        values = [one(k) for k in range(trials)]
    values = np.array(values)
    violations = int(np.count_nonzero(values > threshold * (1.0 + 1e-12)))
    return {
        "violation_rate": violations / trials,
        "violations": violations,
        "trials": trials,
        "threshold": float(n ** (-beta)),
        "bound": threshold,
        "max_ratio": float(values.max() / threshold) if threshold > 0 else 0.0,
        "condition": lemma2_condition(A, r, omega_size, beta),
    }
