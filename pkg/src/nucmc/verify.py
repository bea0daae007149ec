"""Randomized verification suites behind ``nucmc verify``.

Each suite runs `trials` seeded cases (case ``k`` seeded with ``seed ^ k``)
and reports how many passed against a fixed target pass rate.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .bounds import lemma2_check
from .errors import InvalidArgument
from .experiments import PlantedSpec, generate_planted, haar_factor
from .sampling import (
    ObservationSet,
    SampleMultiset,
    apply_romega,
    make_rng,
    romega_inner,
    sample_uniform,
    trial_seed,
)
from .solver import SolverConfig, kkt_residual, objective, solve, subgradient_residual, svt_prox
from .tangent import TangentSpace, estimate_pt_romega_pt_deviation

TOL_EXACT = 1e-10


def random_multiset_with_duplicates(rng: np.random.Generator, m: int, n: int, count: int) -> SampleMultiset:
    """Uniform sample of `count` cells with at least one cell forced to repeat."""
    flat = rng.integers(0, m * n, size=count)
    extra = rng.choice(flat, size=max(1, count // 3))
    flat = np.concatenate([flat, extra])
    rows, cols = np.divmod(flat, n)
    return SampleMultiset(m=m, n=n, rows=rows, cols=cols)


def lemma1_case(seed: int) -> dict:
    rng = make_rng(seed)
    m, n = (int(v) for v in rng.integers(1, 9, size=2))
    omega = random_multiset_with_duplicates(rng, m, n, int(rng.integers(1, 2 * m * n + 1)))
    Z = rng.standard_normal((m, n))
    W = rng.standard_normal((m, n))
    zz = romega_inner(omega, Z, Z)
    ww = romega_inner(omega, W, W)
    zw = romega_inner(omega, Z, W)
    rz = float(np.sum(apply_romega(omega, Z) ** 2))
    ok_12 = zz <= rz + TOL_EXACT * (1.0 + abs(rz))
    cs = math.sqrt(zz) * math.sqrt(ww)
    ok_13 = abs(zw) <= cs + TOL_EXACT * (1.0 + cs)
    return {"passed": bool(ok_12 and ok_13), "eq12_gap": rz - zz, "eq13_gap": cs - abs(zw)}


def prox_case(seed: int, perturbations: int = 50) -> dict:
    rng = make_rng(seed)
    Z = rng.standard_normal((5, 7))
    tau = float(rng.uniform(0.05, 2.0))
    X = svt_prox(Z, tau)
    res = subgradient_residual(X, (Z - X) / tau)

    def prox_obj(Y):
        return 0.5 * float(np.sum((Y - Z) ** 2)) + tau * float(np.linalg.svd(Y, compute_uv=False).sum())

    best = prox_obj(X)
    beaten = all(
        best <= prox_obj(X + scale * rng.standard_normal(X.shape))
        for scale in np.geomspace(1e-4, 1.0, perturbations)
    )
    ok = res["tangent_gap"] <= 1e-8 and res["spectral_slack"] <= 1e-8 and beaten
    return {"passed": bool(ok), **res, "beats_perturbations": bool(beaten)}


def incoherent_tangent_space(rng: np.random.Generator, m: int, n: int, r: int) -> TangentSpace:
    return TangentSpace(U=haar_factor(rng, m, r), V=haar_factor(rng, n, r))


def thm2_case(seed: int, m: int = 40, n: int = 40, r: int = 2, omega_size: int = 800) -> dict:
    rng = make_rng(seed)
    ts = incoherent_tangent_space(rng, m, n, r)
    omega = sample_uniform(m, n, omega_size, seed)
    dev = estimate_pt_romega_pt_deviation(ts, omega, seed=seed)
    return {"passed": dev <= 0.5, "deviation": dev}


def lemma2_instance(seed: int) -> np.ndarray:
    spec = PlantedSpec(m=50, n=50, r=2, top=1.0, tail="gaussian_scaled", epsilon_target=0.1, seed=seed)
    return generate_planted(spec).A


def kkt_case(seed: int) -> dict:
    rng = make_rng(seed)
    m, n = (int(v) for v in rng.integers(4, 13, size=2))
    A = rng.standard_normal((m, 2)) @ rng.standard_normal((2, n)) + 0.1 * rng.standard_normal((m, n))
    omega = sample_uniform(m, n, int(rng.integers(m * n // 2, 2 * m * n)), seed)
    obs = ObservationSet.from_matrix(omega, A)
    lam = float(rng.uniform(0.1, 2.0))
    result = solve(obs, SolverConfig(lam=lam, max_iters=20000))
    kkt = result.kkt_residual
    descended = objective(obs, result.B_star, lam) <= objective(obs, np.zeros((m, n)), lam)
    ok = result.converged and kkt["tangent_gap"] <= 1e-6 and kkt["spectral_slack"] <= 1e-6 and descended
    return {"passed": bool(ok), **kkt, "converged": result.converged}


def _run_cases(case: Callable[[int], dict], trials: int, seed: int) -> list[dict]:
    return [case(trial_seed(seed, k)) for k in range(trials)]


def run_suite(suite: str, trials: int, seed: int) -> dict:
    if trials < 1:
        raise InvalidArgument("trials must be >= 1")
    if suite == "lemma2":
        A = lemma2_instance(seed)
        res = lemma2_check(A, r=2, omega_size=1250, beta=2.0, trials=trials, seed=seed)
        return {
            "suite": suite,
            "trials": trials,
            "passes": trials - res["violations"],
            "rate": 1.0 - res["violation_rate"],
            "target_rate": 1.0,
            "passed": res["violations"] == 0 and bool(res["condition"]["satisfied"]),
            "details": res,
        }
    cases = {"lemma1": lemma1_case, "prox": prox_case, "thm2": thm2_case, "kkt": kkt_case}
    targets = {"lemma1": 1.0, "prox": 1.0, "thm2": 0.95, "kkt": 1.0}
    if suite not in cases:
        raise InvalidArgument(f"unknown suite {suite!r}; choose from lemma1, lemma2, thm2, prox, kkt")
    outcomes = _run_cases(cases[suite], trials, seed)
    passes = sum(o["passed"] for o in outcomes)
    rate = passes / trials
    return {
        "suite": suite,
        "trials": trials,
        "passes": passes,
        "rate": rate,
        "target_rate": targets[suite],
        "passed": rate >= targets[suite],
        "failures": [k for k, o in enumerate(outcomes) if not o["passed"]],
    }
