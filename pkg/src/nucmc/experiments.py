"""Planted low-rank-plus-tail instances, recovery trials and sample-size sweeps."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .bounds import BoundInputs, bound_report
from .errors import InvalidArgument
from .linalg import TruncatedSVD
from .sampling import ObservationSet, make_rng, romega_inner, sample_uniform, trial_seed
from .solver import SolverConfig, floor_lambda, optimality_inequality, select_lambda, solve
from .tangent import CoherenceProfile, TangentSpace, coherence, project_t, project_tperp

LambdaMode = Union[str, float]


@dataclass(frozen=True)
class PlantedSpec:
    m: int
    n: int
    r: int
    spectrum: str = "flat"
    top: float = 1.0
    ratio: float = 1.0
    tail: str = "none"
    epsilon_target: float = 0.0
    factor_model: str = "haar"
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or not 1 <= self.r <= min(self.m, self.n):
            raise InvalidArgument(f"need 1 <= r <= min(m, n), got m={self.m} n={self.n} r={self.r}")
        if self.spectrum not in ("flat", "geometric"):
            raise InvalidArgument(f"unknown spectrum kind {self.spectrum!r}")
        if self.tail not in ("none", "gaussian_scaled"):
            raise InvalidArgument(f"unknown tail kind {self.tail!r}")
        if self.factor_model != "haar":
            raise InvalidArgument(f"unknown factor model {self.factor_model!r}")
        if self.top <= 0 or self.ratio <= 0:
            raise InvalidArgument("top and ratio must be positive")
        if self.epsilon_target < 0:
            raise InvalidArgument("epsilon_target must be nonnegative")

    def singular_values(self) -> np.ndarray:
        if self.spectrum == "flat":
            return np.full(self.r, float(self.top))
        return self.top * self.ratio ** np.arange(self.r, dtype=np.float64)

    @classmethod
    def from_dict(cls, d: dict) -> "PlantedSpec":
        """Accept the flat field layout or nested ``spectrum``/``tail`` objects."""
        d = dict(d)
        spectrum = d.pop("spectrum", "flat")
        if isinstance(spectrum, dict):
            d.setdefault("top", spectrum.get("top", 1.0))
            d.setdefault("ratio", spectrum.get("ratio", 1.0))
            spectrum = spectrum.get("kind", "flat")
        tail = d.pop("tail", "none")
        if isinstance(tail, dict):
            d.setdefault("epsilon_target", tail.get("epsilon_target", 0.0))
            tail = tail.get("kind", "none")
        try:
            return cls(spectrum=spectrum, tail=tail, **d)
        except TypeError as exc:
            raise InvalidArgument(str(exc)) from exc

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class PlantedInstance:
    A: np.ndarray
    A_r: TruncatedSVD
    epsilon: float
    coherence: CoherenceProfile
    tail: np.ndarray


def haar_factor(rng: np.random.Generator, rows: int, r: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((rows, r)))
    return Q * np.sign(np.diag(R))


def generate_planted(spec: PlantedSpec) -> PlantedInstance:
    """``A = U diag(sigma) V^T + N`` with Haar factors.

    The Gaussian tail N is projected onto the orthogonal complement of the
    planted tangent space and rescaled to Frobenius norm ``epsilon_target``,
    so the planted part is exactly the best rank-r approximation of A as long
    as ``epsilon_target < sigma_r``.
    """
    sigma = spec.singular_values()
    rng = make_rng(spec.seed)
    U = haar_factor(rng, spec.m, spec.r)
    V = haar_factor(rng, spec.n, spec.r)
    low = (U * sigma) @ V.T
    ts = TangentSpace(U=U, V=V)
    if spec.tail == "gaussian_scaled" and spec.epsilon_target > 0:
        if spec.epsilon_target >= sigma.min():
            raise InvalidArgument(
                f"epsilon_target {spec.epsilon_target} must be below sigma_r = {sigma.min()}"
            )
        N = project_tperp(ts, rng.standard_normal((spec.m, spec.n)))
        N *= spec.epsilon_target / np.linalg.norm(N)
    else:
        N = np.zeros((spec.m, spec.n))
    order = np.argsort(-sigma, kind="stable")
    factors = TruncatedSVD(U=U[:, order], sigma=sigma[order], V=V[:, order])
    return PlantedInstance(
        A=low + N,
        A_r=factors,
        epsilon=float(np.linalg.norm(N)),
        coherence=coherence(ts),
        tail=N,
    )


@dataclass
class ExperimentRecord:
    spec: PlantedSpec
    omega_size: int
    seed: int
    lambda_mode: str
    lambda_used: float
    epsilon: float
    norm_A: float
    measured_perp: float
    measured_tangent: float
    measured_total: float
    measured_full: float
    bound_report: dict
    converged: bool
    iterations: int
    kkt_tangent_gap: float
    kkt_spectral_slack: float
    opt_lhs: float
    opt_rhs: float
    opt_holds: bool
    mu0: float
    mu1: float
    sample_condition_32: float
    sample_condition_114: float
    runtime_ms: float = field(default=0.0, compare=False)

    @property
    def relative_error(self) -> float:
        return self.measured_total / self.norm_A if self.norm_A > 0 else self.measured_total

    def perp_within_bound(self) -> bool:
        return self.measured_perp <= self.bound_report["cor1_perp"]

    def tangent_within_bound(self) -> bool:
        return self.measured_tangent <= self.bound_report["cor1_tangent"]

    def row(self, timing: bool = False) -> dict:
        """Flat CSV row; wall-clock time only on request so outputs stay reproducible."""
        out = {f"spec_{k}": v for k, v in self.spec.to_dict().items()}
        for k, v in asdict(self).items():
            if k in ("spec", "bound_report", "runtime_ms"):
                continue
            out[k] = v
        for k, v in self.bound_report.items():
            if k not in ("measured_perp", "measured_tangent", "measured_total", "inputs"):
                out[f"bound_{k}"] = v
        if timing:
            out["runtime_ms"] = self.runtime_ms
        return out

    def to_json(self, timing: bool = False) -> dict:
        out = asdict(self)
        out["spec"] = self.spec.to_dict()
        if not timing:
            out.pop("runtime_ms")
        return out


def _resolve_lambda(lambda_mode: LambdaMode, obs: ObservationSet, spec: PlantedSpec, epsilon: float) -> tuple[str, float]:
    if isinstance(lambda_mode, str):
        if lambda_mode != "corollary1":
            raise InvalidArgument(f"unknown lambda mode {lambda_mode!r}")
        lam = select_lambda(spec.m, spec.n, spec.r, len(obs.sample), epsilon)
        if lam <= 0:
            return "floor", floor_lambda(obs)
        return "corollary1", lam
    lam = float(lambda_mode)
    if not lam > 0:
        raise InvalidArgument(f"fixed lambda must be positive, got {lam}")
    return "fixed", lam


def run_trial(
    spec: PlantedSpec,
    omega_size: int,
    lambda_mode: LambdaMode = "corollary1",
    beta: float = 2.0,
    seed: int = 0,
    solver_kwargs: Optional[dict] = None,
) -> ExperimentRecord:
    """Generate, sample, solve and measure one planted instance.

    The instance comes from ``spec.seed``; Omega is drawn with `seed`.
    """
    if omega_size < 1:
        raise InvalidArgument("omega_size must be >= 1")
    start = time.perf_counter()
    inst = generate_planted(spec)
    omega = sample_uniform(spec.m, spec.n, omega_size, seed)
    obs = ObservationSet.from_matrix(omega, inst.A)
    mode, lam = _resolve_lambda(lambda_mode, obs, spec, inst.epsilon)
    result = solve(obs, SolverConfig(lam=lam, **(solver_kwargs or {})))
    B = result.B_star

    ts = TangentSpace.from_svd(inst.A_r)
    A_r = inst.A_r.to_matrix()
    diff = A_r - B
    measured = {
        "perp": float(np.linalg.norm(project_tperp(ts, B))),
        "tangent": float(np.linalg.norm(project_t(ts, diff))),
        "total": float(np.linalg.norm(diff)),
    }
    inputs = BoundInputs(
        m=spec.m, n=spec.n, r=spec.r, omega_size=omega_size, beta=beta,
        epsilon=inst.epsilon, lam=lam, perp_norm=measured["perp"],
    )
    report = bound_report(
        inputs,
        sampled_residual=math.sqrt(max(romega_inner(omega, inst.tail, inst.tail), 0.0)),
        spectral_noise=float(np.linalg.norm(inst.tail, 2)),
        max_abs_Ar=float(np.abs(A_r).max()),
        measured=measured,
    )
    opt = optimality_inequality(obs, B, inst.A_r, lam)
    mu = max(inst.coherence.mu0, inst.coherence.mu1**2)
    base = mu * spec.r * (spec.m + spec.n) * beta * math.log(2 * spec.n) ** 2
    return ExperimentRecord(
        spec=spec,
        omega_size=omega_size,
        seed=seed,
        lambda_mode=mode,
        lambda_used=lam,
        epsilon=inst.epsilon,
        norm_A=float(np.linalg.norm(inst.A)),
        measured_perp=measured["perp"],
        measured_tangent=measured["tangent"],
        measured_total=measured["total"],
        measured_full=float(np.linalg.norm(inst.A - B)),
        bound_report=report.to_dict(inputs),
        converged=result.converged,
        iterations=result.iterations,
        kkt_tangent_gap=result.kkt_residual["tangent_gap"],
        kkt_spectral_slack=result.kkt_residual["spectral_slack"],
        opt_lhs=opt["lhs"],
        opt_rhs=opt["rhs"],
        opt_holds=bool(opt["holds"]),
        mu0=inst.coherence.mu0,
        mu1=inst.coherence.mu1,
        sample_condition_32=32.0 * base,
        sample_condition_114=114.0 * base,
        runtime_ms=1000.0 * (time.perf_counter() - start),
    )


def sweep(
    spec: PlantedSpec,
    omega_grid: list[int],
    lambda_mode: LambdaMode = "corollary1",
    beta: float = 2.0,
    trials_per_cell: int = 1,
    seed: int = 0,
    workers: int = 1,
    solver_kwargs: Optional[dict] = None,
) -> list[ExperimentRecord]:
    """Run `trials_per_cell` planted trials for each |Omega| in the grid.

    Trial ``t`` uses instance seed ``spec.seed ^ t`` and sample seed
    ``seed ^ t`` in every cell, so cells share instances and differ only in
    how many entries are observed. Records come back in (cell, trial) order
    whatever the worker count.
    """
    if not omega_grid:
        raise InvalidArgument("omega grid must be nonempty")
    if trials_per_cell < 1:
        raise InvalidArgument("trials_per_cell must be >= 1")
    jobs = [
        (omega_size, t)
        for omega_size in omega_grid
        for t in range(trials_per_cell)
    ]

    def one(job):
        omega_size, t = job
        trial_spec = replace(spec, seed=trial_seed(spec.seed, t))
        return run_trial(trial_spec, omega_size, lambda_mode, beta, trial_seed(seed, t), solver_kwargs)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, jobs))
    return [one(job) for job in jobs]


def summarize(records: list[ExperimentRecord]) -> dict:
    """Per-cell medians and the log-log slope of the median error ratio against |Omega|.

    When the tail is zero the ratio to epsilon is undefined, so cells report
    absolute ``measured_total`` instead and ``slope`` is None.
    """
    cells: dict[int, list[ExperimentRecord]] = {}
    for rec in records:
        cells.setdefault(rec.omega_size, []).append(rec)
    rows = []
    for omega_size in sorted(cells):
        recs = cells[omega_size]
        totals = np.array([r.measured_total for r in recs])
        eps = np.array([r.epsilon for r in recs])
        row = {
            "omega_size": omega_size,
            "trials": len(recs),
            "converged": sum(r.converged for r in recs),
            "median_total": float(np.median(totals)),
            "max_relative_error": float(max(r.relative_error for r in recs)),
            "reference_rate": math.sqrt(recs[0].spec.m * recs[0].spec.n * recs[0].spec.r / omega_size),
        }
        row["median_ratio"] = float(np.median(totals / eps)) if np.all(eps > 0) else None
        rows.append(row)
    ratios = [row["median_ratio"] for row in rows]
    slope = None
    inversions = None
    if all(r is not None for r in ratios):
        inversions = sum(1 for a, b in zip(ratios, ratios[1:]) if b > a)
        if len(rows) > 1:
            x = np.log([row["omega_size"] for row in rows])
            slope = float(np.polyfit(x, np.log(ratios), 1)[0])
    return {"cells": rows, "slope": slope, "inversions": inversions}


def write_records(path, records: list[ExperimentRecord], timing: bool = False) -> Path:
    """Write the CSV table and a ``.json`` sidecar with the full bound reports.

    Returns the sidecar path.
    """
    path = Path(path)
    rows = [rec.row(timing) for rec in records]
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    sidecar = path.with_suffix(".json")
    payload = {
        "records": [rec.to_json(timing) for rec in records],
        "summary": summarize(records),
    }
    sidecar.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return sidecar
