"""Command-line interface.

Exit codes: 0 success, 1 invalid arguments or input files, 2 a verification
suite missed its target.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds as bnd
from .errors import InvalidArgument
from .experiments import PlantedSpec, generate_planted, summarize, sweep, write_records
from .linalg import read_csv_matrix, truncate, write_csv_matrix
from .sampling import ObservationSet, read_observations, sample_uniform, write_observations
from .solver import SolverConfig, floor_lambda, select_lambda, solve
from .tangent import TangentSpace, coherence, required_sample_size
from .verify import run_suite

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_VERIFY_FAILED = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _dump(payload: dict, path=None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_gen(args) -> int:
    tail = "gaussian_scaled" if args.eps > 0 else "none"
    spec = PlantedSpec(
        m=args.m, n=args.n, r=args.r, spectrum=args.spectrum, top=args.top, ratio=args.ratio,
        tail=tail, epsilon_target=args.eps, seed=args.seed,
    )
    inst = generate_planted(spec)
    write_csv_matrix(args.out_matrix, inst.A)
    meta = {
        "spec": spec.to_dict(),
        "epsilon": inst.epsilon,
        "sigma": inst.A_r.sigma.tolist(),
        "mu0": inst.coherence.mu0,
        "mu1": inst.coherence.mu1,
    }
    _dump(meta, args.out_meta)
    return EXIT_OK


def cmd_sample(args) -> int:
    A = read_csv_matrix(args.matrix)
    omega = sample_uniform(A.shape[0], A.shape[1], args.count, args.seed)
    write_observations(args.out, ObservationSet.from_matrix(omega, A))
    return EXIT_OK


def cmd_solve(args) -> int:
    obs = read_observations(args.obs)
    m, n = obs.shape
    if args.lambda_ == "auto":
        if args.eps is None or args.r is None:
            raise InvalidArgument("--lambda auto needs --eps and --r")
        lam = select_lambda(m, n, args.r, len(obs.sample), args.eps)
        if lam == 0.0:
            lam = floor_lambda(obs)
    else:
        try:
            lam = float(args.lambda_)
        except ValueError as exc:
            raise InvalidArgument(f"--lambda must be a number or 'auto', got {args.lambda_!r}") from exc
    config = SolverConfig(lam=lam, max_iters=args.max_iters, rel_obj_tol=args.tol)
    result = solve(obs, config)
    if args.out_b:
        write_csv_matrix(args.out_b, result.B_star)
    _dump(result.to_dict(), args.out_result)
    return EXIT_OK


def cmd_coherence(args) -> int:
    A = read_csv_matrix(args.matrix)
    factors = truncate(A, args.r)
    profile = coherence(TangentSpace.from_svd(factors))
    N = A - factors.to_matrix()
    sizes = required_sample_size(
        profile,
        max_abs_residual=float(np.abs(N).max()),
        frobenius_residual=float(np.linalg.norm(N)),
        beta=args.beta,
        constant=args.constant,
    )
    _dump({"mu0": profile.mu0, "mu1": profile.mu1, "r": args.r, "beta": args.beta,
           "required_sample_size": sizes})
    return EXIT_OK


def cmd_bounds(args) -> int:
    inp = bnd.BoundInputs(
        m=args.m, n=args.n, r=args.r, omega_size=args.omega, beta=args.beta,
        epsilon=args.eps, lam=args.lambda_, perp_norm=args.perp_norm,
    )
    report = bnd.bound_report(
        inp,
        sampled_residual=args.sampled_residual,
        spectral_noise=args.spectral_noise,
        max_abs_Ar=args.max_abs_ar,
    )
    _dump(report.to_dict(inp))
    return EXIT_OK


def cmd_verify(args) -> int:
    outcome = run_suite(args.suite, args.trials, args.seed)
    _dump(outcome)
    return EXIT_OK if outcome["passed"] else EXIT_VERIFY_FAILED


def _parse_grid(text: str) -> list[int]:
    try:
        grid = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise InvalidArgument(f"bad --omega-grid {text!r}") from exc
    if not grid:
        raise InvalidArgument("--omega-grid is empty")
    return grid


def cmd_sweep(args) -> int:
    try:
        spec = PlantedSpec.from_dict(json.loads(Path(args.spec).read_text()))
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"{args.spec}: {exc}") from exc
    mode = args.lambda_mode
    if mode != "corollary1":
        try:
            mode = float(mode)
        except ValueError as exc:
            raise InvalidArgument(f"--lambda-mode must be 'corollary1' or a number, got {mode!r}") from exc
    records = sweep(spec, _parse_grid(args.omega_grid), mode, args.beta, args.trials, args.seed, args.workers)
    sidecar = write_records(args.out, records, timing=args.timing)
    _dump({"csv": str(args.out), "json": str(sidecar), "summary": summarize(records)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nucmc", description="Nuclear-norm regularized matrix completion toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a planted low-rank-plus-tail matrix")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--r", type=int, required=True)
    g.add_argument("--spectrum", choices=["flat", "geometric"], default="flat")
    g.add_argument("--top", type=float, default=1.0)
    g.add_argument("--ratio", type=float, default=1.0)
    g.add_argument("--eps", type=float, default=0.0, help="Frobenius norm of the tail")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-matrix", required=True)
    g.add_argument("--out-meta", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("sample", help="sample entries of a CSV matrix uniformly with replacement")
    s.add_argument("--matrix", required=True)
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    v = sub.add_parser("solve", help="solve the regularized completion problem")
    v.add_argument("--obs", required=True)
    v.add_argument("--lambda", dest="lambda_", required=True, help="a positive number or 'auto'")
    v.add_argument("--eps", type=float, default=None, help="tail mass for --lambda auto")
    v.add_argument("--r", type=int, default=None, help="target rank for --lambda auto")
    v.add_argument("--max-iters", type=int, default=5000)
    v.add_argument("--tol", type=float, default=1e-10)
    v.add_argument("--out-b", default=None)
    v.add_argument("--out-result", default=None)
    v.set_defaults(func=cmd_solve)

    c = sub.add_parser("coherence", help="coherence and required sample size of a CSV matrix")
    c.add_argument("--matrix", required=True)
    c.add_argument("--r", type=int, required=True)
    c.add_argument("--beta", type=float, default=2.0)
    c.add_argument("--constant", type=float, default=114.0, help="114 (full-rank) or 32 (concentration only)")
    c.set_defaults(func=cmd_coherence)

    b = sub.add_parser("bounds", help="evaluate every recovery bound")
    b.add_argument("--m", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--r", type=int, required=True)
    b.add_argument("--omega", type=int, required=True)
    b.add_argument("--beta", type=float, default=2.0)
    b.add_argument("--eps", type=float, required=True)
    b.add_argument("--lambda", dest="lambda_", type=float, required=True)
    b.add_argument("--perp-norm", type=float, default=0.0)
    b.add_argument("--sampled-residual", type=float, default=None)
    b.add_argument("--spectral-noise", type=float, default=None)
    b.add_argument("--max-abs-ar", type=float, default=0.0)
    b.set_defaults(func=cmd_bounds)

    y = sub.add_parser("verify", help="run a randomized verification suite")
    y.add_argument("--suite", choices=["lemma1", "lemma2", "thm2", "prox", "kkt"], required=True)
    y.add_argument("--trials", type=int, default=100)
    y.add_argument("--seed", type=int, default=0)
    y.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", help="recovery error across sample sizes")
    w.add_argument("--spec", required=True, help="JSON planted-instance spec")
    w.add_argument("--omega-grid", required=True, help="comma-separated |Omega| values")
    w.add_argument("--trials", type=int, default=1)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out", required=True)
    w.add_argument("--lambda-mode", default="corollary1")
    w.add_argument("--beta", type=float, default=2.0)
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--timing", action="store_true", help="include wall-clock runtime (not reproducible)")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidArgument, OSError) as exc:
        print(f"nucmc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
