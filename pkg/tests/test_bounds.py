import json
import math

import numpy as np
import pytest

from nucmc.bounds import (
    BoundInputs,
    bound_report,
    candes_plan_relative,
    competitor_bounds,
    corollary1_bounds,
    corollary1_total_coefficient,
    crossover_omega,
    gamma,
    gamma_terms,
    lemma2_check,
    lemma2_condition,
    theorem1_bounds,
    theorem1_optimal_lambda,
)
from nucmc.errors import InvalidArgument
from nucmc.experiments import PlantedSpec, generate_planted
from nucmc.solver import select_lambda

L200 = math.log(200)


def inputs(**kw):
    base = dict(m=100, n=100, r=5, omega_size=5000, beta=2.0, epsilon=1.0, lam=0.1, perp_norm=0.0)
    base.update(kw)
    return BoundInputs(**base)


def test_theorem1_worked_example():
    out = theorem1_bounds(inputs())
    assert out["perp"] == pytest.approx(40.0 + 3e4 * 5 * L200 * 0.1 / 5000, rel=1e-12)
    assert out["perp"] == pytest.approx(55.895, rel=1e-4)


def test_theorem1_tangent_terms():
    out = theorem1_bounds(inputs(perp_norm=0.3))
    expected = 4.0 + 2e4 * 0.1 / 5000 * math.sqrt(15 * L200) + 64 * math.log(100) * math.sqrt(1e4 * 2 / 3e4) * 0.3
    assert out["tangent"] == pytest.approx(expected, rel=1e-12)


def test_theorem1_low_rank_limit():
    small = theorem1_bounds(inputs(epsilon=0.0, lam=1e-12))
    assert small["perp"] < 1e-6 and small["tangent"] < 1e-6


def test_theorem1_rejects_nonpositive_lambda():
    with pytest.raises(InvalidArgument):
        theorem1_bounds(inputs(lam=0.0))


def test_theorem1_perp_minimized_at_closed_form_lambda():
    inp = inputs(epsilon=0.7, omega_size=3000)
    grid = np.geomspace(1e-5, 10.0, 20001)
    perp = [theorem1_bounds(inputs(epsilon=0.7, omega_size=3000, lam=float(x)))["perp"] for x in grid]
    grid_best = grid[int(np.argmin(perp))]
    closed = math.sqrt(8 * 0.7**2 * 3000**2 / (3 * 1e8 * 5 * L200))
    assert theorem1_optimal_lambda(inp) == pytest.approx(closed, rel=1e-12)
    assert grid_best == pytest.approx(closed, rel=0.01)


def test_corollary1_worked_example():
    out = corollary1_bounds(inputs())
    assert out["perp"] == pytest.approx(4 * math.sqrt(30 * L200), rel=1e-12)
    assert out["perp"] == pytest.approx(50.43, rel=1e-3)
    assert out["tangent"] == pytest.approx(10 + 256 * math.sqrt(1e4 * 5 * L200**3 * 2 / 5000), rel=1e-12)
    assert out["tangent"] == pytest.approx(1.397e4, rel=1e-3)
    assert out["total"] == out["perp"] + out["tangent"]


def test_corollary1_vanishes_and_is_homogeneous():
    assert all(v == 0.0 for v in corollary1_bounds(inputs(epsilon=0.0)).values())
    one = corollary1_bounds(inputs(epsilon=1.0))
    three = corollary1_bounds(inputs(epsilon=3.0))
    for k in one:
        assert three[k] == pytest.approx(3 * one[k], rel=1e-14)


def test_gamma_values():
    assert gamma(inputs(epsilon=0.0, lam=0.0)) == 0.0
    assert gamma(inputs()) == pytest.approx(1.0 + 3e4 * 5 * L200 * 0.01 / 4e4, rel=1e-12)
    assert gamma(inputs()) == pytest.approx(1.1987, rel=1e-4)


def test_gamma_term_ratio_under_corollary_lambda(rng):
    # substituting the corollary lambda makes the second term exactly half the first
    for _ in range(50):
        m, n, r = (int(v) for v in rng.integers(5, 300, size=3))
        r = min(r, m, n)
        k = int(rng.integers(1, m * n))
        eps = float(rng.uniform(0.01, 10))
        lam = select_lambda(m, n, r, k, eps)
        first, second = gamma_terms(inputs(m=m, n=n, r=r, omega_size=k, epsilon=eps, lam=lam))
        assert second / first == pytest.approx(0.5, rel=1e-12)


def test_scaling_exponents():
    base = inputs(perp_norm=0.0)
    c = 2.5
    # perp: eps^2/lam and lam terms; scaling (eps, lam) -> (c eps, c lam) scales both by c
    scaled = inputs(epsilon=c * base.epsilon, lam=c * base.lam)
    assert theorem1_bounds(scaled)["perp"] == pytest.approx(c * theorem1_bounds(base)["perp"], rel=1e-13)
    assert theorem1_bounds(scaled)["tangent"] == pytest.approx(c * theorem1_bounds(base)["tangent"], rel=1e-13)
    # first perp term is degree 2 in eps at fixed lam
    first = lambda e: theorem1_bounds(inputs(epsilon=e, lam=0.1))["perp"] - theorem1_bounds(inputs(epsilon=0.0, lam=0.1))["perp"]  # noqa: E731
    assert first(2.0) == pytest.approx(4 * first(1.0), rel=1e-13)
    assert gamma(inputs(epsilon=2.0, lam=0.0)) == pytest.approx(4 * gamma(inputs(epsilon=1.0, lam=0.0)))


def test_optimal_lambda_ratio_constant(rng):
    ratios = []
    for _ in range(100):
        m, n = (int(v) for v in rng.integers(5, 500, size=2))
        r = int(rng.integers(1, min(m, n) + 1))
        k = int(rng.integers(1, m * n + 1))
        eps = float(rng.uniform(1e-3, 100))
        inp = inputs(m=m, n=n, r=r, omega_size=k, epsilon=eps)
        ratios.append(theorem1_optimal_lambda(inp) / select_lambda(m, n, r, k, eps))
    expected = math.sqrt(8 / 3) / (2 * math.sqrt(2 / 3))
    assert np.max(np.abs(np.array(ratios) - expected)) <= 1e-9


def test_competitor_examples():
    inp = inputs()
    out = competitor_bounds(inp, sampled_residual=1.0, spectral_noise=0.0, max_abs_Ar=0.0)
    assert out["candes_plan"] == pytest.approx(1 + 100 * math.sqrt(100 / 5000), rel=1e-12)
    assert out["candes_plan"] == pytest.approx(15.14, rel=1e-3)
    assert out["foygel"] == pytest.approx(1 + 100 * math.sqrt(0.1) + 10 * 0.1**0.25, rel=1e-12)
    assert out["foygel"] == pytest.approx(38.25, rel=1e-3)
    assert out["koltchinskii"] == pytest.approx(1 + math.sqrt(1e6 * math.log(100) * 5 / 5000), rel=1e-12)


def test_competitors_do_not_vanish_for_low_rank():
    m = n = 30
    r = 3
    inp = BoundInputs(m, n, r, m * n, 2.0, 0.0, 0.1)
    out = competitor_bounds(inp, 0.0, 0.0, 0.0)
    assert out["candes_plan"] == 0.0
    assert out["koltchinskii"] == pytest.approx(math.sqrt(n * math.log(n) * r), rel=1e-12)
    assert out["foygel"] > 0.0
    assert corollary1_bounds(inp)["total"] == 0.0


def test_keshavan_formula():
    inp = inputs()
    out = competitor_bounds(inp, 0.0, spectral_noise=0.2, max_abs_Ar=0.05)
    expected = 0.05 * 100**0.25 * 100**1.25 * math.sqrt(5 / 5000) + 1e4 * math.sqrt(5) / 5000 * 0.2
    assert out["keshavan"] == pytest.approx(expected, rel=1e-12)


def test_report_json_round_trip():
    inp = inputs(perp_norm=0.01)
    report = bound_report(inp, measured={"perp": 0.01, "tangent": 0.2, "total": 0.3})
    payload = json.loads(json.dumps(report.to_dict(inp)))
    assert payload["constants_are_unity"] is True
    assert payload["inputs"]["omega_size"] == 5000
    assert payload["candes_plan"] == pytest.approx((1 + 100 * math.sqrt(100 / 5000)) * math.sqrt(2 * 5000 / 1e4))
    for key in ("thm1_perp", "thm1_tangent", "cor1_perp", "cor1_tangent", "cor1_total", "gamma",
                "candes_plan", "keshavan_additive", "foygel_additive", "koltchinskii"):
        assert math.isfinite(payload[key]) and payload[key] >= 0


@pytest.mark.parametrize("m,n,r", [(10**9, 10**9, 1), (2 * 10**9, 4 * 10**9, 2), (10**10, 10**10, 3)])
def test_comparison_ordering_above_crossover(m, n, r):
    k_star = crossover_omega(m, n, r, 2.0)
    assert k_star is not None
    for k in np.geomspace(k_star * 1.0001, float(m * n), 25):
        assert corollary1_total_coefficient(m, n, r, k, 2.0) <= candes_plan_relative(m, n, k)
    assert corollary1_total_coefficient(m, n, r, k_star * 0.99, 2.0) > candes_plan_relative(m, n, k_star * 0.99)
    # the crossover is C n r log^3(2n) with C -> 256^2 beta / 2 for large m
    assert k_star / (n * r * math.log(2 * n) ** 3) == pytest.approx(256**2, rel=0.01)


def test_no_crossover_at_desk_scale():
    for m, n, r in [(100, 100, 5), (500, 500, 1)]:
        assert crossover_omega(m, n, r, 2.0) is None


def test_lemma2_exact_low_rank(rng):
    A = rng.standard_normal((12, 2)) @ rng.standard_normal((2, 15))
    res = lemma2_check(A, r=2, omega_size=50, beta=2.0, trials=20, seed=1)
    assert res["violation_rate"] == 0.0


def test_lemma2_flat_residual_never_violates():
    m = n = 10
    # rank-one part plus a smaller, orthogonal +-1 pattern: the tail has equal |entries|
    signs = np.outer(np.tile([1.0, -1.0], m // 2), np.tile([1.0, -1.0], n // 2))
    A = 3.0 * np.ones((m, n)) / math.sqrt(m * n) + 0.2 * signs / math.sqrt(m * n)
    res = lemma2_check(A, r=1, omega_size=37, beta=2.0, trials=50, seed=3)
    assert res["violations"] == 0
    assert res["max_ratio"] == pytest.approx(1 / math.sqrt(2), rel=1e-9)


def test_lemma2_planted_tail():
    A = generate_planted(PlantedSpec(m=50, n=50, r=2, tail="gaussian_scaled", epsilon_target=0.1, seed=4)).A
    cond = lemma2_condition(A, 2, 1250, 2.0)
    assert cond["satisfied"]
    res = lemma2_check(A, r=2, omega_size=1250, beta=2.0, trials=200, seed=4)
    assert res["violations"] == 0
    assert res["threshold"] == pytest.approx(4e-4)


def test_lemma2_workers_do_not_change_results():
    A = generate_planted(PlantedSpec(m=20, n=25, r=2, tail="gaussian_scaled", epsilon_target=0.3, seed=2)).A
    one = lemma2_check(A, 2, 100, 2.0, trials=40, seed=9, workers=1)
    four = lemma2_check(A, 2, 100, 2.0, trials=40, seed=9, workers=4)
    assert one == four
