import math

import numpy as np
import pytest

from nucmc.errors import InvalidArgument
from nucmc.sampling import SampleMultiset, make_rng, sample_uniform, trial_seed
from nucmc.tangent import (
    CoherenceProfile,
    TangentSpace,
    coherence,
    estimate_pt_romega_pt_deviation,
    project_t,
    project_tperp,
    required_sample_size,
)


def haar(rng, rows, r):
    Q, R = np.linalg.qr(rng.standard_normal((rows, r)))
    return Q * np.sign(np.diag(R))


@pytest.fixture
def ts(rng):
    return TangentSpace(U=haar(rng, 7, 2), V=haar(rng, 9, 2))


def dense_deviation_operator(ts, omega):
    """``(mn/|Omega|) P_T R P_T - P_T`` as an mn x mn matrix acting on column-major vec(Z)."""
    m, n = ts.shape
    PU = ts.U @ ts.U.T
    PV = ts.V @ ts.V.T
    PT = np.kron(np.eye(n), PU) + np.kron(PV, np.eye(m)) - np.kron(PV, PU)
    D = np.diag(omega.counts.ravel(order="F"))
    return (m * n / len(omega)) * PT @ D @ PT - PT


def test_full_basis_projects_to_identity(rng):
    ts = TangentSpace(U=haar(rng, 4, 4), V=haar(rng, 4, 4))
    Z = rng.standard_normal((4, 4))
    np.testing.assert_allclose(project_t(ts, Z), Z, atol=1e-12)
    np.testing.assert_allclose(project_tperp(ts, Z), 0.0, atol=1e-12)


def test_rank_one_in_t_is_fixed(ts):
    Z = np.outer(ts.U[:, 0], ts.V[:, 0])
    np.testing.assert_allclose(project_t(ts, Z), Z, atol=1e-12)
    np.testing.assert_allclose(project_tperp(ts, Z), 0.0, atol=1e-12)


def test_idempotent(ts, rng):
    Z = rng.standard_normal(ts.shape)
    PZ = project_t(ts, Z)
    QZ = project_tperp(ts, Z)
    assert np.max(np.abs(project_t(ts, PZ) - PZ)) <= 1e-10
    assert np.max(np.abs(project_tperp(ts, QZ) - QZ)) <= 1e-10


def test_complementary_and_orthogonal(ts, rng):
    Z = rng.standard_normal(ts.shape)
    PZ, QZ = project_t(ts, Z), project_tperp(ts, Z)
    assert np.max(np.abs(PZ + QZ - Z)) <= 1e-12
    assert abs(np.sum(PZ * QZ)) <= 1e-10
    assert abs(np.sum(PZ**2) + np.sum(QZ**2) - np.sum(Z**2)) <= 1e-10


def test_perp_matches_expanded_form(ts, rng):
    Z = rng.standard_normal(ts.shape)
    PU, PV = ts.U @ ts.U.T, ts.V @ ts.V.T
    expanded = Z - PU @ Z - Z @ PV + PU @ Z @ PV
    assert np.max(np.abs(project_tperp(ts, Z) - expanded)) <= 1e-12


def test_self_adjoint(ts, rng):
    Z, W = rng.standard_normal((2, *ts.shape))
    assert abs(np.sum(project_t(ts, Z) * W) - np.sum(Z * project_t(ts, W))) <= 1e-12


def test_sign_flips_change_nothing(ts, rng):
    flipped = TangentSpace(U=ts.U * [1, -1], V=ts.V * [1, -1])
    Z = rng.standard_normal(ts.shape)
    assert np.max(np.abs(project_t(ts, Z) - project_t(flipped, Z))) <= 1e-12
    assert np.max(np.abs(project_tperp(ts, Z) - project_tperp(flipped, Z))) <= 1e-12
    a, b = coherence(ts), coherence(flipped)
    assert abs(a.mu0 - b.mu0) <= 1e-12 and abs(a.mu1 - b.mu1) <= 1e-12


def test_dimension_mismatch(ts):
    with pytest.raises(InvalidArgument):
        project_t(ts, np.ones((3, 3)))


def test_non_orthonormal_rejected():
    with pytest.raises(InvalidArgument):
        TangentSpace(U=np.ones((3, 1)), V=np.ones((3, 1)))


def test_coherence_standard_basis():
    E = np.eye(4)[:, :2]
    assert coherence(TangentSpace(U=E, V=E)).mu0 == pytest.approx(2.0)


def test_coherence_maximally_incoherent():
    u = np.full((2, 1), 1 / math.sqrt(2))
    prof = coherence(TangentSpace(U=u, V=u))
    assert prof.mu0 == pytest.approx(1.0)
    assert prof.mu1 == pytest.approx(1.0)


def test_coherence_matches_brute_force(rng):
    m = n = 50
    r = 5
    ts = TangentSpace(U=haar(rng, m, r), V=haar(rng, n, r))
    PU, PV = ts.U @ ts.U.T, ts.V @ ts.V.T
    row = max(np.linalg.norm(PU @ np.eye(m)[:, i]) ** 2 for i in range(m))
    col = max(np.linalg.norm(PV @ np.eye(n)[:, j]) ** 2 for j in range(n))
    mu0 = max(m / r * row, n / r * col)
    mu1 = 0.0
    for i in range(m):
        for j in range(n):
            entry = sum(ts.U[i, k] * ts.V[j, k] for k in range(r))
            mu1 = max(mu1, math.sqrt(m * n / r) * abs(entry))
    prof = coherence(ts)
    assert abs(prof.mu0 - mu0) <= 1e-12
    assert abs(prof.mu1 - mu1) <= 1e-12


def test_mu0_range(rng):
    for m, n, r in [(5, 8, 1), (6, 6, 3), (10, 4, 4)]:
        prof = coherence(TangentSpace(U=haar(rng, m, r), V=haar(rng, n, r)))
        assert 1.0 - 1e-12 <= prof.mu0 <= max(m, n) / r + 1e-12


def test_required_sample_size_incoherence_term():
    prof = CoherenceProfile(mu0=1.0, mu1=1.0, r=5, m=100, n=100)
    out = required_sample_size(prof, 0.0, 0.0, beta=2.0)
    expected = 114 * 5 * 200 * 2 * math.log(200) ** 2
    assert out["bound1"] == pytest.approx(expected, rel=1e-12)
    assert out["bound1"] == pytest.approx(6.400e6, rel=1e-3)
    assert out["bound2"] == 0.0
    assert required_sample_size(prof, 0.0, 0.0, 2.0, constant=32)["bound1"] == pytest.approx(expected * 32 / 114)


def test_required_sample_size_residual_term():
    prof = CoherenceProfile(mu0=1.0, mu1=1.0, r=5, m=100, n=100)
    out = required_sample_size(prof, 0.01, 0.1, beta=2.0)
    assert out["bound2"] == pytest.approx(8e4 * 1e-4 / 3e-2 * 2 * math.log(100), rel=1e-12)
    assert out["bound2"] == pytest.approx(2.456e3, rel=1e-3)
    assert out["required"] == max(out["bound1"], out["bound2"])


@pytest.mark.parametrize("m,n", [(10, 10), (40, 90)])
def test_required_sample_size_flat_residual(m, n):
    prof = CoherenceProfile(mu0=1.0, mu1=1.0, r=1, m=m, n=n)
    frob = 3.7
    out = required_sample_size(prof, frob / math.sqrt(m * n), frob, beta=2.0)
    assert out["bound2"] == pytest.approx(8 / 3 * 2 * math.log(n), rel=1e-12)


def test_required_sample_size_rejects_small_beta():
    prof = CoherenceProfile(mu0=1.0, mu1=1.0, r=1, m=3, n=3)
    with pytest.raises(InvalidArgument):
        required_sample_size(prof, 1.0, 1.0, beta=1.0)


def test_deviation_vanishes_for_full_cover(rng):
    ts = TangentSpace(U=haar(rng, 6, 2), V=haar(rng, 5, 2))
    pairs = [(i, j) for i in range(1, 7) for j in range(1, 6)]
    omega = SampleMultiset.from_pairs(6, 5, pairs)
    assert estimate_pt_romega_pt_deviation(ts, omega) <= 1e-6


def test_deviation_single_sample_matches_dense_operator():
    u = np.array([[0.6], [0.8]])
    v = np.array([[1.0], [1.0]]) / math.sqrt(2)
    ts = TangentSpace(U=u, V=v)
    omega = SampleMultiset.from_pairs(2, 2, [(2, 1)])
    M = dense_deviation_operator(ts, omega)
    exact = np.max(np.abs(np.linalg.eigvalsh((M + M.T) / 2)))
    assert estimate_pt_romega_pt_deviation(ts, omega) == pytest.approx(exact, rel=1e-3)


@pytest.mark.parametrize("seed", range(5))
def test_deviation_matches_dense_operator_random(seed):
    rng = make_rng(seed)
    ts = TangentSpace(U=haar(rng, 8, 2), V=haar(rng, 6, 2))
    omega = sample_uniform(8, 6, 30, trial_seed(seed, 1))
    M = dense_deviation_operator(ts, omega)
    exact = np.max(np.abs(np.linalg.eigvalsh((M + M.T) / 2)))
    assert estimate_pt_romega_pt_deviation(ts, omega, seed=seed) == pytest.approx(exact, rel=1e-3)


def test_deviation_shrinks_with_more_samples(rng):
    ts = TangentSpace(U=haar(rng, 20, 2), V=haar(rng, 20, 2))
    small = estimate_pt_romega_pt_deviation(ts, sample_uniform(20, 20, 200, 1))
    large = estimate_pt_romega_pt_deviation(ts, sample_uniform(20, 20, 20000, 1))
    assert large < small
    assert large <= 0.5
