import numpy as np
import pytest
from scipy.linalg import subspace_angles

from igdts.errors import DimensionError
from igdts.slope import LambdaSequence, sorted_l1_norm
from igdts.subspace import (
    SubspaceModel,
    clean_observation,
    igdts_subspace_solve,
    incremental_update,
    observation_likelihood,
    solve_batch,
    subspace_distance,
)
from oracles import f1_score, subspace_oracle


def basis(d, k, seed=0):
    Q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(d, k)))
    return Q


def planted(seed, d=64, k=4, n_occ=8, mag=5.0):
    r = np.random.default_rng(seed)
    U = basis(d, k, seed + 100)
    z = r.normal(size=k) * 3
    occ = r.choice(d, n_occ, replace=False)
    y = U @ z
    y[occ] += mag
    return U, z, occ, y


def test_in_subspace_observation():
    U = basis(64, 4)
    z = np.array([1.0, -2.0, 0.5, 3.0])
    sol = igdts_subspace_solve(U @ z, U, LambdaSequence.linear(64, 0.3))
    np.testing.assert_allclose(sol.z, z, atol=1e-8)
    assert np.all(sol.gamma == 0)


def test_orthogonal_observation_with_huge_lambda():
    U = basis(32, 3)
    y = np.random.default_rng(1).normal(size=32)
    y -= U @ (U.T @ y)
    sol = igdts_subspace_solve(y, U, LambdaSequence.constant(32, 1e6))
    np.testing.assert_allclose(sol.z, 0, atol=1e-12)
    assert np.all(sol.gamma == 0)
    assert sol.distance == pytest.approx(0.5 * y @ y, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_planted_occlusion_recovered(seed):
    U, z, occ, y = planted(seed)
    lam = LambdaSequence.linear(64, 0.1)
    sol = igdts_subspace_solve(y, U, lam, eps=1e-12, max_iter=1000)
    assert f1_score(np.flatnonzero(sol.gamma), occ) >= 0.9
    assert np.linalg.norm(sol.z - z) / np.linalg.norm(z) <= 0.05
    _, g_ref, obj_ref = subspace_oracle(y, U, lam.values)
    assert sol.distance == pytest.approx(obj_ref, rel=1e-9)
    np.testing.assert_allclose(sol.gamma, g_ref, atol=1e-8)


def test_distance_equals_recomputed_objective():
    U, _, _, y = planted(7)
    lam = LambdaSequence.linear(64, 0.4)
    sol = igdts_subspace_solve(y, U, lam)
    r = y - U @ sol.z - sol.gamma
    assert sol.distance == pytest.approx(0.5 * r @ r + sorted_l1_norm(sol.gamma, lam), abs=1e-10)


def test_objective_trace_non_increasing_for_constant_lambda():
    # constant weights reduce the sorted rule to the exact l1 prox
    for seed in range(20):
        U, _, _, y = planted(seed)
        y = y + 0.2 * np.random.default_rng(seed).normal(size=64)
        for lm in (0.05, 0.3, 1.0):
            sol = igdts_subspace_solve(y, U, LambdaSequence.constant(64, lm), eps=1e-14, max_iter=500)
            assert np.all(np.diff(sol.objective_trace) <= 1e-10)


def test_literal_sorted_rule_can_cycle_with_decreasing_lambda():
    # pairing by rank is not the sorted-l1 prox, so the trace may rise slightly
    rises = []
    for seed in range(20):
        U, _, _, y = planted(seed)
        y = y + 0.2 * np.random.default_rng(seed).normal(size=64)
        t = igdts_subspace_solve(y, U, LambdaSequence.linear(64, 0.3), eps=1e-14, max_iter=500).objective_trace
        rises.append(np.diff(t).max(initial=0.0) / t[0])
    assert max(rises) > 1e-10
    assert max(rises) < 1e-4


def test_non_orthonormal_basis_rejected():
    U = basis(16, 2) * 2
    with pytest.raises(ValueError):
        igdts_subspace_solve(np.ones(16), U, LambdaSequence.constant(16, 0.1))


def test_lambda_length_checked():
    with pytest.raises(DimensionError):
        igdts_subspace_solve(np.ones(16), basis(16, 2), LambdaSequence.constant(15, 0.1))


def test_batch_rows_match_single_solves():
    rng = np.random.default_rng(3)
    U = basis(64, 4, 9)
    lam = LambdaSequence.linear(64, 0.2)
    Y = rng.normal(size=(12, 64))
    Z, G, D, its = solve_batch(Y, U, lam, eps=1e-10, max_iter=200)
    for i in range(12):
        sol = igdts_subspace_solve(Y[i], U, lam, eps=1e-10, max_iter=200)
        np.testing.assert_allclose(Z[i], sol.z, atol=1e-12)
        np.testing.assert_allclose(G[i], sol.gamma, atol=1e-12)
        assert D[i] == pytest.approx(sol.distance, rel=1e-12)
    # a row's result does not depend on its batch companions
    Z1, G1, D1, _ = solve_batch(Y[3:4], U, lam, eps=1e-10, max_iter=200)
    np.testing.assert_array_equal(D1[0], D[3])
    np.testing.assert_array_equal(G1[0], G[3])


# ---- distance and likelihood


def model_with_basis(d=64, k=4, seed=0):
    mu = np.random.default_rng(seed).uniform(0.2, 0.8, d)
    return SubspaceModel(mu, basis(d, k, seed), np.linspace(4, 1, k), 10.0, k)


def test_distance_zero_cases():
    m = model_with_basis()
    lam = LambdaSequence.linear(64, 0.1)
    assert subspace_distance(m.mu, m, lam) == 0.0
    assert subspace_distance(m.mu + m.U[:, 0], m, lam) == pytest.approx(0.0, abs=1e-10)


def test_distance_feasibility_bound():
    m = model_with_basis()
    lam = LambdaSequence.linear(64, 0.1)
    rng = np.random.default_rng(4)
    for _ in range(50):
        y = rng.uniform(0, 1, 64)
        assert subspace_distance(y, m, lam) <= 0.5 * np.sum((y - m.mu) ** 2) + 1e-12


def test_distance_rotation_invariant():
    m = model_with_basis()
    lam = LambdaSequence.linear(64, 0.2)
    Q, _ = np.linalg.qr(np.random.default_rng(5).normal(size=(4, 4)))
    rotated = SubspaceModel(m.mu, m.U @ Q, m.sigma, m.n_eff, m.k)
    rng = np.random.default_rng(6)
    for _ in range(20):
        y = rng.uniform(0, 1, 64)
        a = subspace_distance(y, m, lam, eps=1e-14, max_iter=1000)
        b = subspace_distance(y, rotated, lam, eps=1e-14, max_iter=1000)
        assert abs(a - b) <= 1e-9


def test_distance_dimension_mismatch():
    with pytest.raises(DimensionError):
        subspace_distance(np.ones(10), model_with_basis(), LambdaSequence.constant(64, 0.1))


def test_mean_only_model_distance():
    m = SubspaceModel.from_template(np.full(16, 0.5), k=4)
    y = np.linspace(0, 1, 16)
    assert subspace_distance(y, m, LambdaSequence.constant(16, 0.1)) == pytest.approx(0.5 * np.sum((y - 0.5) ** 2))


def test_likelihood_properties():
    m = model_with_basis()
    lam = LambdaSequence.linear(64, 0.1)
    assert observation_likelihood(m.mu, m, lam, kappa=10) == 1.0
    rng = np.random.default_rng(7)
    for _ in range(20):
        y = rng.uniform(0, 1, 64)
        p1 = observation_likelihood(y, m, lam, kappa=1.0)
        p2 = observation_likelihood(y, m, lam, kappa=2.0)
        assert 0 < p1 <= 1
        assert p2 == pytest.approx(p1**2, rel=1e-12)
    ys = [rng.uniform(0, 1, 64) for _ in range(30)]
    d = [subspace_distance(y, m, lam) for y in ys]
    p = [observation_likelihood(y, m, lam, kappa=0.5) for y in ys]
    order = np.argsort(d)
    assert np.all(np.diff(np.array(p)[order]) <= 0)
    with pytest.raises(ValueError):
        observation_likelihood(m.mu, m, lam, kappa=0)


# ---- cleaning


def test_clean_observation():
    rng = np.random.default_rng(8)
    y, mu = rng.normal(size=20), rng.normal(size=20)
    np.testing.assert_array_equal(clean_observation(y, np.zeros(20), mu), y)
    np.testing.assert_array_equal(clean_observation(y, np.ones(20), mu), mu)
    g = np.where(rng.uniform(size=20) < 0.4, rng.normal(size=20), 0.0)
    expected = y.copy()
    for i in range(20):
        if g[i] != 0:
            expected[i] = mu[i]
    np.testing.assert_array_equal(clean_observation(y, g, mu), expected)
    with pytest.raises(DimensionError):
        clean_observation(y, g[:5], mu)


# ---- incremental update


def low_rank_batch(seed, d=64, m=20, rank=3, noise=0.0):
    r = np.random.default_rng(seed)
    mean = r.uniform(0.3, 0.7, d)
    B = basis(d, rank, seed + 50)
    data = mean[:, None] + B @ (r.normal(size=(rank, m)) * [[3.0], [2.0], [1.0]][:rank])
    return data + noise * r.normal(size=(d, m))


def test_first_update_is_batch_pca():
    data = low_rank_batch(0, noise=0.01)
    m = incremental_update(SubspaceModel.empty(64, k=3), data)
    centred = data - data.mean(axis=1, keepdims=True)
    proj = m.U @ (m.U.T @ centred)
    assert np.sum(proj**2) / np.sum(centred**2) >= 0.99
    np.testing.assert_allclose(m.mu, data.mean(axis=1), atol=1e-14)
    assert m.n_eff == 20
    assert m.orthonormality_error() <= 1e-8


def test_two_batches_match_concatenated_pca():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(64, 8))
    b = rng.normal(size=(64, 7)) + 0.5
    k = 16  # enough columns to hold every direction, so no truncation
    m = incremental_update(SubspaceModel.empty(64, k), a, forgetting=1.0)
    m = incremental_update(m, b, forgetting=1.0)
    full = np.hstack([a, b])
    centred = full - full.mean(axis=1, keepdims=True)
    U_ref, s_ref, _ = np.linalg.svd(centred, full_matrices=False)
    r = int(np.sum(s_ref > 1e-10 * s_ref[0]))
    assert m.rank == r
    assert np.max(subspace_angles(m.U, U_ref[:, :r])) <= 1e-6
    np.testing.assert_allclose(m.sigma, s_ref[:r], rtol=1e-9)
    np.testing.assert_allclose(m.mu, full.mean(axis=1), atol=1e-12)


def test_two_batches_low_rank_source():
    a = low_rank_batch(2, m=10)
    b = low_rank_batch(2, m=25)[:, 10:]
    m = incremental_update(SubspaceModel.empty(64, 4), a, forgetting=1.0)
    m = incremental_update(m, b, forgetting=1.0)
    full = np.hstack([a, b])
    U_ref = np.linalg.svd(full - full.mean(axis=1, keepdims=True), full_matrices=False)[0][:, :3]
    assert m.rank == 3
    assert np.max(subspace_angles(m.U, U_ref)) <= 1e-6


def test_update_keeps_orthonormality_and_truncates():
    rng = np.random.default_rng(3)
    m = SubspaceModel.empty(64, k=5)
    for _ in range(10):
        m = incremental_update(m, rng.normal(size=(64, 5)), forgetting=0.9)
        assert m.orthonormality_error() <= 1e-8
        assert m.rank <= 5
        assert np.all(np.diff(m.sigma) <= 0) and np.all(m.sigma >= 0)


def test_forgetting_discounts_history():
    rng = np.random.default_rng(4)
    m = incremental_update(SubspaceModel.empty(16, 4), rng.normal(size=(16, 5)))
    m2 = incremental_update(m, rng.normal(size=(16, 5)), forgetting=0.5)
    assert m2.n_eff == pytest.approx(0.5 * 5 + 5)


def test_update_edge_cases():
    m = SubspaceModel.empty(16, 4)
    assert incremental_update(m, np.zeros((16, 0))) is m
    with pytest.raises(DimensionError):
        incremental_update(m, np.zeros((15, 2)))
    with pytest.raises(ValueError):
        incremental_update(m, np.zeros((16, 2)), forgetting=0.0)
