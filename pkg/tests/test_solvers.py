import numpy as np
import pytest

from lpthresh.errors import ContractError
from lpthresh.linalg import DenseMatrix
from lpthresh.problems import derive_seed, generate_instance
from lpthresh.solvers import (
    Algorithm,
    SolverConfig,
    Termination,
    adaptive_lambda,
    compute_epsilon,
    gradient_step,
    half_lambda,
    relative_error,
    soft_lambda,
    solve,
)
from lpthresh.thresholds import HALF_KNEE, it_coordinate_update
from oracles import loop_gradient_step


def small_instance(seed, m=32, n=64, k=4):
    rng = np.random.default_rng(seed)
    A = DenseMatrix(rng.standard_normal((m, n)))
    x0 = np.zeros(n)
    x0[rng.choice(n, k, replace=False)] = rng.standard_normal(k)
    return A, A.data @ x0, x0


def test_gradient_step_examples():
    A = DenseMatrix([[1.0, 2.0], [0.0, 1.0]])
    x = np.array([0.5, -1.0])
    np.testing.assert_array_equal(gradient_step(A, A.data @ x, x, 0.3), x)
    assert gradient_step(DenseMatrix([[1.0]]), [1.0], [0.0], 0.5).tolist() == [0.5]


def test_gradient_step_against_loops(rng):
    a = rng.standard_normal((4, 8))
    b, x = rng.standard_normal(4), rng.standard_normal(8)
    ref = loop_gradient_step(a.tolist(), b.tolist(), x.tolist(), 0.07)
    np.testing.assert_allclose(gradient_step(DenseMatrix(a), b, x, 0.07), ref, rtol=1e-12, atol=1e-12)


def test_compute_epsilon_examples(rng):
    A = DenseMatrix(rng.standard_normal((3, 5)))
    x = rng.standard_normal(5)
    np.testing.assert_array_equal(compute_epsilon(A, A.data @ x, x, 0.1, 0.7, 1e-3), np.full(5, 1e-3))
    eps = compute_epsilon(DenseMatrix([[1.0]]), [1.0], [0.0], 0.5, 0.7, 1e-3)
    assert eps[0] == pytest.approx(0.35, abs=1e-15)
    b = rng.standard_normal(3) * 1e-6
    assert np.all(compute_epsilon(A, b, np.zeros(5), 0.01, 0.7, 1e-3) >= 1e-3)


def test_adaptive_lambda_hand_value():
    lam = adaptive_lambda([0.9, 0.5, 0.1], [1.0, 0.4, 0.0], [0.01] * 3, 0.5, 0.5, 1)
    assert lam == pytest.approx(2 * 0.5 * np.sqrt(0.41) / 0.5, rel=1e-15)
    assert lam == pytest.approx(1.2806248474865698, rel=1e-12)


def test_adaptive_lambda_zero_and_scaling(rng):
    assert adaptive_lambda([3.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.1] * 3, 0.5, 0.7, 1) == 0.0
    bm, x, eps = rng.standard_normal(10), rng.standard_normal(10), rng.uniform(1e-3, 1, 10)
    base = adaptive_lambda(bm, x, eps, 0.2, 0.6, 3)
    assert adaptive_lambda(4.0 * bm, x, eps, 0.2, 0.6, 3) == pytest.approx(4.0 * base, rel=1e-14)
    # sign and order of the inputs do not matter
    perm = rng.permutation(10)
    assert adaptive_lambda(-bm[perm], x, eps, 0.2, 0.6, 3) == base


def test_adaptive_lambda_rejects_bad_r():
    with pytest.raises(ContractError):
        adaptive_lambda([1.0, 2.0], [0.0, 0.0], [1.0, 1.0], 0.5, 0.5, 2)
    with pytest.raises(ContractError):
        adaptive_lambda([1.0, 2.0], [0.0, 0.0], [1.0, 1.0], 0.5, 0.5, 0)


def test_baseline_lambdas_place_threshold_at_r_plus_one():
    bm = np.array([5.0, -3.0, 2.0, 0.5])
    mu = 0.25
    assert soft_lambda(bm, mu, 2) * mu / 2 == pytest.approx(2.0)
    assert HALF_KNEE * (half_lambda(bm, mu, 1) * mu) ** (2 / 3) == pytest.approx(3.0, rel=1e-12)


@pytest.mark.parametrize("x_star, factor", [(1.0, 0.0), (2.0, 1.0), (0.0, 1.0)])
def test_relative_error_examples(x_star, factor):
    x0 = np.array([1.0, -2.0, 0.0, 3.0])
    assert relative_error(x_star * x0, x0) == pytest.approx(factor, abs=1e-15)


def test_relative_error_rejects_zero_reference():
    with pytest.raises(ContractError):
        relative_error([1.0], [0.0])


def test_config_validation():
    for bad in [dict(eta=0.0), dict(eta=1.0), dict(p=1.0), dict(p=0.0), dict(tolerance=0.0),
                dict(sparsity_r=0), dict(max_iterations=0), dict(fixed_lambda=-1.0), dict(fixed_epsilon=0.0)]:
        with pytest.raises(ContractError):
            SolverConfig(**bad)
    assert SolverConfig(algorithm="half").algorithm is Algorithm.HALF
    with pytest.raises(ContractError):
        solve(DenseMatrix(np.ones((2, 3))), np.ones(2), SolverConfig(sparsity_r=3))


def test_defaults():
    c = SolverConfig()
    assert (c.tolerance, c.max_iterations, c.eta, c.epsilon_scale, c.epsilon_floor) == (1e-8, 5000, 0.01, 0.7, 1e-3)


@pytest.mark.parametrize("alg", list(Algorithm))
def test_identity_one_sparse_recovery(alg):
    n = 16
    x0 = np.zeros(n)
    x0[5] = 1.0
    res = solve(DenseMatrix(np.eye(n)), x0, SolverConfig(algorithm=alg, p=0.7, sparsity_r=1, max_iterations=100))
    assert res.converged
    assert relative_error(res.solution, x0) < 1e-6


@pytest.mark.parametrize("alg", list(Algorithm))
def test_zero_observation_is_fixed_point(alg):
    A, _, _ = small_instance(0)
    res = solve(A, np.zeros(A.rows), SolverConfig(algorithm=alg, sparsity_r=3))
    assert res.termination is Termination.CONVERGED
    assert res.iterations == 1
    assert not np.any(res.solution)


def test_degenerate_inputs():
    res = solve(DenseMatrix(np.zeros((3, 6))), np.ones(3), SolverConfig(sparsity_r=2))
    assert res.termination is Termination.DEGENERATE_INPUT
    A, b, _ = small_instance(1)
    b = b.copy()
    b[0] = np.nan
    res = solve(A, b, SolverConfig(sparsity_r=2))
    assert res.termination is Termination.DEGENERATE_INPUT
    assert "non-finite" in res.message


def test_step_size_guard_and_trace_length():
    A, b, _ = small_instance(2)
    res = solve(A, b, SolverConfig(sparsity_r=4, eta=0.3))
    assert res.mu * A.spectral_norm() ** 2 == pytest.approx(0.7, rel=1e-12)
    assert len(res.trace) == res.iterations
    assert len(res.trace.objective) == len(res.trace.lam) == len(res.trace.support) == res.iterations
    step_rel = res.trace.step_norm[-1]
    assert res.converged and step_rel <= 1e-8 * np.linalg.norm(res.solution) * 2


def test_max_iterations_reported():
    A, b, _ = small_instance(3)
    res = solve(A, b, SolverConfig(sparsity_r=4, max_iterations=7))
    assert res.termination is Termination.MAX_ITERATIONS
    assert res.iterations == 7


def test_lambda_in_trace_is_recomputable():
    A, b, _ = small_instance(4)
    cfg = SolverConfig(p=0.6, sparsity_r=4)
    iterates = [np.zeros(A.cols)]
    res = solve(A, b, cfg, callback=lambda k, x: iterates.append(x.copy()))
    assert len(iterates) == res.iterations + 1
    for k in range(min(res.iterations, 40)):
        x = iterates[k]
        eps = compute_epsilon(A, b, x, res.mu, cfg.epsilon_scale, cfg.epsilon_floor)
        bm = gradient_step(A, b, x, res.mu)
        lam = adaptive_lambda(bm, x, eps, res.mu, cfg.p, cfg.sparsity_r)
        assert res.trace.lam[k] == pytest.approx(lam, rel=1e-12, abs=1e-300)
        nxt = it_coordinate_update(bm, x, lam, res.mu, cfg.p, eps)
        np.testing.assert_allclose(iterates[k + 1], nxt, rtol=1e-12, atol=1e-14)
        assert res.trace.support[k] == np.count_nonzero(iterates[k + 1]) <= A.cols


def test_deterministic_trajectory():
    inst = generate_instance(64, 160, 8, 99)
    runs = [solve(inst.A, inst.b, SolverConfig(sparsity_r=8)) for _ in range(2)]
    assert runs[0].trace.support == runs[1].trace.support
    np.testing.assert_array_equal(runs[0].solution, runs[1].solution)


def test_fixed_mode_regularity_and_fixed_point():
    for seed in range(10):
        A, b, _ = small_instance(seed)
        lam, eps, p = 0.5, 1e-3, 0.7
        res = solve(A, b, SolverConfig(p=p, fixed_lambda=lam, fixed_epsilon=eps, max_iterations=50000))
        assert res.converged
        assert res.trace.step_norm[-1] < 1e-6
        theta = 1 - res.mu * A.spectral_norm() ** 2
        assert np.sum(np.square(res.trace.step_norm)) <= res.mu / theta * res.initial_objective
        x = res.solution
        again = it_coordinate_update(gradient_step(A, b, x, res.mu), x, lam, res.mu, p, eps)
        assert np.max(np.abs(again - x)) < 1e-6


def test_fixed_mode_reweighted_objective_descends():
    # With frozen lam and eps the update is a majorize-minimize step for
    # ||Ax-b||^2 + (lam/p) * sum((|x_i| + eps_i)^p), so that value never increases.
    for seed in range(10):
        A, b, _ = small_instance(seed)
        lam, eps, p = 0.5, 1e-3, 0.7
        vals = []

        def track(k, x):
            r = A.data @ x - b
            vals.append(r @ r + lam / p * np.sum((np.abs(x) + eps) ** p))

        solve(A, b, SolverConfig(p=p, fixed_lambda=lam, fixed_epsilon=eps, max_iterations=50000), callback=track)
        start = b @ b + lam / p * A.cols * eps**p
        diffs = np.diff([start] + vals)
        assert np.all(diffs <= 1e-10 * max(1.0, start))


def test_paper_scale_r40_success_rate():
    ok = 0
    for t in range(20):
        inst = generate_instance(256, 1024, 40, derive_seed(7, 40, t))
        res = solve(inst.A, inst.b, SolverConfig(p=0.7, sparsity_r=40, tolerance=1e-8))
        ok += relative_error(res.solution, inst.x0) <= 1e-3
    assert ok >= 18


def test_seeded_random_start():
    A, b, _ = small_instance(5)
    a = solve(A, b, SolverConfig(sparsity_r=4, rng_seed=11, max_iterations=1))
    c = solve(A, b, SolverConfig(sparsity_r=4, rng_seed=11, max_iterations=1))
    z = solve(A, b, SolverConfig(sparsity_r=4, max_iterations=1))
    np.testing.assert_array_equal(a.solution, c.solution)
    assert not np.array_equal(a.solution, z.solution)
