import json

import numpy as np
import pytest
from scipy.integrate import quad

from fieldrecon.dynamics import NetworkSystem, Trajectory, simulate
from fieldrecon.estimator import (
    Backtracking,
    EstimationConfig,
    FixedStep,
    ShapeError,
    StepSizeError,
    estimate,
    gradient,
    load_result,
    objective,
    save_result,
)
from fieldrecon.graph import build_chain, build_grid


def central_fd(sys, x, obs, lam):
    g = np.empty_like(x)
    for i in range(len(x)):
        h = 1e-6 * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (objective(sys, x + e, obs, lam) - objective(sys, x - e, obs, lam)) / (2 * h)
    return g


def test_objective_exact_fit_and_regularizer():
    sys = NetworkSystem.from_graph(build_grid(3, 3), 3)
    x = np.linspace(-1, 1, 9)
    obs = simulate(sys, x, 5.0, 20)
    assert objective(sys, x, obs, 0.0) == pytest.approx(0.0, abs=1e-25)
    assert objective(sys, x, obs, 0.3) == pytest.approx(0.15 * x @ x, rel=1e-12)


def test_objective_chain2_against_quadrature():
    sys = NetworkSystem.from_graph(build_chain(2), accessible=[0])
    obs = simulate(sys, [1.0, 0.0], 1.0, 2000)
    exact = 0.5 * quad(lambda t: (0.5 + 0.5 * np.exp(-2 * t)) ** 2, 0, 1)[0]
    assert exact == pytest.approx(0.263760725880, abs=1e-11)
    assert objective(sys, np.zeros(2), obs, 0.0) == pytest.approx(exact, rel=1e-7)


def test_objective_shape_errors():
    sys = NetworkSystem.from_graph(build_chain(4), 2)
    obs = Trajectory([0.0, 0.1, 0.2], np.zeros((3, 3)))
    with pytest.raises(ShapeError):
        objective(sys, np.zeros(4), obs, 0.0)
    obs = Trajectory([0.0, 0.1, 0.2], np.zeros((3, 2)))
    with pytest.raises(ShapeError):
        objective(sys, np.zeros(5), obs, 0.0)
    with pytest.raises(ShapeError):
        gradient(sys, np.zeros(4), Trajectory([0.0, 0.1, 0.3], np.zeros((3, 2))), 0.0)


def test_gradient_vanishes_at_truth(backend):
    sys = NetworkSystem.from_graph(build_grid(3, 3), 2)
    x = np.random.default_rng(0).uniform(-1, 1, 9)
    obs = simulate(sys, x, 4.0, 25)
    np.testing.assert_allclose(gradient(sys, x, obs, 0.0, backend=backend), 0.0, atol=1e-14)
    np.testing.assert_allclose(gradient(sys, x, obs, 0.01, backend=backend), 0.01 * x, atol=1e-14)


def test_gradient_matches_finite_differences_grid3():
    rng = np.random.default_rng(42)
    sys = NetworkSystem.from_graph(build_grid(3, 3), accessible=[0, 4, 7])
    obs = simulate(sys, rng.uniform(-1, 1, 9), 2.0, 50)
    x = rng.uniform(-1, 1, 9)
    for lam in (0.0, 1e-3):
        g = gradient(sys, x, obs, lam)
        fd = central_fd(sys, x, obs, lam)
        assert np.max(np.abs(g - fd) / np.abs(fd)) < 1e-5


def test_backends_agree():
    rng = np.random.default_rng(5)
    sys = NetworkSystem.from_graph(build_chain(12), 3)
    obs = simulate(sys, rng.normal(size=12), 3.0, 20)
    x = rng.normal(size=12)
    a = gradient(sys, x, obs, 1e-3, backend="python")
    b = gradient(sys, x, obs, 1e-3)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)
    a = gradient(sys, x, obs, 1e-3, method="rk4", backend="python")
    b = gradient(sys, x, obs, 1e-3, method="rk4")
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


def test_rk4_adjoint_converges_to_exact():
    rng = np.random.default_rng(3)
    sys = NetworkSystem.from_graph(build_grid(3, 3), 3)
    x_true, x = rng.uniform(-1, 1, (2, 9))
    errs = []
    for rate in (10, 20, 40):
        obs = simulate(sys, x_true, 2.0, rate)
        exact = gradient(sys, x, obs, 0.0)
        rk4 = gradient(sys, x, obs, 0.0, method="rk4")
        errs.append(np.linalg.norm(rk4 - exact) / np.linalg.norm(exact))
    # both discretize the same integral to second order
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.25)


def test_estimate_constant_field():
    # the default stopping rule is loose for this ill-conditioned problem
    for g in (build_chain(5), build_grid(3, 3)):
        sys = NetworkSystem.from_graph(g, 1)
        x_true = 3.0 * np.ones(g.num_nodes)
        obs = simulate(sys, x_true, 10.0, 10)
        res = estimate(sys, obs, EstimationConfig(lam=1e-9, grad_tol=1e-10, max_iters=20000))
        assert np.linalg.norm(res.x0_hat - x_true) / np.linalg.norm(x_true) < 1e-3


def test_estimate_zero_data_gives_zero():
    sys = NetworkSystem.from_graph(build_grid(3, 3), 3)
    obs = Trajectory(np.arange(11) * 0.1, np.zeros((11, 3)))
    res = estimate(sys, obs, EstimationConfig(lam=1e-2, init=np.ones(9), grad_tol=1e-12))
    assert res.converged
    np.testing.assert_allclose(res.x0_hat, 0.0, atol=1e-10)


def test_estimate_history_monotone_and_consistent():
    rng = np.random.default_rng(7)
    sys = NetworkSystem.from_graph(build_grid(4, 4), 4)
    obs = simulate(sys, rng.uniform(-1, 1, 16), 5.0, 10)
    for trial in ("bb", "lipschitz"):
        res = estimate(sys, obs, EstimationConfig(lam=1e-4, max_iters=300,
                                                  step_rule=Backtracking(trial=trial)))
        h = res.objective_history
        assert len(h) == len(res.grad_norm_history) == res.iterations + 1
        assert all(b <= a for a, b in zip(h, h[1:]))
        assert h[-1] < h[0]


def test_estimate_converges_on_well_posed_problem():
    rng = np.random.default_rng(8)
    sys = NetworkSystem.from_graph(build_chain(6), 6)
    x_true = rng.uniform(-1, 1, 6)
    obs = simulate(sys, x_true, 2.0, 20)
    res = estimate(sys, obs, EstimationConfig(lam=0.0))
    assert res.converged
    np.testing.assert_allclose(res.x0_hat, x_true, atol=1e-6)


def test_regularization_shrinks_estimate():
    rng = np.random.default_rng(9)
    sys = NetworkSystem.from_graph(build_grid(2, 3), 3)
    obs = simulate(sys, rng.uniform(-1, 1, 6), 5.0, 10)
    norms = []
    for lam in (1e-6, 1e-3, 1.0, 1e3):
        res = estimate(sys, obs, EstimationConfig(lam=lam, max_iters=20000, grad_tol=1e-10))
        assert res.converged
        norms.append(np.linalg.norm(res.x0_hat))
    assert all(b <= a + 1e-9 for a, b in zip(norms, norms[1:]))


def test_objective_convexity_witness():
    rng = np.random.default_rng(10)
    sys = NetworkSystem.from_graph(build_grid(3, 3), 2)
    obs = simulate(sys, rng.uniform(-1, 1, 9), 3.0, 10)
    for _ in range(20):
        a, b = rng.uniform(-2, 2, (2, 9))
        th = rng.uniform()
        lhs = objective(sys, th * a + (1 - th) * b, obs, 1e-3)
        rhs = th * objective(sys, a, obs, 1e-3) + (1 - th) * objective(sys, b, obs, 1e-3)
        assert lhs <= rhs + 1e-9


def test_fixed_step_divergence_raises():
    sys = NetworkSystem.from_graph(build_chain(5), 2)
    obs = simulate(sys, np.arange(5.0), 5.0, 10)
    with pytest.raises(StepSizeError, match="backtracking"):
        estimate(sys, obs, EstimationConfig(step_rule=FixedStep(100.0), max_iters=100))


def test_fixed_step_small_converges():
    sys = NetworkSystem.from_graph(build_chain(4), 4)
    x_true = np.array([1.0, -1.0, 0.5, 0.0])
    obs = simulate(sys, x_true, 2.0, 20)
    res = estimate(sys, obs, EstimationConfig(step_rule=FixedStep(0.2), max_iters=5000))
    np.testing.assert_allclose(res.x0_hat, x_true, atol=1e-5)


def test_config_validation():
    with pytest.raises(ValueError):
        EstimationConfig(lam=-1)
    with pytest.raises(ValueError):
        EstimationConfig(grad_tol=0)
    with pytest.raises(ValueError):
        EstimationConfig(step_rule=Backtracking(c=2))
    with pytest.raises(ValueError):
        EstimationConfig(adjoint="euler")


def test_result_json_roundtrip(tmp_path):
    sys = NetworkSystem.from_graph(build_chain(4), 2)
    obs = simulate(sys, np.arange(4.0), 2.0, 10)
    res = estimate(sys, obs, EstimationConfig(max_iters=20))
    path = tmp_path / "r.json"
    save_result(res, path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"x0_hat", "objective_history", "grad_norm_history", "iterations", "converged"}
    back = load_result(path)
    np.testing.assert_array_equal(back.x0_hat, res.x0_hat)
    assert back.iterations == res.iterations and back.converged == res.converged
