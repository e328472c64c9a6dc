"""Optimizers, carried state, marching consistency and the solve drivers."""

import numpy as np
import pytest

from sinn import geometry as geo
from sinn import net, problem
from sinn import quadrature as quad
from sinn import residual as res
from sinn import train
from sinn.geometry import DIRICHLET, NEUMANN
from sinn.net import Activation
from sinn.train import (AnalyticNodalField, CarriedState, InverseConfig,
                        TrainConfig, adam, advance_state, lbfgs, march,
                        optimize, solve_inverse, solve_subinterval)

from conftest import state_fn_for


def _quadratic(target):
    def loss_and_grad(x):
        d = x - target
        return float(d @ d), 2 * d
    return loss_and_grad


def test_adam_convex_oracle():
    target = np.arange(5.0)
    result = adam(_quadratic(target), np.zeros(5), 500, lr=0.1)
    assert np.linalg.norm(result.params - target) <= 1e-3
    assert len(result.history) == 500
    assert not result.aborted


def test_adam_zero_gradient_start_stays_put():
    target = np.array([1.0, -2.0])
    result = adam(_quadratic(target), target.copy(), 50, lr=0.1)
    np.testing.assert_array_equal(result.params, target)


def test_adam_deterministic():
    target = np.array([3.0, 1.0, -1.0])
    r1 = adam(_quadratic(target), np.zeros(3), 100, lr=0.05)
    r2 = adam(_quadratic(target), np.zeros(3), 100, lr=0.05)
    np.testing.assert_array_equal(r1.history, r2.history)
    np.testing.assert_array_equal(r1.params, r2.params)


def test_adam_aborts_on_nonfinite():
    calls = [0]

    def explode(x):
        calls[0] += 1
        if calls[0] > 3:
            return np.nan, np.zeros_like(x)
        return float(x @ x), 2 * x

    result = adam(explode, np.ones(2), 50, lr=0.1)
    assert result.aborted
    assert "non-finite" in result.message
    assert np.all(np.isfinite(result.params))


def test_lbfgs_quadratic_exact():
    target = np.arange(4.0)
    result = lbfgs(_quadratic(target), np.zeros(4), 50)
    assert np.linalg.norm(result.params - target) <= 1e-10


def test_lbfgs_ill_conditioned_quadratic():
    """Condition number 1e4: steepest descent would crawl; the two-loop
    inverse-Hessian model must not."""
    scales = np.logspace(0, 4, 12)
    target = np.linspace(-2, 2, 12)

    def f(x):
        d = x - target
        return float(scales @ (d * d)), 2 * scales * d

    result = lbfgs(f, np.zeros(12), 150)
    assert result.best_loss <= 1e-12
    np.testing.assert_allclose(result.params, target, atol=1e-6)


def test_optimize_best_so_far_monotone():
    target = np.arange(3.0)
    cfg = TrainConfig(iterations=200, optimizer="adam", lr=0.3)
    result = optimize(_quadratic(target), np.zeros(3), cfg)
    best_seen = np.minimum.accumulate(result.history)
    assert result.best_loss <= best_seen[-1] + 1e-300
    # returned parameters realize the best loss
    assert _quadratic(target)(result.params)[0] == pytest.approx(result.best_loss)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(iterations=0)
    with pytest.raises(ValueError):
        TrainConfig(lr=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(optimizer="sgd")


# ---------------------------------------------------------------------------
# carried state


def _poly_heat():
    def g(x):
        return 1.0 + x[:, 0] + 2 * x[:, 1] * x[:, 2]

    def grad_g(x):
        return np.stack([np.ones(len(x)), 2 * x[:, 2], 2 * x[:, 1]], axis=1)

    def lap_g(x):
        return np.zeros(len(x))

    tf = (lambda t: t * t + 1.0, lambda t: 2 * t, lambda t: 2.0 + 0 * t)
    case = problem._separable_case("ph", tf, g, grad_g, lap_g, wave=False)

    def source(x, t):
        return 2 * t * g(x)

    spec = problem._finish_heat_spec(
        "ph", geo.Box((0, 0, 0), (1, 1, 1)), (0.0, 4.0),
        geo.rule_threshold(2, 0.5, NEUMANN, DIRICHLET),
        problem.ConstantCoefficient(1.0), problem.ConstantCoefficient(1.0),
        case, source)
    return spec, case


def _poly_wave():
    def g(x):
        return 1.0 + 0.5 * x[:, 0] + x[:, 1] * x[:, 2]

    def grad_g(x):
        return np.stack([np.full(len(x), 0.5), x[:, 2], x[:, 1]], axis=1)

    def lap_g(x):
        return np.zeros(len(x))

    tf = (lambda t: t**3 + t, lambda t: 3 * t * t + 1.0, lambda t: 6 * t)
    case = problem._separable_case("pw", tf, g, grad_g, lap_g, wave=True)

    def source(x, t):
        return 6 * t * g(x)

    spec = problem._finish_wave_spec(
        "pw", geo.Box((0, 0, 0), (1, 1, 1)), (0.0, 2.0),
        geo.rule_threshold(1, 0.5, DIRICHLET, NEUMANN), 1.0, None, case, source)
    return spec, case


def test_advance_state_zero_bundle_heat():
    spec, _ = _poly_heat()
    state = CarriedState.initial(spec)
    op = quad.spectral_operator(3)
    bundle = net.init_bundle((3, 4, 1), Activation.TANH, 3, seed=0)
    for m in bundle.nets:
        for w in m.weights:
            w[...] = 0.0
    new = advance_state(state, bundle, op, 1.0)
    x = geo.sample_interior(spec.domain, 15, seed=0)
    old_jets = state.jets(x)
    new_jets = new.jets(x)
    np.testing.assert_allclose(new_jets.u_value, old_jets.u_value, atol=1e-14)
    assert new.t_start == 1.0


def test_advance_state_constant_bundle_heat():
    spec, _ = _poly_heat()
    state = CarriedState.initial(spec)
    op = quad.spectral_operator(3)
    bundle = net.init_bundle((3, 4, 1), Activation.TANH, 3, seed=0)
    for m in bundle.nets:
        for w in m.weights:
            w[...] = 0.0
        m.biases[-1][...] = 2.5
    new = advance_state(state, bundle, op, 0.5)
    x = geo.sample_interior(spec.domain, 10, seed=1)
    np.testing.assert_allclose(new.jets(x).u_value,
                               state.jets(x).u_value + 2.5 * 0.5, atol=1e-13)


def test_advance_state_wave_free_propagation():
    spec, _ = _poly_wave()
    state = CarriedState.initial(spec)
    op = quad.spectral_operator(2)
    bundle = net.init_bundle((3, 3, 1), Activation.TANH, 2, seed=0)
    for m in bundle.nets:
        for w in m.weights:
            w[...] = 0.0
    s1 = advance_state(state, bundle, op, 0.4)
    s2 = advance_state(s1, bundle, op, 0.6)
    x = geo.sample_interior(spec.domain, 12, seed=2)
    j0 = state.jets(x)
    j2 = s2.jets(x)
    np.testing.assert_allclose(j2.u_value, j0.u_value + j0.v_value * 1.0, atol=1e-13)
    np.testing.assert_allclose(j2.v_value, j0.v_value, atol=1e-14)


def test_marching_consistency_exact_injection_heat():
    """Carried u at every step boundary matches the exact solution to 1e-9
    when exact nodal rate values are injected (no training)."""
    spec, case = _poly_heat()
    op = quad.spectral_operator(4)
    state = CarriedState.initial(spec)
    x = geo.sample_interior(spec.domain, 30, seed=3)
    dt = 1.0
    for step in range(4):
        t0 = state.t_start
        times = quad.map_nodes(op.rule, t0, t0 + dt)
        field = AnalyticNodalField(case.ut, times)
        state = advance_state(state, field, op, dt)
        jets = state.jets(x)
        exact = case.u.value(x, state.t_start)
        assert np.max(np.abs(jets.u_value - exact)) <= 1e-9
        exact_g = case.u.grad(x, state.t_start)
        assert np.max(np.abs(jets.u_grad - exact_g)) <= 1e-9


def test_marching_consistency_exact_injection_wave():
    spec, case = _poly_wave()
    op = quad.spectral_operator(4)
    state = CarriedState.initial(spec)
    x = geo.sample_interior(spec.domain, 30, seed=4)
    dt = 0.5
    for step in range(4):
        t0 = state.t_start
        times = quad.map_nodes(op.rule, t0, t0 + dt)
        state = advance_state(state, AnalyticNodalField(case.utt, times), op, dt)
        jets = state.jets(x)
        np.testing.assert_allclose(jets.u_value, case.u.value(x, state.t_start),
                                   atol=1e-9)
        np.testing.assert_allclose(jets.v_value, case.ut.value(x, state.t_start),
                                   atol=1e-9)


# ---------------------------------------------------------------------------
# solve drivers (tiny budgets; these check plumbing, not accuracy)


def test_solve_subinterval_exactly_representable_toy():
    """u linear in x and quadratic in t: the rate target is linear, well
    inside the model class, so the optimizer should drive the loss far down."""

    def g(x):
        return x[:, 0] + 0.5 * x[:, 1] - 0.25 * x[:, 2]

    def grad_g(x):
        return np.tile([1.0, 0.5, -0.25], (len(x), 1))

    def lap_g(x):
        return np.zeros(len(x))

    tf = (lambda t: t * t + 1.0, lambda t: 2 * t, lambda t: 2.0 + 0 * t)
    case = problem._separable_case("toy", tf, g, grad_g, lap_g, wave=False)

    def source(x, t):
        return 2 * t * g(x)

    spec = problem._finish_heat_spec(
        "toy", geo.Box((0, 0, 0), (1, 1, 1)), (0.0, 1.0),
        geo.rule_all(DIRICHLET), problem.ConstantCoefficient(1.0),
        problem.ConstantCoefficient(1.0), case, source)
    cfg = TrainConfig(iterations=5000, optimizer="adam+lbfgs", adam_fraction=0.12,
                      lr=3e-2, lr_decay=0.1, p=3, hidden=(10,),
                      activation=Activation.SWISH, n_interior=40, n_boundary=60,
                      n_test=100, seed=1)
    state = CarriedState.initial(spec)
    bundle, report = solve_subinterval(spec, state, 1.0, cfg, case=case)
    assert report.final.total <= 1e-8
    assert report.errors["u_l2_end"] <= 1e-4
    assert len(report.loss_history) >= cfg.iterations // 2


def test_solve_subinterval_rejects_empty_interval():
    spec, case = _poly_heat()
    cfg = TrainConfig(iterations=5, n_interior=10, n_boundary=10, n_test=10)
    state = CarriedState.initial(spec)
    with pytest.raises(ValueError, match="empty subinterval"):
        solve_subinterval(spec, state, 0.0, cfg)


def test_march_reports_every_step_and_consistency():
    spec, case = _poly_heat()
    cfg = TrainConfig(iterations=150, optimizer="adam+lbfgs", adam_fraction=0.5,
                      lr=2e-2, p=3, hidden=(6,), activation=Activation.TANH,
                      n_interior=40, n_boundary=60, n_test=50, seed=0)
    state, reports = march(spec, cfg, n_steps=4, case=case)
    assert len(reports) == 4
    assert state.t_start == pytest.approx(4.0)
    assert all("u_l2_end" in r.errors for r in reports)


def test_march_single_step_equals_solve(tmp_path):
    spec, case = _poly_heat()
    import dataclasses
    spec1 = dataclasses.replace(spec, time_interval=(0.0, 1.0))
    cfg = TrainConfig(iterations=60, optimizer="adam", lr=1e-2, p=3, hidden=(5,),
                      activation=Activation.TANH, n_interior=30, n_boundary=40,
                      n_test=50, seed=7)
    state, reports = march(spec1, cfg, n_steps=1, case=case)
    bundle2, rep2 = solve_subinterval(spec1, CarriedState.initial(spec1), 1.0,
                                      cfg, case=case,
                                      points=train.build_points(spec1, cfg))
    # one marching step trains the same subproblem as a direct solve
    np.testing.assert_allclose(reports[0].loss_history, rep2.loss_history)


def test_solve_inverse_smoke(unit_inverse_quadratic):
    (spec, case), _ = unit_inverse_quadratic
    cfg = TrainConfig(iterations=150, optimizer="adam+lbfgs", adam_fraction=0.5,
                      lr=2e-2, p=3, hidden=(8,), activation=Activation.SWISH,
                      n_interior=60, n_boundary=80, n_test=100, seed=0)
    inv_cfg = InverseConfig(order=2, fraction=0.5, noise=0.0, seed=1)
    bundle, params, report = solve_inverse(spec, case, cfg, inv_cfg)
    assert "kappa_max_rel" in report.errors
    assert np.all(np.isfinite(params.alpha))
    assert len(report.loss_history) > 0


def test_solve_pinn_smoke(unit_heat_fgm):
    spec, case = unit_heat_fgm
    cfg = TrainConfig(iterations=40, optimizer="adam", lr=1e-2, hidden=(8,),
                      activation=Activation.SWISH, n_interior=30, n_boundary=40,
                      n_test=50, seed=0)
    mlp, report = train.solve_pinn(spec, cfg, case=case)
    assert mlp.n_inputs == 4
    assert "u_l2_end" in report.errors
    assert report.final.initial >= 0


def test_training_determinism():
    spec, case = _poly_heat()
    import dataclasses
    spec1 = dataclasses.replace(spec, time_interval=(0.0, 1.0))
    cfg = TrainConfig(iterations=30, optimizer="adam", lr=1e-2, p=2, hidden=(5,),
                      activation=Activation.SWISH, n_interior=20, n_boundary=30,
                      n_test=20, seed=11, reproducible=True)
    _, r1 = solve_subinterval(spec1, CarriedState.initial(spec1), 1.0, cfg, case=case)
    _, r2 = solve_subinterval(spec1, CarriedState.initial(spec1), 1.0, cfg, case=case)
    np.testing.assert_array_equal(r1.loss_history, r2.loss_history)
    assert r1.errors == r2.errors
