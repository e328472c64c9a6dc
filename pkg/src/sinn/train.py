"""Optimizers and training drivers: single subinterval, time marching,
and the joint inverse-problem solve.

Training is full-batch on fixed collocation sets.  The default optimizer
is Adam with an exponentially decaying learning rate; an L-BFGS refinement
stage (two-loop recursion with Armijo backtracking) can follow for the
smooth full-batch losses here.  Every run tracks the best-so-far
parameters and returns those, so the reported loss is monotone in the
sense of "best seen".

Time marching carries the solution representation forward as the analytic
initial data plus the end-of-interval integrals of every trained bundle;
evaluation composes linearly, so no refitting is needed between steps.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import geometry, net as netmod
from .geometry import PointSet
from .inverse import (InverseParams, add_noise, basis_enumerate,
                      select_overspecified)
from .metrics import l2_relative_error
from .net import Activation, NetworkBundle, init_bundle, params_flatten, params_load
from .problem import Kind, ManufacturedCase, ProblemSpec, TimeSlice
from .quadrature import SpectralOperator, map_nodes, spectral_operator
from .residual import (InverseLoss, LossBreakdown, NodalJets, PinnLoss, SinnLoss,
                       StateJets, bundle_nodal_jets, pinn_time_samples)

_TEST_SEED_OFFSET = 918273  # test points never coincide with training points


# ---------------------------------------------------------------------------
# configuration


@dataclass
class TrainConfig:
    iterations: int = 1000
    optimizer: str = "adam"            # adam | lbfgs | adam+lbfgs
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr_decay: float = 0.1              # lr shrinks to lr * lr_decay over the run
    adam_fraction: float = 0.6         # adam share of iterations in adam+lbfgs
    lbfgs_memory: int = 20
    lbfgs_max_line_search: int = 30
    seed: int = 0
    p: int = 5
    hidden: tuple[int, ...] = (15, 15)
    activation: Activation = Activation.SWISH
    n_interior: int = 2000
    n_boundary: int = 2000
    strategy: str = "halton"
    n_test: int = 2000
    reproducible: bool = True
    warm_start: bool = False           # reuse the previous bundle when marching

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.optimizer not in ("adam", "lbfgs", "adam+lbfgs"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        self.hidden = tuple(int(h) for h in self.hidden)


@dataclass
class InverseConfig:
    order: int = 3
    fraction: float = 0.2
    noise: float = 0.0
    seed: int = 0


# ---------------------------------------------------------------------------
# optimizers


@dataclass
class OptimizeResult:
    params: np.ndarray
    history: np.ndarray
    best_loss: float
    aborted: bool = False
    message: str = ""


def adam(loss_and_grad, x0: np.ndarray, iterations: int, lr: float,
         beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
         lr_decay: float = 1.0) -> OptimizeResult:
    """Full-batch Adam with bias correction and best-so-far tracking."""
    x = np.asarray(x0, dtype=float).copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    best_x = x.copy()
    best = np.inf
    history = []
    for t in range(1, iterations + 1):
        loss, g = loss_and_grad(x)
        if not np.isfinite(loss) or not np.all(np.isfinite(g)):
            return OptimizeResult(best_x, np.array(history), best, aborted=True,
                                  message=f"non-finite loss/gradient at iteration {t}")
        history.append(loss)
        if loss < best:
            best = loss
            best_x = x.copy()
        lr_t = lr * lr_decay ** (t / iterations)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        x -= lr_t * m_hat / (np.sqrt(v_hat) + eps)
    loss, _ = loss_and_grad(x)
    if np.isfinite(loss) and loss < best:
        best = loss
        best_x = x.copy()
    return OptimizeResult(best_x, np.array(history), best)


def lbfgs(loss_and_grad, x0: np.ndarray, iterations: int, memory: int = 20,
          max_line_search: int = 30, c1: float = 1e-4) -> OptimizeResult:
    """L-BFGS (two-loop recursion) with Armijo backtracking line search."""
    x = np.asarray(x0, dtype=float).copy()
    loss, g = loss_and_grad(x)
    if not np.isfinite(loss):
        return OptimizeResult(x, np.array([]), np.inf, aborted=True,
                              message="non-finite loss at the initial point")
    best, best_x = loss, x.copy()
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []
    history = [loss]
    for _ in range(iterations):
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if y_hist:
            gamma = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
            q *= gamma
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        d = -q
        slope = g @ d
        if slope >= 0:  # not a descent direction; restart from steepest descent
            d = -g
            slope = -(g @ g)
        # scale the very first (steepest-descent) trial step to unit length
        step = min(1.0, 1.0 / np.linalg.norm(d)) if not s_hist else 1.0
        new_loss, new_g = None, None
        for _ in range(max_line_search):
            cand = x + step * d
            cl, cg = loss_and_grad(cand)
            if np.isfinite(cl) and cl <= loss + c1 * step * slope:
                new_loss, new_g = cl, cg
                break
            step *= 0.5
        if new_loss is None:
            break  # line search exhausted; keep the best point so far
        s = step * d
        y = new_g - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x = x + step * d
        loss, g = new_loss, new_g
        history.append(loss)
        if loss < best:
            best, best_x = loss, x.copy()
        if not np.all(np.isfinite(g)):
            return OptimizeResult(best_x, np.array(history), best, aborted=True,
                                  message="non-finite gradient")
    return OptimizeResult(best_x, np.array(history), best)


def optimize(loss_and_grad, x0: np.ndarray, config: TrainConfig) -> OptimizeResult:
    """Dispatch to the configured optimizer (optionally Adam then L-BFGS)."""
    if config.optimizer == "adam":
        return adam(loss_and_grad, x0, config.iterations, config.lr, config.beta1,
                    config.beta2, config.eps, config.lr_decay)
    if config.optimizer == "lbfgs":
        return lbfgs(loss_and_grad, x0, config.iterations, config.lbfgs_memory,
                     config.lbfgs_max_line_search)
    n_adam = max(1, int(round(config.adam_fraction * config.iterations)))
    n_lbfgs = max(1, config.iterations - n_adam)
    stage1 = adam(loss_and_grad, x0, n_adam, config.lr, config.beta1,
                  config.beta2, config.eps, config.lr_decay)
    if stage1.aborted:
        return stage1
    stage2 = lbfgs(loss_and_grad, stage1.params, n_lbfgs, config.lbfgs_memory,
                   config.lbfgs_max_line_search)
    params = stage2.params if stage2.best_loss <= stage1.best_loss else stage1.params
    # stage2.history[0] re-measures stage1's endpoint; drop the duplicate
    return OptimizeResult(
        params=params,
        history=np.concatenate([stage1.history, stage2.history[1:]]),
        best_loss=min(stage1.best_loss, stage2.best_loss),
        aborted=stage2.aborted,
        message=stage2.message,
    )


# ---------------------------------------------------------------------------
# carried state across subintervals


class BundleField:
    """Nodal jets supplied by a trained bundle (the normal marching path)."""

    def __init__(self, bundle: NetworkBundle):
        self.bundle = bundle

    def nodal_jets(self, x: np.ndarray) -> NodalJets:
        return bundle_nodal_jets(self.bundle, x)


class AnalyticNodalField:
    """Nodal jets taken from an analytic rate field at fixed node times;
    used to isolate the marching algebra from optimization error."""

    def __init__(self, rate: TimeSlice, times: np.ndarray):
        self.rate = rate
        self.times = np.asarray(times, dtype=float)

    def nodal_jets(self, x: np.ndarray) -> NodalJets:
        return NodalJets(
            value=np.stack([self.rate.value(x, t) for t in self.times], axis=1),
            grad=np.stack([self.rate.grad(x, t) for t in self.times], axis=2),
            lap=np.stack([self.rate.lap(x, t) for t in self.times], axis=1),
        )


@dataclass(frozen=True)
class _HistoryStep:
    dt: float
    field: object           # anything with nodal_jets(x) -> NodalJets
    op: SpectralOperator


@dataclass(frozen=True)
class CarriedState:
    """Solution representation at the start of the current subinterval:
    the analytic initial data plus the retained contributions of every
    completed subinterval."""

    kind: Kind
    u0: TimeSlice
    v0: Optional[TimeSlice]
    t_start: float
    history: tuple[_HistoryStep, ...] = ()

    @staticmethod
    def initial(spec: ProblemSpec) -> "CarriedState":
        return CarriedState(kind=spec.kind, u0=spec.u0, v0=spec.v0,
                            t_start=spec.time_interval[0])

    def jets(self, x: np.ndarray) -> StateJets:
        x = np.asarray(x, dtype=float)
        u_val = self.u0.value(x, 0.0)
        u_grad = self.u0.grad(x, 0.0)
        u_lap = self.u0.lap(x, 0.0)
        if self.kind == Kind.WAVE:
            v_val = self.v0.value(x, 0.0)
            v_grad = self.v0.grad(x, 0.0)
            v_lap = self.v0.lap(x, 0.0)
        for step in self.history:
            nod = step.field.nodal_jets(x)
            w_end, e_end = step.op.w_end, step.op.e_end
            if self.kind == Kind.HEAT:
                u_val = u_val + step.dt * (nod.value @ w_end)
                u_grad = u_grad + step.dt * (nod.grad @ w_end)
                u_lap = u_lap + step.dt * (nod.lap @ w_end)
            else:
                dt2 = step.dt * step.dt
                u_val = u_val + step.dt * v_val + dt2 * (nod.value @ e_end)
                u_grad = u_grad + step.dt * v_grad + dt2 * (nod.grad @ e_end)
                u_lap = u_lap + step.dt * v_lap + dt2 * (nod.lap @ e_end)
                v_val = v_val + step.dt * (nod.value @ w_end)
                v_grad = v_grad + step.dt * (nod.grad @ w_end)
                v_lap = v_lap + step.dt * (nod.lap @ w_end)
        if self.kind == Kind.HEAT:
            return StateJets(u_val, u_grad, u_lap)
        return StateJets(u_val, u_grad, u_lap, v_val, v_grad, v_lap)


def advance_state(state: CarriedState, field, op: SpectralOperator,
                  dt: float) -> CarriedState:
    """Append one completed subinterval; ``field`` is a bundle or any
    nodal-jet provider trained/valid on [t_start, t_start + dt]."""
    if isinstance(field, NetworkBundle):
        field = BundleField(field)
    step = _HistoryStep(dt=dt, field=field, op=op)
    return replace(state, t_start=state.t_start + dt,
                   history=state.history + (step,))


# ---------------------------------------------------------------------------
# reports and error evaluation


@dataclass
class TrainReport:
    loss_history: np.ndarray
    final: LossBreakdown
    wall_clock: float
    errors: dict[str, float] = field(default_factory=dict)
    aborted: bool = False
    message: str = ""
    breakdown_history: list = field(default_factory=list)  # one per evaluation


def evaluate_solution(state: CarriedState, bundle: NetworkBundle,
                      op: SpectralOperator, dt: float, x: np.ndarray):
    """Reconstructed u at the node times plus (u, grad u) at the subinterval
    end, from the carried state and the freshly trained bundle."""
    x = np.asarray(x, dtype=float)
    st = state.jets(x)
    nod = bundle_nodal_jets(bundle, x)
    if state.kind == Kind.HEAT:
        u_nodes = st.u_value[:, None] + dt * (nod.value @ op.s1.T)
        u_end = st.u_value + dt * (nod.value @ op.w_end)
        grad_end = st.u_grad + dt * (nod.grad @ op.w_end)
    else:
        tau = dt * (op.rule.nodes + 1.0) / 2.0
        u_nodes = (st.u_value[:, None] + st.v_value[:, None] * tau[None, :]
                   + dt * dt * (nod.value @ op.s2.T))
        u_end = st.u_value + dt * st.v_value + dt * dt * (nod.value @ op.e_end)
        grad_end = st.u_grad + dt * st.v_grad + dt * dt * (nod.grad @ op.e_end)
    return u_nodes, u_end, grad_end


def _solution_errors(spec: ProblemSpec, case: ManufacturedCase,
                     state: CarriedState, bundle: NetworkBundle,
                     op: SpectralOperator, dt: float, x: np.ndarray) -> dict[str, float]:
    t0 = state.t_start
    times = map_nodes(op.rule, t0, t0 + dt)
    u_nodes, u_end, grad_end = evaluate_solution(state, bundle, op, dt, x)
    errors = {}
    for j, t in enumerate(times):
        errors[f"u_l2_node{j}"] = l2_relative_error(case.u.value(x, t), u_nodes[:, j])
    t_end = t0 + dt
    errors["u_l2_end"] = l2_relative_error(case.u.value(x, t_end), u_end)
    g_exact = case.u.grad(x, t_end)
    for a, name in enumerate(("ux", "uy", "uz")):
        errors[f"{name}_l2_end"] = l2_relative_error(g_exact[:, a], grad_end[:, a])
    return errors


# ---------------------------------------------------------------------------
# drivers


def build_points(spec: ProblemSpec, config: TrainConfig) -> PointSet:
    return geometry.build_point_set(
        spec.domain, config.n_interior, config.n_boundary, spec.tag_rule,
        strategy=config.strategy, seed=config.seed)


def _warm_output_bias(bundle: NetworkBundle, ubar: np.ndarray) -> None:
    """Start each sub-network's output at the mean of its node's known
    Dirichlet rate data.  The targets span several orders of magnitude
    across cases, and a zero-centered start wastes most of a fixed Adam
    budget just reaching the right scale."""
    if ubar.shape[0] == 0:
        return
    means = ubar.mean(axis=0)
    for j, net in enumerate(bundle.nets):
        net.biases[-1][0] = means[j]


def test_points(spec: ProblemSpec, config: TrainConfig) -> np.ndarray:
    """Fresh interior points (never the training set) for error tables."""
    return geometry.sample_interior(spec.domain, config.n_test, strategy="halton",
                                    seed=config.seed + _TEST_SEED_OFFSET)


def solve_subinterval(
    spec: ProblemSpec,
    state: CarriedState,
    t_end: float,
    config: TrainConfig,
    case: Optional[ManufacturedCase] = None,
    points: Optional[PointSet] = None,
    init: Optional[NetworkBundle] = None,
) -> tuple[NetworkBundle, TrainReport]:
    """Train one bundle on [state.t_start, t_end] and report errors."""
    dt = t_end - state.t_start
    if dt <= 0:
        raise ValueError(f"empty subinterval: t_end {t_end} <= t_start {state.t_start}")
    lo, hi = spec.time_interval
    if t_end > hi + 1e-9 or state.t_start < lo - 1e-9:
        raise ValueError(f"subinterval [{state.t_start}, {t_end}] outside {spec.time_interval}")
    tic = time.perf_counter()
    if points is None:
        points = build_points(spec, config)
    op = spectral_operator(config.p)
    loss = SinnLoss(spec, op, points, state.jets, dt, state.t_start)
    arch = (3, *config.hidden, 1)
    if init is not None:
        bundle = init
    else:
        bundle = init_bundle(arch, config.activation, config.p, config.seed)
        _warm_output_bias(bundle, loss.ubar)
    breakdowns: list[LossBreakdown] = []

    def loss_and_grad(theta):
        params_load(bundle, theta)
        breakdown, grad = loss.loss_and_grad(bundle)
        breakdowns.append(breakdown)
        return breakdown.total, grad

    result = optimize(loss_and_grad, params_flatten(bundle), config)
    params_load(bundle, result.params)
    final = loss.breakdown(bundle)
    errors = {}
    if case is not None:
        errors = _solution_errors(spec, case, state, bundle, op, dt,
                                  test_points(spec, config))
    report = TrainReport(loss_history=result.history, final=final,
                         wall_clock=time.perf_counter() - tic, errors=errors,
                         aborted=result.aborted, message=result.message,
                         breakdown_history=breakdowns)
    return bundle, report


def march(
    spec: ProblemSpec,
    config: TrainConfig,
    n_steps: int,
    case: Optional[ManufacturedCase] = None,
    checkpoint_dir=None,
) -> tuple[CarriedState, list[TrainReport]]:
    """Solve the full time interval as n_steps equal subintervals.

    Each step trains a fresh bundle (seeded by run seed and step index,
    unless warm-starting), then folds it into the carried state.  Per-step
    errors are measured at the collocation points at the step's end time.
    """
    t_lo, t_hi = spec.time_interval
    dt = (t_hi - t_lo) / n_steps
    points = build_points(spec, config)
    state = CarriedState.initial(spec)
    op = spectral_operator(config.p)
    reports: list[TrainReport] = []
    bundle = None
    for step in range(n_steps):
        step_config = replace(config, seed=config.seed + 101 * step)
        t_end = t_lo + dt * (step + 1)
        init = bundle if (config.warm_start and bundle is not None) else None
        bundle, report = solve_subinterval(spec, state, t_end, step_config,
                                           case=None, points=points, init=init)
        if case is not None:
            xi = points.interior
            u_nodes, u_end, grad_end = evaluate_solution(state, bundle, op, dt, xi)
            report.errors["u_l2_end"] = l2_relative_error(case.u.value(xi, t_end), u_end)
            g_exact = case.u.grad(xi, t_end)
            for a, name in enumerate(("ux", "uy", "uz")):
                report.errors[f"{name}_l2_end"] = l2_relative_error(
                    g_exact[:, a], grad_end[:, a])
        if checkpoint_dir is not None:
            netmod.save_checkpoint(f"{checkpoint_dir}/step_{step:03d}.ckpt", bundle)
        reports.append(report)
        state = advance_state(state, bundle, op, dt)
        if report.aborted:
            break
    return state, reports


def solve_inverse(
    spec: ProblemSpec,
    case: ManufacturedCase,
    config: TrainConfig,
    inv_config: InverseConfig,
) -> tuple[NetworkBundle, InverseParams, TrainReport]:
    """Jointly recover the networks and the material expansion.

    Flux-rate measurements are generated from the manufactured case on the
    overspecified subset of boundary points (optionally noise-contaminated)
    while Dirichlet rate data is known on the whole boundary.
    """
    if spec.kind != Kind.HEAT:
        raise ValueError("inverse identification supports heat problems")
    tic = time.perf_counter()
    t_start, t_end = spec.time_interval
    dt = t_end - t_start
    points = build_points(spec, config)
    op = spectral_operator(config.p)
    idx = select_overspecified(len(points.boundary_points), inv_config.fraction,
                               inv_config.seed)
    times = map_nodes(op.rule, t_start, t_end)
    xb = points.boundary_points[idx]
    nb = points.boundary_normals[idx]
    qdata = np.stack([spec.neumann_rate(xb, nb, t) for t in times], axis=1)
    qdata = add_noise(qdata, inv_config.noise, inv_config.seed + 1)

    basis = basis_enumerate(inv_config.order)
    state = CarriedState.initial(spec)
    loss = InverseLoss(spec, basis, op, points, state.jets, dt, t_start, idx, qdata)
    arch = (3, *config.hidden, 1)
    bundle = init_bundle(arch, config.activation, config.p, config.seed)
    _warm_output_bias(bundle, loss.ubar)
    params = InverseParams.initial(basis)
    n_net = bundle.n_params

    breakdowns: list[LossBreakdown] = []

    def loss_and_grad(theta):
        params_load(bundle, theta[:n_net])
        p = InverseParams.from_flat(theta[n_net:], basis)
        breakdown, net_grad, alpha_grad, lam_grad = loss.loss_and_grad(bundle, p)
        breakdowns.append(breakdown)
        return breakdown.total, np.concatenate([net_grad, alpha_grad, lam_grad])

    theta0 = np.concatenate([params_flatten(bundle), params.flatten()])
    result = optimize(loss_and_grad, theta0, config)
    params_load(bundle, result.params[:n_net])
    params = InverseParams.from_flat(result.params[n_net:], basis)
    final = loss.breakdown(bundle, params)

    # recovered-field accuracy on a held-out interior grid
    from .inverse import basis_eval
    x_eval = test_points(spec, config)
    d_hat, _ = basis_eval(basis, params.alpha, x_eval)
    kappa_hat = params.lambda1 * d_hat
    rhoc_hat = params.lambda2 * d_hat
    kappa_true = spec.kappa.value(x_eval)
    rhoc_true = spec.rho_c.value(x_eval)
    errors = {
        "kappa_max_rel": float(np.max(np.abs((kappa_hat - kappa_true) / kappa_true))),
        "kappa_l2": l2_relative_error(kappa_true, kappa_hat),
        "rhoc_max_rel": float(np.max(np.abs((rhoc_hat - rhoc_true) / rhoc_true))),
        "rhoc_l2": l2_relative_error(rhoc_true, rhoc_hat),
    }
    report = TrainReport(loss_history=result.history, final=final,
                         wall_clock=time.perf_counter() - tic, errors=errors,
                         aborted=result.aborted, message=result.message,
                         breakdown_history=breakdowns)
    return bundle, params, report


def solve_pinn(
    spec: ProblemSpec,
    config: TrainConfig,
    case: Optional[ManufacturedCase] = None,
    n_time_samples: int = 5,
) -> tuple[netmod.Mlp, TrainReport]:
    """Train the baseline space-time network on the same point budget."""
    tic = time.perf_counter()
    points = build_points(spec, config)
    t_start, t_end = spec.time_interval
    samples = pinn_time_samples(t_end, n_time_samples, t_start)
    loss = PinnLoss(spec, points, samples, t_start)
    arch = (4, *config.hidden, 1)
    mlp = netmod.init_network(arch, config.activation, config.seed)
    if loss.ubar and len(loss.ubar[0]):
        # matching data-informed start: mean of the Dirichlet solution data
        mlp.biases[-1][0] = float(np.mean(np.concatenate(loss.ubar)))
    breakdowns: list[LossBreakdown] = []

    def loss_and_grad(theta):
        params_load(mlp, theta)
        breakdown, grad = loss.loss_and_grad(mlp)
        breakdowns.append(breakdown)
        return breakdown.total, grad

    result = optimize(loss_and_grad, params_flatten(mlp), config)
    params_load(mlp, result.params)
    final = loss.breakdown(mlp)
    errors = {}
    if case is not None:
        x = test_points(spec, config)
        xt = np.concatenate([x, np.full((len(x), 1), t_end)], axis=1)
        jets = netmod.forward_jet_batch(mlp, xt)
        errors["u_l2_end"] = l2_relative_error(case.u.value(x, t_end), jets.value)
        g_exact = case.u.grad(x, t_end)
        for a, name in enumerate(("ux", "uy", "uz")):
            errors[f"{name}_l2_end"] = l2_relative_error(g_exact[:, a], jets.grad[:, a])
    report = TrainReport(loss_history=result.history, final=final,
                         wall_clock=time.perf_counter() - tic, errors=errors,
                         aborted=result.aborted, message=result.message,
                         breakdown_history=breakdowns)
    return mlp, report
