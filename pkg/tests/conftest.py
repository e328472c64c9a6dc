"""Shared fixtures: small-scale problem specs with O(1) magnitudes.

The finite-difference gradient oracles need losses whose values don't
drown the h=1e-6 central differences in roundoff, so these fixtures mirror
the structure of the benchmark cases (spatially graded conductivity, mixed
boundary tagging, nonlinearity) at unit amplitude.
"""

import numpy as np
import pytest

from sinn import geometry as geo
from sinn import problem
from sinn.geometry import DIRICHLET, NEUMANN
from sinn.residual import StateJets


def state_fn_for(spec):
    """Initial-data jets provider (fresh problems, no marching history)."""
    if spec.kind == problem.Kind.WAVE:
        return lambda x: StateJets(
            spec.u0.value(x, 0.0), spec.u0.grad(x, 0.0), spec.u0.lap(x, 0.0),
            spec.v0.value(x, 0.0), spec.v0.grad(x, 0.0), spec.v0.lap(x, 0.0))
    return lambda x: StateJets(
        spec.u0.value(x, 0.0), spec.u0.grad(x, 0.0), spec.u0.lap(x, 0.0))


def nodal_jets_from_slice(ts, x, times):
    """Exact nodal jets of a time slice (oracle injection helper)."""
    from sinn.residual import NodalJets
    return NodalJets(
        value=np.stack([ts.value(x, t) for t in times], axis=1),
        grad=np.stack([ts.grad(x, t) for t in times], axis=2),
        lap=np.stack([ts.lap(x, t) for t in times], axis=1),
    )


@pytest.fixture
def unit_heat_fgm():
    """Graded-material heat problem with unit-amplitude solution."""

    def d(x):
        return 0.5 * np.cos(2 * x[:, 0]) + 0.2 * np.sin(3 * x[:, 1]) + 0.2 * np.cos(x[:, 2]) + 1.0

    def grad_d(x):
        return np.stack([-np.sin(2 * x[:, 0]), 0.6 * np.cos(3 * x[:, 1]),
                         -0.2 * np.sin(x[:, 2])], axis=1)

    def phi(x):
        return (x[:, 0] + 2 * x[:, 1] + 3 * x[:, 2]) ** 2 / 36.0

    def grad_phi(x):
        s = 2.0 * (x[:, 0] + 2 * x[:, 1] + 3 * x[:, 2]) / 36.0
        return np.stack([s, 2 * s, 3 * s], axis=1)

    def lap_phi(x):
        return np.full(len(x), 28.0 / 36.0)

    tfuncs = (lambda t: np.sin(t) + 0.5, lambda t: np.cos(t), lambda t: -np.sin(t))
    return problem._fgm_heat_case(
        "unit_heat_fgm", 2.2, 1.3, d, grad_d, tfuncs, phi, grad_phi, lap_phi,
        (0.0, 1.0), geo.rule_threshold(0, 0.25, NEUMANN, DIRICHLET))


@pytest.fixture
def unit_heat_affine():
    """Temperature-dependent-conductivity heat problem, unit amplitude."""

    def phi(x):
        return 0.1 * (np.sin(x[:, 0] + x[:, 1]) + np.exp(x[:, 1] + 2 * x[:, 2]))

    def grad_phi(x):
        c = np.cos(x[:, 0] + x[:, 1])
        e = np.exp(x[:, 1] + 2 * x[:, 2])
        return 0.1 * np.stack([c, c + e, 2 * e], axis=1)

    def lap_phi(x):
        return 0.1 * (-2 * np.sin(x[:, 0] + x[:, 1]) + 5 * np.exp(x[:, 1] + 2 * x[:, 2]))

    tfuncs = (lambda t: np.cos(t) + 1.2, lambda t: -np.sin(t), lambda t: -np.cos(t))
    case = problem._separable_case("unit_heat_affine", tfuncs, phi, grad_phi,
                                   lap_phi, wave=False)
    a, b, rc = 0.5, 2.0, 3.0

    def source(x, t):
        u = case.u.value(x, t)
        gu = case.u.grad(x, t)
        return (rc * case.ut.value(x, t) - a * (gu * gu).sum(axis=1)
                - (a * u + b) * case.u.lap(x, t))

    spec = problem._finish_heat_spec(
        "unit_heat_affine", geo.Box((0, 0, 0), (1, 1, 1)), (0.0, 1.0),
        geo.rule_threshold(2, 0.5, NEUMANN, DIRICHLET),
        problem.ConstantCoefficient(rc), problem.AffineCoefficient(a, b),
        case, source)
    return spec, case


@pytest.fixture
def unit_wave_sine_gordon():
    """Sine-Gordon wave problem with unit-amplitude solution."""

    def phi(x):
        return 0.05 * ((2 * x[:, 0] + x[:, 1]) ** 2 + np.exp(x[:, 1] + 2 * x[:, 2]))

    def grad_phi(x):
        s = 2 * x[:, 0] + x[:, 1]
        e = np.exp(x[:, 1] + 2 * x[:, 2])
        return 0.05 * np.stack([4 * s, 2 * s + e, 2 * e], axis=1)

    def lap_phi(x):
        return 0.05 * (10.0 + 5.0 * np.exp(x[:, 1] + 2 * x[:, 2]))

    tfuncs = (lambda t: np.exp(np.sin(t)),
              lambda t: np.cos(t) * np.exp(np.sin(t)),
              lambda t: (np.cos(t) ** 2 - np.sin(t)) * np.exp(np.sin(t)))
    case = problem._separable_case("unit_wave_sg", tfuncs, phi, grad_phi,
                                   lap_phi, wave=True)

    def source(x, t):
        return (case.utt.value(x, t) - case.u.lap(x, t)
                + np.sin(case.u.value(x, t)))

    spec = problem._finish_wave_spec(
        "unit_wave_sg", geo.Box((0, 0, 0), (1, 1, 1)), (0.0, 1.0),
        geo.rule_threshold(1, 0.28, DIRICHLET, NEUMANN), 1.0,
        (np.sin, np.cos), case, source)
    return spec, case


@pytest.fixture
def unit_inverse_quadratic():
    """Inverse-style heat problem: quadratic material field, unit-amplitude
    solution that is quadratic in time (so p >= 3 reconstruction is exact)."""

    def d(x):
        return (1.0 + 0.4 * x[:, 0] + 0.3 * x[:, 1] + 0.2 * x[:, 2] ** 2
                + 0.1 * x[:, 0] * x[:, 1])

    def grad_d(x):
        return np.stack([0.4 + 0.1 * x[:, 1], 0.3 + 0.1 * x[:, 0],
                         0.4 * x[:, 2]], axis=1)

    k = np.array([0.2, 0.7, 0.1])

    def phi(x):
        return 0.1 * np.exp(x @ k)

    def grad_phi(x):
        return 0.1 * np.exp(x @ k)[:, None] * k

    def lap_phi(x):
        return 0.1 * (k @ k) * np.exp(x @ k)

    tfuncs = (lambda t: t * t + t + 1.0, lambda t: 2 * t + 1.0,
              lambda t: 2.0 + 0.0 * t)
    return problem._fgm_heat_case(
        "unit_inverse_quadratic", 3.0, 2.0, d, grad_d, tfuncs, phi, grad_phi,
        lap_phi, (0.0, 1.0), geo.rule_all(DIRICHLET)), d


def fd_gradient_worst(loss_fn, grad, theta, set_theta, h=1e-6):
    """Worst disagreement between an analytic gradient and central FD;
    coordinates with |analytic| < 1e-8 are compared absolutely."""
    worst = 0.0
    for i in range(theta.size):
        tp = theta.copy()
        tp[i] += h
        set_theta(tp)
        lp = loss_fn()
        tm = theta.copy()
        tm[i] -= h
        set_theta(tm)
        lm = loss_fn()
        fd = (lp - lm) / (2 * h)
        a = grad[i]
        err = abs(fd - a) / abs(a) if abs(a) > 1e-8 else abs(fd - a)
        worst = max(worst, err)
    set_theta(theta)
    return worst
