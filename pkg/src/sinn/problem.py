"""Dynamic PDE instances and the library of manufactured benchmark cases.

Heat problems solve ``rho*c * u_t - div(kappa * grad u) = f`` with mixed
Dirichlet/Neumann data and flux convention ``q = -kappa * du/dn``; wave
problems solve ``u_tt - w^2 * lap u + N(u) = f`` with flux ``q = +du/dn``.
Each builtin case pairs a :class:`ProblemSpec` with a
:class:`ManufacturedCase` whose source term was derived by hand from the
fabricated solution; :func:`verify_manufactured` re-checks that algebra
numerically before any training run trusts it.

All field callables are vectorized: they take an (N, 3) point array and a
scalar time and return (N,) values or (N, 3) gradients.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import geometry
from .geometry import DIRICHLET, NEUMANN, Box, Cylinder, Domain


class Kind(str, Enum):
    HEAT = "heat"
    WAVE = "wave"


# ---------------------------------------------------------------------------
# coefficient fields


@dataclass(frozen=True)
class ConstantCoefficient:
    c: float

    def value(self, x: np.ndarray) -> np.ndarray:
        return np.full(len(x), self.c)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return np.zeros((len(x), 3))


@dataclass(frozen=True)
class SpatialCoefficient:
    """base * d(x) with analytic d and grad d (functionally graded materials)."""

    base: float
    d: Callable[[np.ndarray], np.ndarray]
    grad_d: Callable[[np.ndarray], np.ndarray]

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.base * self.d(x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.base * self.grad_d(x)


@dataclass(frozen=True)
class AffineCoefficient:
    """Temperature-dependent conductivity kappa(u) = a*u + b."""

    a: float
    b: float

    def value_of_u(self, u: np.ndarray) -> np.ndarray:
        return self.a * u + self.b


CoefficientField = ConstantCoefficient | SpatialCoefficient | AffineCoefficient


# ---------------------------------------------------------------------------
# problem and manufactured-solution containers


@dataclass(frozen=True)
class TimeSlice:
    """One time-derivative order of a space-time field, with spatial jets."""

    value: Callable[[np.ndarray, float], np.ndarray]
    grad: Callable[[np.ndarray, float], np.ndarray]
    lap: Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ManufacturedCase:
    """Fabricated exact solution with the spatial jets of u, u_t (and u_tt)."""

    name: str
    u: TimeSlice
    ut: TimeSlice
    utt: Optional[TimeSlice] = None


@dataclass(frozen=True)
class ProblemSpec:
    kind: Kind
    domain: Domain
    time_interval: tuple[float, float]
    tag_rule: list
    kappa: CoefficientField
    source: Callable[[np.ndarray, float], np.ndarray]
    rho_c: Optional[CoefficientField] = None          # heat only
    wave_speed_sq: Optional[float] = None             # wave only
    nonlinearity: Optional[tuple[Callable, Callable]] = None  # (N(u), N'(u))
    u0: Optional[TimeSlice] = None        # initial data as jets of x (t ignored)
    v0: Optional[TimeSlice] = None        # wave initial velocity
    dirichlet: Optional[Callable] = None          # ubar(X, t)
    dirichlet_rate: Optional[Callable] = None     # Ubar: ubar_t (heat) / ubar_tt (wave)
    neumann: Optional[Callable] = None            # qbar(X, normals, t)
    neumann_rate: Optional[Callable] = None       # Qbar(X, normals, t)

    def __post_init__(self):
        if self.kind == Kind.HEAT:
            if self.rho_c is None:
                raise ValueError("heat problems need a rho*c coefficient")
            if self.v0 is not None:
                raise ValueError("heat problems carry no initial velocity")
        else:
            if self.wave_speed_sq is None:
                raise ValueError("wave problems need the squared wave speed")
            if self.v0 is None:
                raise ValueError("wave problems need initial velocity data")


def bc_data_derivatives(spec: ProblemSpec, x: np.ndarray, normals, t: float):
    """(Ubar, Qbar) at time t: the transformed boundary data for the rate
    variable (first time derivatives for heat, second for wave)."""
    if spec.dirichlet_rate is None or spec.neumann_rate is None:
        raise ValueError("spec lacks boundary-rate data (custom spec incomplete)")
    x = np.asarray(x, dtype=float)
    ubar = spec.dirichlet_rate(x, t)
    qbar = spec.neumann_rate(x, np.asarray(normals, dtype=float), t)
    return ubar, qbar


# ---------------------------------------------------------------------------
# separable-case factory: u(x, t) = T(t) * phi(x)


def _slice_from(phi, grad_phi, lap_phi, tf):
    return TimeSlice(
        value=lambda x, t, tf=tf: tf(t) * phi(x),
        grad=lambda x, t, tf=tf: tf(t) * grad_phi(x),
        lap=lambda x, t, tf=tf: tf(t) * lap_phi(x),
    )


def _separable_case(name, tfuncs, phi, grad_phi, lap_phi, wave: bool) -> ManufacturedCase:
    t0, t1, t2 = tfuncs
    return ManufacturedCase(
        name=name,
        u=_slice_from(phi, grad_phi, lap_phi, t0),
        ut=_slice_from(phi, grad_phi, lap_phi, t1),
        utt=_slice_from(phi, grad_phi, lap_phi, t2) if wave else None,
    )


def _fixed_time_jets(ts: TimeSlice, t: float) -> TimeSlice:
    return TimeSlice(
        value=lambda x, _t=0.0, ts=ts, t=t: ts.value(x, t),
        grad=lambda x, _t=0.0, ts=ts, t=t: ts.grad(x, t),
        lap=lambda x, _t=0.0, ts=ts, t=t: ts.lap(x, t),
    )


def _heat_bc_data(case: ManufacturedCase, kappa: CoefficientField):
    """Exact ubar/qbar and their first time derivatives for a heat case.

    For temperature-dependent conductivity the measured flux is
    q = -kappa(u) du/dn, so its time derivative picks up the product rule
    through kappa(u).
    """
    dirichlet = case.u.value
    dirichlet_rate = case.ut.value

    if isinstance(kappa, AffineCoefficient):
        def neumann(x, n, t):
            return -(kappa.value_of_u(case.u.value(x, t))) * (case.u.grad(x, t) * n).sum(axis=1)

        def neumann_rate(x, n, t):
            du_dn = (case.u.grad(x, t) * n).sum(axis=1)
            dut_dn = (case.ut.grad(x, t) * n).sum(axis=1)
            u = case.u.value(x, t)
            return -(kappa.a * case.ut.value(x, t) * du_dn
                     + kappa.value_of_u(u) * dut_dn)
    else:
        def neumann(x, n, t):
            return -kappa.value(x) * (case.u.grad(x, t) * n).sum(axis=1)

        def neumann_rate(x, n, t):
            return -kappa.value(x) * (case.ut.grad(x, t) * n).sum(axis=1)

    return dirichlet, dirichlet_rate, neumann, neumann_rate


def _wave_bc_data(case: ManufacturedCase):
    """Wave flux convention is q = +du/dn; rate data carries u_tt."""
    dirichlet = case.u.value
    dirichlet_rate = case.utt.value

    def neumann(x, n, t):
        return (case.u.grad(x, t) * n).sum(axis=1)

    def neumann_rate(x, n, t):
        return (case.utt.grad(x, t) * n).sum(axis=1)

    return dirichlet, dirichlet_rate, neumann, neumann_rate


def _finish_heat_spec(name, domain, interval, rule, rho_c, kappa, case, source):
    dirichlet, dirichlet_rate, neumann, neumann_rate = _heat_bc_data(case, kappa)
    return ProblemSpec(
        kind=Kind.HEAT, domain=domain, time_interval=interval, tag_rule=rule,
        kappa=kappa, rho_c=rho_c, source=source,
        u0=_fixed_time_jets(case.u, interval[0]),
        dirichlet=dirichlet, dirichlet_rate=dirichlet_rate,
        neumann=neumann, neumann_rate=neumann_rate,
    )


def _finish_wave_spec(name, domain, interval, rule, w2, nonlin, case, source):
    dirichlet, dirichlet_rate, neumann, neumann_rate = _wave_bc_data(case)
    return ProblemSpec(
        kind=Kind.WAVE, domain=domain, time_interval=interval, tag_rule=rule,
        kappa=ConstantCoefficient(1.0), wave_speed_sq=w2, nonlinearity=nonlin,
        source=source,
        u0=_fixed_time_jets(case.u, interval[0]),
        v0=_fixed_time_jets(case.ut, interval[0]),
        dirichlet=dirichlet, dirichlet_rate=dirichlet_rate,
        neumann=neumann, neumann_rate=neumann_rate,
    )


# ---------------------------------------------------------------------------
# builtin cases


def _case_heat_fgm():
    # rho*c = 2.2 d, kappa = 1.3 d, d = 0.5cos(2x) + 0.2sin(3y) + 0.2cos(z) + 1,
    # u = 30 (sin t + 0.5) (x + 2y + 3z)^2 on the unit box over [0, 1]
    def d(x):
        return 0.5 * np.cos(2 * x[:, 0]) + 0.2 * np.sin(3 * x[:, 1]) + 0.2 * np.cos(x[:, 2]) + 1.0

    def grad_d(x):
        return np.stack([
            -np.sin(2 * x[:, 0]),
            0.6 * np.cos(3 * x[:, 1]),
            -0.2 * np.sin(x[:, 2]),
        ], axis=1)

    def phi(x):
        return (x[:, 0] + 2 * x[:, 1] + 3 * x[:, 2]) ** 2

    def grad_phi(x):
        g = 2.0 * (x[:, 0] + 2 * x[:, 1] + 3 * x[:, 2])
        return np.stack([g, 2 * g, 3 * g], axis=1)

    def lap_phi(x):
        return np.full(len(x), 28.0)  # 2 * (1 + 4 + 9)

    tfuncs = (lambda t: 30 * (np.sin(t) + 0.5),
              lambda t: 30 * np.cos(t),
              lambda t: -30 * np.sin(t))
    case = _separable_case("heat_fgm", tfuncs, phi, grad_phi, lap_phi, wave=False)
    rho_c = SpatialCoefficient(2.2, d, grad_d)
    kappa = SpatialCoefficient(1.3, d, grad_d)

    def source(x, t):
        return (rho_c.value(x) * case.ut.value(x, t)
                - (kappa.gradient(x) * case.u.grad(x, t)).sum(axis=1)
                - kappa.value(x) * case.u.lap(x, t))

    domain = Box((0, 0, 0), (1, 1, 1))
    rule = geometry.rule_threshold(0, 0.25, NEUMANN, DIRICHLET)
    return _finish_heat_spec("heat_fgm", domain, (0.0, 1.0), rule, rho_c, kappa,
                             case, source), case


def _nonlinear_heat(name, a, b, rho_c_const, tfuncs, phi, grad_phi, lap_phi, interval):
    case = _separable_case(name, tfuncs, phi, grad_phi, lap_phi, wave=False)
    kappa = AffineCoefficient(a, b)
    rho_c = ConstantCoefficient(rho_c_const)

    def source(x, t):
        u = case.u.value(x, t)
        gu = case.u.grad(x, t)
        return (rho_c_const * case.ut.value(x, t)
                - a * (gu * gu).sum(axis=1)
                - (a * u + b) * case.u.lap(x, t))

    domain = Box((0, 0, 0), (1, 1, 1))
    rule = geometry.rule_threshold(2, 0.5, NEUMANN, DIRICHLET)
    return _finish_heat_spec(name, domain, interval, rule, rho_c, kappa,
                             case, source), case


def _case_heat_nl_a():
    # 150 u_t - div[(0.05u + 50) grad u] = f, u = 30 (cos t + 1.2)(sin(x+y) + e^{y+2z})
    def phi(x):
        return np.sin(x[:, 0] + x[:, 1]) + np.exp(x[:, 1] + 2 * x[:, 2])

    def grad_phi(x):
        c = np.cos(x[:, 0] + x[:, 1])
        e = np.exp(x[:, 1] + 2 * x[:, 2])
        return np.stack([c, c + e, 2 * e], axis=1)

    def lap_phi(x):
        return -2 * np.sin(x[:, 0] + x[:, 1]) + 5 * np.exp(x[:, 1] + 2 * x[:, 2])

    tfuncs = (lambda t: 30 * (np.cos(t) + 1.2),
              lambda t: -30 * np.sin(t),
              lambda t: -30 * np.cos(t))
    return _nonlinear_heat("heat_nl_a", 0.05, 50.0, 150.0, tfuncs,
                           phi, grad_phi, lap_phi, (0.0, 1.0))


def _case_heat_nl_b():
    # 150 u_t - div[(0.35u + 20) grad u] = f, u = 50 (cos t + 1.2) e^{0.3x+0.9y+0.2z}
    k = np.array([0.3, 0.9, 0.2])

    def phi(x):
        return np.exp(x @ k)

    def grad_phi(x):
        return np.exp(x @ k)[:, None] * k

    def lap_phi(x):
        return (k @ k) * np.exp(x @ k)

    tfuncs = (lambda t: 50 * (np.cos(t) + 1.2),
              lambda t: -50 * np.sin(t),
              lambda t: -50 * np.cos(t))
    return _nonlinear_heat("heat_nl_b", 0.35, 20.0, 150.0, tfuncs,
                           phi, grad_phi, lap_phi, (0.0, 2.0))


def _case_wave_linear():
    # u_tt - 250000 lap u = f, u = sin(2t) e^{x+y+z}, cylinder d=0.30 h=0.90
    w2 = 250000.0

    def phi(x):
        return np.exp(x.sum(axis=1))

    def grad_phi(x):
        e = np.exp(x.sum(axis=1))
        return np.stack([e, e, e], axis=1)

    def lap_phi(x):
        return 3 * np.exp(x.sum(axis=1))

    tfuncs = (lambda t: np.sin(2 * t),
              lambda t: 2 * np.cos(2 * t),
              lambda t: -4 * np.sin(2 * t))
    case = _separable_case("wave_linear", tfuncs, phi, grad_phi, lap_phi, wave=True)

    def source(x, t):
        return case.utt.value(x, t) - w2 * case.u.lap(x, t)

    domain = Cylinder((0.0, 0.0, 0.0), 0.15, 0.90)
    rule = geometry.rule_cylinder_caps(domain, NEUMANN, DIRICHLET)
    return _finish_wave_spec("wave_linear", domain, (0.0, 1.0), rule, w2, None,
                             case, source), case


def _case_wave_sine_gordon():
    # u_tt - lap u + sin(u) = f, u = e^{sin t} [(2x + y)^2 + e^{y+2z}],
    # box with the reference aspect 1.84 x 0.50 x 0.66, Dirichlet on y <= 0.28
    def phi(x):
        return (2 * x[:, 0] + x[:, 1]) ** 2 + np.exp(x[:, 1] + 2 * x[:, 2])

    def grad_phi(x):
        g = 2 * x[:, 0] + x[:, 1]
        e = np.exp(x[:, 1] + 2 * x[:, 2])
        return np.stack([4 * g, 2 * g + e, 2 * e], axis=1)

    def lap_phi(x):
        return 10.0 + 5.0 * np.exp(x[:, 1] + 2 * x[:, 2])

    tfuncs = (lambda t: np.exp(np.sin(t)),
              lambda t: np.cos(t) * np.exp(np.sin(t)),
              lambda t: (np.cos(t) ** 2 - np.sin(t)) * np.exp(np.sin(t)))
    case = _separable_case("wave_sine_gordon", tfuncs, phi, grad_phi, lap_phi, wave=True)
    nonlin = (np.sin, np.cos)

    def source(x, t):
        return (case.utt.value(x, t) - case.u.lap(x, t)
                + np.sin(case.u.value(x, t)))

    domain = Box((0, 0, 0), (1.84, 0.50, 0.66))
    rule = geometry.rule_threshold(1, 0.28, DIRICHLET, NEUMANN)
    return _finish_wave_spec("wave_sine_gordon", domain, (0.0, 1.0), rule, 1.0,
                             nonlin, case, source), case


def _fgm_heat_case(name, rc0, k0, d, grad_d, tfuncs, phi, grad_phi, lap_phi,
                   interval, rule):
    case = _separable_case(name, tfuncs, phi, grad_phi, lap_phi, wave=False)
    rho_c = SpatialCoefficient(rc0, d, grad_d)
    kappa = SpatialCoefficient(k0, d, grad_d)

    def source(x, t):
        return (rho_c.value(x) * case.ut.value(x, t)
                - (kappa.gradient(x) * case.u.grad(x, t)).sum(axis=1)
                - kappa.value(x) * case.u.lap(x, t))

    domain = Box((0, 0, 0), (1, 1, 1))
    return _finish_heat_spec(name, domain, interval, rule, rho_c, kappa,
                             case, source), case


def _case_inverse_fgm():
    # 36 d u_t - div(15 d grad u) = f, d = e^{0.1x} + sin(y) + z^2,
    # u = 100 (sin 2t + 1.6) e^{0.2x+0.7y+0.1z}; Dirichlet everywhere
    def d(x):
        return np.exp(0.1 * x[:, 0]) + np.sin(x[:, 1]) + x[:, 2] ** 2

    def grad_d(x):
        return np.stack([
            0.1 * np.exp(0.1 * x[:, 0]),
            np.cos(x[:, 1]),
            2 * x[:, 2],
        ], axis=1)

    k = np.array([0.2, 0.7, 0.1])

    def phi(x):
        return np.exp(x @ k)

    def grad_phi(x):
        return np.exp(x @ k)[:, None] * k

    def lap_phi(x):
        return (k @ k) * np.exp(x @ k)

    tfuncs = (lambda t: 100 * (np.sin(2 * t) + 1.6),
              lambda t: 200 * np.cos(2 * t),
              lambda t: -400 * np.sin(2 * t))
    return _fgm_heat_case("inverse_fgm", 36.0, 15.0, d, grad_d, tfuncs,
                          phi, grad_phi, lap_phi, (0.0, 1.0),
                          geometry.rule_all(DIRICHLET))


def _case_longtime_fgm():
    # rho*c = 2.5 d, kappa = 1.8 d, d = e^{0.6x+0.1y+0.3z},
    # u = 25 (sin t + 1.5) e^{0.3x+0.5y+0.2z} over [0, 100]
    kd = np.array([0.6, 0.1, 0.3])
    ku = np.array([0.3, 0.5, 0.2])

    def d(x):
        return np.exp(x @ kd)

    def grad_d(x):
        return np.exp(x @ kd)[:, None] * kd

    def phi(x):
        return np.exp(x @ ku)

    def grad_phi(x):
        return np.exp(x @ ku)[:, None] * ku

    def lap_phi(x):
        return (ku @ ku) * np.exp(x @ ku)

    tfuncs = (lambda t: 25 * (np.sin(t) + 1.5),
              lambda t: 25 * np.cos(t),
              lambda t: -25 * np.sin(t))
    rule = geometry.rule_threshold(2, 0.65, DIRICHLET, NEUMANN)
    return _fgm_heat_case("longtime_fgm", 2.5, 1.8, d, grad_d, tfuncs,
                          phi, grad_phi, lap_phi, (0.0, 100.0), rule)


_BUILTIN = {
    "heat_fgm": _case_heat_fgm,
    "heat_nl_a": _case_heat_nl_a,
    "heat_nl_b": _case_heat_nl_b,
    "wave_linear": _case_wave_linear,
    "wave_sine_gordon": _case_wave_sine_gordon,
    "inverse_fgm": _case_inverse_fgm,
    "longtime_fgm": _case_longtime_fgm,
}

BUILTIN_NAMES = tuple(_BUILTIN)


def builtin_case(name: str) -> tuple[ProblemSpec, ManufacturedCase]:
    """One of the benchmark cases by name; raises on unknown names."""
    try:
        factory = _BUILTIN[name]
    except KeyError:
        raise ValueError(f"unknown case {name!r}; choose from {BUILTIN_NAMES}") from None
    return factory()


def quadratic_inverse_case() -> tuple[ProblemSpec, ManufacturedCase]:
    """Synthetic identifiability benchmark: the inverse-problem layout of
    ``inverse_fgm`` but with a quadratic material function, so the exact
    d(x) lies inside every polynomial basis of order >= 2."""
    def d(x):
        return (1.0 + 0.4 * x[:, 0] + 0.3 * x[:, 1] + 0.2 * x[:, 2] ** 2
                + 0.1 * x[:, 0] * x[:, 1])

    def grad_d(x):
        return np.stack([
            0.4 + 0.1 * x[:, 1],
            0.3 + 0.1 * x[:, 0],
            0.4 * x[:, 2],
        ], axis=1)

    k = np.array([0.2, 0.7, 0.1])

    def phi(x):
        return np.exp(x @ k)

    def grad_phi(x):
        return np.exp(x @ k)[:, None] * k

    def lap_phi(x):
        return (k @ k) * np.exp(x @ k)

    tfuncs = (lambda t: 100 * (np.sin(2 * t) + 1.6),
              lambda t: 200 * np.cos(2 * t),
              lambda t: -400 * np.sin(2 * t))
    return _fgm_heat_case("inverse_quadratic", 36.0, 15.0, d, grad_d, tfuncs,
                          phi, grad_phi, lap_phi, (0.0, 1.0),
                          geometry.rule_all(DIRICHLET))


# ---------------------------------------------------------------------------
# manufactured-solution verification


_FD_H = 1e-5


def _fd_ut(u_of_t, t: float, h: float = _FD_H) -> np.ndarray:
    """Fourth-order central first time derivative."""
    return (-u_of_t(t + 2 * h) + 8 * u_of_t(t + h)
            - 8 * u_of_t(t - h) + u_of_t(t - 2 * h)) / (12 * h)


def _fd_utt(u_of_t, t: float, h: float = _FD_H) -> np.ndarray:
    """Fourth-order central second time derivative."""
    return (-u_of_t(t + 2 * h) + 16 * u_of_t(t + h) - 30 * u_of_t(t)
            + 16 * u_of_t(t - h) - u_of_t(t - 2 * h)) / (12 * h * h)


def pde_residual_exact(spec: ProblemSpec, case: ManufacturedCase,
                       x: np.ndarray, t: float) -> np.ndarray:
    """Governing-equation residual of the fabricated solution at (x, t),
    using analytic spatial jets and finite-difference time derivatives."""
    x = np.asarray(x, dtype=float)
    u_of_t = lambda tau: case.u.value(x, tau)
    if spec.kind == Kind.HEAT:
        ut = _fd_ut(u_of_t, t)
        gu = case.u.grad(x, t)
        lap = case.u.lap(x, t)
        if isinstance(spec.kappa, AffineCoefficient):
            a, b = spec.kappa.a, spec.kappa.b
            u = case.u.value(x, t)
            div_term = a * (gu * gu).sum(axis=1) + (a * u + b) * lap
        else:
            div_term = (spec.kappa.gradient(x) * gu).sum(axis=1) + spec.kappa.value(x) * lap
        return spec.rho_c.value(x) * ut - div_term - spec.source(x, t)
    utt = _fd_utt(u_of_t, t)
    lap = case.u.lap(x, t)
    res = utt - spec.wave_speed_sq * lap - spec.source(x, t)
    if spec.nonlinearity is not None:
        res = res + spec.nonlinearity[0](case.u.value(x, t))
    return res


def verify_manufactured(spec: ProblemSpec, case: ManufacturedCase,
                        n_samples: int = 200, seed: int = 0) -> float:
    """Max |PDE residual| of the fabricated solution over random space-time
    samples.  Any hand-derivation mistake in the source term shows up here
    as an O(1) residual."""
    if n_samples < 10:
        raise ValueError("need at least 10 space-time samples")
    pts = geometry.sample_interior(spec.domain, n_samples, strategy="halton", seed=seed)
    rng = np.random.default_rng(seed)
    t0, t1 = spec.time_interval
    times = rng.uniform(t0, t1, size=max(8, n_samples // 25))
    worst = 0.0
    for t in times:
        res = pde_residual_exact(spec, case, pts, float(t))
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


def source_scale(spec: ProblemSpec, n_samples: int = 200, seed: int = 0) -> float:
    """Max |f| over random samples, used to scale residual tolerances."""
    pts = geometry.sample_interior(spec.domain, n_samples, strategy="halton", seed=seed)
    rng = np.random.default_rng(seed)
    t0, t1 = spec.time_interval
    times = rng.uniform(t0, t1, size=8)
    return max(float(np.max(np.abs(spec.source(pts, float(t))))) for t in times)
