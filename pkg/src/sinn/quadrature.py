"""Gauss-Legendre rules and spectral time-integration operators.

A :class:`GaussRule` holds the nodes/weights of a p-point Gauss-Legendre
quadrature on [-1, 1].  A :class:`SpectralOperator` holds the single and
double integration matrices S1 and S2 mapping nodal values of an integrand
to integrals of its Lagrange interpolant from the interval start to each
node, plus the end-of-interval weight rows.  The matrices depend only on p,
never on the subinterval width: integrating over a subinterval of width dt
is ``dt * S1 @ u`` (and ``dt**2 * S2 @ u`` for the nested double integral).

All antiderivatives are computed by exact coefficient algebra in the
Legendre basis (numpy.polynomial.legendre), never by numerical quadrature,
so S1/S2 are accurate to roundoff for every supported p.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg

MAX_NODES = 64

_NEWTON_TOL = 1e-14
_NEWTON_MAX_STEPS = 100


def legendre_eval(n: int, x: float) -> tuple[float, float]:
    """Evaluate P_n(x) and P_n'(x) by the three-term recurrence."""
    if n < 0:
        raise ValueError(f"degree must be >= 0, got {n}")
    if n == 0:
        return 1.0, 0.0
    p_prev, p = 1.0, x
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    # derivative from the stable endpoint-free identity
    if x == 1.0 or x == -1.0:
        dp = 0.5 * n * (n + 1) * (x ** (n + 1))
    else:
        dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


@dataclass(frozen=True)
class GaussRule:
    """p-point Gauss-Legendre rule on [-1, 1], nodes ascending."""

    p: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)


def gauss_rule(p: int) -> GaussRule:
    """Build the p-point Gauss-Legendre rule by per-root Newton iteration.

    Initial guesses are the standard Chebyshev-like approximations; each
    root is polished until |P_p| < 1e-14.  Weights are
    2 / ((1 - x^2) * P_p'(x)^2).
    """
    if not 1 <= p <= MAX_NODES:
        raise ValueError(f"node count must be in [1, {MAX_NODES}], got {p}")
    roots = np.empty(p)
    for i in range(1, p + 1):
        x = np.cos(np.pi * (i - 0.25) / (p + 0.5))
        for _ in range(_NEWTON_MAX_STEPS):
            val, deriv = legendre_eval(p, x)
            # Newton-step length |P/P'| measures the root error; the raw
            # |P| floor scales with P' * eps and is unreachable at high p
            if abs(val) <= _NEWTON_TOL * max(1.0, abs(deriv)):
                break
            x -= val / deriv
        else:
            raise RuntimeError(
                f"Newton iteration for Gauss-Legendre root {i}/{p} did not "
                f"converge below {_NEWTON_TOL}"
            )
        roots[i - 1] = x
    roots.sort()
    # enforce exact symmetry about 0 (roots come in +/- pairs)
    roots = 0.5 * (roots - roots[::-1])
    weights = np.empty(p)
    for k, x in enumerate(roots):
        _, deriv = legendre_eval(p, x)
        weights[k] = 2.0 / ((1.0 - x * x) * deriv * deriv)
    return GaussRule(p=p, nodes=roots, weights=weights)


def map_nodes(rule: GaussRule, t_start: float, t_end: float) -> np.ndarray:
    """Affinely map the rule's nodes into (t_start, t_end), ascending."""
    if not t_end > t_start:
        raise ValueError(f"need t_end > t_start, got [{t_start}, {t_end}]")
    return t_start + (t_end - t_start) * (rule.nodes + 1.0) / 2.0


@dataclass(frozen=True)
class SpectralOperator:
    """Integration matrices for one Gauss rule.

    s1[j, k] = (1/2) * int_{-1}^{xi_j} ell_k(xi) dxi
    s2[j, k] = (1/4) * int_{-1}^{xi_j} int_{-1}^{tau} ell_k(s) ds dtau
    w_end[k] = (1/2) * int_{-1}^{1} ell_k = weights[k] / 2
    e_end[k] = (1/4) * int_{-1}^{1} int_{-1}^{tau} ell_k

    where ell_k is the k-th Lagrange cardinal polynomial on the nodes.  The
    1/2 and 1/4 factors absorb the affine map so that on a subinterval of
    width dt the integrals are dt * s1 @ u and dt^2 * s2 @ u.
    """

    rule: GaussRule
    s1: np.ndarray
    s2: np.ndarray
    w_end: np.ndarray
    e_end: np.ndarray

    def __post_init__(self):
        for a in (self.s1, self.s2, self.w_end, self.e_end):
            a.setflags(write=False)

    @property
    def p(self) -> int:
        return self.rule.p


def _cardinal_legendre_coeffs(rule: GaussRule) -> np.ndarray:
    """Legendre-basis coefficients of the cardinal polynomials.

    Row k holds c with ell_k(xi) = sum_m c[m] P_m(xi).  Since ell_k has
    degree p-1, c[m] = (2m+1)/2 * w_k * P_m(xi_k) exactly (the projection
    integral has degree <= 2p-2, inside the rule's exactness range).
    """
    p = rule.p
    vander = npleg.legvander(rule.nodes, p - 1)  # vander[k, m] = P_m(xi_k)
    scale = (2.0 * np.arange(p) + 1.0) / 2.0
    return rule.weights[:, None] * vander * scale[None, :]


def build_spectral_operator(rule: GaussRule) -> SpectralOperator:
    """Assemble S1/S2 and the end-of-interval rows for a Gauss rule."""
    p = rule.p
    coeffs = _cardinal_legendre_coeffs(rule)
    s1 = np.empty((p, p))
    s2 = np.empty((p, p))
    e_end = np.empty(p)
    for k in range(p):
        c1 = npleg.legint(coeffs[k], m=1, lbnd=-1.0)
        c2 = npleg.legint(coeffs[k], m=2, lbnd=-1.0)
        s1[:, k] = 0.5 * npleg.legval(rule.nodes, c1)
        s2[:, k] = 0.25 * npleg.legval(rule.nodes, c2)
        e_end[k] = 0.25 * npleg.legval(1.0, c2)
    w_end = rule.weights / 2.0
    return SpectralOperator(rule=rule, s1=s1, s2=s2, w_end=w_end, e_end=e_end)


@lru_cache(maxsize=None)
def spectral_operator(p: int) -> SpectralOperator:
    """Cached operator for p nodes; repeated calls share one instance."""
    return build_spectral_operator(gauss_rule(p))


def _check_values(u: np.ndarray, p: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != p:
        raise ValueError(f"expected {p} nodal values, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("nodal values contain non-finite entries")
    return u


def integrate_single(op: SpectralOperator, dt: float, u: np.ndarray) -> np.ndarray:
    """Integral of the nodal interpolant from t_start to each node time.

    Exact whenever u samples a polynomial of degree <= p-1 in time.
    Accepts a p-vector or a (..., p) batch on the last axis.
    """
    if not dt > 0:
        raise ValueError(f"subinterval width must be positive, got {dt}")
    u = _check_values(u, op.p)
    return dt * (u @ op.s1.T)


def integrate_double(op: SpectralOperator, dt: float, u: np.ndarray) -> np.ndarray:
    """Nested double integral from t_start up to each node time."""
    if not dt > 0:
        raise ValueError(f"subinterval width must be positive, got {dt}")
    u = _check_values(u, op.p)
    return dt * dt * (u @ op.s2.T)


def end_values(op: SpectralOperator, dt: float, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(full single integral, full double integral) over the subinterval."""
    if not dt > 0:
        raise ValueError(f"subinterval width must be positive, got {dt}")
    u = _check_values(u, op.p)
    return dt * (u @ op.w_end), dt * dt * (u @ op.e_end)
