"""Polynomial parametrization of the unknown material function.

For inverse problems the spatially varying material function d(x) is
expanded in the complete trivariate monomial basis of order s, with
trainable coefficients alpha and two scale factors lambda1/lambda2 so the
network can approximate conductivity and heat capacity as
kappa_hat = lambda1 * d_hat and rho_c_hat = lambda2 * d_hat.  Only those
products are identifiable: scaling (lambda, alpha) -> (c*lambda, alpha/c)
leaves both fields unchanged, so recovery error is always judged on the
products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_ORDER = 6


@dataclass(frozen=True)
class PolyBasis:
    """Monomial exponent triples (i, j, k) for x^i y^j z^k, order <= s."""

    order: int
    terms: tuple[tuple[int, int, int], ...]

    @property
    def n_terms(self) -> int:
        return len(self.terms)


def basis_enumerate(s: int) -> PolyBasis:
    """All monomials of total degree <= s, in (degree, q, r) loop order;
    the count is (s+1)(s+2)(s+3)/6."""
    if not 0 <= s <= MAX_ORDER:
        raise ValueError(f"basis order must be in [0, {MAX_ORDER}], got {s}")
    terms = [
        (p - q - r, q, r)
        for p in range(s + 1)
        for q in range(p + 1)
        for r in range(p - q + 1)
    ]
    return PolyBasis(order=s, terms=tuple(terms))


def basis_design(basis: PolyBasis, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Design matrices: values (N, m) and gradients (N, 3, m) of each term."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    m = basis.n_terms
    vals = np.empty((n, m))
    grads = np.empty((n, 3, m))
    for c, (i, j, k) in enumerate(basis.terms):
        xi = x[:, 0] ** i
        yj = x[:, 1] ** j
        zk = x[:, 2] ** k
        vals[:, c] = xi * yj * zk
        grads[:, 0, c] = i * x[:, 0] ** (i - 1) * yj * zk if i > 0 else 0.0
        grads[:, 1, c] = j * xi * x[:, 1] ** (j - 1) * zk if j > 0 else 0.0
        grads[:, 2, c] = k * xi * yj * x[:, 2] ** (k - 1) if k > 0 else 0.0
    return vals, grads


def basis_eval(basis: PolyBasis, alpha: np.ndarray, x: np.ndarray):
    """(d_hat, grad d_hat) at the given points."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (basis.n_terms,):
        raise ValueError(f"expected {basis.n_terms} coefficients, got {alpha.shape}")
    vals, grads = basis_design(basis, x)
    return vals @ alpha, grads @ alpha


@dataclass
class InverseParams:
    """Trainable coefficients: shared expansion alpha plus the two scales."""

    alpha: np.ndarray
    lambda1: float = 1.0  # scales the conductivity field
    lambda2: float = 1.0  # scales the heat-capacity field

    @staticmethod
    def initial(basis: PolyBasis) -> "InverseParams":
        alpha = np.zeros(basis.n_terms)
        alpha[0] = 1.0  # start from the constant field
        return InverseParams(alpha=alpha)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.alpha, [self.lambda1, self.lambda2]])

    @staticmethod
    def from_flat(vec: np.ndarray, basis: PolyBasis) -> "InverseParams":
        vec = np.asarray(vec, dtype=float)
        if vec.size != basis.n_terms + 2:
            raise ValueError(f"expected {basis.n_terms + 2} entries, got {vec.size}")
        return InverseParams(alpha=vec[:-2].copy(), lambda1=float(vec[-2]),
                             lambda2=float(vec[-1]))


@dataclass
class MaterialFields:
    """Evaluated kappa_hat / rho_c_hat with their spatial gradients."""

    kappa: np.ndarray        # (N,)
    grad_kappa: np.ndarray   # (N, 3)
    rho_c: np.ndarray        # (N,)


def material_fields(params: InverseParams, basis: PolyBasis, x: np.ndarray) -> MaterialFields:
    """kappa_hat = lambda1 * d_hat, rho_c_hat = lambda2 * d_hat at points."""
    d_hat, grad_d = basis_eval(basis, params.alpha, x)
    return MaterialFields(
        kappa=params.lambda1 * d_hat,
        grad_kappa=params.lambda1 * grad_d,
        rho_c=params.lambda2 * d_hat,
    )


def add_noise(values: np.ndarray, level: float, seed: int) -> np.ndarray:
    """Multiplicative uniform noise: v * (1 + level * eps), eps ~ U[-1, 1]."""
    if not 0.0 <= level <= 0.2:
        raise ValueError(f"noise level must be in [0, 0.2], got {level}")
    values = np.asarray(values, dtype=float)
    if level == 0.0:
        return values.copy()
    rng = np.random.default_rng(seed)
    eps = rng.uniform(-1.0, 1.0, size=values.shape)
    return values * (1.0 + level * eps)


def select_overspecified(n_boundary: int, fraction: float, seed: int) -> np.ndarray:
    """Random subset (without replacement) of boundary indices carrying
    overspecified flux measurements; sorted for stable downstream order."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    size = int(round(fraction * n_boundary))
    if size < 1:
        raise ValueError(
            f"fraction {fraction} of {n_boundary} boundary points selects nothing"
        )
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n_boundary, size=size, replace=False))
