"""Residual and loss assembly for the spectral-integrated solver.

The unknown carried by the networks is the highest time derivative
U(x, t_j) at the Gauss node times of the current subinterval.  The solution
itself is recovered by spectral integration of the nodal values:

    heat:  u_j = u_prev + dt * (S1 @ U)_j
    wave:  u_j = u_prev + v_prev * (t_j - t_start) + dt^2 * (S2 @ U)_j

Because reconstruction is linear, the value/gradient/Laplacian jets of u_j
are the same linear combinations of the network jets, and every loss here
is a smooth function of those jets.  Each assembly routine therefore
returns its residuals together with a pullback that maps residual
cotangents to jet cotangents (plus material-parameter partials in inverse
mode); the network engine turns jet cotangents into parameter gradients.

Losses follow the per-node mean-of-squares convention with unit weights:
total = sum over nodes of (PDE + Dirichlet + Neumann means), plus the
initial-condition terms for the space-time baseline network.  Collocation
points need full jets; Dirichlet points only network values and Neumann
points only values/gradients, so boundary evaluations run at reduced
derivative order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import net as netmod
from .geometry import PointSet
from .inverse import InverseParams, PolyBasis, basis_design
from .net import JetBatch, NetworkBundle
from .problem import AffineCoefficient, Kind, ProblemSpec
from .quadrature import SpectralOperator, map_nodes


@dataclass
class NodalJets:
    """Jets of the p nodal fields at N points; column k belongs to node k."""

    value: np.ndarray  # (N, p)
    grad: np.ndarray   # (N, 3, p)
    lap: np.ndarray    # (N, p)

    @staticmethod
    def zeros(n: int, p: int) -> "NodalJets":
        return NodalJets(np.zeros((n, p)), np.zeros((n, 3, p)), np.zeros((n, p)))


@dataclass
class StateJets:
    """Jets of the carried solution (and velocity, for wave) at N points."""

    u_value: np.ndarray  # (N,)
    u_grad: np.ndarray   # (N, 3)
    u_lap: np.ndarray    # (N,)
    v_value: Optional[np.ndarray] = None
    v_grad: Optional[np.ndarray] = None
    v_lap: Optional[np.ndarray] = None


@dataclass
class LossBreakdown:
    """Per-node loss terms; total is their unweighted sum."""

    pde: np.ndarray
    dirichlet: np.ndarray
    neumann: np.ndarray
    initial: float = 0.0

    @property
    def total(self) -> float:
        return float(self.pde.sum() + self.dirichlet.sum()
                     + self.neumann.sum() + self.initial)


def bundle_nodal_jets(bundle: NetworkBundle, x: np.ndarray) -> NodalJets:
    """Stack the jets of all sub-networks at the same points."""
    jets = [netmod.forward_jet_batch(n, x) for n in bundle.nets]
    return NodalJets(
        value=np.stack([j.value for j in jets], axis=1),
        grad=np.stack([j.grad for j in jets], axis=2),
        lap=np.stack([j.laplacian for j in jets], axis=1),
    )


def node_offsets(op: SpectralOperator, dt: float) -> np.ndarray:
    """Node times relative to the subinterval start."""
    return dt * (op.rule.nodes + 1.0) / 2.0


# ---------------------------------------------------------------------------
# reconstruction of u at the node times


def reconstruct_jets(nodal: NodalJets, state: StateJets, op: SpectralOperator,
                     dt: float, kind: Kind):
    """Jets of the reconstructed solution u_j plus the linear pullback that
    maps reconstruction cotangents back onto nodal-jet cotangents."""
    if kind == Kind.HEAT:
        s = op.s1
        scale = dt
        value = state.u_value[:, None] + scale * (nodal.value @ s.T)
        grad = state.u_grad[:, :, None] + scale * (nodal.grad @ s.T)
        lap = state.u_lap[:, None] + scale * (nodal.lap @ s.T)
    else:
        s = op.s2
        scale = dt * dt
        tau = node_offsets(op, dt)
        value = (state.u_value[:, None] + state.v_value[:, None] * tau[None, :]
                 + scale * (nodal.value @ s.T))
        grad = (state.u_grad[:, :, None] + state.v_grad[:, :, None] * tau[None, None, :]
                + scale * (nodal.grad @ s.T))
        lap = (state.u_lap[:, None] + state.v_lap[:, None] * tau[None, :]
               + scale * (nodal.lap @ s.T))
    recon = NodalJets(value=value, grad=grad, lap=lap)

    def pullback(recon_bar: NodalJets) -> NodalJets:
        return NodalJets(
            value=scale * (recon_bar.value @ s),
            grad=scale * (recon_bar.grad @ s),
            lap=scale * (recon_bar.lap @ s),
        )

    return recon, pullback


def reconstruct(bundle: NetworkBundle, op: SpectralOperator, state: StateJets,
                x: np.ndarray, dt: float, kind: Kind) -> NodalJets:
    """Jets of the reconstructed solution at every node time."""
    nodal = bundle_nodal_jets(bundle, np.asarray(x, dtype=float))
    return reconstruct_jets(nodal, state, op, dt, kind)[0]


# ---------------------------------------------------------------------------
# PDE residual blocks (forward + pullback)


def _heat_residual_spatial(recon, nodal_value, kappa_vals, kappa_grads,
                           rhoc_vals, f_vals):
    r = (np.einsum("na,naj->nj", kappa_grads, recon.grad)
         + kappa_vals[:, None] * recon.lap
         + f_vals
         - rhoc_vals[:, None] * nodal_value)

    def pullback(rbar):
        recon_bar = NodalJets(
            value=np.zeros_like(rbar),
            grad=rbar[:, None, :] * kappa_grads[:, :, None],
            lap=rbar * kappa_vals[:, None],
        )
        u_value_bar = -rbar * rhoc_vals[:, None]
        # partials with respect to the material fields (inverse mode)
        kv_bar = (rbar * recon.lap).sum(axis=1)
        kg_bar = np.einsum("nj,naj->na", rbar, recon.grad)
        rc_bar = -(rbar * nodal_value).sum(axis=1)
        return recon_bar, u_value_bar, (kv_bar, kg_bar, rc_bar)

    return r, pullback


def _heat_residual_affine(recon, nodal_value, a, b, rhoc_vals, f_vals):
    grad_sq = np.einsum("naj,naj->nj", recon.grad, recon.grad)
    kappa_u = a * recon.value + b
    r = (a * grad_sq + kappa_u * recon.lap + f_vals
         - rhoc_vals[:, None] * nodal_value)

    def pullback(rbar):
        recon_bar = NodalJets(
            value=rbar * a * recon.lap,
            grad=rbar[:, None, :] * (2.0 * a) * recon.grad,
            lap=rbar * kappa_u,
        )
        u_value_bar = -rbar * rhoc_vals[:, None]
        return recon_bar, u_value_bar, None

    return r, pullback


def _wave_residual(recon, nodal_value, w2, nonlinearity, f_vals):
    r = w2 * recon.lap + f_vals - nodal_value
    if nonlinearity is not None:
        r = r - nonlinearity[0](recon.value)

    def pullback(rbar):
        value_bar = np.zeros_like(rbar)
        if nonlinearity is not None:
            value_bar = -rbar * nonlinearity[1](recon.value)
        recon_bar = NodalJets(
            value=value_bar,
            grad=np.zeros_like(recon.grad),
            lap=rbar * w2,
        )
        return recon_bar, -rbar, None

    return r, pullback


def pde_residual_heat(spec: ProblemSpec, bundle: NetworkBundle,
                      op: SpectralOperator, state: StateJets, x: np.ndarray,
                      dt: float, t_start: float) -> np.ndarray:
    """Heat residuals at every (point, node); zero at the exact solution."""
    if spec.kind != Kind.HEAT:
        raise ValueError("pde_residual_heat needs a heat problem")
    x = np.asarray(x, dtype=float)
    nodal = bundle_nodal_jets(bundle, x)
    return nodal_residual_heat(spec, nodal, op, state, x, dt, t_start)


def nodal_residual_heat(spec, nodal: NodalJets, op, state, x, dt, t_start):
    """Heat residuals from externally supplied nodal jets (oracle path)."""
    times = map_nodes(op.rule, t_start, t_start + dt)
    f_vals = np.stack([spec.source(x, t) for t in times], axis=1)
    recon, _ = reconstruct_jets(nodal, state, op, dt, Kind.HEAT)
    if isinstance(spec.kappa, AffineCoefficient):
        r, _ = _heat_residual_affine(recon, nodal.value, spec.kappa.a, spec.kappa.b,
                                     spec.rho_c.value(x), f_vals)
    else:
        r, _ = _heat_residual_spatial(recon, nodal.value, spec.kappa.value(x),
                                      spec.kappa.gradient(x), spec.rho_c.value(x),
                                      f_vals)
    if not np.all(np.isfinite(r)):
        i, j = np.argwhere(~np.isfinite(r))[0]
        raise FloatingPointError(f"non-finite heat residual at point {i}, node {j}")
    return r


def pde_residual_wave(spec: ProblemSpec, bundle: NetworkBundle,
                      op: SpectralOperator, state: StateJets, x: np.ndarray,
                      dt: float, t_start: float) -> np.ndarray:
    """Wave residuals at every (point, node)."""
    if spec.kind != Kind.WAVE:
        raise ValueError("pde_residual_wave needs a wave problem")
    x = np.asarray(x, dtype=float)
    nodal = bundle_nodal_jets(bundle, x)
    return nodal_residual_wave(spec, nodal, op, state, x, dt, t_start)


def nodal_residual_wave(spec, nodal: NodalJets, op, state, x, dt, t_start):
    """Wave residuals from externally supplied nodal jets (oracle path)."""
    times = map_nodes(op.rule, t_start, t_start + dt)
    f_vals = np.stack([spec.source(x, t) for t in times], axis=1)
    recon, _ = reconstruct_jets(nodal, state, op, dt, Kind.WAVE)
    r, _ = _wave_residual(recon, nodal.value, spec.wave_speed_sq,
                          spec.nonlinearity, f_vals)
    if not np.all(np.isfinite(r)):
        i, j = np.argwhere(~np.isfinite(r))[0]
        raise FloatingPointError(f"non-finite wave residual at point {i}, node {j}")
    return r


# ---------------------------------------------------------------------------
# boundary-condition residual blocks


def _neumann_linear(grad_n, normals, coef_vals, qbar_vals, sign_flux):
    """Residual coef * dU/dn + sign * Qbar with constant-in-u coefficient.

    Heat uses coef = kappa and sign = +1 (flux convention q = -k du/dn);
    wave uses coef = 1 and sign = -1 (flux convention q = +du/dn).
    """
    du_dn = np.einsum("naj,na->nj", grad_n, normals)
    r = coef_vals[:, None] * du_dn + sign_flux * qbar_vals

    def pullback(rbar):
        grad_bar = rbar[:, None, :] * (coef_vals[:, None] * normals)[:, :, None]
        kv_bar = (rbar * du_dn).sum(axis=1)  # partial wrt coefficient values
        return grad_bar, kv_bar

    return r, pullback


def _neumann_affine(value_n, grad_n, recon_n, a, b, normals, qbar_vals):
    """Flux-rate residual for temperature-dependent conductivity.

    d/dt[-kappa(u) du/dn] = -(a U du/dn + kappa(u) dU/dn), so matching the
    measured flux rate Qbar means
        a * U * du_rec/dn + kappa(u_rec) * dU/dn + Qbar = 0
    with u_rec the reconstructed solution at the boundary point.
    """
    du_dn = np.einsum("naj,na->nj", grad_n, normals)
    durec_dn = np.einsum("naj,na->nj", recon_n.grad, normals)
    kappa_u = a * recon_n.value + b
    r = a * value_n * durec_dn + kappa_u * du_dn + qbar_vals

    def pullback(rbar):
        value_bar = rbar * a * durec_dn
        grad_bar = rbar[:, None, :] * (kappa_u[:, None, :] * normals[:, :, None])
        recon_value_bar = rbar * a * du_dn
        recon_grad_bar = rbar[:, None, :] * (a * value_n)[:, None, :] * normals[:, :, None]
        recon_bar = NodalJets(value=recon_value_bar, grad=recon_grad_bar,
                              lap=np.zeros_like(rbar))
        return value_bar, grad_bar, recon_bar

    return r, pullback


def bc_residuals(spec: ProblemSpec, bundle: NetworkBundle, x: np.ndarray,
                 normals: np.ndarray, tags: np.ndarray, op: SpectralOperator,
                 state: StateJets, dt: float, t_start: float) -> np.ndarray:
    """Boundary residuals, one row per boundary point, one column per node."""
    x = np.asarray(x, dtype=float)
    normals = np.asarray(normals, dtype=float)
    times = map_nodes(op.rule, t_start, t_start + dt)
    nodal = bundle_nodal_jets(bundle, x)
    r = np.zeros((len(x), op.p))
    dmask = tags == "dirichlet"
    nmask = tags == "neumann"
    if dmask.any():
        ubar = np.stack([spec.dirichlet_rate(x[dmask], t) for t in times], axis=1)
        r[dmask] = nodal.value[dmask] - ubar
    if nmask.any():
        qbar = np.stack(
            [spec.neumann_rate(x[nmask], normals[nmask], t) for t in times], axis=1)
        if spec.kind == Kind.WAVE:
            r[nmask], _ = _neumann_linear(nodal.grad[nmask], normals[nmask],
                                          np.ones(int(nmask.sum())), qbar, -1.0)
        elif isinstance(spec.kappa, AffineCoefficient):
            recon, _ = reconstruct_jets(nodal, state, op, dt, spec.kind)
            recon_n = NodalJets(recon.value[nmask], recon.grad[nmask], recon.lap[nmask])
            r[nmask], _ = _neumann_affine(nodal.value[nmask], nodal.grad[nmask],
                                          recon_n, spec.kappa.a, spec.kappa.b,
                                          normals[nmask], qbar)
        else:
            r[nmask], _ = _neumann_linear(nodal.grad[nmask], normals[nmask],
                                          spec.kappa.value(x[nmask]), qbar, +1.0)
    return r


# ---------------------------------------------------------------------------
# full losses


def _mean_sq(r: np.ndarray) -> np.ndarray:
    """Per-node mean of squared residuals; zero-length sets contribute 0."""
    if r.shape[0] == 0:
        return np.zeros(r.shape[1])
    return (r * r).mean(axis=0)


def _mean_sq_bar(r: np.ndarray) -> np.ndarray:
    """d(mean of squares)/dr."""
    if r.shape[0] == 0:
        return r
    return 2.0 * r / r.shape[0]


def _nodal_with_caches(bundle: NetworkBundle, x: np.ndarray, order: int):
    """Stacked nodal jets at the requested derivative order, with caches."""
    values, grads, laps, caches = [], [], [], []
    for n in bundle.nets:
        jb, cache = netmod._forward_jet_cached(n, x, order=order)
        values.append(jb.value)
        if order >= 1:
            grads.append(jb.grad)
        if order >= 2:
            laps.append(jb.laplacian)
        caches.append(cache)
    value = np.stack(values, axis=1) if values else np.zeros((len(x), 0))
    grad = np.stack(grads, axis=2) if grads else None
    lap = np.stack(laps, axis=1) if laps else None
    return value, grad, lap, caches


class SinnLoss:
    """Forward-problem loss on one subinterval, with parameter gradients.

    Precomputes everything that does not depend on the trainable
    parameters: node times, source values, transformed boundary data and
    the carried-state jets at the collocation and boundary points.
    """

    def __init__(self, spec: ProblemSpec, op: SpectralOperator, points: PointSet,
                 state_fn: Callable[[np.ndarray], StateJets], dt: float,
                 t_start: float):
        self.spec = spec
        self.op = op
        self.points = points
        self.dt = dt
        self.times = map_nodes(op.rule, t_start, t_start + dt)
        xi = points.interior
        xb = points.boundary_points
        self.dmask = points.dirichlet_mask
        self.nmask = points.neumann_mask
        self.xd = xb[self.dmask]
        self.xn = xb[self.nmask]
        self.normals_n = points.boundary_normals[self.nmask]
        self.state_int = state_fn(xi)
        self.f_vals = np.stack([spec.source(xi, t) for t in self.times], axis=1)
        self.ubar = (np.stack([spec.dirichlet_rate(self.xd, t) for t in self.times],
                              axis=1)
                     if len(self.xd) else np.zeros((0, op.p)))
        self.qbar = (np.stack([spec.neumann_rate(self.xn, self.normals_n, t)
                               for t in self.times], axis=1)
                     if len(self.xn) else np.zeros((0, op.p)))
        self.affine = spec.kind == Kind.HEAT and isinstance(spec.kappa, AffineCoefficient)
        self.state_nbc = (state_fn(self.xn)
                          if self.affine and len(self.xn) else None)
        if spec.kind == Kind.HEAT:
            self.rhoc_int = spec.rho_c.value(xi)
            if not self.affine:
                self.kappa_int = spec.kappa.value(xi)
                self.kappa_grad_int = spec.kappa.gradient(xi)
                self.kappa_nbc = spec.kappa.value(self.xn)

    # -- assembly from jets (shared by the bundle path and the oracle path)

    def _pde_part(self, nodal_int: NodalJets):
        spec = self.spec
        recon, pull_recon = reconstruct_jets(nodal_int, self.state_int, self.op,
                                             self.dt, spec.kind)
        if spec.kind == Kind.WAVE:
            r, pull = _wave_residual(recon, nodal_int.value, spec.wave_speed_sq,
                                     spec.nonlinearity, self.f_vals)
        elif self.affine:
            r, pull = _heat_residual_affine(recon, nodal_int.value, spec.kappa.a,
                                            spec.kappa.b, self.rhoc_int, self.f_vals)
        else:
            r, pull = _heat_residual_spatial(recon, nodal_int.value, self.kappa_int,
                                             self.kappa_grad_int, self.rhoc_int,
                                             self.f_vals)
        return r, pull, pull_recon

    def _nbc_part(self, value_n, grad_n, recon_builder):
        """Neumann residuals from boundary values/gradients; recon_builder
        supplies the reconstructed jets at the Neumann points on demand
        (affine conductivity only)."""
        spec = self.spec
        if len(self.xn) == 0:
            return np.zeros((0, self.op.p)), None, None
        if spec.kind == Kind.WAVE:
            r, pull = _neumann_linear(grad_n, self.normals_n,
                                      np.ones(len(self.xn)), self.qbar, -1.0)
            return r, pull, None
        if self.affine:
            recon_n, pull_recon = recon_builder()
            r, pull = _neumann_affine(value_n, grad_n, recon_n, spec.kappa.a,
                                      spec.kappa.b, self.normals_n, self.qbar)
            return r, pull, pull_recon
        r, pull = _neumann_linear(grad_n, self.normals_n, self.kappa_nbc,
                                  self.qbar, +1.0)
        return r, pull, None

    def breakdown_from_jets(self, nodal_int: NodalJets,
                            nodal_bnd: NodalJets) -> LossBreakdown:
        """Loss terms for externally supplied jets (exact-injection oracles)."""
        r_pde, _, _ = self._pde_part(nodal_int)
        r_dbc = nodal_bnd.value[self.dmask] - self.ubar

        def recon_builder():
            nodal_n = NodalJets(nodal_bnd.value[self.nmask],
                                nodal_bnd.grad[self.nmask],
                                nodal_bnd.lap[self.nmask])
            recon, pull = reconstruct_jets(nodal_n, self.state_nbc, self.op,
                                           self.dt, self.spec.kind)
            return recon, pull

        r_nbc, _, _ = self._nbc_part(nodal_bnd.value[self.nmask],
                                     nodal_bnd.grad[self.nmask], recon_builder)
        return LossBreakdown(pde=_mean_sq(r_pde), dirichlet=_mean_sq(r_dbc),
                             neumann=_mean_sq(r_nbc))

    def breakdown(self, bundle: NetworkBundle) -> LossBreakdown:
        return self.breakdown_from_jets(
            bundle_nodal_jets(bundle, self.points.interior),
            bundle_nodal_jets(bundle, self.points.boundary_points))

    def loss_and_grad(self, bundle: NetworkBundle) -> tuple[LossBreakdown, np.ndarray]:
        """Loss breakdown and flat parameter gradient across the bundle."""
        val_i, grad_i, lap_i, caches_i = _nodal_with_caches(bundle, self.points.interior, 2)
        nodal_int = NodalJets(val_i, grad_i, lap_i)
        val_d, _, _, caches_d = _nodal_with_caches(bundle, self.xd, 0)
        val_n, grad_n, _, caches_n = _nodal_with_caches(bundle, self.xn, 1)

        r_pde, pull_pde, pull_recon = self._pde_part(nodal_int)
        recon_pull_n = None

        def recon_builder():
            nonlocal recon_pull_n
            nodal_n = NodalJets(val_n, grad_n, np.zeros_like(val_n))
            recon, recon_pull_n = reconstruct_jets(nodal_n, self.state_nbc, self.op,
                                                   self.dt, self.spec.kind)
            return recon, recon_pull_n

        r_dbc = val_d - self.ubar
        r_nbc, pull_nbc, _ = self._nbc_part(val_n, grad_n, recon_builder)
        breakdown = LossBreakdown(pde=_mean_sq(r_pde), dirichlet=_mean_sq(r_dbc),
                                  neumann=_mean_sq(r_nbc))

        recon_bar, u_value_bar, _ = pull_pde(_mean_sq_bar(r_pde))
        int_bar = pull_recon(recon_bar)
        int_bar.value += u_value_bar

        dbc_value_bar = _mean_sq_bar(r_dbc)

        nbc_value_bar = np.zeros_like(val_n)
        nbc_grad_bar = np.zeros((len(self.xn), 3, self.op.p))
        if pull_nbc is not None:
            rbar = _mean_sq_bar(r_nbc)
            if self.affine:
                v_bar, g_bar, recon_bar_n = pull_nbc(rbar)
                nbc_value_bar += v_bar
                nbc_grad_bar += g_bar
                back = recon_pull_n(recon_bar_n)
                nbc_value_bar += back.value
                nbc_grad_bar += back.grad
            else:
                g_bar, _ = pull_nbc(rbar)
                nbc_grad_bar += g_bar

        pieces = []
        for k, n in enumerate(bundle.nets):
            g = netmod.jet_backward(
                n, caches_i[k], int_bar.value[:, k], int_bar.grad[:, :, k],
                np.repeat(int_bar.lap[:, k][:, None], 3, axis=1))
            if len(self.xd):
                g += netmod.jet_backward(n, caches_d[k], dbc_value_bar[:, k])
            if len(self.xn):
                g += netmod.jet_backward(n, caches_n[k], nbc_value_bar[:, k],
                                         nbc_grad_bar[:, :, k])
            pieces.append(g)
        return breakdown, np.concatenate(pieces)


def total_loss(spec: ProblemSpec, bundle: NetworkBundle, op: SpectralOperator,
               state_fn, points: PointSet, dt: float, t_start: float) -> LossBreakdown:
    """Mean-of-squares loss terms for one subinterval (forward problems)."""
    return SinnLoss(spec, op, points, state_fn, dt, t_start).breakdown(bundle)


class InverseLoss:
    """Joint loss in (network parameters, alpha, lambda1, lambda2).

    Dirichlet rate data is known on the whole boundary; flux-rate data only
    on the overspecified subset (optionally noise-contaminated).  The
    material fields inside the PDE and flux terms come from the polynomial
    expansion, so their parameters receive gradients too.
    """

    def __init__(self, spec: ProblemSpec, basis: PolyBasis, op: SpectralOperator,
                 points: PointSet, state_fn, dt: float, t_start: float,
                 overspec_idx: np.ndarray, qbar_data: np.ndarray):
        if spec.kind != Kind.HEAT:
            raise ValueError("inverse mode supports heat problems")
        self.spec = spec
        self.basis = basis
        self.op = op
        self.points = points
        self.dt = dt
        self.times = map_nodes(op.rule, t_start, t_start + dt)
        xi = points.interior
        xb = points.boundary_points
        self.state_int = state_fn(xi)
        self.f_vals = np.stack([spec.source(xi, t) for t in self.times], axis=1)
        self.ubar = np.stack([spec.dirichlet_rate(xb, t) for t in self.times], axis=1)
        self.overspec_idx = np.asarray(overspec_idx, dtype=int)
        self.xov = xb[self.overspec_idx]
        self.normals_ov = points.boundary_normals[self.overspec_idx]
        if qbar_data.shape != (len(self.overspec_idx), op.p):
            raise ValueError(f"flux data must be (n_overspecified, p), got {qbar_data.shape}")
        self.qbar_data = qbar_data
        self.design_int = basis_design(basis, xi)           # (N, m), (N, 3, m)
        self.design_ov = basis_design(basis, self.xov)[0]

    def _material(self, params: InverseParams):
        b_int, db_int = self.design_int
        d_int = b_int @ params.alpha
        gd_int = db_int @ params.alpha
        d_ov = self.design_ov @ params.alpha
        return d_int, gd_int, d_ov

    def _parts(self, nodal_int: NodalJets, value_b, grad_ov, params: InverseParams):
        d_int, gd_int, d_ov = self._material(params)
        recon, pull_recon = reconstruct_jets(nodal_int, self.state_int, self.op,
                                             self.dt, self.spec.kind)
        r_pde, pull_pde = _heat_residual_spatial(
            recon, nodal_int.value, params.lambda1 * d_int,
            params.lambda1 * gd_int, params.lambda2 * d_int, self.f_vals)
        r_dbc = value_b - self.ubar
        r_nbc, pull_nbc = _neumann_linear(grad_ov, self.normals_ov,
                                          params.lambda1 * d_ov, self.qbar_data, +1.0)
        breakdown = LossBreakdown(pde=_mean_sq(r_pde), dirichlet=_mean_sq(r_dbc),
                                  neumann=_mean_sq(r_nbc))
        return breakdown, (r_pde, pull_pde, pull_recon, r_dbc, r_nbc, pull_nbc,
                           d_int, gd_int, d_ov)

    def breakdown_from_jets(self, nodal_int: NodalJets, nodal_bnd: NodalJets,
                            params: InverseParams) -> LossBreakdown:
        return self._parts(nodal_int, nodal_bnd.value,
                           nodal_bnd.grad[self.overspec_idx], params)[0]

    def breakdown(self, bundle: NetworkBundle, params: InverseParams) -> LossBreakdown:
        return self.breakdown_from_jets(
            bundle_nodal_jets(bundle, self.points.interior),
            bundle_nodal_jets(bundle, self.points.boundary_points), params)

    def loss_and_grad(self, bundle: NetworkBundle, params: InverseParams):
        """(breakdown, net-parameter gradient, alpha gradient, lambda grads)."""
        xb = self.points.boundary_points
        val_i, grad_i, lap_i, caches_i = _nodal_with_caches(bundle, self.points.interior, 2)
        nodal_int = NodalJets(val_i, grad_i, lap_i)
        val_b, _, _, caches_b = _nodal_with_caches(bundle, xb, 0)
        val_ov, grad_ov, _, caches_ov = _nodal_with_caches(bundle, self.xov, 1)
        breakdown, parts = self._parts(nodal_int, val_b, grad_ov, params)
        (r_pde, pull_pde, pull_recon, r_dbc, r_nbc, pull_nbc,
         d_int, gd_int, d_ov) = parts
        b_int, db_int = self.design_int

        recon_bar, u_value_bar, mat_bar = pull_pde(_mean_sq_bar(r_pde))
        int_bar = pull_recon(recon_bar)
        int_bar.value += u_value_bar

        kv_bar, kg_bar, rc_bar = mat_bar
        # chain material-field cotangents into (alpha, lambda1, lambda2)
        alpha_grad = (params.lambda1 * (b_int.T @ kv_bar)
                      + params.lambda1 * np.einsum("na,nam->m", kg_bar, db_int)
                      + params.lambda2 * (b_int.T @ rc_bar))
        l1_grad = float(kv_bar @ d_int + np.einsum("na,na->", kg_bar, gd_int))
        l2_grad = float(rc_bar @ d_int)

        dbc_value_bar = _mean_sq_bar(r_dbc)
        grad_ov_bar, kov_bar = pull_nbc(_mean_sq_bar(r_nbc))
        alpha_grad += params.lambda1 * (self.design_ov.T @ kov_bar)
        l1_grad += float(kov_bar @ d_ov)

        pieces = []
        for k, n in enumerate(bundle.nets):
            g = netmod.jet_backward(
                n, caches_i[k], int_bar.value[:, k], int_bar.grad[:, :, k],
                np.repeat(int_bar.lap[:, k][:, None], 3, axis=1))
            g += netmod.jet_backward(n, caches_b[k], dbc_value_bar[:, k])
            g += netmod.jet_backward(n, caches_ov[k], np.zeros(len(self.xov)),
                                     grad_ov_bar[:, :, k])
            pieces.append(g)
        return breakdown, np.concatenate(pieces), alpha_grad, np.array([l1_grad, l2_grad])


def total_loss_inverse(spec, bundle, params: InverseParams, basis: PolyBasis,
                       op, state_fn, points: PointSet, overspec_idx,
                       qbar_data, dt: float, t_start: float) -> LossBreakdown:
    """Inverse-mode loss with parametrized material fields."""
    return InverseLoss(spec, basis, op, points, state_fn, dt, t_start,
                       overspec_idx, qbar_data).breakdown(bundle, params)


# ---------------------------------------------------------------------------
# space-time baseline (vanilla collocation network)


def pinn_time_samples(t_end: float, n: int = 5, t_start: float = 0.0) -> np.ndarray:
    """n points evenly distributed over (t_start, t_end]."""
    return t_start + (t_end - t_start) * np.arange(1, n + 1) / n


class PinnLoss:
    """Loss for the baseline space-time network u(x, y, z, t).

    The residual of the governing equation is evaluated directly, with the
    time derivative coming from the network's fourth input; initial
    conditions are enforced at t = t_start on the collocation points, and
    boundary conditions use the untransformed data.
    """

    def __init__(self, spec: ProblemSpec, points: PointSet, time_samples: np.ndarray,
                 t_start: float = 0.0):
        self.spec = spec
        self.points = points
        self.times = np.asarray(time_samples, dtype=float)
        self.t_start = t_start
        xi = points.interior
        xb = points.boundary_points
        self.dmask = points.dirichlet_mask
        self.nmask = points.neumann_mask
        self.xd = xb[self.dmask]
        self.xn = xb[self.nmask]
        self.normals_n = points.boundary_normals[self.nmask]
        self.f_vals = [spec.source(xi, t) for t in self.times]
        self.ubar = [spec.dirichlet(self.xd, t) for t in self.times]
        self.qbar = [spec.neumann(self.xn, self.normals_n, t) for t in self.times]
        self.u0 = spec.u0.value(xi, 0.0)
        self.v0 = spec.v0.value(xi, 0.0) if spec.kind == Kind.WAVE else None
        self.affine = spec.kind == Kind.HEAT and isinstance(spec.kappa, AffineCoefficient)
        if spec.kind == Kind.HEAT:
            self.rhoc_int = spec.rho_c.value(xi)
            if not self.affine:
                self.kappa_int = spec.kappa.value(xi)
                self.kappa_grad_int = spec.kappa.gradient(xi)
                self.kappa_nbc = spec.kappa.value(self.xn)

    def _with_time(self, x: np.ndarray, t: float) -> np.ndarray:
        return np.concatenate([x, np.full((len(x), 1), t)], axis=1)

    def _pde_residual(self, jets: JetBatch, s: int):
        spec = self.spec
        gs = jets.grad[:, :3]
        lap = jets.hess_diag[:, :3].sum(axis=1)
        if spec.kind == Kind.WAVE:
            r = jets.hess_diag[:, 3] - spec.wave_speed_sq * lap - self.f_vals[s]
            if spec.nonlinearity is not None:
                r = r + spec.nonlinearity[0](jets.value)

            def pullback(rbar):
                vbar = (rbar * spec.nonlinearity[1](jets.value)
                        if spec.nonlinearity is not None else np.zeros_like(rbar))
                gbar = np.zeros_like(jets.grad)
                hbar = np.empty_like(jets.hess_diag)
                hbar[:, :3] = -spec.wave_speed_sq * rbar[:, None]
                hbar[:, 3] = rbar
                return vbar, gbar, hbar

            return r, pullback
        if self.affine:
            a, b = spec.kappa.a, spec.kappa.b
            r = (self.rhoc_int * jets.grad[:, 3]
                 - a * (gs * gs).sum(axis=1)
                 - (a * jets.value + b) * lap
                 - self.f_vals[s])

            def pullback(rbar):
                vbar = -rbar * a * lap
                gbar = np.zeros_like(jets.grad)
                gbar[:, :3] = -2.0 * a * gs * rbar[:, None]
                gbar[:, 3] = self.rhoc_int * rbar
                hbar = np.zeros_like(jets.hess_diag)
                hbar[:, :3] = -((a * jets.value + b) * rbar)[:, None]
                return vbar, gbar, hbar

            return r, pullback
        r = (self.rhoc_int * jets.grad[:, 3]
             - (self.kappa_grad_int * gs).sum(axis=1)
             - self.kappa_int * lap
             - self.f_vals[s])

        def pullback(rbar):
            vbar = np.zeros_like(rbar)
            gbar = np.zeros_like(jets.grad)
            gbar[:, :3] = -self.kappa_grad_int * rbar[:, None]
            gbar[:, 3] = self.rhoc_int * rbar
            hbar = np.zeros_like(jets.hess_diag)
            hbar[:, :3] = -(self.kappa_int * rbar)[:, None]
            return vbar, gbar, hbar

        return r, pullback

    def breakdown(self, mlp) -> LossBreakdown:
        return self._run(mlp, with_grad=False)[0]

    def loss_and_grad(self, mlp) -> tuple[LossBreakdown, np.ndarray]:
        return self._run(mlp, with_grad=True)

    def _run(self, mlp, with_grad: bool):
        spec = self.spec
        xi = self.points.interior
        s_count = len(self.times)
        pde = np.zeros(s_count)
        dbc = np.zeros(s_count)
        nbc = np.zeros(s_count)
        grad = np.zeros(mlp.n_params) if with_grad else None
        for s, t in enumerate(self.times):
            jets_i, cache_i = netmod._forward_jet_cached(mlp, self._with_time(xi, t), 2)
            r_pde, pull = self._pde_residual(jets_i, s)
            pde[s] = float((r_pde * r_pde).mean())
            if with_grad:
                vbar, gbar, hbar = pull(2.0 * r_pde / len(xi))
                grad += netmod.jet_backward(mlp, cache_i, vbar, gbar, hbar)
            if len(self.xd):
                jets_d, cache_d = netmod._forward_jet_cached(
                    mlp, self._with_time(self.xd, t), 0)
                r_d = jets_d.value - self.ubar[s]
                dbc[s] = float((r_d * r_d).mean())
                if with_grad:
                    grad += netmod.jet_backward(mlp, cache_d, 2.0 * r_d / len(self.xd))
            if len(self.xn):
                jets_n, cache_n = netmod._forward_jet_cached(
                    mlp, self._with_time(self.xn, t), 1)
                du_dn = (jets_n.grad[:, :3] * self.normals_n).sum(axis=1)
                if spec.kind == Kind.WAVE:
                    r_n = du_dn - self.qbar[s]
                    coef = np.ones(len(self.xn))
                    vpart = None
                elif self.affine:
                    coef = spec.kappa.a * jets_n.value + spec.kappa.b
                    r_n = coef * du_dn + self.qbar[s]
                    vpart = spec.kappa.a * du_dn
                else:
                    coef = self.kappa_nbc
                    r_n = coef * du_dn + self.qbar[s]
                    vpart = None
                nbc[s] = float((r_n * r_n).mean())
                if with_grad:
                    rbar = 2.0 * r_n / len(self.xn)
                    vb = rbar * vpart if vpart is not None else np.zeros(len(self.xn))
                    gb = np.zeros((len(self.xn), 4))
                    gb[:, :3] = (rbar * coef)[:, None] * self.normals_n
                    grad += netmod.jet_backward(mlp, cache_n, vb, gb)
        # initial conditions at t_start on the collocation points
        ic_order = 1 if spec.kind == Kind.WAVE else 0
        jets0, cache0 = netmod._forward_jet_cached(
            mlp, self._with_time(xi, self.t_start), ic_order)
        r_ic = jets0.value - self.u0
        initial = float((r_ic * r_ic).mean())
        if spec.kind == Kind.WAVE:
            r_icv = jets0.grad[:, 3] - self.v0
            initial += float((r_icv * r_icv).mean())
        if with_grad:
            vbar = 2.0 * r_ic / len(xi)
            if spec.kind == Kind.WAVE:
                gbar = np.zeros((len(xi), 4))
                gbar[:, 3] = 2.0 * r_icv / len(xi)
                grad += netmod.jet_backward(mlp, cache0, vbar, gbar)
            else:
                grad += netmod.jet_backward(mlp, cache0, vbar)
        breakdown = LossBreakdown(pde=pde, dirichlet=dbc, neumann=nbc, initial=initial)
        return breakdown, grad


def pinn_baseline_loss(spec: ProblemSpec, mlp, points: PointSet,
                       time_samples: np.ndarray) -> LossBreakdown:
    """Loss of the baseline space-time network on the given time samples."""
    if mlp.n_inputs != 4:
        raise ValueError("baseline network needs 4 inputs (x, y, z, t)")
    return PinnLoss(spec, points, time_samples).breakdown(mlp)
