"""Fully-connected network bundles and their derivative engine.

The solver approximates the highest time derivative of the solution with p
independent sub-networks (one per Gauss node), all sharing one architecture
and activation but carrying disjoint parameters.  Losses are built from the
networks' values, spatial gradients and Laplacians, so the engine provides

* ``forward_jet_batch``: value, input-gradient and diagonal second
  derivatives of the output at a batch of points, propagated layer by layer
  in closed form (linear layers mix derivatives linearly; elementwise
  activations apply the chain rule with their first/second derivatives);
* ``jet_backward``: parameter gradients of any scalar that depends on those
  jets, obtained by reverse accumulation through the same recurrences.

Differentiating a Laplacian-bearing loss with respect to the parameters
requires the activation's third derivative, so the activation table carries
sigma, sigma', sigma'' and sigma''' for all six supported kinds.

Checkpoint file layout (little-endian):
    bytes 0..7   magic b"SINNNET1"
    uint32       activation id (Activation value)
    uint32       p (number of sub-networks)
    uint32       L (number of entries in layer_sizes)
    uint32 * L   layer sizes, input width first
    float64 *    flattened parameters for all p sub-networks in
                 (sub-network, layer, row-major weights, biases) order
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

_CKPT_MAGIC = b"SINNNET1"


class Activation(IntEnum):
    SIGMOID = 0
    TANH = 1
    SWISH = 2
    SOFTPLUS = 3
    ARCTAN = 4
    MISH = 5


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softplus(x):
    # ln(1 + e^x) without overflow; for x > 30 the correction is < 1e-13
    return np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))


def _activation_table(kind: Activation, x: np.ndarray, nder: int = 3):
    """(sigma, sigma', ... up to the nder-th derivative) elementwise at x.

    The third derivative exists for every kind because reverse-mode
    differentiation of a Laplacian-bearing loss requires it.
    """
    x = np.asarray(x, dtype=float)
    if kind in (Activation.SIGMOID, Activation.SWISH, Activation.SOFTPLUS):
        s = _sigmoid(x)
        s1 = s * (1.0 - s)
        s2 = s1 * (1.0 - 2.0 * s) if nder >= 2 else None
        s3 = s1 * (1.0 - 6.0 * s + 6.0 * s * s) if nder >= 3 else None
        if kind == Activation.SIGMOID:
            out = (s, s1, s2, s3)
        elif kind == Activation.SOFTPLUS:
            out = (_softplus(x), s, s1, s2)
        else:
            out = (x * s, s + x * s1,
                   None if nder < 2 else 2.0 * s1 + x * s2,
                   None if nder < 3 else 3.0 * s2 + x * s3)
        return out[:nder + 1]
    if kind == Activation.TANH:
        t = np.tanh(x)
        t1 = 1.0 - t * t
        if nder == 1:
            return t, t1
        t2 = -2.0 * t * t1
        if nder == 2:
            return t, t1, t2
        return t, t1, t2, -2.0 * t1 * (1.0 - 3.0 * t * t)
    if kind == Activation.ARCTAN:
        d = 1.0 + x * x
        if nder == 1:
            return np.arctan(x), 1.0 / d
        if nder == 2:
            return np.arctan(x), 1.0 / d, -2.0 * x / d**2
        return (np.arctan(x), 1.0 / d, -2.0 * x / d**2,
                (6.0 * x * x - 2.0) / d**3)
    if kind == Activation.MISH:
        s = _sigmoid(x)
        t = np.tanh(_softplus(x))
        omt2 = 1.0 - t * t
        t1 = omt2 * s
        if nder == 1:
            return x * t, t + x * t1
        s1 = s * (1.0 - s)
        t2 = -2.0 * t * t1 * s + omt2 * s1
        if nder == 2:
            return x * t, t + x * t1, 2.0 * t1 + x * t2
        s2 = s1 * (1.0 - 2.0 * s)
        t3 = (-2.0 * t1 * t1 * s - 2.0 * t * t2 * s
              - 4.0 * t * t1 * s1 + omt2 * s2)
        return x * t, t + x * t1, 2.0 * t1 + x * t2, 3.0 * t2 + x * t3
    raise ValueError(f"unknown activation kind: {kind!r}")


def activation_eval(kind: Activation, x):
    """Value and first two derivatives of the activation at x."""
    s, s1, s2 = _activation_table(kind, np.asarray(x, dtype=float), nder=2)
    if np.ndim(x) == 0:
        return float(s), float(s1), float(s2)
    return s, s1, s2


@dataclass
class Mlp:
    """Dense network; weights[l] has shape (n_out, n_in), linear output."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: Activation

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_params(self) -> int:
        return param_count(self.layer_sizes)


def param_count(layer_sizes) -> int:
    return sum(
        n_out * n_in + n_out
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:])
    )


def init_network(layer_sizes, activation: Activation, seed: int) -> Mlp:
    """Glorot-uniform weights, zero biases; deterministic for a fixed seed."""
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) < 3:
        raise ValueError("need at least one hidden layer")
    if any(n <= 0 for n in sizes):
        raise ValueError(f"zero-width layer in {sizes}")
    if sizes[-1] != 1:
        raise ValueError(f"output width must be 1, got {sizes[-1]}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        biases.append(np.zeros(n_out))
    return Mlp(layer_sizes=sizes, weights=weights, biases=biases, activation=activation)


@dataclass
class NetworkBundle:
    """p sub-networks with identical architecture and independent parameters."""

    nets: list[Mlp]

    def __post_init__(self):
        if not self.nets:
            raise ValueError("bundle needs at least one sub-network")
        sizes = self.nets[0].layer_sizes
        act = self.nets[0].activation
        for k, net in enumerate(self.nets):
            if net.layer_sizes != sizes:
                raise ValueError(f"sub-network {k} has mismatched layer sizes")
            if net.activation != act:
                raise ValueError(f"sub-network {k} has mismatched activation")

    @property
    def p(self) -> int:
        return len(self.nets)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return self.nets[0].layer_sizes

    @property
    def activation(self) -> Activation:
        return self.nets[0].activation

    @property
    def n_params(self) -> int:
        return self.p * self.nets[0].n_params


def _subnet_seed(seed: int, index: int) -> int:
    return (seed * 1000003 + 7919 * index + 1) % (2**63)


def init_bundle(layer_sizes, activation: Activation, p: int, seed: int) -> NetworkBundle:
    """Bundle of p networks, each seeded deterministically from (seed, index)."""
    return NetworkBundle(
        nets=[init_network(layer_sizes, activation, _subnet_seed(seed, j)) for j in range(p)]
    )


# ---------------------------------------------------------------------------
# forward passes


def forward_batch(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    """Plain forward pass for a (N, n_in) batch; returns (N,)."""
    a = np.asarray(x, dtype=float)
    if a.ndim != 2 or a.shape[1] != mlp.n_inputs:
        raise ValueError(f"expected (N, {mlp.n_inputs}) inputs, got {a.shape}")
    last = len(mlp.weights) - 1
    for l, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        a = a @ w.T + b
        if l != last:
            a = _activation_table(mlp.activation, a)[0]
    return a[:, 0]


def forward(mlp: Mlp, x) -> float:
    """Network output at a single point."""
    return float(forward_batch(mlp, np.asarray(x, dtype=float)[None, :])[0])


@dataclass
class JetBatch:
    """Value, gradient and diagonal second derivatives at a batch of points.

    grad[n, i] = du/dx_i, hess_diag[n, i] = d2u/dx_i^2.  The Laplacian sums
    the diagonal over the first three (spatial) coordinates.
    """

    value: np.ndarray      # (N,)
    grad: np.ndarray       # (N, d)
    hess_diag: np.ndarray  # (N, d)

    @property
    def laplacian(self) -> np.ndarray:
        return self.hess_diag[:, :3].sum(axis=1)


@dataclass
class Jet2:
    """Value, spatial gradient and Laplacian of a field at one point."""

    value: float
    gradient: np.ndarray  # (3,)
    laplacian: float


@dataclass
class _LayerCache:
    a_prev: np.ndarray          # (N, n_in)
    g_prev: np.ndarray | None   # (d, N, n_in)
    h_prev: np.ndarray | None   # (d, N, n_in)
    gz: np.ndarray | None       # pre-activation first derivatives (hidden only)
    hz: np.ndarray | None       # pre-activation second derivatives (hidden only)
    s1: np.ndarray | None
    s2: np.ndarray | None
    s3: np.ndarray | None


@dataclass
class _JetCache:
    order: int
    layers: list[_LayerCache] = field(default_factory=list)


def _forward_jet_cached(mlp: Mlp, x: np.ndarray, order: int = 2):
    """Forward pass propagating derivatives up to the requested order.

    order 0: values only; 1: values and input gradients; 2: plus diagonal
    second derivatives.  Derivative arrays use (direction, point, unit)
    layout so every linear step is d large GEMMs rather than N tiny ones.
    Returns (JetBatch, cache); fields beyond the order are zero-filled.
    """
    a = np.asarray(x, dtype=float)
    if a.ndim != 2 or a.shape[1] != mlp.n_inputs:
        raise ValueError(f"expected (N, {mlp.n_inputs}) inputs, got {a.shape}")
    n, d = a.shape
    g = h = None
    if order >= 1:
        g = np.zeros((d, n, d))
        for i in range(d):
            g[i, :, i] = 1.0
    if order >= 2:
        h = np.zeros((d, n, d))
    cache = _JetCache(order=order)
    last = len(mlp.weights) - 1
    for l, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ w.T + b
        gz = g @ w.T if order >= 1 else None
        hz = h @ w.T if order >= 2 else None
        if l == last:
            cache.layers.append(_LayerCache(a, g, h, None, None, None, None, None))
            a, g, h = z, gz, hz
        else:
            table = _activation_table(mlp.activation, z, nder=order + 1)
            s, s1 = table[0], table[1]
            s2 = table[2] if order >= 1 else None
            s3 = table[3] if order >= 2 else None
            cache.layers.append(_LayerCache(a, g, h, gz, hz, s1, s2, s3))
            a = s
            if order >= 1:
                g = s1[None, :, :] * gz
            if order >= 2:
                h = s2[None, :, :] * (gz * gz) + s1[None, :, :] * hz
    jets = JetBatch(
        value=a[:, 0],
        grad=g[:, :, 0].T.copy() if order >= 1 else np.zeros((n, d)),
        hess_diag=h[:, :, 0].T.copy() if order >= 2 else np.zeros((n, d)),
    )
    return jets, cache


def forward_jet_batch(mlp: Mlp, x: np.ndarray) -> JetBatch:
    """Value, gradient and diagonal second derivatives at (N, n_in) points."""
    return _forward_jet_cached(mlp, x)[0]


def forward_jet(mlp: Mlp, x) -> Jet2:
    """Exact (to roundoff) value, spatial gradient and Laplacian at a point."""
    jets = forward_jet_batch(mlp, np.asarray(x, dtype=float)[None, :])
    return Jet2(
        value=float(jets.value[0]),
        gradient=jets.grad[0, :3].copy(),
        laplacian=float(jets.laplacian[0]),
    )


def jet_backward(
    mlp: Mlp,
    cache: _JetCache,
    value_bar: np.ndarray,
    grad_bar: np.ndarray | None = None,
    hess_bar: np.ndarray | None = None,
) -> np.ndarray:
    """Parameter gradient of sum_n [vbar*u + gbar.grad + hbar.hess_diag].

    The cotangents are the partial derivatives of a scalar loss with
    respect to the jet fields returned by ``_forward_jet_cached``; the
    result is dLoss/dparams in ``params_flatten`` order for this network.
    Gradient/second-derivative cotangents require a cache of at least that
    forward order.
    """
    order = cache.order
    if grad_bar is not None and order < 1:
        raise ValueError("gradient cotangent needs an order >= 1 forward cache")
    if hess_bar is not None and order < 2:
        raise ValueError("second-derivative cotangent needs an order 2 cache")
    grads_w = [None] * len(mlp.weights)
    grads_b = [None] * len(mlp.weights)
    n = len(value_bar)
    d = mlp.n_inputs
    zbar = np.asarray(value_bar, dtype=float)[:, None]
    with_h = hess_bar is not None
    if with_h and grad_bar is None:
        grad_bar = np.zeros((n, d))  # the H flow feeds the G flow below
    with_g = grad_bar is not None
    gzbar = (np.ascontiguousarray(np.asarray(grad_bar, dtype=float).T)[:, :, None]
             if with_g else None)
    hzbar = (np.ascontiguousarray(np.asarray(hess_bar, dtype=float).T)[:, :, None]
             if with_h else None)
    for l in range(len(mlp.weights) - 1, -1, -1):
        lc = cache.layers[l]
        w = mlp.weights[l]
        if lc.s1 is not None:  # activation sits after this affine layer
            abar, gbar, hbar = zbar, gzbar, hzbar
            zbar = abar * lc.s1
            if with_g:
                zbar += lc.s2 * (gbar * lc.gz).sum(axis=0)
                gzbar = lc.s1[None, :, :] * gbar
            if with_h:
                zbar += (lc.s3 * (hbar * (lc.gz * lc.gz)).sum(axis=0)
                         + lc.s2 * (hbar * lc.hz).sum(axis=0))
                gzbar += (2.0 * lc.s2[None, :, :]) * (hbar * lc.gz)
                hzbar = lc.s1[None, :, :] * hbar
        m, n_in = w.shape
        gw = zbar.T @ lc.a_prev
        if with_g:
            gw += gzbar.reshape(d * n, m).T @ lc.g_prev.reshape(d * n, n_in)
        if with_h:
            gw += hzbar.reshape(d * n, m).T @ lc.h_prev.reshape(d * n, n_in)
        grads_w[l] = gw
        grads_b[l] = zbar.sum(axis=0)
        if l > 0:
            zbar = zbar @ w
            if with_g:
                gzbar = gzbar @ w
            if with_h:
                hzbar = hzbar @ w
    return np.concatenate(
        [np.concatenate([gw.ravel(), gb]) for gw, gb in zip(grads_w, grads_b)]
    )


# ---------------------------------------------------------------------------
# parameter vector layout


def params_flatten(obj) -> np.ndarray:
    """Flatten an Mlp or NetworkBundle into one parameter vector.

    Order: sub-network index, then layer, then row-major weights, then
    biases.  Stable across runs for a fixed architecture.
    """
    if isinstance(obj, NetworkBundle):
        return np.concatenate([params_flatten(net) for net in obj.nets])
    return np.concatenate(
        [np.concatenate([w.ravel(), b]) for w, b in zip(obj.weights, obj.biases)]
    )


def params_load(obj, vec: np.ndarray) -> None:
    """Load a flat vector back into an Mlp or NetworkBundle, in place."""
    vec = np.asarray(vec, dtype=float)
    if isinstance(obj, NetworkBundle):
        per = obj.nets[0].n_params
        if vec.size != obj.n_params:
            raise ValueError(f"expected {obj.n_params} parameters, got {vec.size}")
        for k, net in enumerate(obj.nets):
            params_load(net, vec[k * per:(k + 1) * per])
        return
    if vec.size != obj.n_params:
        raise ValueError(f"expected {obj.n_params} parameters, got {vec.size}")
    pos = 0
    for w, b in zip(obj.weights, obj.biases):
        w[...] = vec[pos:pos + w.size].reshape(w.shape)
        pos += w.size
        b[...] = vec[pos:pos + b.size]
        pos += b.size


# ---------------------------------------------------------------------------
# loss gradients


def bundle_jets(bundle: NetworkBundle, x: np.ndarray) -> list[JetBatch]:
    """Jets of every sub-network at the same batch of points."""
    return [forward_jet_batch(net, x) for net in bundle.nets]


def loss_gradient(bundle: NetworkBundle, x: np.ndarray, loss_fn) -> tuple[float, np.ndarray]:
    """Loss value and flat parameter gradient across all sub-networks.

    ``loss_fn`` receives the list of per-network JetBatch objects and must
    return ``(loss, cotangents)`` where cotangents[k] is a
    (value_bar, grad_bar, hess_bar) triple for sub-network k (entries may
    be None when a field does not enter the loss).
    """
    x = np.asarray(x, dtype=float)
    jets, caches = [], []
    for net in bundle.nets:
        jb, cache = _forward_jet_cached(net, x)
        jets.append(jb)
        caches.append(cache)
    for k, jb in enumerate(jets):
        for name, arr in (("value", jb.value), ("grad", jb.grad), ("hess", jb.hess_diag)):
            bad = ~np.isfinite(arr)
            if bad.any():
                idx = int(np.argwhere(bad)[0][0])
                raise FloatingPointError(
                    f"non-finite {name} from sub-network {k} at point index {idx}"
                )
    loss, cotangents = loss_fn(jets)
    n, d = x.shape
    pieces = []
    for k, (net, cache, cot) in enumerate(zip(bundle.nets, caches, cotangents)):
        vbar, gbar, hbar = cot
        vbar = np.zeros(n) if vbar is None else np.asarray(vbar, dtype=float)
        gbar = np.zeros((n, d)) if gbar is None else np.asarray(gbar, dtype=float)
        hbar = np.zeros((n, d)) if hbar is None else np.asarray(hbar, dtype=float)
        for name, arr in (("value", vbar), ("grad", gbar), ("hess", hbar)):
            bad = ~np.isfinite(arr)
            if bad.any():
                idx = int(np.argwhere(bad)[0][0])
                raise FloatingPointError(
                    f"non-finite {name} cotangent for sub-network {k} at point index {idx}"
                )
        pieces.append(jet_backward(net, cache, vbar, gbar, hbar))
    return float(loss), np.concatenate(pieces)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, bundle: NetworkBundle) -> None:
    """Write the bundle to the documented binary checkpoint format."""
    sizes = bundle.layer_sizes
    header = _CKPT_MAGIC + struct.pack(
        "<III", int(bundle.activation), bundle.p, len(sizes)
    )
    header += struct.pack(f"<{len(sizes)}I", *sizes)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(params_flatten(bundle).astype("<f8").tobytes())


def load_checkpoint(path) -> NetworkBundle:
    """Read a bundle written by :func:`save_checkpoint`."""
    raw = Path(path).read_bytes()
    if raw[:8] != _CKPT_MAGIC:
        raise ValueError(f"{path}: not a network checkpoint")
    act_id, p, n_layers = struct.unpack_from("<III", raw, 8)
    sizes = struct.unpack_from(f"<{n_layers}I", raw, 20)
    offset = 20 + 4 * n_layers
    params = np.frombuffer(raw, dtype="<f8", offset=offset)
    bundle = init_bundle(sizes, Activation(act_id), p, seed=0)
    params_load(bundle, params)
    return bundle
