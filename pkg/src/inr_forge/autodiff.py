"""Dense forward/backward passes for the fixed layer family.

The graph is always ``[encode] -> (affine -> activation)* -> affine`` so the
reverse pass is written out by hand instead of going through a general
computation graph. Batches are the rows of an ``N x d`` array; arithmetic
runs in the dtype of the network weights (float64 unless cast).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _backend
from .errors import DivergenceError, InrError, ShapeError
from .network import (GaborReal, Network, Trident, activate, activation_derivative,
                      flush_subnormal, fourier_encode)


def as_matrix(data, name="matrix"):
    """Coerce to a C-contiguous 2-D float64 array, rejecting NaN/Inf."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D", arr.shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def matmul(a, b):
    """Matrix product with a fixed per-entry summation order (k ascending).

    Bit-reproducible across runs and platforms, unlike a BLAS call. The
    training hot path uses BLAS instead; this is for reference evaluation.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul dimension mismatch", a.shape, b.shape)
    return _backend.matmul_ordered(np.ascontiguousarray(a), np.ascontiguousarray(b))


@dataclass
class LayerRecord:
    kind: str  # "encoding", "hidden" or "output"
    inputs: np.ndarray
    z: Optional[np.ndarray] = None
    out: Optional[np.ndarray] = None
    frequencies: Optional[np.ndarray] = None


@dataclass
class Tape:
    records: list = field(default_factory=list)
    network_id: int = 0
    used: bool = False


@dataclass
class Gradients:
    dW: list
    db: list

    def as_list(self):
        """Flat ``[dW_0, db_0, dW_1, ...]``, aligned with ``Network.parameters()``."""
        return [g for pair in zip(self.dW, self.db) for g in pair]


def forward(net: Network, coords, features=None):
    """Evaluate the network on the rows of ``coords``.

    ``features`` may carry a precomputed ``fourier_encode(coords, ...)`` so
    full-batch loops do not re-encode a fixed coordinate set.
    """
    coords = np.asarray(coords, dtype=np.float64)
    spec = net.spec
    if coords.ndim != 2 or coords.shape[1] != spec.input_dim:
        raise ShapeError("coords do not match network input", coords.shape, (coords.shape[0], spec.input_dim))
    tape = Tape(network_id=id(net))
    x = coords
    if spec.encoding is not None:
        tape.records.append(LayerRecord("encoding", coords, frequencies=spec.encoding.frequencies()))
        x = fourier_encode(coords, spec.encoding) if features is None else features
    x = x.astype(net.dtype, copy=False)
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(net.weights):
        z = x @ w.T
        z += b
        if i == last:
            tape.records.append(LayerRecord("output", x, z=z))
            x = z
        else:
            a = activate(spec.activation, z)
            tape.records.append(LayerRecord("hidden", x, z=z, out=a))
            x = a
    if not np.all(np.isfinite(x)):
        raise DivergenceError("network output is not finite", method=type(spec.activation).__name__)
    return x, tape


def backward(net: Network, tape: Tape, upstream) -> Gradients:
    """Gradients of ``sum(upstream * values)`` w.r.t. every W_i, b_i."""
    if tape.used:
        raise InrError("tape already consumed by a backward pass")
    if tape.network_id != id(net):
        raise InrError("tape was recorded by a different network")
    layers = [r for r in tape.records if r.kind != "encoding"]
    if len(layers) != len(net.weights):
        raise ShapeError("stale tape: layer count", (len(layers),), (len(net.weights),))
    delta = np.asarray(upstream).astype(net.dtype, copy=False)
    if delta.shape != layers[-1].z.shape:
        raise ShapeError("upstream does not match forward output", delta.shape, layers[-1].z.shape)
    tape.used = True

    kind = net.spec.activation
    windowed = isinstance(kind, (Trident, GaborReal))
    n_layers = len(net.weights)
    dW = [None] * n_layers
    db = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        rec = layers[i]
        w = net.weights[i][0]
        if rec.kind == "hidden":
            d = activation_derivative(kind, rec.z, rec.out)
            d *= delta
            delta = flush_subnormal(d) if windowed else d
        if rec.inputs.shape[1] != w.shape[1]:
            raise ShapeError(f"stale tape at layer {i}", rec.inputs.shape, w.shape)
        dW[i] = delta.T @ rec.inputs
        db[i] = delta.sum(axis=0)
        if i > 0:
            # a single output column makes this an outer product; skip BLAS
            delta = delta * w[0] if w.shape[0] == 1 else delta @ w
    return Gradients(dW, db)


def _mse(pred, target):
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def _activate_ld(kind, z):
    # longdouble twin of network.activate, kept separate so the oracle
    # does not share code with the path it checks
    name = type(kind).__name__
    if name == "Trident":
        return np.exp(-np.square(np.longdouble(kind.s0) * z))
    if name == "Sine":
        return np.sin(np.longdouble(kind.omega0) * z)
    if name == "GaborReal":
        return np.cos(np.longdouble(kind.omega0) * z) * np.exp(-np.square(np.longdouble(kind.s0) * z))
    return np.maximum(z, np.longdouble(0))


def _loss_extended(spec, params, features, targets):
    x = features
    last = len(params) // 2 - 1
    for i in range(last + 1):
        w, b = params[2 * i], params[2 * i + 1]
        z = np.einsum("nk,ok->no", x, w) + b
        x = z if i == last else _activate_ld(spec.activation, z)
    diff = x - targets
    return np.mean(diff * diff)


def finite_diff_check(net: Network, coords, targets, eps: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients
    of the MSE loss, over every parameter entry.

    The central differences are evaluated in extended precision
    (``np.longdouble``) so that cancellation in ``L(p+eps) - L(p-eps)`` does
    not swamp small gradients.
    """
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    coords = np.asarray(coords, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    net = net.astype(np.float64)
    values, tape = forward(net, coords)
    if values.shape != targets.shape:
        raise ShapeError("targets do not match network output", targets.shape, values.shape)
    _, grad = _mse(values, targets)
    analytic = backward(net, tape, grad).as_list()

    features = coords
    if net.spec.encoding is not None:
        features = fourier_encode(coords, net.spec.encoding)
    features = features.astype(np.longdouble)
    targets_ld = targets.astype(np.longdouble)
    params = [p.astype(np.longdouble) for p in net.parameters()]
    eps_ld = np.longdouble(eps)

    worst = 0.0
    for param, g in zip(params, analytic):
        flat = param.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps_ld
            up = _loss_extended(net.spec, params, features, targets_ld)
            flat[k] = orig - eps_ld
            down = _loss_extended(net.spec, params, features, targets_ld)
            flat[k] = orig
            cd = float((up - down) / (2 * eps_ld))
            err = abs(gflat[k] - cd) / max(abs(gflat[k]), abs(cd), 1e-12)
            worst = max(worst, err)
    return worst


def predict(net: Network, coords, chunk: int = 65536):
    """Forward pass in row chunks, discarding tapes. For large evaluation
    grids. The result is float64 whatever the network dtype."""
    coords = np.asarray(coords, dtype=np.float64)
    parts = [forward(net, coords[i : i + chunk])[0] for i in range(0, coords.shape[0], chunk)]
    if not parts:
        return np.zeros((0, net.spec.output_dim))
    return np.concatenate(parts, axis=0).astype(np.float64, copy=False)
