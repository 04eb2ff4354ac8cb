"""MSE objective, Adam, learning-rate decay and the seeded training loop."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import backward, forward
from .errors import DivergenceError, ShapeError
from .network import Network, activation_name, fourier_encode
from .operators import Identity


def mse_loss(pred, target):
    """Mean squared error and its gradient ``2 (pred - target) / N``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError("mse operands differ in shape", pred.shape, target.shape)
    diff = pred - target
    return float(np.mean(diff * diff)), (2.0 / diff.size) * diff


@dataclass
class AdamState:
    m1: list
    m2: list
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    step: int = 0

    @classmethod
    def for_params(cls, params, **kwargs):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kwargs)


def adam_step(params, grads, state: AdamState):
    """One bias-corrected Adam update, in place. Returns ``(params, state)``."""
    if len(params) != len(grads) or len(params) != len(state.m1):
        raise ShapeError("Adam: parameter/gradient/moment count mismatch",
                         (len(params),), (len(grads),), (len(state.m1),))
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.step
    bc2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m1, state.m2):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError("Adam: shape mismatch", p.shape, g.shape, m.shape)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps_hat)
    return params, state


def lr_schedule(iteration: int, total: int, base_lr: float, decay: float = 0.1) -> float:
    """Exponential decay from ``base_lr`` to ``decay * base_lr`` over ``total``."""
    if total <= 0 or not 0 <= iteration < total:
        raise ValueError(f"iteration {iteration} outside [0, {total})")
    return base_lr * decay ** (iteration / total)


@dataclass
class Checkpoint:
    iteration: int
    loss: float
    metrics: dict
    wall_time: float


@dataclass
class TrainHistory:
    losses: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)

    def write_jsonl(self, path):
        with Path(path).open("w") as fh:
            for c in self.checkpoints:
                fh.write(json.dumps({
                    "iteration": c.iteration,
                    "loss": c.loss,
                    "metrics": {k: _jsonable(v) for k, v in c.metrics.items()},
                    "wall_time": c.wall_time,
                }, sort_keys=True) + "\n")

    def write_curve(self, path):
        """Two-column ``iteration loss`` text, readable by gnuplot."""
        with Path(path).open("w") as fh:
            fh.write("# iteration loss\n")
            for i, loss in enumerate(self.losses):
                fh.write(f"{i} {loss!r}\n")


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "NaN" if math.isnan(v) else ("Infinity" if v > 0 else "-Infinity")
    return v


def train(net: Network, op, observations, coords, iters: int, seed: int = 0, *,
          lr: float = 1e-3, schedule: bool = True, batch_size: int | None = None,
          checkpoint_every: int = 0, evaluate=None, dtype=None):
    """Fit ``net`` so that ``op(net(coords))`` matches ``observations``.

    Returns a trained copy and its history; the input network is untouched.
    ``batch_size`` draws seeded uniform mini-batches of coordinate rows and is
    only valid for pointwise operators. ``evaluate(net) -> dict`` is called
    every ``checkpoint_every`` iterations and after the last one. ``dtype``
    casts the parameters (and so all network arithmetic and Adam moments);
    the loss is always accumulated in float64.
    """
    op = op or Identity()
    observations = np.asarray(observations, dtype=np.float64)
    coords = np.asarray(coords, dtype=np.float64)
    net = net.copy() if dtype is None else net.astype(dtype)
    history = TrainHistory()
    if iters <= 0:
        return net, history
    if batch_size is not None and not isinstance(op, Identity):
        raise ShapeError("mini-batching needs a pointwise operator")
    if batch_size is None and op.forward(np.zeros((coords.shape[0], net.spec.output_dim))).shape != observations.shape:
        raise ShapeError("operator output does not match observations", observations.shape)

    method = activation_name(net.spec.activation)
    rng = np.random.default_rng(seed)
    batched = batch_size is not None and batch_size < coords.shape[0]
    features = None
    if not batched and net.spec.encoding is not None:
        features = fourier_encode(coords, net.spec.encoding).astype(net.dtype)

    params = net.parameters()
    state = AdamState.for_params(params, lr=lr)
    start = time.perf_counter()
    # overflow surfaces as DivergenceError below, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(iters):
            if batched:
                idx = np.sort(rng.choice(coords.shape[0], size=batch_size, replace=False))
                x, y = coords[idx], observations[idx]
            else:
                x, y = coords, observations
            try:
                values, tape = forward(net, x, features)
            except DivergenceError as exc:
                raise DivergenceError("network output is not finite", iteration=it, method=method) from exc
            loss, grad = mse_loss(op.forward(values), y)
            if not math.isfinite(loss):
                raise DivergenceError("loss is not finite", iteration=it, method=method)
            history.losses.append(loss)
            grads = backward(net, tape, op.adjoint(grad)).as_list()
            state.lr = lr_schedule(it, iters, lr) if schedule else lr
            adam_step(params, grads, state)

            last = it == iters - 1
            if evaluate is not None and (last or (checkpoint_every and (it + 1) % checkpoint_every == 0)):
                history.checkpoints.append(
                    Checkpoint(it + 1, loss, evaluate(net), time.perf_counter() - start)
                )
    return net, history
