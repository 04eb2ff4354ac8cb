"""Coordinate networks: Fourier feature mapping, activations, and the layer stack.

A network maps coordinates (rows of an ``N x d`` array) through an optional
log-linear Fourier encoding, a chain of affine + elementwise-activation
layers, and a final affine layer with no activation.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Trident:
    """Gaussian window ``exp(-(s0 z)^2)``."""

    s0: float = 5.0

    def __post_init__(self):
        if not self.s0 > 0:
            raise ConfigError(f"Trident s0 must be > 0, got {self.s0}")


@dataclass(frozen=True)
class Sine:
    omega0: float = 10.0

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ConfigError(f"Sine omega0 must be > 0, got {self.omega0}")


@dataclass(frozen=True)
class GaborReal:
    """Real Gabor wavelet ``cos(omega0 z) exp(-(s0 z)^2)``."""

    omega0: float = 20.0
    s0: float = 10.0

    def __post_init__(self):
        if not (self.omega0 > 0 and self.s0 > 0):
            raise ConfigError(f"GaborReal parameters must be > 0, got {self}")


@dataclass(frozen=True)
class Relu:
    pass


ActivationKind = Union[Trident, Sine, GaborReal, Relu]
_KINDS = {"trident": Trident, "sine": Sine, "gabor": GaborReal, "relu": Relu}


def activation_name(kind):
    for name, cls in _KINDS.items():
        if isinstance(kind, cls):
            return name
    raise ConfigError(f"unknown activation {kind!r}")


def flush_subnormal(a):
    """Zero out subnormal entries in place.

    Window tails underflow into the subnormal range, and a BLAS product with
    subnormal operands runs two orders of magnitude slower.
    """
    if isinstance(a, np.ndarray) and a.dtype.kind == "f":
        a[np.abs(a) < np.finfo(a.dtype).tiny] = 0.0
    return a


def activate(kind, z):
    if isinstance(kind, Trident):
        t = kind.s0 * z
        np.square(t, out=t)
        np.negative(t, out=t)
        return flush_subnormal(np.exp(t, out=t))
    if isinstance(kind, Sine):
        return np.sin(kind.omega0 * z)
    if isinstance(kind, GaborReal):
        return flush_subnormal(np.cos(kind.omega0 * z) * np.exp(-np.square(kind.s0 * z)))
    if isinstance(kind, Relu):
        return np.maximum(z, 0.0)
    raise ConfigError(f"unknown activation {kind!r}")


def activation_derivative(kind, z, out=None):
    """Elementwise d(activate)/dz. ``out`` may pass the cached forward value.

    The ReLU derivative at exactly 0 is 0.
    """
    if isinstance(kind, Trident):
        window = activate(kind, z) if out is None else out
        d = (-2.0 * kind.s0 * kind.s0) * z
        d *= window
        return flush_subnormal(d)
    if isinstance(kind, Sine):
        return kind.omega0 * np.cos(kind.omega0 * z)
    if isinstance(kind, GaborReal):
        wz = kind.omega0 * z
        sz = kind.s0 * z
        window = np.exp(-np.square(sz))
        return flush_subnormal(window * (-kind.omega0 * np.sin(wz) - 2.0 * kind.s0 * sz * np.cos(wz)))
    if isinstance(kind, Relu):
        return (z > 0.0).astype(z.dtype)
    raise ConfigError(f"unknown activation {kind!r}")


def trident_pointwise(x: float, s0: float = 1.0) -> float:
    return math.exp(-((s0 * x) ** 2))


@dataclass(frozen=True)
class EncodingSpec:
    sigma: float = 10.0
    mapping_size: int = 16
    include_identity: bool = True

    def __post_init__(self):
        if not self.sigma > 1:
            raise ConfigError(f"encoding sigma must be > 1, got {self.sigma}")
        if int(self.mapping_size) != self.mapping_size or self.mapping_size < 1:
            raise ConfigError(f"encoding mapping_size must be >= 1, got {self.mapping_size}")

    def frequencies(self):
        j = np.arange(self.mapping_size, dtype=np.float64)
        return self.sigma ** (j / self.mapping_size)

    def output_dim(self, input_dim):
        per_dim = 2 * self.mapping_size + (1 if self.include_identity else 0)
        return input_dim * per_dim


def fourier_encode(coords, enc: EncodingSpec):
    """Per input scalar v: ``[v, cos(2 pi f_0 v), sin(2 pi f_0 v), ...]`` with
    ``f_j = sigma**(j/m)``; blocks are concatenated in input-dimension order."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2:
        raise ConfigError(f"coords must be 2-D (N x d), got shape {coords.shape}")
    n, d = coords.shape
    freqs = enc.frequencies()
    m = len(freqs)
    width = 2 * m + (1 if enc.include_identity else 0)
    out = np.empty((n, d * width))
    for k in range(d):
        base = k * width
        v = coords[:, k]
        if enc.include_identity:
            out[:, base] = v
            base += 1
        phase = 2.0 * np.pi * v[:, None] * freqs[None, :]
        out[:, base : base + 2 * m : 2] = np.cos(phase)
        out[:, base + 1 : base + 2 * m : 2] = np.sin(phase)
    return out


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    output_dim: int
    hidden_layers: int = 2
    hidden_width: int = 256
    activation: ActivationKind = field(default_factory=Trident)
    encoding: Optional[EncodingSpec] = field(default_factory=EncodingSpec)
    init_seed: int = 0

    def __post_init__(self):
        for name in ("input_dim", "output_dim", "hidden_width"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.hidden_layers < 0:
            raise ConfigError(f"hidden_layers must be >= 0, got {self.hidden_layers}")
        if not isinstance(self.activation, tuple(_KINDS.values())):
            raise ConfigError(f"unknown activation {self.activation!r}")

    @property
    def feature_dim(self):
        if self.encoding is None:
            return self.input_dim
        return self.encoding.output_dim(self.input_dim)

    def layer_shapes(self):
        """(fan_out, fan_in) for every affine layer, first to last."""
        widths = [self.feature_dim] + [self.hidden_width] * self.hidden_layers + [self.output_dim]
        return [(widths[i + 1], widths[i]) for i in range(len(widths) - 1)]

    def to_dict(self):
        act = asdict(self.activation)
        act["kind"] = activation_name(self.activation)
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "hidden_layers": self.hidden_layers,
            "hidden_width": self.hidden_width,
            "activation": act,
            "encoding": None if self.encoding is None else asdict(self.encoding),
            "init_seed": self.init_seed,
        }

    @classmethod
    def from_dict(cls, data):
        try:
            act = dict(data["activation"])
            kind = _KINDS[act.pop("kind")]
            enc = data.get("encoding")
            return cls(
                input_dim=int(data["input_dim"]),
                output_dim=int(data["output_dim"]),
                hidden_layers=int(data["hidden_layers"]),
                hidden_width=int(data["hidden_width"]),
                activation=kind(**act),
                encoding=None if enc is None else EncodingSpec(**enc),
                init_seed=int(data.get("init_seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed network spec: {exc}") from exc


@dataclass
class Network:
    """Realized parameters. ``weights[i] = (W_i, b_i)`` with ``W_i`` of shape
    (fan_out, fan_in) and ``b_i`` of shape (fan_out,); rows of a batch are
    mapped as ``x @ W.T + b``."""

    spec: NetworkSpec
    weights: list

    def __post_init__(self):
        shapes = self.spec.layer_shapes()
        if len(shapes) != len(self.weights):
            raise ConfigError(f"expected {len(shapes)} layers, got {len(self.weights)}")
        for i, ((fo, fi), (w, b)) in enumerate(zip(shapes, self.weights)):
            if w.shape != (fo, fi) or b.shape != (fo,):
                raise ConfigError(
                    f"layer {i}: expected W{(fo, fi)} b{(fo,)}, got W{w.shape} b{b.shape}"
                )

    @property
    def dtype(self):
        return self.weights[0][0].dtype

    def copy(self):
        return Network(self.spec, [(w.copy(), b.copy()) for w, b in self.weights])

    def astype(self, dtype):
        """Copy with every parameter cast to ``dtype``. Forward and backward
        passes compute in the dtype of the weights."""
        return Network(self.spec, [(w.astype(dtype), b.astype(dtype)) for w, b in self.weights])

    def parameters(self):
        """Flat list ``[W_0, b_0, W_1, b_1, ...]`` of the live arrays."""
        return [p for pair in self.weights for p in pair]

    @property
    def parameter_count(self):
        return sum(w.size + b.size for w, b in self.weights)


def _init_bounds(spec, layer, fan_in):
    if isinstance(spec.activation, Sine):
        if layer == 0:
            return 1.0 / fan_in
        return math.sqrt(6.0 / fan_in) / spec.activation.omega0
    return math.sqrt(1.0 / fan_in)


def build_network(spec: NetworkSpec) -> Network:
    rng = np.random.default_rng(spec.init_seed)
    weights = []
    for i, (fan_out, fan_in) in enumerate(spec.layer_shapes()):
        bound = _init_bounds(spec, i, fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=fan_out)
        weights.append((w, b))
    return Network(spec, weights)
