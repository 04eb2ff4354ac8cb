"""Measurement operators and procedural test signals.

Coordinates are always pixel/voxel centres mapped to [-1, 1]^d, one row per
sample, columns in array-axis order (row index first for images).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _backend
from .errors import ConfigError, ShapeError


# -- coordinates -----------------------------------------------------------------

def axis_centres(n):
    return -1.0 + (2.0 * np.arange(n) + 1.0) / n


def grid_coords(n, dims=2):
    """Centres of an ``n**dims`` grid as an ``(n**dims) x dims`` array (C order)."""
    axes = np.meshgrid(*([axis_centres(n)] * dims), indexing="ij")
    return np.stack([a.reshape(-1) for a in axes], axis=1)


def lowres_coords(hr_size: int, factor: int):
    """Centres of the ``factor``-times coarser grid in the high-res frame."""
    if factor < 1 or hr_size % factor:
        raise ConfigError(f"factor {factor} does not divide image size {hr_size}")
    lr = hr_size // factor
    c = -1.0 + (2.0 * np.arange(lr) + 1.0) * factor / hr_size
    if factor == 1:
        c = axis_centres(hr_size)
    u, v = np.meshgrid(c, c, indexing="ij")
    return np.stack([u.reshape(-1), v.reshape(-1)], axis=1)


# -- phantoms ----------------------------------------------------------------------

# (intensity, semi-axis a, semi-axis b, centre x, centre y, rotation in degrees)
SHEPP_LOGAN_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


def shepp_logan(n: int):
    """Shepp-Logan head phantom (high-contrast intensities) on an n x n grid.
    Row 0 is the top of the head (y = +1)."""
    if n < 16:
        raise ConfigError(f"Shepp-Logan needs n >= 16, got {n}")
    c = axis_centres(n)
    x = c[None, :]
    y = -c[:, None]
    img = np.zeros((n, n))
    for amp, a, b, x0, y0, deg in SHEPP_LOGAN_ELLIPSES:
        phi = math.radians(deg)
        cp, sp = math.cos(phi), math.sin(phi)
        dx, dy = x - x0, y - y0
        u = dx * cp + dy * sp
        v = -dx * sp + dy * cp
        img = img + amp * ((u / a) ** 2 + (v / b) ** 2 <= 1.0)
    return np.clip(img, 0.0, 1.0)


def checkerboard(n: int, cells: int = 8, low: float = 0.0, high: float = 1.0):
    if n % cells:
        raise ConfigError(f"cells {cells} must divide n {n}")
    size = n // cells
    idx = np.arange(n) // size
    mask = (idx[:, None] + idx[None, :]) % 2 == 0
    return np.where(mask, high, low).astype(np.float64)


def sphere_volume(n: int, radius: float = 0.5):
    """Solid indicator (1 inside) of a centred sphere on an n^3 voxel grid."""
    c = axis_centres(n)
    r2 = c[:, None, None] ** 2 + c[None, :, None] ** 2 + c[None, None, :] ** 2
    return (r2 <= radius * radius).astype(np.float64)


def chirp_signal(samples: int = 16000, sample_rate: int = 16000, f0: float = 60.0,
                 f1: float = 240.0, burst_band=(300.0, 420.0), burst_tones: int = 6):
    """Two-component chirp with an amplitude-modulated tone burst in the last
    quarter. Deterministic; amplitude stays inside [-1, 1]."""
    t = np.arange(samples) / sample_rate
    dur = samples / sample_rate
    # linear chirps, phase = 2 pi (f0 t + (f1 - f0) t^2 / (2 dur))
    k = (f1 - f0) / dur
    main = 0.45 * np.sin(2 * np.pi * (f0 * t + 0.5 * k * t * t))
    second = 0.2 * np.sin(2 * np.pi * (2 * f0 * t + 0.25 * k * t * t) + 0.7)
    start = 0.75 * dur
    u = np.clip((t - start) / (dur - start), 0.0, 1.0)
    envelope = np.where(t >= start, np.sin(np.pi * u) ** 2, 0.0)
    envelope = envelope * (0.6 + 0.4 * np.sin(2 * np.pi * 6.0 * t))
    lo, hi = burst_band
    burst = np.zeros_like(t)
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    for i in range(burst_tones):
        f = lo + (hi - lo) * i / max(burst_tones - 1, 1)
        burst += np.sin(2 * np.pi * f * t + 2 * np.pi * ((i * golden) % 1.0))
    burst *= 0.25 / burst_tones * 2.0
    return np.clip(main + second + envelope * burst, -1.0, 1.0)


def audio_coords(samples: int):
    return axis_centres(samples)[:, None]


# -- noise -----------------------------------------------------------------------

def poisson_counts(lam, rng):
    """Seeded Poisson draws: inversion below 30, rounded normal at or above."""
    lam = np.asarray(lam, dtype=np.float64)
    flat = lam.reshape(-1)
    u = rng.random(flat.size)
    z = rng.standard_normal(flat.size)
    out = np.zeros(flat.size)

    big = flat >= 30.0
    out[big] = np.maximum(0.0, np.floor(flat[big] + np.sqrt(flat[big]) * z[big] + 0.5))

    small = ~big & (flat > 0.0)
    if np.any(small):
        lam_s = flat[small]
        us = u[small]
        k = np.zeros(lam_s.size)
        p = np.exp(-lam_s)
        cdf = p.copy()
        active = us > cdf
        kk = 0
        while np.any(active) and kk < 200:
            kk += 1
            p = np.where(active, p * lam_s / kk, p)
            cdf = np.where(active, cdf + p, cdf)
            k = np.where(active, kk, k)
            active = active & (us > cdf)
        out[small] = k
    return out.reshape(lam.shape)


def poisson_photon_noise(image, max_photons: float = 30.0, integration_time: float = 2.0, seed: int = 0):
    image = np.asarray(image, dtype=np.float64)
    if not max_photons > 0 or not integration_time > 0:
        raise ConfigError("max_photons and integration_time must be > 0")
    scale = max_photons * integration_time
    rng = np.random.default_rng(seed)
    return poisson_counts(image * scale, rng) / scale


# -- parallel-beam projector -------------------------------------------------------

HALF_DIAGONAL = math.sqrt(2.0) / 2.0


def default_detectors(n):
    return int(1.5 * n) - 1


@dataclass(frozen=True)
class RadonGeometry:
    """Image on the unit square [-1/2, 1/2]^2, angles uniform on [0, pi),
    detector offsets uniform on [-sqrt2/2, sqrt2/2], samples every half pixel."""

    size: int
    angles: int
    detectors: int

    def __post_init__(self):
        if self.angles < 1 or self.detectors < 1 or self.size < 1:
            raise ConfigError(f"invalid Radon geometry {self}")

    @cached_property
    def theta(self):
        return np.pi * np.arange(self.angles) / self.angles

    @cached_property
    def cos_t(self):
        return np.cos(self.theta)

    @cached_property
    def sin_t(self):
        return np.sin(self.theta)

    @cached_property
    def offsets(self):
        if self.detectors == 1:
            return np.zeros(1)
        return np.linspace(-HALF_DIAGONAL, HALF_DIAGONAL, self.detectors)

    @property
    def detector_spacing(self):
        return 2 * HALF_DIAGONAL / max(self.detectors - 1, 1)

    @property
    def step(self):
        return 0.5 / self.size

    @cached_property
    def samples(self):
        count = int(math.floor(2 * HALF_DIAGONAL / self.step)) + 1
        half = 0.5 * (count - 1) * self.step
        return -half + self.step * np.arange(count)

    def kernel_args(self):
        return self.cos_t, self.sin_t, self.offsets, self.samples, self.step


@dataclass
class Sinogram:
    angles: int
    detectors: int
    values: np.ndarray


def radon_project(image, angles: int, detectors: int | None = None) -> Sinogram:
    image = np.ascontiguousarray(image, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] != image.shape[1]:
        raise ShapeError("Radon projection needs a square image", image.shape)
    n = image.shape[0]
    geo = RadonGeometry(n, angles, detectors or default_detectors(n))
    values = _backend.radon_forward(image, *geo.kernel_args())
    return Sinogram(geo.angles, geo.detectors, values)


def radon_adjoint(sino: Sinogram, image_size: int):
    values = np.ascontiguousarray(sino.values, dtype=np.float64)
    if values.shape != (sino.angles, sino.detectors):
        raise ShapeError("sinogram values do not match its geometry", values.shape, (sino.angles, sino.detectors))
    geo = RadonGeometry(image_size, sino.angles, sino.detectors)
    return _backend.radon_adjoint(values, image_size, *geo.kernel_args())


# -- operator objects used by the training loop ------------------------------------

class Identity:
    kind = "identity"
    linear = True

    def forward(self, pred):
        return pred

    def adjoint(self, grad):
        return grad


class OccupancyBatch(Identity):
    """Pointwise fit on voxel centres; batching is done by the training loop."""

    kind = "occupancy"


class AudioSampler(Identity):
    kind = "audio"


class LowResSampler:
    """Box average of an ``hr x hr`` image (flattened N x 1) down by ``factor``."""

    kind = "lowres"
    linear = True

    def __init__(self, hr_size, factor):
        if factor < 1 or hr_size % factor:
            raise ConfigError(f"factor {factor} does not divide image size {hr_size}")
        self.hr_size = hr_size
        self.factor = factor
        self.lr_size = hr_size // factor

    def forward(self, pred):
        f, lr = self.factor, self.lr_size
        img = np.asarray(pred).reshape(lr, f, lr, f)
        return img.mean(axis=(1, 3)).reshape(-1, 1)

    def adjoint(self, grad):
        f, lr = self.factor, self.lr_size
        g = np.asarray(grad).reshape(lr, 1, lr, 1) / (f * f)
        return np.broadcast_to(g, (lr, f, lr, f)).reshape(-1, 1).copy()


class RadonOperator:
    kind = "radon"
    linear = True

    def __init__(self, size, angles, detectors=None):
        self.geometry = RadonGeometry(size, angles, detectors or default_detectors(size))

    def forward(self, pred):
        n = self.geometry.size
        img = np.ascontiguousarray(np.asarray(pred, dtype=np.float64).reshape(n, n))
        return _backend.radon_forward(img, *self.geometry.kernel_args())

    def adjoint(self, grad):
        g = self.geometry
        img = _backend.radon_adjoint(np.ascontiguousarray(grad, dtype=np.float64), g.size, *g.kernel_args())
        return img.reshape(-1, 1)


def occupancy_dataset(volume):
    """Voxel-centre coordinates and labels (outside = 1, inside = 0)."""
    volume = np.asarray(volume, dtype=np.float64)
    if volume.ndim != 3 or len(set(volume.shape)) != 1:
        raise ShapeError("occupancy needs a cubic volume", volume.shape)
    n = volume.shape[0]
    labels = (volume < 0.5).astype(np.float64).reshape(-1, 1)
    return grid_coords(n, 3), labels
