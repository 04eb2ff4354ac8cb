"""Pure NumPy versions of the compiled kernels in ``_kernels.pyx``.

Same sample lattice and bilinear weights, so results agree with the
compiled core to rounding. The projector caches its sparse weight triplets
per geometry, which trades memory for speed on repeated calls.
"""
from functools import lru_cache

import numpy as np


def matmul_ordered(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    out = np.zeros((a.shape[0], b.shape[1]))
    # one k-slice at a time keeps the per-entry summation order of a naive loop
    for k in range(a.shape[1]):
        out += a[:, k : k + 1] * b[k : k + 1, :]
    return out


def _triplets(n, cos_t, sin_t, offsets, samples):
    na, nd, ns = len(cos_t), len(offsets), len(samples)
    c = cos_t[:, None, None]
    s = sin_t[:, None, None]
    t = offsets[None, :, None]
    q = samples[None, None, :]
    x = t * c - q * s
    y = t * s + q * c
    u = (x + 0.5) * n - 0.5
    v = (y + 0.5) * n - 0.5
    fj = np.floor(u)
    fi = np.floor(v)
    fu = u - fj
    fv = v - fi
    j0 = fj.astype(np.int64)
    i0 = fi.astype(np.int64)
    ray = np.broadcast_to(np.arange(na * nd).reshape(na, nd, 1), (na, nd, ns))

    rays, pix, wts = [], [], []
    for di, dj, w in (
        (0, 0, (1.0 - fu) * (1.0 - fv)),
        (0, 1, fu * (1.0 - fv)),
        (1, 0, (1.0 - fu) * fv),
        (1, 1, fu * fv),
    ):
        ii = i0 + di
        jj = j0 + dj
        ok = (ii >= 0) & (ii < n) & (jj >= 0) & (jj < n)
        rays.append(ray[ok])
        pix.append(ii[ok] * n + jj[ok])
        wts.append(w[ok])
    return np.concatenate(rays), np.concatenate(pix), np.concatenate(wts)


@lru_cache(maxsize=8)
def _cached_triplets(n, cos_b, sin_b, off_b, smp_b):
    arrays = [np.frombuffer(b, dtype=np.float64) for b in (cos_b, sin_b, off_b, smp_b)]
    return _triplets(n, *arrays)


def _geometry_key(n, cos_t, sin_t, offsets, samples):
    return (
        int(n),
        np.ascontiguousarray(cos_t, dtype=np.float64).tobytes(),
        np.ascontiguousarray(sin_t, dtype=np.float64).tobytes(),
        np.ascontiguousarray(offsets, dtype=np.float64).tobytes(),
        np.ascontiguousarray(samples, dtype=np.float64).tobytes(),
    )


def radon_forward(image, cos_t, sin_t, offsets, samples, step):
    n = image.shape[0]
    ray, pix, w = _cached_triplets(*_geometry_key(n, cos_t, sin_t, offsets, samples))
    vals = np.bincount(ray, weights=w * image.reshape(-1)[pix], minlength=len(cos_t) * len(offsets))
    return vals.reshape(len(cos_t), len(offsets)) * step


def radon_adjoint(sino, n, cos_t, sin_t, offsets, samples, step):
    ray, pix, w = _cached_triplets(*_geometry_key(n, cos_t, sin_t, offsets, samples))
    vals = (sino.reshape(-1) * step)[ray] * w
    return np.bincount(pix, weights=vals, minlength=n * n).reshape(n, n)
