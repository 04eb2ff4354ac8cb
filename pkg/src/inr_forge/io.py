"""Readers and writers for images (PGM/PPM), audio (16-bit PCM WAV),
volumes, sinograms and network weights.

All custom binary formats are little-endian. Readers check header length
fields against the real file size before allocating anything.
"""
from __future__ import annotations

import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError


@dataclass
class ImageBuffer:
    """Samples in [0, 1], shape (height, width) or (height, width, 3)."""

    pixels: np.ndarray

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def channels(self):
        return 1 if self.pixels.ndim == 2 else self.pixels.shape[2]


@dataclass
class AudioBuffer:
    sample_rate: int
    samples: np.ndarray


@dataclass
class VolumeBuffer:
    voxels: np.ndarray  # shape (nx, ny, nz)


# -- PGM / PPM ---------------------------------------------------------------

def _header_tokens(raw, count):
    """Read ``count`` whitespace-separated header tokens, skipping comments.
    Returns the tokens and the offset of the payload."""
    tokens = []
    pos = 0
    n = len(raw)
    while len(tokens) < count:
        while pos < n and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos : pos + 1] == b"#":
            while pos < n and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise FormatError("unexpected end of header", pos)
        start = pos
        while pos < n and not raw[pos : pos + 1].isspace() and raw[pos : pos + 1] != b"#":
            pos += 1
        tokens.append((raw[start:pos], start))
    if pos >= n or not raw[pos : pos + 1].isspace():
        raise FormatError("missing whitespace after header", pos)
    return tokens, pos + 1


def read_image(path) -> ImageBuffer:
    raw = Path(path).read_bytes()
    tokens, payload_at = _header_tokens(raw, 4)
    magic = tokens[0][0]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported magic {magic!r}, expected P5 or P6", 0)
    fields = []
    for tok, off in tokens[1:]:
        if not tok.isdigit():
            raise FormatError(f"non-numeric header field {tok!r}", off)
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"bad image size {width}x{height}", tokens[1][1])
    if not 1 <= maxval <= 65535:
        raise FormatError(f"maxval {maxval} outside 1..65535", tokens[3][1])
    channels = 1 if magic == b"P5" else 3
    depth = 1 if maxval < 256 else 2
    expected = width * height * channels * depth
    actual = len(raw) - payload_at
    if actual < expected:
        raise FormatError(f"truncated payload: expected {expected} bytes, got {actual}", payload_at + actual)
    dtype = np.uint8 if depth == 1 else np.dtype(">u2")
    data = np.frombuffer(raw, dtype=dtype, count=width * height * channels, offset=payload_at)
    if np.any(data > maxval):
        raise FormatError(f"sample exceeds maxval {maxval}", payload_at)
    pixels = data.astype(np.float64) / maxval
    shape = (height, width) if channels == 1 else (height, width, 3)
    return ImageBuffer(pixels.reshape(shape))


def write_image(image, path, maxval: int = 255):
    pixels = image.pixels if isinstance(image, ImageBuffer) else np.asarray(image, dtype=np.float64)
    if pixels.ndim == 2:
        magic = "P5"
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        magic = "P6"
    else:
        raise FormatError(f"cannot store image of shape {pixels.shape}")
    if maxval not in (255, 65535):
        raise ValueError("maxval must be 255 or 65535")
    q = np.rint(np.clip(pixels, 0.0, 1.0) * maxval)
    payload = q.astype(np.uint8 if maxval == 255 else ">u2").tobytes()
    h, w = pixels.shape[:2]
    header = f"{magic}\n{w} {h}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + payload)


# -- WAV -----------------------------------------------------------------------

def read_wav(path) -> AudioBuffer:
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            frames = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"unsupported or malformed WAV: {exc}") from exc
    if width != 2:
        raise FormatError(f"only 16-bit PCM is supported, got {8 * width}-bit")
    data = np.frombuffer(frames, dtype="<i2").astype(np.float64)
    if channels > 1:
        data = data[: len(data) // channels * channels].reshape(-1, channels).mean(axis=1)
    return AudioBuffer(rate, np.clip(data / 32767.0, -1.0, 1.0))


def write_wav(buffer: AudioBuffer, path):
    q = np.rint(np.clip(buffer.samples, -1.0, 1.0) * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(buffer.sample_rate))
        w.writeframes(q.tobytes())


# -- raw float64 containers ----------------------------------------------------

def _read_f64_block(raw, offset, count, what):
    need = offset + 8 * count
    if need > len(raw):
        raise FormatError(f"{what}: header promises {8 * count} data bytes, file has {len(raw) - offset}", len(raw))
    return np.frombuffer(raw, dtype="<f8", count=count, offset=offset).copy(), need


def write_volume(volume, path):
    vox = volume.voxels if isinstance(volume, VolumeBuffer) else np.asarray(volume, dtype=np.float64)
    if vox.ndim != 3:
        raise FormatError(f"volume must be 3-D, got shape {vox.shape}")
    header = b"VOL0" + struct.pack("<III", *vox.shape)
    Path(path).write_bytes(header + np.ascontiguousarray(vox, dtype="<f8").tobytes())


def read_volume(path) -> VolumeBuffer:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != b"VOL0":
        raise FormatError("bad volume magic, expected VOL0", 0)
    nx, ny, nz = struct.unpack_from("<III", raw, 4)
    count = nx * ny * nz
    if 16 + 8 * count != len(raw):
        raise FormatError(f"volume dims {nx}x{ny}x{nz} inconsistent with file length {len(raw)}", 4)
    data, _ = _read_f64_block(raw, 16, count, "volume")
    return VolumeBuffer(data.reshape(nx, ny, nz))


def write_sinogram(values, path):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise FormatError(f"sinogram must be 2-D, got shape {values.shape}")
    header = b"SINO" + struct.pack("<II", *values.shape)
    Path(path).write_bytes(header + np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_sinogram(path):
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"SINO":
        raise FormatError("bad sinogram magic, expected SINO", 0)
    angles, detectors = struct.unpack_from("<II", raw, 4)
    if 12 + 8 * angles * detectors != len(raw):
        raise FormatError(f"sinogram {angles}x{detectors} inconsistent with file length {len(raw)}", 4)
    data, _ = _read_f64_block(raw, 12, angles * detectors, "sinogram")
    return data.reshape(angles, detectors)


WEIGHTS_VERSION = 1


def write_weights(net, path):
    parts = [b"INRW", struct.pack("<II", WEIGHTS_VERSION, len(net.weights))]
    for w, b in net.weights:
        parts.append(struct.pack("<II", *w.shape))
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_weights(path):
    """Return the list of ``(W, b)`` pairs stored in an INRW file."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"INRW":
        raise FormatError("bad weights magic, expected INRW", 0)
    version, layers = struct.unpack_from("<II", raw, 4)
    if version != WEIGHTS_VERSION:
        raise FormatError(f"unsupported weights version {version}", 4)
    pos = 12
    out = []
    for i in range(layers):
        if pos + 8 > len(raw):
            raise FormatError(f"layer {i}: truncated shape header", pos)
        rows, cols = struct.unpack_from("<II", raw, pos)
        pos += 8
        w, pos = _read_f64_block(raw, pos, rows * cols, f"layer {i} weights")
        b, pos = _read_f64_block(raw, pos, rows, f"layer {i} bias")
        out.append((w.reshape(rows, cols), b))
    if pos != len(raw):
        raise FormatError(f"{len(raw) - pos} trailing bytes after last layer", pos)
    return out


def load_network(spec, path):
    from .network import Network

    return Network(spec, read_weights(path))
