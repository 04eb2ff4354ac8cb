"""Image/volume quality metrics and the JSON-lines result log."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ShapeError


def _pair(pred, ref):
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ShapeError("metric operands differ in shape", pred.shape, ref.shape)
    return pred, ref


def mse(pred, ref) -> float:
    pred, ref = _pair(pred, ref)
    diff = pred - ref
    return float(np.mean(diff * diff))


def psnr(pred, ref, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the inputs are identical."""
    if not peak > 0:
        raise ValueError(f"peak must be > 0, got {peak}")
    err = mse(pred, ref)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def gaussian_window(size=11, sigma=1.5):
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, g):
    # separable correlation with no padding
    k = len(g)
    rows = np.lib.stride_tricks.sliding_window_view(img, k, axis=0) @ g
    return np.lib.stride_tricks.sliding_window_view(rows, k, axis=1) @ g


def ssim_map(pred, ref, peak=1.0, window=11, sigma=1.5, k1=0.01, k2=0.03):
    pred, ref = _pair(pred, ref)
    if pred.ndim != 2:
        raise ShapeError("ssim expects a 2-D image", pred.shape)
    if pred.shape[0] < window or pred.shape[1] < window:
        raise ShapeError(f"image smaller than the {window}x{window} window", pred.shape)
    g = gaussian_window(window, sigma)
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    mu_x = _filter_valid(pred, g)
    mu_y = _filter_valid(ref, g)
    sxx = _filter_valid(pred * pred, g) - mu_x * mu_x
    syy = _filter_valid(ref * ref, g) - mu_y * mu_y
    sxy = _filter_valid(pred * ref, g) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * sxy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (sxx + syy + c2)
    return num / den


def ssim(pred, ref, peak: float = 1.0) -> float:
    """Mean SSIM over the valid region (11x11 Gaussian window, sigma 1.5)."""
    return float(np.mean(ssim_map(pred, ref, peak)))


def iou(pred, ref, threshold: float = 0.5) -> float:
    """IoU of the occupied class, i.e. values below ``threshold`` (inside = 0)."""
    pred, ref = _pair(pred, ref)
    a = pred < threshold
    b = ref < threshold
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


@dataclass
class MetricReport:
    task: str
    method: str
    metric: str
    value: float
    config_hash: str

    def to_json(self):
        d = asdict(self)
        v = self.value
        if math.isnan(v):
            d["value"] = "NaN"
        elif math.isinf(v):
            d["value"] = "Infinity" if v > 0 else "-Infinity"
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line):
        d = json.loads(line)
        d["value"] = float(d["value"])
        return cls(**d)


def append_reports(path, reports):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a") as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")


def read_reports(path):
    with Path(path).open() as fh:
        return [MetricReport.from_json(line) for line in fh if line.strip()]


def pivot_table(reports):
    """Text table: one row per method, one column per task/metric."""
    columns = sorted({(r.task, r.metric) for r in reports})
    methods = sorted({r.method for r in reports})
    cell = {(r.method, r.task, r.metric): r.value for r in reports}
    header = ["method"] + [f"{t}/{m}" for t, m in columns]
    rows = [header]
    for meth in methods:
        row = [meth]
        for t, m in columns:
            v = cell.get((meth, t, m))
            row.append("-" if v is None else ("NaN" if math.isnan(v) else f"{v:.6g}"))
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
