"""Numerical checks of the cosine-power series behind the Gaussian window.

The series ``sum_n A_n cos^n(2x)`` with
``A_n = sum_j (-1)^(n+j) / (2^(n+j) n! j!)`` collapses to ``exp(-cos^2 x)``.
Everything here is evaluated in float64 with ratio recurrences for the
factorials.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InrError

MAX_ORDER = 150


@dataclass
class SeriesCoefficients:
    order_cap: int
    inner_cap: int
    values: list


@dataclass
class HarmonicExpansion:
    """``cos^n(t) = dc + sum(amp * cos(k t) for k, amp in harmonics)``."""

    n: int
    dc: float
    harmonics: list = field(default_factory=list)

    def evaluate(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        out = np.full(theta.shape, self.dc)
        for k, amp in self.harmonics:
            out = out + amp * np.cos(k * theta)
        return out


def _leading_term(n):
    # 1 / (2^n n!) built as a product of ratios so nothing overflows
    term = 1.0
    for i in range(1, n + 1):
        term /= 2.0 * i
    return term


def coefficient_A(n: int, inner_cap: int) -> float:
    """Partial sum of ``A_n`` over ``j = 0 .. inner_cap``."""
    if inner_cap < 1:
        raise ValueError(f"inner_cap must be >= 1, got {inner_cap}")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n > MAX_ORDER:
        raise InrError(f"coefficient A_{n} underflows float64 (max order {MAX_ORDER})")
    term = _leading_term(n) * (-1.0 if n % 2 else 1.0)
    total = term
    for j in range(1, inner_cap + 1):
        term *= -0.5 / j
        total += term
    return total


def coefficients(order_cap: int, inner_cap: int) -> SeriesCoefficients:
    vals = [coefficient_A(n, inner_cap) for n in range(order_cap + 1)]
    return SeriesCoefficients(order_cap, inner_cap, vals)


def closed_form_A(n: int) -> float:
    """``(-1)^n e^{-1/2} / (2^n n!)``: the j-sum factored out as ``e^{-1/2}``."""
    sign = -1.0 if n % 2 else 1.0
    return sign * math.exp(-0.5) / (2.0**n * math.factorial(n))


def cosine_power_expand(n: int) -> HarmonicExpansion:
    """Power reduction of ``cos^n``. Odd n has no DC term."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    scale = 2.0**-n
    harmonics = []
    for k in range((n + 1) // 2):
        harmonics.append((n - 2 * k, 2.0 * math.comb(n, k) * scale))
    harmonics.reverse()
    dc = math.comb(n, n // 2) * scale if n % 2 == 0 else 0.0
    return HarmonicExpansion(n, dc, harmonics)


def partial_series(x, order_cap: int, inner_cap: int):
    """``sum_{n <= order_cap} A_n cos^n(2x)``, accumulated in ascending n."""
    if order_cap < 0:
        raise ValueError(f"order_cap must be >= 0, got {order_cap}")
    c = np.cos(2.0 * np.asarray(x, dtype=np.float64))
    total = np.zeros_like(c)
    power = np.ones_like(c)
    for n in range(order_cap + 1):
        total = total + coefficient_A(n, inner_cap) * power
        power = power * c
    return total if total.ndim else float(total)


def target(x):
    return np.exp(-np.square(np.cos(x)))


def identity_residual(order_cap: int, inner_cap: int, grid_points: int = 1001) -> float:
    if grid_points < 2:
        raise ValueError(f"grid_points must be >= 2, got {grid_points}")
    x = np.linspace(-np.pi, np.pi, grid_points)
    return float(np.max(np.abs(partial_series(x, order_cap, inner_cap) - target(x))))


def verify(order_cap=30, inner_cap=40, grid_points=1001, bound_order=50,
           closed_form_order=20, power_order=12):
    """Run the invariant suite. Returns a JSON-ready report; the residual is
    informational, anything under ``bound_violations`` is a failure."""
    violations = []
    for n in range(bound_order + 1):
        a = coefficient_A(n, inner_cap)
        if abs(a) > 2.0**-n:
            violations.append({"check": "weierstrass_bound", "n": n, "value": a, "bound": 2.0**-n})
    for n in range(closed_form_order + 1):
        a = coefficient_A(n, inner_cap)
        err = abs(a - closed_form_A(n))
        if not err < 1e-14:
            violations.append({"check": "closed_form", "n": n, "value": a, "error": err})
        if np.sign(a) != (-1) ** n:
            violations.append({"check": "sign_alternation", "n": n, "value": a})
    theta = np.linspace(-np.pi, np.pi, 1000)
    for n in range(power_order + 1):
        err = float(np.max(np.abs(cosine_power_expand(n).evaluate(theta) - np.cos(theta) ** n)))
        if not err < 1e-12:
            violations.append({"check": "power_reduction", "n": n, "error": err})
    x = np.linspace(-np.pi, np.pi, grid_points)
    if not np.array_equal(partial_series(x, order_cap, inner_cap), partial_series(-x, order_cap, inner_cap)):
        violations.append({"check": "evenness"})
    return {
        "order_cap": order_cap,
        "inner_cap": inner_cap,
        "grid_points": grid_points,
        "residual": identity_residual(order_cap, inner_cap, grid_points),
        "bound_violations": violations,
    }
