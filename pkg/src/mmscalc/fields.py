"""Closed-form scalar fields with analytic derivatives.

Smooth test data for the calculus operators: polynomial and bump families
on R^d with exact gradients, plus one-dimensional piecewise-affine and
C^2 functions used by the chain-rule checks.  Nothing here depends on the
space machinery; fields evaluate on plain coordinate arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LinearField",
    "QuadraticField",
    "BumpField",
    "GaussianField",
    "TrigField",
    "half_sq_distance",
    "random_trig_field",
    "PiecewiseAffine",
    "abs_fn",
    "SmoothFn",
    "square_fn",
    "sqrt2z_fn",
    "exp_fn",
]


def _as_points(x, d):
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[1] != d:
        raise ValueError("expected points of dimension %d, got %d" % (d, pts.shape[1]))
    return pts


@dataclass(frozen=True)
class LinearField:
    """f(x) = <a, x> + c."""

    a: tuple
    c: float = 0.0

    def value(self, x):
        pts = _as_points(x, len(self.a))
        return pts @ np.asarray(self.a, dtype=float) + self.c

    def grad(self, x):
        pts = _as_points(x, len(self.a))
        return np.broadcast_to(np.asarray(self.a, dtype=float), pts.shape).copy()

    __call__ = value


@dataclass(frozen=True)
class QuadraticField:
    """f(x) = x^T A x / 2 + <b, x> + c with symmetric A."""

    A: tuple
    b: tuple
    c: float = 0.0

    def _mat(self):
        return np.asarray(self.A, dtype=float)

    def value(self, x):
        A = self._mat()
        pts = _as_points(x, A.shape[0])
        return 0.5 * np.einsum("ni,ij,nj->n", pts, A, pts) + pts @ np.asarray(self.b, float) + self.c

    def grad(self, x):
        A = self._mat()
        pts = _as_points(x, A.shape[0])
        return pts @ A + np.asarray(self.b, dtype=float)

    __call__ = value


def half_sq_distance(center):
    """The field x -> |x - center|^2 / 2 (Euclidean), with exact gradient x - center."""
    center = np.asarray(center, dtype=float)
    d = center.size
    A = tuple(map(tuple, np.eye(d)))
    return QuadraticField(A, tuple(-center), 0.5 * float(center @ center))


@dataclass(frozen=True)
class BumpField:
    """Compactly supported mollifier bump.

    f(x) = height * exp(1 - 1 / (1 - u^2)) for u = |x - center| / radius < 1,
    zero outside.  Smooth everywhere; the gradient is
    -2 f(x) (x - center) / (radius^2 (1 - u^2)^2).
    """

    center: tuple
    radius: float
    height: float = 1.0

    def _u2(self, pts):
        c = np.asarray(self.center, dtype=float)
        diff = pts - c
        return diff, np.sum(diff * diff, axis=1) / (self.radius * self.radius)

    def value(self, x):
        pts = _as_points(x, len(self.center))
        _, u2 = self._u2(pts)
        out = np.zeros(len(pts))
        inside = u2 < 1.0
        w = 1.0 - u2[inside]
        out[inside] = self.height * np.exp(1.0 - 1.0 / w)
        return out

    def grad(self, x):
        pts = _as_points(x, len(self.center))
        diff, u2 = self._u2(pts)
        out = np.zeros_like(pts)
        inside = u2 < 1.0
        w = 1.0 - u2[inside]
        f = self.height * np.exp(1.0 - 1.0 / w)
        scale = -2.0 * f / (self.radius * self.radius * w * w)
        out[inside] = diff[inside] * scale[:, None]
        return out

    __call__ = value


@dataclass(frozen=True)
class GaussianField:
    center: tuple
    sigma: float
    height: float = 1.0

    def value(self, x):
        pts = _as_points(x, len(self.center))
        diff = pts - np.asarray(self.center, dtype=float)
        return self.height * np.exp(-0.5 * np.sum(diff * diff, axis=1) / self.sigma**2)

    def grad(self, x):
        pts = _as_points(x, len(self.center))
        diff = pts - np.asarray(self.center, dtype=float)
        f = self.height * np.exp(-0.5 * np.sum(diff * diff, axis=1) / self.sigma**2)
        return -diff * (f / self.sigma**2)[:, None]

    __call__ = value


@dataclass(frozen=True)
class TrigField:
    """Sum of low-frequency cosines: f(x) = sum_k a_k cos(<w_k, x> + p_k)."""

    amps: tuple
    freqs: tuple  # tuple of d-tuples
    phases: tuple

    def value(self, x):
        W = np.asarray(self.freqs, dtype=float)
        pts = _as_points(x, W.shape[1])
        phase = pts @ W.T + np.asarray(self.phases, dtype=float)
        return np.cos(phase) @ np.asarray(self.amps, dtype=float)

    def grad(self, x):
        W = np.asarray(self.freqs, dtype=float)
        pts = _as_points(x, W.shape[1])
        phase = pts @ W.T + np.asarray(self.phases, dtype=float)
        return -(np.sin(phase) * np.asarray(self.amps, dtype=float)) @ W

    __call__ = value


def random_trig_field(rng, d, terms=4, freq=2.0, amp=1.0):
    """Seeded smooth sample field; low frequencies avoid all-tie degeneracies."""
    amps = amp * rng.uniform(0.3, 1.0, size=terms) * rng.choice([-1.0, 1.0], size=terms)
    freqs = rng.uniform(-freq, freq, size=(terms, d))
    phases = rng.uniform(0.0, 2.0 * math.pi, size=terms)
    return TrigField(tuple(amps), tuple(map(tuple, freqs)), tuple(phases))


class PiecewiseAffine:
    """Piecewise-affine function of one variable.

    Defined by sorted interior breakpoints and one slope per piece
    (len(slopes) == len(breaks) + 1), anchored by value y0 at breaks[0]
    (or at 0 if there are no breakpoints).
    """

    def __init__(self, breaks, slopes, y0=0.0):
        self.breaks = np.asarray(breaks, dtype=float)
        self.slopes = np.asarray(slopes, dtype=float)
        if self.slopes.size != self.breaks.size + 1:
            raise ValueError("need len(slopes) == len(breaks) + 1")
        if self.breaks.size and np.any(np.diff(self.breaks) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        self.y0 = float(y0)
        # Precompute values at the breakpoints for O(1) evaluation.
        vals = [self.y0]
        for i in range(1, self.breaks.size):
            vals.append(vals[-1] + self.slopes[i] * (self.breaks[i] - self.breaks[i - 1]))
        self._break_vals = np.asarray(vals)

    def piece(self, z):
        """Index of the affine piece containing z (breakpoints go right)."""
        return np.searchsorted(self.breaks, np.asarray(z, dtype=float), side="right")

    def value(self, z):
        z = np.asarray(z, dtype=float)
        if self.breaks.size == 0:
            return self.y0 + self.slopes[0] * z
        k = self.piece(z)
        anchor_idx = np.clip(k - 1, 0, self.breaks.size - 1)
        anchor_z = self.breaks[anchor_idx]
        anchor_v = self._break_vals[anchor_idx]
        return anchor_v + self.slopes[k] * (z - anchor_z)

    def deriv(self, z, side=1):
        """One-sided slope; side=+1 from the right, side=-1 from the left."""
        z = np.asarray(z, dtype=float)
        k = np.searchsorted(self.breaks, z, side="right" if side > 0 else "left")
        return self.slopes[k]

    def lip(self):
        return float(np.max(np.abs(self.slopes)))

    def min_break_gap(self, values):
        """Smallest distance from the sampled values to any breakpoint."""
        if self.breaks.size == 0:
            return math.inf
        v = np.asarray(values, dtype=float).ravel()
        return float(np.min(np.abs(v[:, None] - self.breaks[None, :])))

    __call__ = value


def abs_fn():
    return PiecewiseAffine([0.0], [-1.0, 1.0], y0=0.0)


@dataclass(frozen=True)
class SmoothFn:
    """Scalar C^2 function bundled with its first two derivatives."""

    f: object = field(repr=False)
    d1: object = field(repr=False)
    d2: object = field(repr=False)
    name: str = ""

    def value(self, z):
        return self.f(np.asarray(z, dtype=float))

    def deriv(self, z):
        return self.d1(np.asarray(z, dtype=float))

    def deriv2(self, z):
        return self.d2(np.asarray(z, dtype=float))

    __call__ = value


def square_fn():
    return SmoothFn(lambda z: z * z, lambda z: 2.0 * z, lambda z: 2.0 * np.ones_like(z), "square")


def sqrt2z_fn():
    """phi(z) = sqrt(2 z), defined for z > 0."""
    return SmoothFn(
        lambda z: np.sqrt(2.0 * z),
        lambda z: 1.0 / np.sqrt(2.0 * z),
        lambda z: -np.power(2.0 * z, -1.5),
        "sqrt2z",
    )


def exp_fn(scale=1.0):
    s = float(scale)
    return SmoothFn(
        lambda z: np.exp(s * z),
        lambda z: s * np.exp(s * z),
        lambda z: s * s * np.exp(s * z),
        "exp",
    )
