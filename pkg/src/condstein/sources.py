"""Source functions h for Stein equations, and the TV / Wasserstein dictionaries.

A univariate :class:`Source` carries, besides the vectorised callable, the
list of its jump (or kink) points and a ``kind`` tag. The tag lets the
solver use closed forms for constants, half-line indicators and affine
functions; everything else goes through quadrature.

Bivariate sources expose ``section(y)``; sections at y values outside a
model's essential range are never queried by the solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Source:
    fn: Callable
    jumps: tuple = ()
    kind: str = "general"
    params: tuple = ()
    label: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.fn(x), dtype=float), x.shape).copy()

    @classmethod
    def constant(cls, c: float) -> Source:
        c = float(c)
        return cls(lambda x: np.full_like(x, c), (), "constant", (c,), f"const({c:g})")

    @classmethod
    def halfline(cls, a: float, value: float = 1.0) -> Source:
        """value * 1{x <= a}."""
        a, value = float(a), float(value)
        return cls(lambda x: np.where(x <= a, value, 0.0), (a,), "halfline", (a, value, 0.0),
                   f"{value:g}*1{{x<={a:g}}}")

    @classmethod
    def upper(cls, a: float) -> Source:
        """1{x > a}, stored as 1 - 1{x <= a} so the half-line closed forms apply."""
        a = float(a)
        return cls(lambda x: np.where(x > a, 1.0, 0.0), (a,), "halfline", (a, -1.0, 1.0),
                   f"1{{x>{a:g}}}")

    @classmethod
    def linear(cls, slope: float, intercept: float = 0.0) -> Source:
        slope, intercept = float(slope), float(intercept)
        return cls(lambda x: slope * x + intercept, (), "linear", (slope, intercept),
                   f"{slope:g}*x+{intercept:g}")

    @classmethod
    def indicator(cls, points) -> Source:
        """Indicator of a finite set of points (for discrete targets)."""
        pts = np.unique(np.asarray(points, dtype=float))
        return cls(lambda x: np.isin(x, pts).astype(float), tuple(pts.tolist()), "general", (),
                   f"1{{x in {len(pts)} pts}}")


def as_source(h) -> Source:
    if isinstance(h, Source):
        return h
    return Source(h)


class Source2:
    """Bivariate source h(x, y)."""

    label = ""

    def section(self, y: float) -> Source:
        raise NotImplementedError

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        out = np.zeros(x.shape)
        for yv in np.unique(y):
            m = y == yv
            out[m] = self.section(float(yv))(x[m])
        return out


class Callable2(Source2):
    """Wrap a vectorised ``fn(x, y)``; ``jumps(y)`` gives x-breakpoints per section."""

    def __init__(self, fn, jumps=None, label=""):
        self.fn = fn
        self.jumps = jumps
        self.label = label

    def section(self, y):
        j = () if self.jumps is None else tuple(self.jumps(y))
        return Source(lambda x: self.fn(x, y), j, "general", (), self.label)

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return np.asarray(self.fn(x, y), dtype=float)


class PerSlice(Source2):
    """A Source per y value; every other y maps to the zero section."""

    def __init__(self, sections: dict, label=""):
        self.sections = {float(k): as_source(v) for k, v in sections.items()}
        self.label = label

    def section(self, y):
        return self.sections.get(float(y), ZERO_SOURCE)


ZERO_SOURCE = Source.constant(0.0)


class PointSet(Source2):
    """Indicator of a finite set of (x, y) points."""

    def __init__(self, xs, ys, label="1{(x,y) in A}"):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        self.by_y = {float(y): np.unique(xs[ys == y]) for y in np.unique(ys)}
        self.label = label

    def section(self, y):
        pts = self.by_y.get(float(y))
        if pts is None or pts.size == 0:
            return ZERO_SOURCE
        return Source.indicator(pts)


class Affine(Source2):
    """h(x, y) = a*x + b*y + c."""

    def __init__(self, a, b, c=0.0, label=None):
        self.a, self.b, self.c = float(a), float(b), float(c)
        self.label = label or f"{self.a:g}*x+{self.b:g}*y+{self.c:g}"

    def section(self, y):
        if self.a == 0:
            return Source.constant(self.b * y + self.c)
        return Source.linear(self.a, self.b * y + self.c)

    def __call__(self, x, y):
        return self.a * np.asarray(x, dtype=float) + self.b * np.asarray(y, dtype=float) + self.c


class DistanceTo(Source2):
    """Euclidean distance to an anchor point; 1-Lipschitz on the plane."""

    def __init__(self, ax, ay):
        self.ax, self.ay = float(ax), float(ay)
        self.label = f"dist(({self.ax:.6g},{self.ay:.6g}))"

    def __call__(self, x, y):
        return np.hypot(np.asarray(x, dtype=float) - self.ax, np.asarray(y, dtype=float) - self.ay)

    def section(self, y):
        dy = float(y) - self.ay
        return Source(lambda x: np.hypot(x - self.ax, dy), (self.ax,), "general", (), self.label)


class Ramp(Source2):
    """max(0, u·(x, y) + c) with |u| = 1; 1-Lipschitz."""

    def __init__(self, ux, uy, c):
        self.ux, self.uy, self.c = float(ux), float(uy), float(c)
        self.label = f"ramp(u=({self.ux:.4f},{self.uy:.4f}),c={self.c:.4f})"

    def __call__(self, x, y):
        return np.maximum(0.0, self.ux * np.asarray(x, dtype=float)
                          + self.uy * np.asarray(y, dtype=float) + self.c)

    def section(self, y):
        off = self.uy * float(y) + self.c
        if self.ux == 0:
            return Source.constant(max(0.0, off))
        kink = (-off / self.ux,)
        return Source(lambda x: np.maximum(0.0, self.ux * x + off), kink, "general", (), self.label)


# ---------------------------------------------------------------------------
# Dictionaries
# ---------------------------------------------------------------------------


def lipschitz_dictionary(x_range, y_range, seed=0, n_anchors=5, n_ramps=32) -> list[Source2]:
    """Lipschitz-1 functions on the plane: ±x, ±y, anchor distances, random ramps.

    Anchors lie on an ``n_anchors`` × ``n_anchors`` grid spanning the box;
    ramp directions are uniform on the circle and their offsets put the kink
    through a uniform point of the box.
    """
    (x0, x1), (y0, y1) = x_range, y_range
    out: list[Source2] = [
        Affine(1, 0, label="x"), Affine(-1, 0, label="-x"),
        Affine(0, 1, label="y"), Affine(0, -1, label="-y"),
    ]
    for ax in np.linspace(x0, x1, n_anchors):
        for ay in np.linspace(y0, y1, n_anchors):
            out.append(DistanceTo(ax, ay))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    theta = rng.uniform(0, 2 * np.pi, n_ramps)
    px = rng.uniform(x0, x1, n_ramps)
    py = rng.uniform(y0, y1, n_ramps)
    for t, a, b in zip(theta, px, py):
        ux, uy = np.cos(t), np.sin(t)
        out.append(Ramp(ux, uy, -(ux * a + uy * b)))
    return out
