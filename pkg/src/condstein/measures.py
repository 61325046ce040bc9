"""Probability-law data model.

Finite laws, the four target families, conditional models (a marginal for
the auxiliary variable plus one target law per auxiliary value), exact joint
tables, sample sets, and the conversions between them: mixture, joint
construction, disintegration and y-binning.

Everything here is immutable once constructed.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import ClassVar, Sequence

import numpy as np
from scipy import special

from .errors import (
    EmptyBinWarning,
    EssentialRangeError,
    MixedModeError,
    OutOfRangeWarning,
    ValidationError,
)

logger = logging.getLogger(__name__)

PROB_TOL = 1e-12


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _check_increasing(grid: np.ndarray, name: str) -> None:
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError(f"{name} must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(grid)):
        raise ValidationError(f"{name} must be finite")
    if np.any(np.diff(grid) <= 0):
        raise ValidationError(f"{name} must be strictly increasing")


@dataclass(frozen=True, eq=False)
class FiniteLaw:
    """Probability law with finite support on the real line."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = _frozen(self.support)
        w = _frozen(self.weights)
        _check_increasing(s, "support")
        if w.shape != s.shape:
            raise ValidationError("support and weights must have equal length")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValidationError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > PROB_TOL:
            raise ValidationError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "weights", w)

    @classmethod
    def point_mass(cls, x: float) -> FiniteLaw:
        return cls([x], [1.0])

    @classmethod
    def uniform(cls, support: Sequence[float]) -> FiniteLaw:
        n = len(support)
        return cls(support, np.full(n, 1.0 / n))

    def __len__(self):
        return self.support.size

    def __eq__(self, other):
        if not isinstance(other, FiniteLaw):
            return NotImplemented
        return np.array_equal(self.support, other.support) and np.array_equal(
            self.weights, other.weights
        )

    def __hash__(self):
        return hash((self.support.tobytes(), self.weights.tobytes()))

    def pmf(self, x) -> np.ndarray:
        """Mass at each point of ``x`` (zero off the support)."""
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.support, x), 0, self.support.size - 1)
        hit = self.support[idx] == x
        return np.where(hit, self.weights[idx], 0.0)

    def mean(self) -> float:
        return float(np.dot(self.support, self.weights))

    def positive(self) -> FiniteLaw:
        """The same law with zero-mass points removed."""
        keep = self.weights > 0
        return FiniteLaw(self.support[keep], self.weights[keep])


# ---------------------------------------------------------------------------
# Target families
# ---------------------------------------------------------------------------


class TargetFamily:
    """Base class for the catalogued target laws.

    Subclasses are frozen dataclasses; ``tag`` names the family in model
    specs and ``domain_kind`` says whether the Stein operator acts through a
    derivative (``"continuous"``) or a forward difference.
    """

    tag: ClassVar[str]
    domain_kind: ClassVar[str]

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"tag": self.tag, "params": self.params()}

    @property
    def is_discrete(self) -> bool:
        return self.domain_kind != "continuous"


def _positive(value, name):
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be a finite positive real, got {value!r}")
    return value


@dataclass(frozen=True)
class Gaussian(TargetFamily):
    mean: float
    variance: float

    tag: ClassVar[str] = "Gaussian"
    domain_kind: ClassVar[str] = "continuous"

    def __post_init__(self):
        if not math.isfinite(float(self.mean)):
            raise ValidationError("mean must be finite")
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "variance", _positive(self.variance, "variance"))

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    def params(self):
        return {"mean": self.mean, "variance": self.variance}

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return -0.5 * z * z - 0.5 * math.log(2 * math.pi) - math.log(self.sd)

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mean) / self.sd)

    def quantile(self, u):
        return self.mean + self.sd * special.ndtri(np.asarray(u, dtype=float))

    def truncation(self) -> tuple[float, float]:
        return self.mean - 12 * self.sd, self.mean + 12 * self.sd


@dataclass(frozen=True)
class Poisson(TargetFamily):
    lam: float

    tag: ClassVar[str] = "Poisson"
    domain_kind: ClassVar[str] = "integer"

    def __post_init__(self):
        object.__setattr__(self, "lam", _positive(self.lam, "lambda"))

    def params(self):
        return {"lambda": self.lam}

    def logpmf(self, k):
        k = np.asarray(k, dtype=float)
        return k * math.log(self.lam) - self.lam - special.gammaln(k + 1)

    def pmf(self, x):
        x = np.asarray(x, dtype=float)
        ok = (x >= 0) & (x == np.floor(x))
        return np.where(ok, np.exp(self.logpmf(np.where(ok, x, 0.0))), 0.0)

    def truncation(self) -> tuple[int, int]:
        """Integer range outside which the pmf is below 1e-16 of its mode."""
        mode = math.floor(self.lam)
        floor_log = float(self.logpmf(mode)) + math.log(1e-16)
        lo = mode
        while lo > 0 and self.logpmf(lo - 1) >= floor_log:
            lo -= 1
        hi = mode
        while self.logpmf(hi + 1) >= floor_log:
            hi += 1
        return lo, hi


@dataclass(frozen=True)
class Gamma(TargetFamily):
    shape: float
    rate: float

    tag: ClassVar[str] = "Gamma"
    domain_kind: ClassVar[str] = "continuous"

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive(self.shape, "shape"))
        object.__setattr__(self, "rate", _positive(self.rate, "rate"))

    def params(self):
        return {"shape": self.shape, "rate": self.rate}

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.shape, self.rate
        return a * math.log(b) + (a - 1) * np.log(x) - b * x - special.gammaln(a)

    def cdf(self, x):
        return special.gammainc(self.shape, self.rate * np.maximum(np.asarray(x, dtype=float), 0.0))

    def sf(self, x):
        return special.gammaincc(self.shape, self.rate * np.maximum(np.asarray(x, dtype=float), 0.0))

    def quantile(self, u):
        return special.gammaincinv(self.shape, np.asarray(u, dtype=float)) / self.rate

    def truncation(self, tail: float = 1e-14) -> tuple[float, float]:
        lo = special.gammaincinv(self.shape, tail) / self.rate
        hi = special.gammainccinv(self.shape, tail) / self.rate
        return float(lo), float(hi)


@dataclass(frozen=True)
class FiniteDiscrete(TargetFamily):
    law: FiniteLaw

    tag: ClassVar[str] = "FiniteDiscrete"
    domain_kind: ClassVar[str] = "discrete"

    def __post_init__(self):
        if not isinstance(self.law, FiniteLaw):
            raise ValidationError("FiniteDiscrete needs a FiniteLaw")
        if np.any(self.law.weights <= 0):
            raise ValidationError(
                "FiniteDiscrete law must have full support; drop zero-mass points first"
            )

    @classmethod
    def of(cls, support, weights) -> FiniteDiscrete:
        """Build from raw arrays, dropping zero-mass points."""
        return cls(FiniteLaw(support, weights).positive())

    @property
    def support(self) -> np.ndarray:
        return self.law.support

    @property
    def weights(self) -> np.ndarray:
        return self.law.weights

    def params(self):
        return {"support": self.law.support.tolist(), "weights": self.law.weights.tolist()}

    def pmf(self, x):
        return self.law.pmf(x)

    def index_of(self, x) -> np.ndarray:
        """Support index of each x; -1 where x is not a support point."""
        x = np.asarray(x, dtype=float)
        s = self.law.support
        idx = np.clip(np.searchsorted(s, x), 0, s.size - 1)
        return np.where(s[idx] == x, idx, -1)


FAMILIES = {cls.tag: cls for cls in (Gaussian, Poisson, Gamma, FiniteDiscrete)}


def family_from_dict(spec: dict) -> TargetFamily:
    """Inverse of ``TargetFamily.to_dict``."""
    tag = spec["tag"]
    p = spec.get("params", {})
    if tag == "Gaussian":
        return Gaussian(p["mean"], p["variance"])
    if tag == "Poisson":
        return Poisson(p["lambda"])
    if tag == "Gamma":
        return Gamma(p["shape"], p["rate"])
    if tag == "FiniteDiscrete":
        return FiniteDiscrete.of(p["support"], p["weights"])
    raise ValidationError(f"unknown family tag {tag!r}")


# ---------------------------------------------------------------------------
# Conditional model, joint table, samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConditionalModel:
    """Target conditional model: μ_Y on a finite essential range plus ν_y per y."""

    y_weights: FiniteLaw
    families: tuple

    def __post_init__(self):
        fams = tuple(self.families)
        if len(fams) != len(self.y_weights):
            raise ValidationError("need exactly one family per y value")
        if np.any(self.y_weights.weights <= 0):
            raise ValidationError("every y weight must be positive (essential range)")
        for fam in fams:
            if not isinstance(fam, TargetFamily):
                raise ValidationError(f"not a TargetFamily: {fam!r}")
        object.__setattr__(self, "families", fams)
        object.__setattr__(
            self, "_lookup", {float(y): f for y, f in zip(self.y_weights.support, fams)}
        )

    @classmethod
    def build(cls, y_values, y_weights, families) -> ConditionalModel:
        return cls(FiniteLaw(y_values, y_weights), tuple(families))

    @classmethod
    def independent(cls, family: TargetFamily, y_law: FiniteLaw) -> ConditionalModel:
        """Constant-family model: the same ν for every y."""
        return cls(y_law, (family,) * len(y_law))

    @property
    def y_values(self) -> np.ndarray:
        return self.y_weights.support

    def family_at(self, y: float) -> TargetFamily:
        try:
            return self._lookup[float(y)]
        except KeyError:
            raise EssentialRangeError(f"y={y!r} is outside the essential range") from None

    def contains(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.y_weights.pmf(y) > 0

    @property
    def all_finite(self) -> bool:
        return all(isinstance(f, FiniteDiscrete) for f in self.families)

    @property
    def all_discrete(self) -> bool:
        return all(f.is_discrete for f in self.families)

    def to_dict(self) -> dict:
        return {
            "y_values": self.y_values.tolist(),
            "y_weights": self.y_weights.weights.tolist(),
            "families": [f.to_dict() for f in self.families],
        }

    @classmethod
    def from_dict(cls, spec: dict) -> ConditionalModel:
        return cls.build(
            spec["y_values"], spec["y_weights"], [family_from_dict(f) for f in spec["families"]]
        )


@dataclass(frozen=True, eq=False)
class JointTable:
    """Exact finite joint pmf; ``mass[i, j]`` is the mass at (x_grid[i], y_grid[j])."""

    x_grid: np.ndarray
    y_grid: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        x = _frozen(self.x_grid)
        y = _frozen(self.y_grid)
        m = _frozen(self.mass)
        _check_increasing(x, "x_grid")
        _check_increasing(y, "y_grid")
        if m.shape != (x.size, y.size):
            raise ValidationError(f"mass has shape {m.shape}, expected {(x.size, y.size)}")
        if np.any(~np.isfinite(m)) or np.any(m < 0):
            raise ValidationError("mass entries must be finite and nonnegative")
        if abs(m.sum() - 1.0) > PROB_TOL:
            raise ValidationError(f"total mass is {m.sum()!r}, not 1")
        object.__setattr__(self, "x_grid", x)
        object.__setattr__(self, "y_grid", y)
        object.__setattr__(self, "mass", m)

    @property
    def y_marginal(self) -> np.ndarray:
        return self.mass.sum(axis=0)

    @property
    def x_marginal(self) -> np.ndarray:
        return self.mass.sum(axis=1)

    def points(self, positive_only: bool = True):
        """Arrays (x, y, mass) over the grid, optionally only where mass > 0."""
        xx, yy = np.meshgrid(self.x_grid, self.y_grid, indexing="ij")
        m = self.mass
        if positive_only:
            keep = m > 0
            return xx[keep], yy[keep], m[keep]
        return xx.ravel(), yy.ravel(), m.ravel()

    def on_grid(self, x_grid, y_grid) -> JointTable:
        """Re-index onto a grid containing every positive-mass point, zero-filled."""
        x_grid = np.asarray(x_grid, dtype=float)
        y_grid = np.asarray(y_grid, dtype=float)
        out = np.zeros((x_grid.size, y_grid.size))
        xs, ys, ms = self.points()
        i = np.searchsorted(x_grid, xs)
        j = np.searchsorted(y_grid, ys)
        ok = (
            (i < x_grid.size)
            & (j < y_grid.size)
            & (x_grid[np.minimum(i, x_grid.size - 1)] == xs)
            & (y_grid[np.minimum(j, y_grid.size - 1)] == ys)
        )
        if not np.all(ok):
            raise ValidationError("target grid does not contain every positive-mass point")
        np.add.at(out, (i, j), ms)
        return JointTable(x_grid, y_grid, out)

    def expect(self, h) -> float:
        """E[h(X, Y)] under the table; ``h`` is vectorised over (x, y)."""
        xs, ys, ms = self.points()
        return float(np.sum(ms * np.asarray(h(xs, ys), dtype=float)))

    def to_dict(self) -> dict:
        return {
            "x_grid": self.x_grid.tolist(),
            "y_grid": self.y_grid.tolist(),
            "mass": self.mass.tolist(),
        }

    @classmethod
    def from_dict(cls, spec: dict) -> JointTable:
        return cls(spec["x_grid"], spec["y_grid"], spec["mass"])


def common_grid(*tables: JointTable) -> tuple[np.ndarray, np.ndarray]:
    xs = np.unique(np.concatenate([t.x_grid for t in tables]))
    ys = np.unique(np.concatenate([t.y_grid for t in tables]))
    return xs, ys


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Observed (x, y) pairs."""

    x: np.ndarray
    y: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        x = _frozen(self.x)
        y = _frozen(self.y)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValidationError("x and y must be 1-d arrays of equal length")
        if x.size == 0:
            raise ValidationError("sample set is empty")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValidationError("sample coordinates must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_pairs(cls, pairs, provenance="") -> SampleSet:
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], provenance)

    def __len__(self):
        return self.x.size

    @property
    def pairs(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def to_table(self) -> JointTable:
        """Empirical joint pmf of the samples."""
        xg, xi = np.unique(self.x, return_inverse=True)
        yg, yi = np.unique(self.y, return_inverse=True)
        counts = np.zeros((xg.size, yg.size))
        np.add.at(counts, (xi, yi), 1.0)
        return JointTable(xg, yg, counts / len(self))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def _section_masses(family: TargetFamily, grid: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """Support points and masses of one conditional law for table construction."""
    if isinstance(family, FiniteDiscrete):
        return family.support, family.weights
    if grid is None:
        raise MixedModeError(
            f"{family.tag} family has no finite support; pass a truncation grid"
        )
    grid = np.asarray(grid, dtype=float)
    if isinstance(family, Poisson):
        w = family.pmf(grid)
    else:
        # cell masses; cells split at midpoints, outer cells run to the domain edge
        mids = 0.5 * (grid[1:] + grid[:-1])
        cdf = np.concatenate([[0.0], family.cdf(mids), [1.0]])
        w = np.diff(cdf)
    if abs(w.sum() - 1.0) > PROB_TOL:
        raise MixedModeError(
            f"truncation grid carries mass {w.sum()!r} of the {family.tag} family"
        )
    return grid, w


def joint_table(model: ConditionalModel, grid=None) -> JointTable:
    """The joint law of (M, Y): mass(x, y) = μ_Y(y)·ν_y({x}).

    ``grid`` is a shared truncation grid, needed only when some family is
    not FiniteDiscrete. Poisson masses are taken at the grid points;
    continuous families are discretised into midpoint cells.
    """
    sections = [_section_masses(f, grid) for f in model.families]
    x_grid = np.unique(np.concatenate([s for s, _ in sections]))
    mass = np.zeros((x_grid.size, len(model.families)))
    for j, ((s, w), wy) in enumerate(zip(sections, model.y_weights.weights)):
        mass[np.searchsorted(x_grid, s), j] = wy * w
    return JointTable(x_grid, model.y_values, mass)


def mixture_marginal(model: ConditionalModel, grid=None) -> FiniteLaw:
    """μ_M(A) = Σ_y μ_Y(y) ν_y(A) on the union of the conditional supports."""
    sections = [_section_masses(f, grid) for f in model.families]
    support = np.unique(np.concatenate([s for s, _ in sections]))
    weights = np.zeros(support.size)
    for (s, w), wy in zip(sections, model.y_weights.weights):
        weights[np.searchsorted(support, s)] += wy * w
    return FiniteLaw(support, weights)


def disintegrate(joint: JointTable) -> ConditionalModel:
    """Split a joint table into μ_Y and normalized conditional columns.

    Columns with zero mass are dropped; they lie outside the essential range.
    """
    col = joint.y_marginal
    keep = col > 0
    dropped = int((~keep).sum())
    if dropped:
        logger.info("disintegrate: dropped %d zero-mass y columns", dropped)
    families = []
    for j in np.flatnonzero(keep):
        column = joint.mass[:, j]
        nz = column > 0
        families.append(FiniteDiscrete(FiniteLaw(joint.x_grid[nz], column[nz] / col[j])))
    wy = col[keep]
    return ConditionalModel(FiniteLaw(joint.y_grid[keep], wy / wy.sum()), tuple(families))


def bin_samples(samples: SampleSet, edges) -> SampleSet:
    """Replace each y by the midpoint of its bin.

    Bins are half-open ``[e_i, e_{i+1})`` except the last, which is closed.
    Pairs with y outside ``[edges[0], edges[-1]]`` are dropped and counted.
    """
    edges = np.asarray(edges, dtype=float)
    _check_increasing(edges, "edges")
    if edges.size < 2:
        raise ValidationError("need at least two bin edges")
    y = samples.y
    inside = (y >= edges[0]) & (y <= edges[-1])
    n_out = int((~inside).sum())
    if n_out:
        warnings.warn(f"{n_out} samples outside the bin range were dropped", OutOfRangeWarning)
    if not inside.any():
        raise ValidationError("no sample falls inside the bin range")
    idx = np.clip(np.searchsorted(edges, y[inside], side="right") - 1, 0, edges.size - 2)
    mids = 0.5 * (edges[1:] + edges[:-1])
    counts = np.bincount(idx, minlength=mids.size)
    if np.any(counts == 0):
        empty = np.flatnonzero(counts == 0).tolist()
        warnings.warn(f"empty bins: {empty}", EmptyBinWarning)
    label = f"{samples.provenance}|binned({edges.size - 1} bins; dropped={n_out})"
    return SampleSet(samples.x[inside], mids[idx], label)
