"""Seeded sampling from conditional models and model perturbations.

Streams come from ``PCG64`` seeded by ``SeedSequence(seed, spawn_key=(stream,))``,
so (seed, stream) pairs give independent, reproducible generators. All
families are sampled by inverse cdf from uniforms drawn up front, which
keeps the output independent of any rejection-loop behaviour.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

from .errors import FamilyError, ValidationError
from .measures import (
    ConditionalModel,
    FiniteDiscrete,
    FiniteLaw,
    Gamma,
    Gaussian,
    Poisson,
    SampleSet,
    TargetFamily,
)

GENERATOR = "numpy.random.PCG64"


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(stream,))))


def _inverse_cdf(family: TargetFamily, u: np.ndarray) -> np.ndarray:
    if isinstance(family, FiniteDiscrete):
        cdf = np.cumsum(family.weights)
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
        return family.support[idx]
    if isinstance(family, Poisson):
        return stats.poisson.ppf(u, family.lam).astype(float)
    if isinstance(family, (Gaussian, Gamma)):
        # u = 0 would map to the lower end of the domain
        return family.quantile(np.clip(u, 1e-300, None))
    raise FamilyError(f"cannot sample {family!r}")


def _sample_y(law: FiniteLaw, u: np.ndarray) -> np.ndarray:
    return _inverse_cdf(FiniteDiscrete(law.positive()), u)


def sample_model(model: ConditionalModel, n: int, seed: int = 0, stream: int = 0) -> SampleSet:
    """n pairs with y ~ μ_Y and x ~ ν_y, deterministic in (seed, stream)."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    rng = rng_for(seed, stream)
    u_y = rng.random(n)
    u_x = rng.random(n)
    y = _sample_y(model.y_weights, u_y)
    x = np.empty(n)
    for yv, fam in zip(model.y_values, model.families):
        m = y == yv
        x[m] = _inverse_cdf(fam, u_x[m])
    return SampleSet(x, y, f"sample_model(n={n}, seed={seed}, stream={stream})")


def sample_independent(x_law: TargetFamily, y_law: FiniteLaw, n: int, seed: int = 0,
                       stream: int = 0) -> SampleSet:
    """x ~ x_law and y ~ y_law drawn independently."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    rng = rng_for(seed, stream)
    u_y = rng.random(n)
    u_x = rng.random(n)
    return SampleSet(_inverse_cdf(x_law, u_x), _sample_y(y_law, u_y),
                     f"sample_independent(n={n}, seed={seed}, stream={stream})")


# ---------------------------------------------------------------------------
# Perturbations
# ---------------------------------------------------------------------------


def _shift(fam: TargetFamily, eps: float) -> TargetFamily:
    if isinstance(fam, Gaussian):
        return Gaussian(fam.mean + eps, fam.variance)
    if isinstance(fam, Poisson):
        return Poisson(fam.lam + eps)
    if isinstance(fam, Gamma):
        # keep the shape, move the mean a/b to a/b + eps through the rate
        return Gamma(fam.shape, fam.shape / (fam.shape / fam.rate + eps))
    return FiniteDiscrete(FiniteLaw(fam.support + eps, fam.weights))


def _contaminate(fam: TargetFamily, eps: float, noise: FiniteLaw) -> TargetFamily:
    if not isinstance(fam, FiniteDiscrete):
        raise FamilyError(f"contaminate needs FiniteDiscrete families, got {fam.tag}")
    support = np.union1d(fam.support, noise.support)
    weights = (1 - eps) * fam.pmf(support) + eps * noise.pmf(support)
    return FiniteDiscrete.of(support, weights / weights.sum())


def perturb(model: ConditionalModel, kind: str, eps: float = 0.0, noise: FiniteLaw | None = None,
            y_a: float | None = None, y_b: float | None = None) -> ConditionalModel:
    """Perturbed copy of ``model``.

    ``mean_shift``
        Gaussian mean + eps; Poisson lambda + eps; Gamma mean + eps with the
        shape fixed (rate a/(a/b + eps)); FiniteDiscrete support translated.
    ``contaminate``
        ν_y -> (1 - eps) ν_y + eps * noise, FiniteDiscrete families only.
    ``swap_conditionals``
        exchange the families at ``y_a`` and ``y_b``; μ_Y is kept.
    """
    if eps < 0 or (eps > 1 and kind == "contaminate"):
        raise ValidationError(f"eps={eps} out of range")
    if kind == "mean_shift":
        if eps == 0:
            return model
        return ConditionalModel(model.y_weights, tuple(_shift(f, eps) for f in model.families))
    if kind == "contaminate":
        if noise is None:
            raise ValidationError("contaminate needs a noise law")
        if eps == 0:
            return model
        return ConditionalModel(model.y_weights,
                                tuple(_contaminate(f, eps, noise) for f in model.families))
    if kind == "swap_conditionals":
        fa, fb = model.family_at(y_a), model.family_at(y_b)
        swapped = []
        for y, f in zip(model.y_values, model.families):
            swapped.append(fb if y == y_a else fa if y == y_b else f)
        return ConditionalModel(model.y_weights, tuple(swapped))
    raise FamilyError(f"unknown perturbation {kind!r}")
