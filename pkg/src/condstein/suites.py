"""Seeded scenario generators and the self-validation suites behind ``condstein validate``.

Each suite returns a list of :class:`CheckResult`; the acceptance tests use
the same generators at full size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discrepancy import empirical_stein, stein_identity_check, tv_bound, tv_dictionary, w_bound
from .measures import (
    ConditionalModel,
    FiniteDiscrete,
    FiniteLaw,
    Gaussian,
    JointTable,
    joint_table,
)
from .oracle import (
    TABLE_TOL,
    characterize_finite,
    tv_exact,
    wasserstein_exact,
)
from .operators import independent_of_y, constant
from .sim import perturb, sample_independent, sample_model

SHAPES = ((3, 2), (5, 3), (8, 4))
STEIN_TOL = 1e-8


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def random_model(rng: np.random.Generator, nx: int, ny: int) -> ConditionalModel:
    """FiniteDiscrete model with full support on an integer-spaced x-grid."""
    x_grid = np.sort(rng.choice(np.arange(-10, 11), nx, replace=False)).astype(float)
    y_grid = np.sort(rng.choice(np.arange(0, 10), ny, replace=False)).astype(float)
    wy = rng.dirichlet(np.ones(ny))
    fams = [FiniteDiscrete(FiniteLaw(x_grid, rng.dirichlet(np.ones(nx)))) for _ in range(ny)]
    return ConditionalModel.build(y_grid, wy, fams)


def random_identity_pair(rng: np.random.Generator, nx: int, ny: int):
    """(joint, model) sharing the y-marginal; joint columns may have zero cells."""
    model = random_model(rng, nx, ny)
    x_grid = model.families[0].support
    mass = np.empty((nx, ny))
    for j, wy in enumerate(model.y_weights.weights):
        col = rng.dirichlet(np.ones(nx))
        col[rng.random(nx) < 0.2] = 0.0
        if col.sum() == 0:
            col[rng.integers(nx)] = 1.0
        mass[:, j] = wy * col / col.sum()
    mass /= mass.sum()
    # renormalising can move column sums by rounding; pin the model weights to them
    model = ConditionalModel.build(model.y_values, mass.sum(axis=0), model.families)
    return JointTable(x_grid, model.y_values, mass), model


CHARACTERIZATION_KINDS = ("matched", "within_column", "across_columns", "swap", "reweight_y",
                          "unrelated")


def characterization_case(rng: np.random.Generator, nx: int, ny: int, kind: str):
    """(joint, model) for one characterization scenario."""
    model = random_model(rng, nx, ny)
    base = joint_table(model)
    m = base.mass.copy()
    if kind == "matched":
        return base, model
    if kind == "within_column":
        j = rng.integers(ny)
        a, b = rng.choice(nx, 2, replace=False)
        d = min(1e-3, m[a, j])
        m[a, j] -= d
        m[b, j] += d
    elif kind == "across_columns":
        i = rng.integers(nx)
        j, k = rng.choice(ny, 2, replace=False)
        d = min(1e-3, m[i, j])
        m[i, j] -= d
        m[i, k] += d
    elif kind == "swap":
        ya, yb = rng.choice(model.y_values, 2, replace=False)
        equal_w = ConditionalModel(FiniteLaw.uniform(model.y_values), model.families)
        return joint_table(perturb(equal_w, "swap_conditionals", y_a=ya, y_b=yb)), equal_w
    elif kind == "reweight_y":
        wy = rng.dirichlet(np.ones(ny))
        return joint_table(ConditionalModel.build(model.y_values, wy, model.families)), model
    else:
        fams = [FiniteDiscrete(FiniteLaw(f.support, rng.dirichlet(np.ones(nx))))
                for f in model.families]
        other = ConditionalModel.build(model.y_values, rng.dirichlet(np.ones(ny)), fams)
        return joint_table(other), model
    return JointTable(base.x_grid, base.y_grid, m), model


def tables_equal(a: JointTable, b: JointTable, tol: float = TABLE_TOL) -> bool:
    xg = np.union1d(a.x_grid, b.x_grid)
    yg = np.union1d(a.y_grid, b.y_grid)
    return bool(np.max(np.abs(a.on_grid(xg, yg).mass - b.on_grid(xg, yg).mass)) <= tol)


def translation_case(eps: float):
    """Gaussian conditional model and its exact x-translation by eps."""
    model = ConditionalModel.build([0.0, 1.0, 2.0], [0.3, 0.3, 0.4],
                                   [Gaussian(0.0, 1.0), Gaussian(1.0, 2.0), Gaussian(-1.0, 0.5)])
    return perturb(model, "mean_shift", eps), model


def independence_model() -> ConditionalModel:
    law = FiniteDiscrete(FiniteLaw([0.0, 1.0, 2.0], [0.2, 0.5, 0.3]))
    return ConditionalModel.independent(law, FiniteLaw([0.0, 1.0], [0.4, 0.6]))


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def suite_identity(seed: int = 0, n_pairs: int = 10) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_pairs):
        joint, model = random_identity_pair(rng, *SHAPES[i % len(SHAPES)])
        for h in tv_dictionary(joint, model, seed)[0]:
            lhs, rhs = stein_identity_check(joint, model, h)
            worst = max(worst, abs(lhs - rhs))
    return [CheckResult("stein identity |lhs - rhs|", worst <= STEIN_TOL, f"max {worst:.3g}")]


def suite_characterization(seed: int = 0, n_per_kind: int = 5) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    wrong = 0
    total = 0
    for shape in SHAPES:
        for kind in CHARACTERIZATION_KINDS:
            for _ in range(n_per_kind):
                joint, model = characterization_case(rng, *shape, kind)
                truth = tables_equal(joint, joint_table(model))
                wrong += characterize_finite(joint, model) != truth
                total += 1
    return [CheckResult("finite characterization", wrong == 0, f"{wrong}/{total} disagreements")]


def suite_bounds(seed: int = 0, n_pairs: int = 6) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    tv_gap = 0.0
    w_excess = -np.inf
    for i in range(n_pairs):
        joint, model = random_identity_pair(rng, *SHAPES[i % len(SHAPES)])
        target = joint_table(model)
        tv_gap = max(tv_gap, abs(tv_bound(joint, model, seed).sup_value - tv_exact(joint, target)))
        w_excess = max(w_excess, w_bound(joint, model, seed).sup_value
                       - wasserstein_exact(joint, target))
    ratio = np.inf
    for eps in (0.1, 0.5, 1.0):
        observed, model = translation_case(eps)
        ratio = min(ratio, w_bound(observed, model, seed).sup_value / eps)
    return [
        CheckResult("tv_bound equals oracle TV", tv_gap <= STEIN_TOL, f"max gap {tv_gap:.3g}"),
        CheckResult("w_bound below oracle W", w_excess <= STEIN_TOL, f"max excess {w_excess:.3g}"),
        CheckResult("translation certified", ratio >= 0.99, f"min sup/eps {ratio:.4f}"),
    ]


def suite_independence(seed: int = 0, n: int = 10_000, n_seeds: int = 8) -> list[CheckResult]:
    model = independence_model()
    law = model.families[0]
    inside = 0
    for s in range(seed, seed + n_seeds):
        samples = sample_independent(law, model.y_weights, n, s)
        rep = tv_bound(samples, model, s)
        inside += rep.sup_value <= 4 * rep.sup_std_error
    return [CheckResult("independence reduction", inside >= n_seeds - 1,
                        f"{inside}/{n_seeds} seeds within 4 SE")]


def suite_sensitivity(seed: int = 0, n: int = 10_000) -> list[CheckResult]:
    model = ConditionalModel.build([0.0, 1.0], [0.5, 0.5], [Gaussian(0.0, 1.0), Gaussian(2.0, 1.0)])
    one = independent_of_y(constant(1.0))
    ok = True
    details = []
    for eps in (0.02, 0.05, 0.1):
        shifted = perturb(model, "mean_shift", eps)
        value, se = empirical_stein(sample_model(shifted, n, seed), model, one)
        ok &= abs(value + eps) <= 5 * se
        details.append(f"eps={eps}: {value:.4g}±{se:.2g}")
    return [CheckResult("mean-shift sensitivity", bool(ok), "; ".join(details))]


SUITES = {
    "identity": suite_identity,
    "characterization": suite_characterization,
    "bounds": suite_bounds,
    "independence": suite_independence,
    "sensitivity": suite_sensitivity,
}
