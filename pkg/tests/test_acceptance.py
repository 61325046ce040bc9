"""Acceptance criteria, each run at its stated tolerance and time limit.

Every test prints one PASS/FAIL line; the full list is repeated in the
pytest terminal summary.
"""

import time

import numpy as np
import pytest

from condstein.discrepancy import (
    empirical_stein,
    exact_stein,
    stein_identity_check,
    tv_bound,
    tv_dictionary,
    w_bound,
)
from condstein.equation import domain_grid, residual, solve
from condstein.measures import (
    ConditionalModel,
    FiniteDiscrete,
    FiniteLaw,
    Gamma,
    Gaussian,
    JointTable,
    Poisson,
    joint_table,
)
from condstein.operators import (
    TestFunction,
    apply,
    constant,
    independent_of_y,
    polynomial_dictionary,
    zero_mean_residual,
)
from condstein.oracle import (
    characterize_finite,
    conditional_expectation_check,
    indicator_dictionary,
    tv_exact,
    wasserstein_exact,
)
from condstein.sim import perturb, sample_independent, sample_model
from condstein.sources import Source
from condstein.suites import (
    CHARACTERIZATION_KINDS,
    SHAPES,
    characterization_case,
    independence_model,
    random_identity_pair,
    tables_equal,
    translation_case,
)

FAMILIES = {
    "Gaussian": Gaussian(0.5, 2.0),
    "Poisson": Poisson(3.0),
    "Gamma": Gamma(2.5, 1.5),
    "FiniteDiscrete": FiniteDiscrete(FiniteLaw([-1.0, 0.0, 0.5, 2.0, 3.0, 7.0],
                                               [0.1, 0.25, 0.15, 0.2, 0.2, 0.1])),
}


def _source_dictionary(family):
    """At least 20 bounded (plus one affine) sources, including indicators."""
    if isinstance(family, FiniteDiscrete):
        s = family.support
        pts = np.concatenate([s, 0.5 * (s[1:] + s[:-1])])
    elif isinstance(family, Poisson):
        pts = np.arange(0.0, 9.0)
    else:
        pts = family.quantile(np.linspace(0.05, 0.95, 9)) + 1e-3  # off the verification grid
    c = float(np.median(pts))
    sc = float(np.ptp(pts)) / 4 or 1.0
    out = [Source.halfline(a) for a in pts[:8]]
    out += [Source.indicator([a]) for a in pts[:2]] if family.is_discrete else []
    for a, b in zip(pts[:6:2], pts[3:9:2]):
        out.append(Source(lambda x, a=a, b=b: ((x > a) & (x <= b)).astype(float), (a, b),
                          label=f"1{{{a:.3g}<x<={b:.3g}}}"))
    out += [
        Source(lambda x: np.tanh((x - c) / sc), label="tanh"),
        Source(np.sin, label="sin"),
        Source(lambda x: np.cos(2 * x), label="cos2"),
        Source(lambda x: np.exp(-((x - c) / sc) ** 2), label="bump"),
        Source(lambda x: 1 / (1 + ((x - c) / sc) ** 2), label="cauchy"),
        Source(np.arctan, label="arctan"),
        Source(lambda x: np.clip(x, c - sc, c + sc), (c - sc, c + sc), label="clip"),
        Source(lambda x: np.minimum(np.abs(x - c), sc), (c - sc, c, c + sc), label="tent"),
        Source.constant(2.0),
        Source.linear(0.5, 1.0),
    ]
    return out


def _fd_residual(family, sol, grid, jumps):
    """Residual with a centred-difference derivative of f instead of the solver's own."""
    if family.is_discrete:
        return residual(family, sol, grid)
    fd = TestFunction(sol.f.eval)
    keep = np.ones(grid.size, bool)
    for j in jumps:
        keep &= np.abs(grid - j) > 1e-4 * max(1.0, abs(j))
    g = grid[keep]
    return float(np.max(np.abs(apply(family, fd, g) - sol.centered(g))))


def test_criterion_1_zero_mean(record):
    t0 = time.perf_counter()
    worst = {}
    for name, fam in FAMILIES.items():
        worst[name] = max(zero_mean_residual(fam, f) for f in polynomial_dictionary(fam, 4))
    secs = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-8 and secs < 5
    record(1, ok, "max |E N f| " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()), secs)
    assert ok


def test_criterion_2_stein_equation_residuals(record):
    t0 = time.perf_counter()
    worst, worst_fd, count = 0.0, 0.0, {}
    for name, fam in FAMILIES.items():
        grid = domain_grid(fam)
        hs = _source_dictionary(fam)
        count[name] = len(hs)
        for h in hs:
            sol = solve(fam, h)
            worst = max(worst, residual(fam, sol, grid))
            worst_fd = max(worst_fd, _fd_residual(fam, sol, grid, h.jumps))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-8 and worst_fd <= 1e-8 and min(count.values()) >= 20 and secs < 30
    record(2, ok, f"max residual {worst:.1e} (finite-difference {worst_fd:.1e}); "
                  f"sources per family {min(count.values())}", secs)
    assert ok


@pytest.fixture(scope="module")
def identity_pairs():
    rng = np.random.default_rng(20261018)
    return [random_identity_pair(rng, *SHAPES[i % 3]) for i in range(50)]


def test_criterion_3_and_5_identity_and_tv_tightness(record, identity_pairs):
    t0 = time.perf_counter()
    worst_identity, n_checks = 0.0, 0
    for joint, model in identity_pairs:
        for h in tv_dictionary(joint, model)[0]:
            lhs, rhs = stein_identity_check(joint, model, h)
            worst_identity = max(worst_identity, abs(lhs - rhs))
            n_checks += 1
    secs3 = time.perf_counter() - t0
    ok3 = worst_identity <= 1e-8 and secs3 < 60
    record(3, ok3, f"max |lhs - rhs| {worst_identity:.1e} over {n_checks} (pair, h) checks", secs3)

    t1 = time.perf_counter()
    worst_tv = 0.0
    for joint, model in identity_pairs:
        rep = tv_bound(joint, model)
        worst_tv = max(worst_tv, abs(rep.sup_value - tv_exact(joint, joint_table(model))))
    secs5 = time.perf_counter() - t1
    ok5 = worst_tv <= 1e-8
    record(5, ok5, f"max |tv_bound - tv_exact| {worst_tv:.1e} on 50 pairs", secs5)
    assert ok3 and ok5


def test_criterion_4_finite_characterization(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    false_accept = false_reject = 0
    per_kind = {k: 0 for k in CHARACTERIZATION_KINDS}
    for shape in SHAPES:
        for i in range(100):
            kind = CHARACTERIZATION_KINDS[i % len(CHARACTERIZATION_KINDS)]
            joint, model = characterization_case(rng, *shape, kind)
            truth = tables_equal(joint, joint_table(model))
            got = characterize_finite(joint, model)
            false_accept += got and not truth
            false_reject += truth and not got
            per_kind[kind] += 1
    secs = time.perf_counter() - t0
    ok = false_accept == 0 and false_reject == 0 and secs < 60
    record(4, ok, f"300 pairs {per_kind}: false accepts {false_accept}, "
                  f"false rejects {false_reject}", secs)
    assert ok


def test_criterion_6_wasserstein_consistency(record, identity_pairs):
    t0 = time.perf_counter()
    excess = -np.inf
    for joint, model in identity_pairs:
        excess = max(excess, w_bound(joint, model).sup_value
                     - wasserstein_exact(joint, joint_table(model)))
    ratios = {}
    for eps in (0.1, 0.5, 1.0):
        observed, model = translation_case(eps)
        ratios[eps] = w_bound(observed, model).sup_value / eps
    secs = time.perf_counter() - t0
    ok = excess <= 1e-8 and min(ratios.values()) >= 0.99 and secs < 120
    record(6, ok, f"max (w_bound - W_LP) {excess:.1e}; translation sup/eps "
                  + ", ".join(f"{k}:{v:.6f}" for k, v in ratios.items()), secs)
    assert ok


def test_criterion_7_independence_reduction(record):
    t0 = time.perf_counter()
    model = independence_model()
    law = model.families[0]
    z = []
    for seed in range(8):
        samples = sample_independent(law, model.y_weights, 100_000, seed)
        rep = tv_bound(samples, model, seed)
        z.append(rep.sup_value / rep.sup_std_error)
    secs = time.perf_counter() - t0
    inside = sum(v <= 4 for v in z)
    ok = inside >= 7 and secs < 60
    record(7, ok, f"{inside}/8 seeds within 4 SE (sup/SE {', '.join(f'{v:.2f}' for v in z)})",
           secs)
    assert ok


def test_criterion_8_mean_shift_sensitivity(record):
    t0 = time.perf_counter()
    model = ConditionalModel.build([0.0, 1.0, 2.0], [0.2, 0.5, 0.3],
                                   [Gaussian(-1.0, 1.0), Gaussian(0.0, 1.0), Gaussian(2.5, 1.0)])
    one = independent_of_y(constant(1.0))
    exact_err, z = 0.0, []
    for i, eps in enumerate((0.02, 0.05, 0.1)):
        shifted = perturb(model, "mean_shift", eps)
        exact_err = max(exact_err, abs(exact_stein(shifted, model, one) + eps))
        value, se = empirical_stein(sample_model(shifted, 100_000, seed=80 + i), model, one)
        z.append(abs(value + eps) / se)
    secs = time.perf_counter() - t0
    ok = exact_err <= 1e-10 and max(z) <= 5 and secs < 30
    record(8, ok, f"exact error {exact_err:.1e}; empirical |value + eps|/SE "
                  + ", ".join(f"{v:.2f}" for v in z), secs)
    assert ok


def test_criterion_9_per_slice_check(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    matched_worst, leak, signal = 0.0, 0.0, np.inf
    for i in range(30):
        joint, model = characterization_case(rng, *SHAPES[i % 3], "matched")
        dictionary = indicator_dictionary(model)
        for f in dictionary:
            matched_worst = max(matched_worst,
                                max(abs(v) for _, v in conditional_expectation_check(joint, model, f)))
        # move mass inside one column
        j = rng.integers(model.y_values.size)
        m = joint.mass.copy()
        a, b = rng.choice(joint.x_grid.size, 2, replace=False)
        d = 0.5 * m[a, j]
        m[a, j] -= d
        m[b, j] += d
        bent = JointTable(joint.x_grid, joint.y_grid, m)
        best = 0.0
        for f in dictionary:
            for y, v in conditional_expectation_check(bent, model, f):
                if y == model.y_values[j]:
                    best = max(best, abs(v))
                else:
                    leak = max(leak, abs(v))
        signal = min(signal, best)
    # Gaussian slices: symmetric two-point columns, one translated by eps
    model = ConditionalModel.build([0.0, 1.0], [0.5, 0.5], [Gaussian(0.0, 1.0), Gaussian(3.0, 2.0)])
    eps = 0.3
    table = JointTable([-1.0, 1.0, 2.0 + eps, 4.0 + eps], [0.0, 1.0],
                       [[0.25, 0.0], [0.25, 0.0], [0.0, 0.25], [0.0, 0.25]])
    vals = dict(conditional_expectation_check(table, model, independent_of_y(constant(1.0))))
    gauss_ok = abs(vals[0.0]) <= 1e-10 and abs(vals[1.0] + eps / 2.0) <= 1e-12
    secs = time.perf_counter() - t0
    ok = matched_worst <= 1e-10 and leak <= 1e-10 and signal > 1e-6 and gauss_ok and secs < 10
    record(9, ok, f"matched max {matched_worst:.1e}; off-slice leak {leak:.1e}; "
                  f"perturbed-slice min signal {signal:.2e}; Gaussian slices {vals}", secs)
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
