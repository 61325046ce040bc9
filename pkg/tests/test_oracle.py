import numpy as np
import pytest

from condstein.errors import GridMismatchError, SizeError
from condstein.measures import ConditionalModel, FiniteDiscrete, Gaussian, JointTable, joint_table
from condstein.oracle import (
    characterize_finite,
    conditional_expectation_check,
    indicator_dictionary,
    marginals_match,
    stein_matrix_solve,
    tv_exact,
    wasserstein_exact,
)
from condstein.operators import independent_of_y, constant
from condstein.suites import CHARACTERIZATION_KINDS, characterization_case, random_model


def point(x, y):
    return JointTable([x], [y], [[1.0]])


def random_table(rng, nx=4, ny=3):
    mass = rng.dirichlet(np.ones(nx * ny)).reshape(nx, ny)
    return JointTable(np.arange(nx, dtype=float), np.arange(ny, dtype=float), mass)


class TestTV:
    def test_disjoint_points(self):
        assert tv_exact(point(0, 0), point(1, 0)) == 1.0

    def test_identical(self):
        t = random_table(np.random.default_rng(0))
        assert tv_exact(t, t) == 0.0

    def test_half_overlap(self):
        a = JointTable([0, 1], [0], [[0.5], [0.5]])
        b = JointTable([1, 2], [0], [[0.5], [0.5]])
        assert tv_exact(a, b) == pytest.approx(0.5, abs=1e-15)


class TestWasserstein:
    def test_point_masses(self):
        assert wasserstein_exact(point(0, 0), point(3, 4)) == pytest.approx(5.0, abs=1e-8)

    def test_vertical_shift(self):
        a = JointTable([0, 1], [0], [[0.5], [0.5]])
        b = JointTable([0, 1], [1], [[0.5], [0.5]])
        assert wasserstein_exact(a, b) == pytest.approx(1.0, abs=1e-8)

    def test_metric_axioms(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            a, b, c = (random_table(rng) for _ in range(3))
            ab, bc, ac = wasserstein_exact(a, b), wasserstein_exact(b, c), wasserstein_exact(a, c)
            assert wasserstein_exact(a, a) <= 1e-8
            assert ab == pytest.approx(wasserstein_exact(b, a), abs=1e-8)
            assert ac <= ab + bc + 1e-8

    def test_tv_times_diameter_dominates(self):
        # W <= diam * TV on a bounded grid
        rng = np.random.default_rng(2)
        for _ in range(10):
            a, b = random_table(rng), random_table(rng)
            assert wasserstein_exact(a, b) <= np.hypot(3, 2) * tv_exact(a, b) + 1e-8

    def test_size_cap(self):
        big = JointTable(np.arange(250.0), [0.0], np.full((250, 1), 1 / 250))
        with pytest.raises(SizeError):
            wasserstein_exact(big, big)


class TestCharacterization:
    @pytest.mark.parametrize("i,kind", list(enumerate(CHARACTERIZATION_KINDS)))
    def test_agrees_with_table_comparison(self, i, kind):
        rng = np.random.default_rng(100 + i)
        for shape in ((3, 2), (5, 3)):
            joint, model = characterization_case(rng, *shape, kind)
            same = tv_exact(joint, joint_table(model)) <= 1e-10
            assert characterize_finite(joint, model) == same

    def test_indicator_count(self):
        model = random_model(np.random.default_rng(3), 5, 3)
        assert len(indicator_dictionary(model)) == sum(f.support.size - 1 for f in model.families)

    def test_grid_mismatch(self):
        model = ConditionalModel.build([0], [1], [FiniteDiscrete.of([0, 1], [.5, .5])])
        with pytest.raises(GridMismatchError):
            characterize_finite(point(7, 0), model)
        cont = ConditionalModel.build([0], [1], [Gaussian(0, 1)])
        with pytest.raises(GridMismatchError):
            characterize_finite(point(0, 0), cont)

    def test_conditional_expectations_vanish_when_matched(self):
        model = random_model(np.random.default_rng(4), 4, 3)
        f = indicator_dictionary(model)[0]
        for _, v in conditional_expectation_check(joint_table(model), model, f):
            assert abs(v) <= 1e-12

    def test_marginals_match(self):
        model = random_model(np.random.default_rng(5), 3, 2)
        assert marginals_match(joint_table(model), model)
        other = ConditionalModel.build(model.y_values, [0.5, 0.5], model.families)
        if not np.allclose(model.y_weights.weights, 0.5):
            assert not marginals_match(joint_table(other), model)


def test_stein_matrix_solve_two_points():
    # f(s0) = 0; N f(s0) = (p1/p0) f(s1) = h(s0) - E h
    fam = FiniteDiscrete.of([0, 1], [0.25, 0.75])
    f = stein_matrix_solve(fam, [1.0, 0.0])
    assert f[0] == 0.0
    assert f[1] == pytest.approx(0.75 * 0.25 / 0.75, abs=1e-15)


def test_constant_function_outside_indicators():
    model = random_model(np.random.default_rng(6), 3, 2)
    vals = conditional_expectation_check(joint_table(model), model, independent_of_y(constant(0.0)))
    assert all(v == 0.0 for _, v in vals)
