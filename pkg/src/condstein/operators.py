"""Stein operators for the catalogued target families.

=================  ==========================================  ===================
family             operator on f                               class constraint
=================  ==========================================  ===================
Gaussian(m, s2)    f'(x) - (x - m)/s2 * f(x)                   bounded, bounded f'
Poisson(lam)       lam*f(k+1) - k*f(k)                         bounded
Gamma(a, b)        x*f'(x) + (a - b*x)*f(x)                    bounded, bounded f'
FiniteDiscrete(p)  f(s_{k+1})*p_{k+1}/p_k - f(s_k), -f(s_K)    f(s_0) = 0
=================  ==========================================  ===================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BoundaryError, DomainError
from .measures import ConditionalModel, FiniteDiscrete, Gamma, Gaussian, Poisson, TargetFamily
from .quadrature import integrate

EXPECT_TOL = 1e-12
GAMMA_TAIL = 1e-40


def fd_step(x):
    return np.maximum(1e-6, 1e-6 * np.abs(x))


@dataclass(frozen=True)
class TestFunction:
    """A univariate test function with (optional) analytic derivative.

    ``eval`` and ``deriv`` are vectorised over numpy arrays. When ``deriv``
    is missing a centred finite difference is used. ``jumps`` lists known
    points of discontinuity of the function or of its derivative, used as
    quadrature breakpoints.
    """

    __test__ = False  # not a pytest class

    eval: Callable
    deriv: Callable | None = None
    domain_kind: str = "continuous"
    label: str = ""
    jumps: tuple = ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.eval(x), dtype=float), x.shape).copy()

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.deriv is not None:
            return np.broadcast_to(np.asarray(self.deriv(x), dtype=float), x.shape).copy()
        h = fd_step(x)
        return (self(x + h) - self(x - h)) / (2 * h)


ZERO = TestFunction(lambda x: np.zeros_like(x), lambda x: np.zeros_like(x), label="0")


def constant(c: float, domain_kind: str = "continuous") -> TestFunction:
    return TestFunction(
        lambda x: np.full_like(x, c), lambda x: np.zeros_like(x), domain_kind, label=f"{c:g}"
    )


def polynomial(coeffs, domain_kind: str = "continuous", label: str = "") -> TestFunction:
    """Polynomial with coefficients in increasing degree."""
    p = np.polynomial.Polynomial(coeffs)
    dp = p.deriv()
    return TestFunction(lambda x: p(x), lambda x: dp(x), domain_kind, label or str(p))


class BivariateTestFunction:
    """f(x, y) whose section at each y is a TestFunction.

    The operator acts on the first argument only.
    """

    __test__ = False

    label = ""

    def section(self, y: float) -> TestFunction:
        raise NotImplementedError

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        out = np.zeros(x.shape)
        for yv in np.unique(y):
            m = y == yv
            out[m] = self.section(float(yv))(x[m])
        return out


class FromCallable(BivariateTestFunction):
    """Sections taken from a vectorised callable ``fn(x, y)``."""

    def __init__(self, fn, dfn=None, domain_kind="continuous", label=""):
        self.fn = fn
        self.dfn = dfn
        self.domain_kind = domain_kind
        self.label = label

    def section(self, y):
        deriv = None if self.dfn is None else (lambda x: self.dfn(x, y))
        return TestFunction(lambda x: self.fn(x, y), deriv, self.domain_kind, self.label)


class SectionTable(BivariateTestFunction):
    """Explicit sections on a finite set of y; zero for every other y."""

    def __init__(self, sections: dict, label=""):
        self.sections = {float(k): v for k, v in sections.items()}
        self.label = label

    def section(self, y):
        return self.sections.get(float(y), ZERO)


def independent_of_y(f: TestFunction) -> BivariateTestFunction:
    return FromCallable(lambda x, y: f(x), None if f.deriv is None else (lambda x, y: f.derivative(x)),
                        f.domain_kind, f.label)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


def check_domain(family: TargetFamily, x) -> np.ndarray:
    """Validate that every x lies in the operator domain; return x as array."""
    x = np.asarray(x, dtype=float)
    if isinstance(family, Poisson):
        bad = (x < 0) | (x != np.floor(x))
    elif isinstance(family, Gamma):
        bad = ~(x > 0)
    elif isinstance(family, FiniteDiscrete):
        bad = family.index_of(x) < 0
    else:
        bad = ~np.isfinite(x)
    if np.any(bad):
        raise DomainError(f"{family.tag}: points outside the domain: {x[bad][:5].tolist()}")
    return x


def apply(family: TargetFamily, f: TestFunction, x):
    """N f(x) for the family's Stein operator, vectorised over ``x``."""
    x = check_domain(family, x)
    if isinstance(family, Gaussian):
        return f.derivative(x) - (x - family.mean) / family.variance * f(x)
    if isinstance(family, Poisson):
        return family.lam * f(x + 1) - x * f(x)
    if isinstance(family, Gamma):
        return x * f.derivative(x) + (family.shape - family.rate * x) * f(x)
    if isinstance(family, FiniteDiscrete):
        s, p = family.support, family.weights
        if abs(float(f(s[:1])[0])) > 1e-12:
            raise BoundaryError(
                f"FiniteDiscrete class requires f(s_0) = 0, got f({s[0]}) = {float(f(s[:1])[0])}"
            )
        k = family.index_of(x)
        last = k == s.size - 1
        nxt = np.minimum(k + 1, s.size - 1)
        ratio = p[nxt] / p[k]
        up = np.where(last, 0.0, f(s[nxt]) * ratio)
        return up - f(x)
    raise TypeError(f"no Stein operator for {family!r}")


def expectation(family: TargetFamily, fn, jumps=(), tol=EXPECT_TOL) -> float:
    """E_ν[fn(X)] by exact summation (discrete) or adaptive quadrature.

    Continuous families are integrated on their truncation range: m ± 12σ
    for Gaussian, the [1e-40, 1 - 1e-40] quantile range for Gamma (in log
    coordinates; polynomially growing integrands need the wider tail).
    Poisson sums are cut where the pmf drops below 1e-16 of its mode.
    """
    if isinstance(family, FiniteDiscrete):
        return float(np.sum(family.weights * np.asarray(fn(family.support), dtype=float)))
    if isinstance(family, Poisson):
        lo, hi = family.truncation()
        k = np.arange(lo, hi + 1, dtype=float)
        return float(np.sum(np.exp(family.logpmf(k)) * np.asarray(fn(k), dtype=float)))
    if isinstance(family, Gaussian):
        lo, hi = family.truncation()
        return integrate(lambda t: fn(t) * np.exp(family.logpdf(t)), lo, hi,
                         points=(family.mean, *jumps), tol=tol)
    if isinstance(family, Gamma):
        lo, hi = family.truncation(GAMMA_TAIL)
        lo = max(lo, 1e-300)
        pts = [np.log(j) for j in jumps if j > 0]
        pts.append(np.log(max(family.shape, 1e-300) / family.rate))

        def integrand(t):
            x = np.exp(t)
            return fn(x) * np.exp(family.logpdf(x) + t)

        return integrate(integrand, np.log(lo), np.log(hi), points=pts, tol=tol)
    raise TypeError(f"unsupported family {family!r}")


def zero_mean_residual(family: TargetFamily, f: TestFunction) -> float:
    """|E_ν[N f]|, which vanishes for every f in the family's class."""
    return abs(expectation(family, lambda x: apply(family, f, x), jumps=f.jumps))


def conditional_apply(model: ConditionalModel, f: BivariateTestFunction, x, y):
    """N_y f(x, y), the operator of ν_y acting on the x-argument."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    out = np.zeros(x.shape)
    for yv in np.unique(y):
        fam = model.family_at(yv)
        m = y == yv
        out[m] = apply(fam, f.section(float(yv)), x[m])
    return out


def polynomial_dictionary(family: TargetFamily, degree: int = 4) -> list[TestFunction]:
    """Monomials 1, x, ..., x^degree adapted to the family's class.

    FiniteDiscrete needs f(s_0) = 0, so monomials are taken in (x - s_0) and
    the constant is replaced by the indicator of x != s_0.
    """
    kind = family.domain_kind
    if not isinstance(family, FiniteDiscrete):
        return [polynomial([0] * d + [1], kind, f"x^{d}") for d in range(degree + 1)]
    s0 = float(family.support[0])
    out = [TestFunction(lambda x: (x != s0).astype(float), None, kind, "1{x!=s0}")]
    for d in range(1, degree + 1):
        out.append(polynomial(np.polynomial.Polynomial.fromroots([s0] * d).coef, kind,
                              f"(x-s0)^{d}"))
    return out
