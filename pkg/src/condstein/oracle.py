"""Brute-force ground truth at desk scale.

Nothing here goes through the Stein solver: distances come from the tables
directly (TV) or from a transport linear program (Wasserstein), and the
finite characterization uses per-point indicator test functions.
"""

from __future__ import annotations

import numpy as np
from scipy import optimize, sparse
from scipy.spatial.distance import cdist

from .errors import GridMismatchError, QuadratureError, SizeError
from .measures import PROB_TOL, ConditionalModel, FiniteDiscrete, JointTable, common_grid
from .operators import SectionTable, TestFunction, conditional_apply

TABLE_TOL = 1e-10
LP_TOL = 1e-8
MAX_SUPPORT = 400


def _aligned(a: JointTable, b: JointTable):
    xg, yg = common_grid(a, b)
    return a.on_grid(xg, yg).mass, b.on_grid(xg, yg).mass


def tv_exact(a: JointTable, b: JointTable) -> float:
    """Half the L1 distance between the two pmfs on their union grid."""
    ma, mb = _aligned(a, b)
    return float(min(1.0, 0.5 * np.abs(ma - mb).sum()))


def wasserstein_exact(a: JointTable, b: JointTable) -> float:
    """Optimal transport cost with Euclidean ground metric, solved as an LP.

    The plan runs between the positive-mass points of ``a`` and of ``b``;
    their combined count is capped at 400.
    """
    xa, ya, ma = a.points()
    xb, yb, mb = b.points()
    if xa.size + xb.size > MAX_SUPPORT:
        raise SizeError(f"{xa.size + xb.size} support points exceed the cap of {MAX_SUPPORT}")
    cost = cdist(np.column_stack([xa, ya]), np.column_stack([xb, yb]))
    na, nb = cost.shape
    # row sums = ma, column sums = mb; the last column constraint is redundant
    rows = sparse.kron(sparse.eye(na), np.ones((1, nb)))
    cols = sparse.kron(np.ones((1, na)), sparse.eye(nb))
    a_eq = sparse.vstack([rows, cols]).tocsr()[:-1]
    b_eq = np.concatenate([ma, mb])[:-1]
    # marginals may disagree with 1 by rounding; rescale b's masses onto a's total
    b_eq[na:] *= ma.sum() / mb.sum()
    res = optimize.linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise QuadratureError(f"transport LP failed: {res.message}")
    return float(max(res.fun, 0.0))


def _check_grid(joint: JointTable, model: ConditionalModel):
    """Raise unless every positive-mass point lies in a conditional support."""
    xs, ys, _ = joint.points()
    for y in np.unique(ys):
        if not model.contains(y):
            raise GridMismatchError(f"joint has mass at y={y:g}, outside the model's y-values")
        fam = model.family_at(y)
        if not isinstance(fam, FiniteDiscrete):
            raise GridMismatchError(f"finite characterization needs FiniteDiscrete, got {fam.tag}")
        off = fam.index_of(xs[ys == y]) < 0
        if np.any(off):
            raise GridMismatchError(
                f"joint has mass at x={xs[ys == y][off][:5].tolist()} (y={y:g}) off the model support"
            )


def indicator_dictionary(model: ConditionalModel) -> list[SectionTable]:
    """f_{j,i}(x, y) = 1{x = s_j} 1{y = y_i} for every s_j above the left endpoint of ν_{y_i}."""
    out = []
    for y, fam in zip(model.y_values, model.families):
        for s in fam.support[1:]:
            tf = TestFunction(lambda x, s=s: (x == s).astype(float), None, "discrete",
                              f"1{{x={s:g}}}")
            out.append(SectionTable({float(y): tf}, f"1{{x={s:g},y={y:g}}}"))
    return out


def characterize_finite(joint: JointTable, model: ConditionalModel, tol: float = TABLE_TOL) -> bool:
    """Finite-range characterization: the conditional discrepancy vanishes on
    every indicator and the y-marginals agree.

    The indicators only see each column up to its total mass, so the
    y-marginal comparison is what pins the column weights.
    """
    _check_grid(joint, model)
    xs, ys, ms = joint.points()
    for f in indicator_dictionary(model):
        if abs(float(np.sum(ms * conditional_apply(model, f, xs, ys)))) > tol:
            return False
    col = np.zeros(model.y_values.size)
    pos = joint.y_marginal > 0
    col[np.searchsorted(model.y_values, joint.y_grid[pos])] = joint.y_marginal[pos]
    return bool(np.max(np.abs(col - model.y_weights.weights)) <= tol)


def conditional_expectation_check(joint: JointTable, model: ConditionalModel, f) -> list:
    """Per-slice conditional expectations Σ_x P(x | y) N_y f(x, y)."""
    xs, ys, ms = joint.points()
    for y in np.unique(ys):
        if not model.contains(y):
            raise GridMismatchError(f"joint has mass at y={y:g}, outside the model's y-values")
    out = []
    col = joint.y_marginal
    for j, y in enumerate(joint.y_grid):
        if col[j] <= 0:
            continue
        sel = ys == y
        vals = conditional_apply(model, f, xs[sel], ys[sel])
        out.append((float(y), float(np.sum(ms[sel] * vals) / col[j])))
    return out


def stein_matrix_solve(family: FiniteDiscrete, h_values) -> np.ndarray:
    """Solve N f = h - E h by a dense least-squares solve of the operator matrix.

    Unknowns are f(s_1), ..., f(s_K) with f(s_0) = 0; returns f on the full
    support. The system is consistent, so the residual is at rounding level.
    """
    p = family.weights
    n = p.size
    h = np.asarray(h_values, dtype=float)
    rhs = h - np.dot(p, h)
    op = -np.eye(n)
    op[np.arange(n - 1), np.arange(1, n)] = p[1:] / p[:-1]
    f = np.zeros(n)
    if n > 1:
        f[1:] = np.linalg.lstsq(op[:, 1:], rhs, rcond=None)[0]
    return f


def marginals_match(a: JointTable, model: ConditionalModel) -> bool:
    col = np.zeros(model.y_values.size)
    pos = a.y_marginal > 0
    if not np.all(model.contains(a.y_grid[pos])):
        return False
    col[np.searchsorted(model.y_values, a.y_grid[pos])] = a.y_marginal[pos]
    return bool(np.max(np.abs(col - model.y_weights.weights)) <= PROB_TOL)
