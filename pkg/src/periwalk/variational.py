"""Discrete vector calculus on the quotient graph and an energy route to K.

Edge fields assign a vector of R^d to every directed edge; node functions
are scalars on quotient nodes.  With a gradient and a divergence in hand,
the unit-cell problem becomes a divergence-form equation, its solution the
minimizer of a quadratic energy whose minimum value is the quadratic form
of the effective diffusivity.

Everything below assumes each edge's reversal is present with the same
rate.  That forces the stationary vector to be uniform and makes the
generator symmetric, which is what the integration-by-parts identities
rest on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditionNotMet, NotReversible, SolveFailed
from .graph import QuotientGraph
from .homogenize import DENSE_NODE_LIMIT, rate_matrix, unit_cell_sigma
from .linalg import RESIDUAL_RTOL, solve_singular_consistent, stationary_nullvector

REVERSIBLE_RTOL = 1e-12
HYPOTHESIS_RTOL = 1e-12


def ensure_reversible(g: QuotientGraph):
    """Require every edge to have a reversal carrying the same rate."""
    for e in g.edges:
        if e.reversal is None:
            raise NotReversible(
                f"edge {e.index} (node {e.origin} jump {e.jump.tolist()}) "
                "has no reversal")
        back = g.edges[e.reversal].rate
        if abs(e.rate - back) > REVERSIBLE_RTOL * e.rate:
            raise NotReversible(
                f"edge {e.index} rate {e.rate!r} vs reversal rate {back!r}")


def is_reversible(g: QuotientGraph):
    try:
        ensure_reversible(g)
    except NotReversible:
        return False
    return True


def _jump_norms_sq(g):
    arr = g.arrays()
    return np.einsum("ei,ei->e", arr.jumps, arr.jumps)


def edge_matrix_field(g):
    """Per-edge conductivity matrices A(e) = nu nu^T lambda, shape (m, d, d)."""
    arr = g.arrays()
    return np.einsum("ei,ej,e->eij", arr.jumps, arr.jumps, arr.rates)


def apply_edge_matrix(g, field):
    """A(e) field(e) per edge; rank-one structure keeps it a scaled jump."""
    arr = g.arrays()
    coef = np.einsum("ei,ei->e", arr.jumps, np.asarray(field, dtype=float))
    return (coef * arr.rates)[:, None] * arr.jumps


def gradient(g, f):
    """Edge field (grad f)(e) = (f(head) - f(tail)) nu_e / |nu_e|^2."""
    arr = g.arrays()
    f = np.asarray(f, dtype=float)
    diff = f[arr.targets] - f[arr.origins]
    return (diff / _jump_norms_sq(g))[:, None] * arr.jumps


def divergence(g, field):
    """Node function (div F)(y) = sum over out-edges of nu^T F(e) / |nu|^2."""
    arr = g.arrays()
    vals = np.einsum("ei,ei->e", arr.jumps, np.asarray(field, dtype=float))
    out = np.zeros(g.n_nodes)
    np.add.at(out, arr.origins, vals / _jump_norms_sq(g))
    return out


def edge_inner(a, b):
    """Inner product of edge fields, summing all components over all edges."""
    return float(np.sum(np.asarray(a, dtype=float) * np.asarray(b, dtype=float)))


def divergence_theorem(g, field, node_fn):
    """Both sides of the summation-by-parts identity, hypotheses checked.

    Returns ``(lhs, rhs)`` with lhs = (F, grad g) and
    rhs = -2 sum_y (div F)(y) g(y).  The identity needs either the edge
    field to be symmetric under reversal or the node function to be
    antisymmetric across every edge; when neither verifies the identity
    can fail, so :class:`ConditionNotMet` is raised instead of a number
    that looks trustworthy.
    """
    field = np.asarray(field, dtype=float)
    node_fn = np.asarray(node_fn, dtype=float)

    rev = np.array([-1 if e.reversal is None else e.reversal for e in g.edges],
                   dtype=np.int64)
    if np.all(rev >= 0) and g.n_edges:
        gap = np.max(np.abs(field - field[rev]))
        field_symmetric = gap <= HYPOTHESIS_RTOL * (1.0 + np.max(np.abs(field)))
    else:
        field_symmetric = g.n_edges == 0
    arr = g.arrays()
    if g.n_edges:
        anti = np.max(np.abs(node_fn[arr.targets] + node_fn[arr.origins]))
        fn_antisymmetric = anti <= HYPOTHESIS_RTOL * (1.0 + np.max(np.abs(node_fn)))
    else:
        fn_antisymmetric = True
    if not (field_symmetric or fn_antisymmetric):
        raise ConditionNotMet(
            "summation by parts needs a reversal-symmetric edge field or an "
            "edge-antisymmetric node function; neither holds")

    lhs = edge_inner(field, gradient(g, node_fn))
    rhs = -2.0 * float(divergence(g, field) @ node_fn)
    return lhs, rhs


@dataclass
class DirectionPotential:
    """Unit-cell potential for one probe direction.

    ``upsilon`` solves the transposed-generator system with right side
    sigma xi; equivalently div(A(grad upsilon + xi/n)) = 0.  Both residuals
    are recorded; they measure the same defect through different formulas.
    """

    xi: np.ndarray
    upsilon: np.ndarray
    system_residual: float
    form_residual: float


def potential_for_direction(g, xi, gauge="mean_zero", method="auto"):
    ensure_reversible(g)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (g.dim,):
        raise ValueError(f"direction must have shape ({g.dim},)")
    if method == "auto":
        sparse = g.n_nodes > DENSE_NODE_LIMIT
    else:
        sparse = method == "sparse"
    rm = rate_matrix(g, sparse=sparse)
    pi = stationary_nullvector(rm.transpose)
    b = unit_cell_sigma(g, pi) @ xi
    rep = solve_singular_consistent(rm.transpose, b, gauge=gauge,
                                    left_null=np.ones(g.n_nodes))
    ups = rep.solution

    flux = apply_edge_matrix(g, gradient(g, ups) + xi / g.n_nodes)
    form = float(np.max(np.abs(divergence(g, flux)))) if g.n_nodes else 0.0
    scale = rm.max_entry() * float(np.max(np.abs(ups)) if ups.size else 0.0)
    bound = RESIDUAL_RTOL * (scale * g.n_nodes + float(np.max(np.abs(b))) + 1.0)
    if form > bound:
        raise SolveFailed(
            f"divergence-form residual {form:.3e} exceeds {bound:.3e}")
    return DirectionPotential(xi=xi, upsilon=ups,
                              system_residual=rep.residual, form_residual=form)


def energy(g, xi, phi):
    """Quadratic energy of a candidate potential.

    E(phi) = (n/2) sum_e lambda_e (nu_e . (grad phi + xi/n))^2.  Convex in
    phi; its minimizers are exactly the direction potentials, and the
    minimum value is the quadratic form xi^T K xi.
    """
    arr = g.arrays()
    n = g.n_nodes
    field = gradient(g, phi) + np.asarray(xi, dtype=float) / n
    along = np.einsum("ei,ei->e", arr.jumps, field)
    return 0.5 * n * float(np.sum(arr.rates * along * along))


def energy_derivative(g, xi, phi, delta):
    """Directional derivative of :func:`energy` at phi along delta."""
    n = g.n_nodes
    flux = apply_edge_matrix(g, gradient(g, phi) + np.asarray(xi, dtype=float) / n)
    return n * edge_inner(gradient(g, delta), flux)


def k_representation(g, xi, upsilon):
    """K xi recovered edge-wise from a direction potential.

    With the potential in hand, K xi = (1/2) sum_e A(e)(grad upsilon + xi/n);
    agreement with the unit-cell K matrix is a cross-check between the two
    formulations.
    """
    n = g.n_nodes
    flux = apply_edge_matrix(g, gradient(g, upsilon) + np.asarray(xi, dtype=float) / n)
    return 0.5 * flux.sum(axis=0)


@dataclass
class MinimizerCheck:
    holds: bool
    energy_value: float
    min_gap: float  # smallest E(phi + delta) - E(phi) over trials
    max_relative_derivative: float


def verify_minimizer(g, xi, upsilon, n_trials=20, seed=0, amplitude=1.0):
    """Probe optimality of a candidate potential with random perturbations.

    For each mean-zero perturbation delta the energy must not drop, and the
    directional derivative must vanish relative to the curvature picked up
    along the same direction.
    """
    rng = np.random.default_rng(seed)
    e0 = energy(g, xi, upsilon)
    drop_tol = 1e-12 * (1.0 + abs(e0))
    min_gap = np.inf
    max_rel = 0.0
    holds = True
    for _ in range(n_trials):
        delta = rng.standard_normal(g.n_nodes) * amplitude
        delta -= delta.mean()
        gap = energy(g, xi, upsilon + delta) - e0
        deriv = energy_derivative(g, xi, upsilon, delta)
        curvature = max(gap - deriv, drop_tol)
        rel = abs(deriv) / curvature
        min_gap = min(min_gap, gap)
        max_rel = max(max_rel, rel)
        if gap < -drop_tol or rel > 1e-7:
            holds = False
    return MinimizerCheck(holds=holds, energy_value=e0,
                          min_gap=float(min_gap), max_relative_derivative=max_rel)
