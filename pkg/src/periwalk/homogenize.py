"""Macroscale transport coefficients of the periodic walk.

The walk's rescaled position converges to a drift plus, when the long-run
drift vanishes, a Brownian motion.  Its covariance is computed here along
two independent routes: through the corrector of the drift field (C) and
through the unit-cell flux problem (K).  The two agree in exact arithmetic,
so their numerical gap doubles as an end-to-end consistency check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import Inconsistent, NotAPermutation
from .graph import QuotientGraph
from .linalg import solve_singular_consistent, stationary_nullvector

NULL_DRIFT_RTOL = 1e-9
DETAILED_BALANCE_RTOL = 1e-12
K_EQUALS_C_RTOL = 1e-9
SYMMETRY_RTOL = 1e-12
DENSE_NODE_LIMIT = 3000


@dataclass
class RateMatrix:
    """Generator of the quotient jump chain.

    ``matrix`` holds the aggregated rates between distinct quotient nodes
    with the diagonal chosen so rows sum to zero.  Edges whose jump is a
    full period land back on their origin node; they cancel out of the
    generator but still count toward ``total_rate``, the raw per-node exit
    rate that drives holding times.
    """

    matrix: object  # (n, n) ndarray or sparse
    total_rate: np.ndarray

    @property
    def is_sparse(self):
        return sp.issparse(self.matrix)

    @property
    def transpose(self):
        return self.matrix.T

    def max_entry(self):
        if self.is_sparse:
            return float(np.max(np.abs(self.matrix.data))) if self.matrix.nnz else 0.0
        return float(np.max(np.abs(self.matrix))) if self.matrix.size else 0.0


def rate_matrix(g: QuotientGraph, sparse=False):
    arr = g.arrays()
    n = g.n_nodes
    origins, targets, rates = arr.origins, arr.targets, arr.rates
    off = origins != targets
    if sparse:
        diag = np.zeros(n)
        np.add.at(diag, origins[off], -rates[off])
        rows = np.concatenate([origins[off], np.arange(n)])
        cols = np.concatenate([targets[off], np.arange(n)])
        vals = np.concatenate([rates[off], diag])
        mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        mat.sum_duplicates()
    else:
        mat = np.zeros((n, n))
        np.add.at(mat, (origins[off], targets[off]), rates[off])
        mat[np.arange(n), np.arange(n)] = -mat.sum(axis=1)
    lam0 = np.zeros(n)
    np.add.at(lam0, origins, rates)
    return RateMatrix(matrix=mat, total_rate=lam0)


def apply_generator(g, f):
    """Edge-wise action of the generator, (Lf)(y) = sum (f(y+nu)-f(y)) lambda."""
    arr = g.arrays()
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    contrib = (f[arr.targets] - f[arr.origins])
    if f.ndim == 1:
        np.add.at(out, arr.origins, contrib * arr.rates)
    else:
        np.add.at(out, arr.origins, contrib * arr.rates[:, None])
    return out


def apply_generator_transpose(g, f):
    """Edge-wise action of the transposed generator on node functions."""
    arr = g.arrays()
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    if f.ndim == 1:
        np.add.at(out, arr.targets, f[arr.origins] * arr.rates)
        out -= f * arr.lam0
    else:
        np.add.at(out, arr.targets, f[arr.origins] * arr.rates[:, None])
        out -= f * arr.lam0[:, None]
    return out


def drift_field(g):
    """Per-node expected displacement rate, rho(y) = sum nu_e lambda_e."""
    arr = g.arrays()
    rho = np.zeros((g.n_nodes, g.dim))
    np.add.at(rho, arr.origins, arr.jumps * arr.rates[:, None])
    return rho


def long_run_drift(g, pi):
    """Stationary average of the drift field."""
    arr = g.arrays()
    return (arr.jumps * (arr.rates * pi[arr.origins])[:, None]).sum(axis=0)


def null_drift_tolerance(g):
    arr = g.arrays()
    scale = np.max(np.abs(arr.jumps * arr.rates[:, None])) if g.n_edges else 0.0
    return NULL_DRIFT_RTOL * (1.0 + scale)


@dataclass
class NullDriftCheck:
    holds: bool
    u_bar: np.ndarray
    tolerance: float


def check_null_drift(g, pi):
    u = long_run_drift(g, pi)
    tol = null_drift_tolerance(g)
    return NullDriftCheck(bool(np.max(np.abs(u)) <= tol), u, tol)


@dataclass
class DetailedBalanceResult:
    status: str  # "holds" | "fails_missing_reversal" | "fails_numeric"
    missing: list[int] = field(default_factory=list)
    violating: list[int] = field(default_factory=list)
    max_violation: float = 0.0

    @property
    def holds(self):
        return self.status == "holds"


def check_detailed_balance(g, pi):
    """Whether every edge flux is matched by its reversal's flux.

    An edge without a reversal fails outright: there is nothing to carry
    the probability current back.
    """
    if not g.edges:
        return DetailedBalanceResult(status="holds")
    missing = [e.index for e in g.edges if e.reversal is None]
    if missing:
        return DetailedBalanceResult(status="fails_missing_reversal", missing=missing)
    flux = np.array([e.rate * pi[e.origin] for e in g.edges])
    gap = np.array([abs(flux[e.index] - flux[e.reversal]) for e in g.edges])
    tol = DETAILED_BALANCE_RTOL * max(float(flux.max()), 1e-300)
    violating = [int(i) for i in np.flatnonzero(gap > tol)]
    if violating:
        return DetailedBalanceResult(status="fails_numeric", violating=violating,
                                     max_violation=float(gap.max()))
    return DetailedBalanceResult(status="holds", max_violation=float(gap.max()))


@dataclass
class SymmetryCheck:
    axis_holds: list[bool]
    holds: bool


def check_symmetry_null_drift(g, permutations, rm: RateMatrix | None = None):
    """Sufficient condition for zero drift from per-axis node symmetries.

    For each axis, the supplied permutation must be an involution that
    leaves the aggregated rates invariant and flips the sign of that
    axis's drift component.  When every axis passes, the long-run drift
    vanishes without computing the stationary vector.
    """
    if len(permutations) != g.dim:
        raise NotAPermutation(f"need one permutation per axis, got {len(permutations)}")
    rm = rm or rate_matrix(g, sparse=g.n_nodes > DENSE_NODE_LIMIT)
    rho = drift_field(g)
    scale = max(rm.max_entry(), 1e-300)
    drift_tol = null_drift_tolerance(g)
    axis_holds = []
    n = g.n_nodes
    for i, perm in enumerate(permutations):
        perm = np.asarray(perm, dtype=np.int64)
        if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
            raise NotAPermutation(f"axis {i}: not a permutation of {n} nodes")
        if not np.array_equal(perm[perm], np.arange(n)):
            raise NotAPermutation(f"axis {i}: permutation is not an involution")
        if rm.is_sparse:
            permuted = rm.matrix[perm, :][:, perm]
            invariant = abs(permuted - rm.matrix).max() <= SYMMETRY_RTOL * scale
        else:
            permuted = rm.matrix[np.ix_(perm, perm)]
            invariant = np.max(np.abs(permuted - rm.matrix)) <= SYMMETRY_RTOL * scale
        flips = np.max(np.abs(rho[perm, i] + rho[:, i])) <= drift_tol
        axis_holds.append(bool(invariant and flips))
    return SymmetryCheck(axis_holds, all(axis_holds))


def corrector_psi(g, pi, rm: RateMatrix | None = None, center_drift=False,
                  gauge="mean_zero"):
    """Solve L psi = rho (optionally with the long-run drift removed).

    The uncentered system is solvable exactly when the long-run drift
    vanishes; subtracting the drift makes it solvable always, at the cost
    of describing the walk around its moving mean.
    """
    rm = rm or rate_matrix(g, sparse=g.n_nodes > DENSE_NODE_LIMIT)
    rho = drift_field(g)
    b = rho - long_run_drift(g, pi)[None, :] if center_drift else rho
    try:
        rep = solve_singular_consistent(rm.matrix, b, gauge=gauge, left_null=pi)
    except Inconsistent as exc:
        raise Inconsistent(
            "corrector system has no solution: the long-run drift is nonzero "
            "(center it or fix the rates)") from exc
    return rep.solution, rep


def corrector_deviations(g, psi):
    """Per-edge effective jumps alpha_e = nu_e - (psi(head) - psi(tail))."""
    arr = g.arrays()
    return arr.jumps - (psi[arr.targets] - psi[arr.origins])


def diffusivity_C(g, pi, psi):
    """Covariance from the corrector route, with a spanning-set flag.

    Returns (C, spans): C is half the pi-weighted second moment of the
    effective jumps, positive definite exactly when those jumps span R^d.
    """
    arr = g.arrays()
    alphas = corrector_deviations(g, psi)
    w = arr.rates * pi[arr.origins]
    c = 0.5 * np.einsum("ei,ej,e->ij", alphas, alphas, w)
    # absolute rank cutoff: deviations 9 orders below the jump scale are noise
    jump_scale = float(np.max(np.abs(arr.jumps))) if g.n_edges else 1.0
    rank = int(np.linalg.matrix_rank(alphas, tol=1e-9 * jump_scale))
    return c, rank == g.dim


def unit_cell_sigma(g, pi):
    """Stationary in-flux field sigma(y) = sum over edges into y of nu lambda pi."""
    arr = g.arrays()
    sigma = np.zeros((g.n_nodes, g.dim))
    np.add.at(sigma, arr.targets, arr.jumps * (arr.rates * pi[arr.origins])[:, None])
    return sigma


def unit_cell_omega(g, pi, rm: RateMatrix | None = None, gauge="mean_zero"):
    """Solve the unit-cell problem L^T omega = sigma.

    Solvable exactly when the long-run drift vanishes (the column sums of
    sigma equal the drift).  The homogeneous direction here is the
    stationary vector, so the gauge picks the mean-zero representative
    along it.
    """
    rm = rm or rate_matrix(g, sparse=g.n_nodes > DENSE_NODE_LIMIT)
    sigma = unit_cell_sigma(g, pi)
    try:
        rep = solve_singular_consistent(rm.transpose, sigma, gauge=gauge,
                                        left_null=np.ones(g.n_nodes))
    except Inconsistent as exc:
        raise Inconsistent(
            "unit-cell system has no solution: the long-run drift is nonzero") from exc
    return rep.solution, rep


def diffusivity_K(g, pi, omega):
    """Covariance from the unit-cell route."""
    arr = g.arrays()
    w = arr.rates * pi[arr.origins]
    k = 0.5 * (np.einsum("ei,ej,e->ij", arr.jumps, arr.jumps, w)
               - np.einsum("ei,ej,e->ij", arr.jumps, omega[arr.origins], arr.rates)
               - np.einsum("ei,ej,e->ij", omega[arr.origins], arr.jumps, arr.rates))
    return k


@dataclass
class HomogenizationResult:
    dimension: int
    n_nodes: int
    n_edges: int
    pi: np.ndarray
    rho: np.ndarray
    u_bar: np.ndarray
    sigma: np.ndarray
    psi: np.ndarray | None
    omega: np.ndarray | None
    C: np.ndarray
    K: np.ndarray | None
    drift_centered: bool
    detailed_balance: DetailedBalanceResult
    checks: dict
    diagnostics: dict

    @property
    def effective_diffusivity(self):
        return self.C

    def scalar_diffusivity(self, rtol=1e-8):
        """Collapse C to a scalar for isotropic geometries.

        Asserts the two diagonal entries agree and the off-diagonal part is
        negligible before reporting C[0,0].
        """
        c = self.C
        scale = rtol * (1.0 + abs(c[0, 0]))
        d = self.dimension
        for i in range(1, d):
            if abs(c[i, i] - c[0, 0]) > scale:
                raise ValueError(
                    f"anisotropic diffusivity: C[0,0]={c[0, 0]!r} C[{i},{i}]={c[i, i]!r}")
        offdiag = c - np.diag(np.diag(c))
        if np.max(np.abs(offdiag)) > scale:
            raise ValueError(f"off-diagonal diffusivity {np.max(np.abs(offdiag)):.3e}")
        return float(c[0, 0])

    def to_report(self):
        lines = ["# effective diffusivity analysis"]
        lines.append(f"dimension {self.dimension}")
        lines.append(f"nodes {self.n_nodes}")
        lines.append(f"edges {self.n_edges}")
        lines.append(f"drift_centered {str(self.drift_centered).lower()}")
        for name in ("null_drift", "detailed_balance", "K_equals_C",
                     "C_positive_definite"):
            v = self.checks.get(name)
            word = "skipped" if v is None else ("pass" if v else "fail")
            extra = ""
            if name == "detailed_balance" and not self.detailed_balance.holds:
                extra = " " + self.detailed_balance.status
            lines.append(f"check {name} {word}{extra}")
        lines.append("u_bar " + " ".join(repr(float(v)) for v in self.u_bar))
        for key in sorted(self.diagnostics):
            lines.append(f"diag {key} {float(self.diagnostics[key])!r}")
        for name, mat in (("C", self.C), ("K", self.K)):
            if mat is None:
                continue
            lines.append(f"matrix {name} {mat.shape[0]} {mat.shape[1]}")
            for row in mat:
                lines.append(" ".join(repr(float(v)) for v in row))
        lines.append(f"vector pi {self.pi.size}")
        for v in self.pi:
            lines.append(repr(float(v)))
        return "\n".join(lines) + "\n"


def analyze(g, *, gauge="mean_zero", center_drift="auto", method="auto"):
    """Full pipeline: stationary vector, drift, both diffusivity routes.

    ``center_drift`` controls what happens when the long-run drift is
    nonzero: "auto" or True switches to the centered corrector (the
    unit-cell route does not apply there and K is omitted), False raises
    :class:`Inconsistent`.  ``method`` picks dense or sparse linear algebra;
    "auto" goes sparse above ``DENSE_NODE_LIMIT`` nodes.
    """
    if method == "auto":
        sparse = g.n_nodes > DENSE_NODE_LIMIT
    elif method in ("dense", "sparse"):
        sparse = method == "sparse"
    else:
        raise ValueError(f"unknown method {method!r}")
    rm = rate_matrix(g, sparse=sparse)

    pi = stationary_nullvector(rm.transpose)
    rho = drift_field(g)
    drift = check_null_drift(g, pi)
    balance = check_detailed_balance(g, pi)
    sigma = unit_cell_sigma(g, pi)

    checks = {"null_drift": drift.holds, "detailed_balance": balance.holds}
    diagnostics = {"null_drift_tolerance": drift.tolerance,
                   "detailed_balance_gap": balance.max_violation}

    if drift.holds:
        psi, psi_rep = corrector_psi(g, pi, rm, center_drift=False, gauge=gauge)
        omega, omega_rep = unit_cell_omega(g, pi, rm, gauge=gauge)
        c, spans = diffusivity_C(g, pi, psi)
        k = diffusivity_K(g, pi, omega)
        gap = float(np.max(np.abs(k - c)))
        checks["K_equals_C"] = gap <= K_EQUALS_C_RTOL * (1.0 + float(np.max(np.abs(c))))
        diagnostics["k_c_gap"] = gap
        diagnostics["omega_residual"] = omega_rep.residual
        centered = False
    else:
        if center_drift is False:
            raise Inconsistent(
                f"long-run drift {drift.u_bar} is nonzero and centering is disabled")
        psi, psi_rep = corrector_psi(g, pi, rm, center_drift=True, gauge=gauge)
        c, spans = diffusivity_C(g, pi, psi)
        omega, k = None, None
        checks["K_equals_C"] = None
        centered = True

    checks["C_positive_definite"] = spans
    diagnostics["psi_residual"] = psi_rep.residual
    diagnostics["c_min_eigenvalue"] = float(np.linalg.eigvalsh(c).min())

    return HomogenizationResult(
        dimension=g.dim, n_nodes=g.n_nodes, n_edges=g.n_edges,
        pi=pi, rho=rho, u_bar=drift.u_bar, sigma=sigma,
        psi=psi, omega=omega, C=c, K=k,
        drift_centered=centered, detailed_balance=balance,
        checks=checks, diagnostics=diagnostics,
    )
