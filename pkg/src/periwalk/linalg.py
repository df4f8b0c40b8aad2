"""Rank-deficient linear solves for generator matrices.

Every system here has nullity one: the generator L annihilates constants
and its transpose annihilates the stationary vector.  The strategy is to
replace one well-chosen row with a gauge constraint and run an LU solve.
Dense factorizations cover quotient cells up to a few thousand nodes;
above that the same row replacement runs through a sparse LU.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import Inconsistent, NonPositiveEntry, SolveFailed

RESIDUAL_RTOL = 1e-10
CONSISTENCY_RTOL = 1e-9
STATIONARY_RTOL = 1e-11

GAUGES = ("mean_zero", "pin_first")


@dataclass
class SingularSolveReport:
    solution: np.ndarray
    residual: float  # max over columns of ||A x - b||_inf
    consistency: float  # max over columns of |<l, b>| / (||l||_2 ||b||_2)
    gauge: str
    replaced_row: int


def left_nullvector(a):
    """Unit left null vector of a nullity-one matrix, by dense SVD.

    Callers that know the null vector analytically (ones for a transposed
    generator, the stationary vector for the generator itself) should pass
    it to :func:`solve_singular_consistent` instead of paying for this.
    """
    a = np.asarray(a, dtype=float)
    _, s, vh = np.linalg.svd(a.T)
    if a.shape[0] > 1 and s[-1] > 1e-8 * s[0]:
        raise SolveFailed(
            f"matrix is numerically nonsingular (smallest/largest singular "
            f"value {s[-1] / s[0]:.2e}), no null direction to solve along")
    v = vh[-1]
    return v / np.linalg.norm(v)


def _gauge_row(gauge, n):
    if gauge == "mean_zero":
        return np.ones(n)
    if gauge == "pin_first":
        row = np.zeros(n)
        row[0] = 1.0
        return row
    raise ValueError(f"unknown gauge {gauge!r}, expected one of {GAUGES}")


def apply_gauge(x, gauge, null_direction):
    """Shift a solution along the homogeneous direction to satisfy the gauge.

    Idempotent: applying twice equals applying once.
    """
    x = np.asarray(x, dtype=float)
    nd = np.asarray(null_direction, dtype=float)
    cols = x if x.ndim == 2 else x[:, None]
    row = _gauge_row(gauge, cols.shape[0])
    denom = row @ nd
    if abs(denom) < 1e-14 * np.linalg.norm(nd) * np.linalg.norm(row):
        raise SolveFailed("gauge constraint is orthogonal to the null direction")
    out = cols - np.outer(nd, (row @ cols) / denom)
    return out if x.ndim == 2 else out[:, 0]


def _replace_row_dense(a, r, row):
    a2 = np.array(a, dtype=float, copy=True)
    a2[r, :] = row
    return a2


def _replace_row_sparse(a, r, row):
    a = sp.coo_matrix(a)
    keep = a.row != r
    rows = np.concatenate([a.row[keep], np.full(row.size, r, dtype=a.row.dtype)])
    cols = np.concatenate([a.col[keep], np.arange(row.size, dtype=a.col.dtype)])
    vals = np.concatenate([a.data[keep], row])
    return sp.csc_matrix((vals, (rows, cols)), shape=a.shape)


def _inf_norm(a):
    if sp.issparse(a):
        return float(abs(a).sum(axis=1).max())
    return float(np.linalg.norm(a, np.inf)) if a.size else 0.0


def _max_entry(a):
    if sp.issparse(a):
        return float(np.max(np.abs(a.data))) if a.nnz else 0.0
    return float(np.max(np.abs(a))) if a.size else 0.0


def solve_singular_consistent(a, b, gauge="mean_zero", left_null=None):
    """Solve A x = b for nullity-one A, picking the gauged representative.

    Checks that b is orthogonal to the left null space first (raising
    :class:`Inconsistent` otherwise), then solves the row-replaced system
    and verifies the residual of the original equations.  ``b`` may carry
    several right-hand sides as columns; each is solved and gauged
    independently off one factorization.
    """
    sparse = sp.issparse(a)
    n = a.shape[0]
    b = np.asarray(b, dtype=float)
    single = b.ndim == 1
    cols = b[:, None] if single else b

    if left_null is None and sparse:
        raise ValueError("sparse systems need the left null vector supplied")
    ln = left_nullvector(a) if left_null is None else np.asarray(left_null, dtype=float)
    ln_norm = np.linalg.norm(ln)

    consistency = 0.0
    for j in range(cols.shape[1]):
        bn = np.linalg.norm(cols[:, j])
        if bn == 0.0:
            continue
        rel = abs(ln @ cols[:, j]) / (bn * ln_norm)
        consistency = max(consistency, rel)
        if rel > CONSISTENCY_RTOL:
            raise Inconsistent(
                f"right-hand side column {j} has relative component {rel:.2e} "
                f"along the left null space; the system has no solution")

    r = int(np.argmax(np.abs(ln)))
    row = _gauge_row(gauge, n)
    b2 = cols.copy()
    b2[r, :] = 0.0

    try:
        if sparse:
            lu = spla.splu(_replace_row_sparse(a, r, row))
            x = np.column_stack([lu.solve(b2[:, j]) for j in range(b2.shape[1])])
        else:
            x = scipy.linalg.solve(_replace_row_dense(a, r, row), b2)
    except (np.linalg.LinAlgError, RuntimeError, scipy.linalg.LinAlgError) as exc:
        raise SolveFailed(f"factorization of the gauged system failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolveFailed("gauged solve produced non-finite entries")

    resid = float(np.max(np.abs(a @ x - cols))) if cols.size else 0.0
    bound = RESIDUAL_RTOL * (_inf_norm(a) * max(np.max(np.abs(x)), 1e-300)
                             + max(np.max(np.abs(cols)), 0.0) + 1e-300)
    if resid > bound:
        raise SolveFailed(
            f"residual {resid:.2e} exceeds bound {bound:.2e}; the matrix may "
            f"not have nullity one or the row replacement was unstable")

    return SingularSolveReport(
        solution=x[:, 0] if single else x,
        residual=resid,
        consistency=consistency,
        gauge=gauge,
        replaced_row=r,
    )


def stationary_nullvector(lt):
    """Stationary vector pi with L^T pi = 0, sum 1, strictly positive.

    ``lt`` is the transposed generator.  Its left null space is spanned by
    the constant vector, so any row may carry the normalization; row 0 is
    replaced with the all-ones row and the unit right-hand side makes the
    solution sum to one directly.
    """
    sparse = sp.issparse(lt)
    n = lt.shape[0]
    row = np.ones(n)
    b = np.zeros(n)
    b[0] = 1.0
    try:
        if sparse:
            pi = spla.splu(_replace_row_sparse(lt, 0, row)).solve(b)
        else:
            pi = scipy.linalg.solve(_replace_row_dense(lt, 0, row), b)
    except (np.linalg.LinAlgError, RuntimeError, scipy.linalg.LinAlgError) as exc:
        raise SolveFailed(f"stationary solve failed: {exc}") from exc

    scale = _max_entry(lt)
    resid = float(np.max(np.abs(lt @ pi)))
    if not np.all(np.isfinite(pi)) or resid > STATIONARY_RTOL * max(scale, 1e-300):
        raise SolveFailed(
            f"stationary residual {resid:.2e} exceeds {STATIONARY_RTOL:.0e} * {scale:.2e}")
    if np.min(pi) <= 1e-13 * np.max(pi):
        raise NonPositiveEntry(
            f"stationary vector has a non-positive component (min {np.min(pi):.2e}); "
            f"the jump chain cannot be irreducible")
    return pi / pi.sum()
