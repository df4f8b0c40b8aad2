"""Shared fixtures and random graph factories for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from periwalk import _kernels
from periwalk.errors import GraphError
from periwalk.geometry import (build_obstructed_lattice,
                               build_unobstructed_lattice, whirlpool_fixture)
from periwalk.graph import build_quotient_graph


def _random_jump(rng, coords, i, j, dim):
    offset = rng.integers(-1, 2, size=dim).astype(np.float64)
    if i == j and not offset.any():
        offset[rng.integers(0, dim)] = 1.0
    return coords[j] - coords[i] + offset


def make_reversible_graph(rng, n_nodes=6, dim=2, extra_edges=4):
    """Strongly connected random graph whose reversal pairs share one rate.

    Pairing every edge with its reverse at equal rate makes the aggregated
    generator symmetric, so these graphs are the reversible test pool for
    the variational identities.
    """
    for _ in range(64):
        coords = rng.random((n_nodes, dim))
        pairs = [(i, int(rng.integers(0, i))) for i in range(1, n_nodes)]
        pairs += [tuple(rng.integers(0, n_nodes, size=2))
                  for _ in range(extra_edges)]
        edges = []
        seen = set()
        for i, j in pairs:
            nu = _random_jump(rng, coords, i, j, dim)
            rate = float(rng.uniform(0.5, 2.0))
            fwd = (i, tuple(np.round(nu, 12)))
            bwd = (j, tuple(np.round(-nu, 12)))
            if fwd in seen or bwd in seen or fwd == bwd:
                continue
            seen.add(fwd)
            seen.add(bwd)
            edges.append((i, tuple(nu), rate))
            edges.append((j, tuple(-nu), rate))
        try:
            return build_quotient_graph(dim, [tuple(c) for c in coords],
                                        edges)
        except GraphError:
            continue
    raise RuntimeError("could not sample a reversible graph")


def make_null_drift_graph(rng, n_pairs=4, dim=2, extra_edges=3):
    """Random graph with exactly zero long-run drift but no reversibility.

    Nodes come in mirror pairs y and -y (mod 1) and every edge ships with
    its mirror at the same rate, so the generator commutes with the point
    reflection and the drift integrates to zero, while reversal partners
    generally do not even exist.
    """
    n = 2 * n_pairs
    for _ in range(64):
        half = rng.random((n_pairs, dim))
        coords = np.vstack([half, (-half) % 1.0])
        mirror = np.concatenate([np.arange(n_pairs) + n_pairs,
                                 np.arange(n_pairs)])
        order = rng.permutation(n)
        pairs = [(int(order[k]), int(order[(k + 1) % n])) for k in range(n)]
        pairs += [tuple(rng.integers(0, n, size=2))
                  for _ in range(extra_edges)]
        edges = []
        seen = set()
        for i, j in pairs:
            nu = _random_jump(rng, coords, i, j, dim)
            rate = float(rng.uniform(0.5, 2.0))
            mi, mj = int(mirror[i]), int(mirror[j])
            fwd = (i, tuple(np.round(nu, 12)))
            mir = (mi, tuple(np.round(-nu, 12)))
            if fwd in seen or mir in seen or fwd == mir:
                continue
            seen.add(fwd)
            seen.add(mir)
            edges.append((i, tuple(nu), rate))
            edges.append((mi, tuple(-nu), rate))
        try:
            return build_quotient_graph(dim, [tuple(c) for c in coords],
                                        edges)
        except GraphError:
            continue
    raise RuntimeError("could not sample a null-drift graph")


@pytest.fixture(scope="session")
def warm_kernels():
    """Compile the jit kernels once so timed tests measure runs, not builds."""
    _kernels.warmup()


@pytest.fixture
def whirlpool():
    return whirlpool_fixture()


@pytest.fixture
def free_lattice():
    return build_unobstructed_lattice(0.5)


@pytest.fixture
def neutral_lattice():
    return build_obstructed_lattice(0.25)


@pytest.fixture
def drifty_one_node():
    # +1 at rate 2 against -1 at rate 1: drift 1, centered diffusivity 1.5
    return build_quotient_graph(
        1, [(0.0,)], [(0, (1.0,), 2.0), (0, (-1.0,), 1.0)])


@pytest.fixture
def chain_1d():
    return build_unobstructed_lattice(0.5, dim=1)
