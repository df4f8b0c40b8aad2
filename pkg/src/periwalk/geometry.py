"""Graph families for the obstructed-lattice experiments.

The continuum picture is a unit cell with its upper-right quadrant removed,
tiled periodically.  On a grid of spacing h the free lattice points become
quotient nodes and nearest-neighbor steps between free points become edges.
Obstruction boxes are closed sets taken modulo 1, so the cell corner
(1, 1) = (0, 0) is obstructed by the default quadrant.

Rates follow one of four interaction rules keyed to the border set: the
free nodes within sup-norm distance h of the obstruction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import EmptyGraph, InvalidResolution, NotAPermutation
from .graph import QuotientGraph, build_quotient_graph

GEOMETRY_TOL = 1e-9


class InteractionKind(enum.Enum):
    NEUTRAL = "neutral"
    BONDING = "bonding"
    REPULSION = "repulsion"
    ATTRACTION = "attraction"


def _default_boxes(dim):
    return [(np.full(dim, 0.75), np.ones(dim))]


@dataclass
class ObstructionSpec:
    """Axis-aligned closed boxes removed from the unit cell, modulo 1.

    The default is the single box [3/4, 1]^2.  Membership wraps: a point
    belongs to a box if any integer translate of the point does, which is
    how the corner 0 falls inside [3/4, 1].
    """

    boxes: list = field(default_factory=lambda: _default_boxes(2))

    def __post_init__(self):
        cleaned = []
        for lo, hi in self.boxes:
            lo = np.asarray(lo, dtype=float)
            hi = np.asarray(hi, dtype=float)
            if lo.shape != hi.shape or lo.ndim != 1:
                raise ValueError("box corners must be equal-length vectors")
            if np.any(lo < -GEOMETRY_TOL) or np.any(hi > 1 + GEOMETRY_TOL):
                raise ValueError(f"box [{lo}, {hi}] leaves the unit cell")
            if np.any(hi - lo <= GEOMETRY_TOL):
                raise ValueError(f"box [{lo}, {hi}] is degenerate")
            cleaned.append((lo, hi))
        if not cleaned:
            raise ValueError("obstruction needs at least one box")
        dims = {lo.size for lo, _ in cleaned}
        if len(dims) != 1:
            raise ValueError("boxes must share one dimension")
        self.boxes = cleaned

    @property
    def dim(self):
        return self.boxes[0][0].size

    def _axis_distances(self, q):
        """Per-box, per-axis wrapped distance to the box interval."""
        q = np.asarray(q, dtype=float)
        out = np.empty((len(self.boxes), q.size))
        for b, (lo, hi) in enumerate(self.boxes):
            best = np.full(q.size, np.inf)
            for z in (-1.0, 0.0, 1.0):
                s = q + z
                best = np.minimum(best, np.maximum.reduce([lo - s, s - hi,
                                                           np.zeros_like(s)]))
            out[b] = best
        return out

    def contains(self, q):
        """Whether the point (taken modulo 1) lies in some closed box."""
        d = self._axis_distances(q)
        return bool(np.any(np.all(d <= GEOMETRY_TOL, axis=1)))

    def distance(self, q):
        """Sup-norm distance from the point (modulo 1) to the obstruction."""
        d = self._axis_distances(q)
        return float(np.min(np.max(d, axis=1)))

    def border_mask(self, coords, h):
        """Free points within sup-norm distance h of the obstruction."""
        coords = np.asarray(coords, dtype=float)
        return np.array([self.distance(q) <= h + GEOMETRY_TOL for q in coords])


def _resolution(h, max_h):
    try:
        h = float(h)
    except (TypeError, ValueError) as exc:
        raise InvalidResolution(f"spacing {h!r} is not a number") from exc
    if not 0 < h <= max_h:
        raise InvalidResolution(f"spacing {h!r} outside (0, {max_h}]")
    n = round(1.0 / h)
    if n < 1 or abs(1.0 / h - n) > GEOMETRY_TOL * n:
        raise InvalidResolution(f"1/{h!r} is not an integer; the lattice "
                                "would not be unit-periodic")
    return h, n


def _free_lattice(h, n, obstruction):
    dim = obstruction.dim
    coords = []
    for k in product(range(n), repeat=dim):
        q = np.array(k, dtype=float) * h
        if not obstruction.contains(q):
            coords.append(q)
    if not coords:
        raise EmptyGraph(f"every lattice point at spacing {h} is obstructed")
    return np.array(coords)


def _free_index(coords, n):
    scaled = np.rint(coords * n).astype(np.int64) % n
    return {tuple(k): i for i, k in enumerate(scaled)}


def _lattice_edges(coords, n, h, jumps_of, rate_of):
    """Edges between free points; a step into the obstruction is simply absent."""
    index = _free_index(coords, n)
    scaled = np.rint(coords * n).astype(np.int64) % n
    edges = []
    for i, k in enumerate(scaled):
        for step in jumps_of:
            tk = tuple((k + step) % n)
            j = index.get(tk)
            if j is None:
                continue
            jump = np.asarray(step, dtype=float) * h
            edges.append((i, jump, rate_of(i, j)))
    return edges


def _interaction_rate(kind, border, base):
    """Rate rule for an axis step given the border flags of its endpoints."""
    slow, fast = base / 2.0, base * 2.0
    if kind is InteractionKind.NEUTRAL:
        return lambda i, j: base
    if kind is InteractionKind.BONDING:
        return lambda i, j: slow if border[i] else base
    if kind is InteractionKind.REPULSION:
        def rate(i, j):
            if border[i] and not border[j]:
                return fast
            if border[j] and not border[i]:
                return slow
            return base
        return rate
    if kind is InteractionKind.ATTRACTION:
        def rate(i, j):
            if border[i] and not border[j]:
                return slow
            if border[j] and not border[i]:
                return fast
            return base
        return rate
    raise ValueError(f"unknown interaction kind {kind!r}")


def build_obstructed_lattice(h, interaction=InteractionKind.NEUTRAL,
                             obstruction=None):
    """Nearest-neighbor walk on the free lattice points at spacing h.

    Axis steps of length h connect free points whose images modulo 1 avoid
    every obstruction box; the rate of a step depends on the interaction
    kind and on whether its endpoints border the obstruction.
    """
    obstruction = obstruction or ObstructionSpec()
    h, n = _resolution(h, max_h=0.5)
    dim = obstruction.dim
    coords = _free_lattice(h, n, obstruction)
    border = obstruction.border_mask(coords, h)
    if isinstance(interaction, str):
        interaction = InteractionKind(interaction.lower())
    base = 1.0 / (h * h)
    steps = [s for a in range(dim)
             for s in (np.eye(dim, dtype=np.int64)[a], -np.eye(dim, dtype=np.int64)[a])]
    edges = _lattice_edges(coords, n, h, steps,
                           _interaction_rate(interaction, border, base))
    meta = {"family": "obstructed-lattice", "h": repr(h),
            "interaction": interaction.value,
            "convention": "closed boxes modulo 1; border = free nodes within "
                          "sup distance h"}
    return build_quotient_graph(dim, coords, edges, meta=meta)


def build_diagonal_lattice(h, obstruction=None, include_antidiagonal=False):
    """Obstructed lattice augmented with diagonal steps, rates border-doubled.

    Every edge (axis or diagonal) carries rate 1/h^2 when both endpoints
    border the obstruction and 1/(2h^2) otherwise.  Only the (h, h)
    diagonal pair is included by default; the anti-diagonal is opt-in.
    """
    obstruction = obstruction or ObstructionSpec()
    if obstruction.dim != 2:
        raise InvalidResolution("diagonal steps are defined on the plane only")
    h, n = _resolution(h, max_h=0.5)
    coords = _free_lattice(h, n, obstruction)
    border = obstruction.border_mask(coords, h)
    base = 1.0 / (h * h)

    def rate(i, j):
        return base if border[i] and border[j] else base / 2.0

    steps = [np.array(s, dtype=np.int64) for s in
             [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1)]]
    if include_antidiagonal:
        steps += [np.array(s, dtype=np.int64) for s in [(1, -1), (-1, 1)]]
    edges = _lattice_edges(coords, n, h, steps, rate)
    meta = {"family": "diagonal-lattice", "h": repr(h),
            "antidiagonal": str(bool(include_antidiagonal)).lower(),
            "convention": "closed boxes modulo 1; border = free nodes within "
                          "sup distance h"}
    return build_quotient_graph(2, coords, edges, meta=meta)


def build_unobstructed_lattice(h, dim=2):
    """Free-space nearest-neighbor lattice; its diffusivity is the identity.

    At h = 1 this degenerates to one node whose steps are full periods,
    which is still a legal quotient graph.
    """
    h, n = _resolution(h, max_h=1.0)
    coords = np.array([k for k in product(range(n), repeat=dim)], dtype=float) * h
    base = 1.0 / (h * h)
    steps = [s for a in range(dim)
             for s in (np.eye(dim, dtype=np.int64)[a], -np.eye(dim, dtype=np.int64)[a])]
    edges = _lattice_edges(coords, n, h, steps, lambda i, j: base)
    meta = {"family": "unobstructed-lattice", "h": repr(h)}
    return build_quotient_graph(dim, coords, edges, meta=meta)


def whirlpool_fixture(lambda_bar=1.0):
    """Eight nodes on the 1/3 grid driven around a single directed cycle.

    No edge has a reversal, yet the cycle's jumps cancel so the long-run
    drift vanishes.  The canonical example of a walk whose diffusivity is
    honest while detailed balance fails.
    """
    if not lambda_bar > 0:
        raise ValueError("jump rate must be positive")
    t = 1.0 / 3.0
    nodes = [(0, 0), (t, 0), (2 * t, 0), (0, t), (2 * t, t),
             (0, 2 * t), (t, 2 * t), (2 * t, 2 * t)]
    hops = {0: (1, -1), 1: (1, 0), 2: (1, 1), 3: (0, -1),
            4: (0, 1), 5: (-1, -1), 6: (-1, 0), 7: (-1, 1)}
    edges = [(i, np.array(v, dtype=float) * t, lambda_bar)
             for i, v in hops.items()]
    meta = {"family": "whirlpool", "rate": repr(float(lambda_bar))}
    return build_quotient_graph(2, np.array(nodes, dtype=float), edges, meta=meta)


def reflection_permutation(g: QuotientGraph, axis, twice_center=0.75):
    """Node involution reflecting one coordinate: q -> (twice_center - q) mod 1.

    Raises :class:`NotAPermutation` when the reflected image of some node
    is not itself a node, meaning the graph lacks that mirror symmetry.
    """
    perm = np.empty(g.n_nodes, dtype=np.int64)
    for nd in g.nodes:
        image = nd.coords.copy()
        image[axis] = (twice_center - image[axis]) % 1.0
        j = g.node_at(image)
        if j is None:
            raise NotAPermutation(
                f"reflection of node {nd.coords} about axis {axis} lands on "
                "no node")
        perm[nd.index] = j
    return perm


def reflection_permutations(g: QuotientGraph, twice_center=0.75):
    """One reflection permutation per axis, all about the same center."""
    return [reflection_permutation(g, a, twice_center) for a in range(g.dim)]
