"""Quotient representation of periodic weighted directed graphs.

A periodic graph in R^d with integer translation symmetry is stored through
its quotient: the nodes that fall in the half-open unit cell [0,1)^d and,
for each directed edge, the jump vector to the (possibly translated) target
node together with a positive jump rate.  Edges whose jump has integer
components connect a node to one of its own periodic copies; they are kept,
since they move the walker even though origin and terminal coincide in the
quotient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import (
    BrokenPath,
    DanglingEdge,
    DuplicateEdge,
    DuplicateNode,
    NonPositiveRate,
    NotStronglyConnected,
    SelfEdge,
)

SNAP_TOL = 1e-9
_GRID = 10 ** 9  # integer snap cells per unit period, 1/SNAP_TOL


def _wrap(coords):
    """Map coordinates into [0, 1) componentwise."""
    w = np.asarray(coords, dtype=float) % 1.0
    # floating mod can return 1.0 for inputs just below an integer
    w[w >= 1.0] = 0.0
    return w


def _grid_key(coords):
    return tuple(int(round(c * _GRID)) % _GRID for c in coords)


def _torus_dist(a, b):
    d = np.abs(np.asarray(a) - np.asarray(b))
    return float(np.max(np.minimum(d, 1.0 - d)))


@dataclass(eq=False)
class QuotientNode:
    index: int
    coords: np.ndarray  # in [0, 1)^d


@dataclass(eq=False)
class QuotientEdge:
    index: int
    origin: int
    terminal: int
    jump: np.ndarray  # real displacement in R^d, never zero
    rate: float
    reversal: int | None = None  # edge index with origin=terminal, jump=-jump


@dataclass
class ProjectedEdgeMap:
    """Projection of edges onto ordered node pairs of the quotient.

    Parallel edges (same origin, different jumps landing on the same
    quotient node) collapse onto one pair; their rates aggregate.
    """

    pairs: list[tuple[int, int]]
    kappa: np.ndarray  # edge index -> pair index
    aggregated_rate: np.ndarray  # per pair
    bijective: bool
    commutes_with_reversals: bool


class QuotientGraph:
    """Canonically ordered quotient graph.

    Nodes are sorted lexicographically by coordinates and edges by
    (origin, jump), so two graphs built from the same data compare and
    serialize identically.  Instances are built by
    :func:`build_quotient_graph`; mutate nothing after construction.
    """

    def __init__(self, dim, nodes, edges, out_edges, in_edges, lookup, meta=None):
        self.dim = dim
        self.nodes = nodes
        self.edges = edges
        self.out_edges = out_edges  # list of edge index lists, by origin
        self.in_edges = in_edges  # list of edge index lists, by terminal
        self._lookup = lookup  # grid key -> node index
        self.meta = dict(meta or {})
        self._arrays = None

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_edges(self):
        return len(self.edges)

    def coords_array(self):
        return np.array([nd.coords for nd in self.nodes])

    def node_at(self, coords, tol=SNAP_TOL):
        """Index of the node at the given position modulo 1, or None.

        Matches any node within ``tol`` in torus sup-norm; the nearest wins
        when several qualify.
        """
        w = _wrap(coords)
        key = _grid_key(w)
        best, best_d = None, tol
        for off in product((-1, 0, 1), repeat=self.dim):
            k = tuple((key[i] + off[i]) % _GRID for i in range(self.dim))
            idx = self._lookup.get(k)
            if idx is None:
                continue
            dist = _torus_dist(w, self.nodes[idx].coords)
            if dist <= best_d:
                best, best_d = idx, dist
        return best

    def total_rate(self):
        """Sum of out-edge rates per node, full-period jumps included."""
        lam0 = np.zeros(self.n_nodes)
        for e in self.edges:
            lam0[e.origin] += e.rate
        return lam0

    def arrays(self):
        """Flat array view used by the matrix builders and simulators.

        Edges are grouped by origin in canonical order, so ``indptr``
        delimits each node's out-edge block the way a CSR matrix would.
        """
        if self._arrays is None:
            n, m, d = self.n_nodes, self.n_edges, self.dim
            indptr = np.zeros(n + 1, dtype=np.int64)
            for e in self.edges:
                indptr[e.origin + 1] += 1
            np.cumsum(indptr, out=indptr)
            targets = np.array([e.terminal for e in self.edges], dtype=np.int64)
            jumps = np.array([e.jump for e in self.edges])
            rates = np.array([e.rate for e in self.edges])
            cum_rates = rates.copy()
            for y in range(n):
                lo, hi = indptr[y], indptr[y + 1]
                cum_rates[lo:hi] = np.cumsum(rates[lo:hi])
            self._arrays = GraphArrays(indptr, targets, jumps.reshape(m, d),
                                       rates, cum_rates)
        return self._arrays


@dataclass
class GraphArrays:
    indptr: np.ndarray
    targets: np.ndarray
    jumps: np.ndarray
    rates: np.ndarray
    cum_rates: np.ndarray  # cumulative within each origin block

    @property
    def lam0(self):
        # last cumulative entry of each nonempty block
        lam = np.zeros(self.indptr.size - 1)
        nonempty = self.indptr[1:] > self.indptr[:-1]
        lam[nonempty] = self.cum_rates[self.indptr[1:][nonempty] - 1]
        return lam

    @property
    def origins(self):
        return np.repeat(np.arange(self.indptr.size - 1, dtype=np.int64),
                         np.diff(self.indptr))


def build_quotient_graph(dim, node_coords, edges, meta=None):
    """Validate and canonicalize a quotient graph.

    ``node_coords`` is an iterable of length-d positions (wrapped into
    [0,1) here); ``edges`` an iterable of ``(origin_index, jump, rate)``
    with origin indices referring to the input node order.  The terminal
    of each edge is resolved by snapping origin + jump modulo 1 onto the
    node set.  Raises one of the graph errors on any malformed input and
    checks mutual reachability on the quotient.
    """
    node_coords = [np.asarray(c, dtype=float) for c in node_coords]
    if not node_coords:
        raise DuplicateNode("graph needs at least one node")
    for c in node_coords:
        if c.shape != (dim,) or not np.all(np.isfinite(c)):
            raise DanglingEdge(f"node coordinates {c} are not a finite {dim}-vector")

    wrapped = [_wrap(c) for c in node_coords]
    order = sorted(range(len(wrapped)), key=lambda i: tuple(wrapped[i]))
    remap = {old: new for new, old in enumerate(order)}

    nodes = []
    lookup = {}
    for new_idx, old_idx in enumerate(order):
        w = wrapped[old_idx]
        nd = QuotientNode(new_idx, w)
        # duplicate scan over the 3^d neighboring snap cells
        key = _grid_key(w)
        for off in product((-1, 0, 1), repeat=dim):
            k = tuple((key[i] + off[i]) % _GRID for i in range(dim))
            other = lookup.get(k)
            if other is not None and _torus_dist(w, nodes[other].coords) < SNAP_TOL:
                raise DuplicateNode(
                    f"nodes {w} and {nodes[other].coords} coincide within {SNAP_TOL}")
        lookup[key] = new_idx
        nodes.append(nd)

    g = QuotientGraph(dim, nodes, [], [[] for _ in nodes], [[] for _ in nodes],
                      lookup, meta)

    raw = []
    seen = {}
    for origin_old, jump, rate in edges:
        jump = np.asarray(jump, dtype=float)
        if jump.shape != (dim,) or not np.all(np.isfinite(jump)):
            raise DanglingEdge(f"jump {jump} is not a finite {dim}-vector")
        try:
            rate = float(rate)
        except (TypeError, ValueError) as exc:
            raise NonPositiveRate(f"edge rate {rate!r} is not a number") from exc
        if not (math.isfinite(rate) and rate > 0):
            raise NonPositiveRate(f"edge rate {rate!r} must be a positive finite number")
        if origin_old not in remap:
            raise DanglingEdge(f"edge origin index {origin_old} does not name a node")
        origin = remap[origin_old]
        if np.max(np.abs(jump)) < SNAP_TOL:
            raise SelfEdge(f"zero jump at node {nodes[origin].coords}")
        jkey = tuple(int(round(j * _GRID)) for j in jump)
        if (origin, jkey) in seen:
            raise DuplicateEdge(
                f"two edges from node {nodes[origin].coords} share jump {jump}")
        seen[(origin, jkey)] = len(raw)
        terminal = g.node_at(nodes[origin].coords + jump)
        if terminal is None:
            raise DanglingEdge(
                f"jump {jump} from node {nodes[origin].coords} lands on no node")
        raw.append((origin, jkey, jump, float(rate), terminal))

    raw.sort(key=lambda r: (r[0],) + r[1])
    for idx, (origin, jkey, jump, rate, terminal) in enumerate(raw):
        g.edges.append(QuotientEdge(idx, origin, terminal, jump, rate))
        g.out_edges[origin].append(idx)
        g.in_edges[terminal].append(idx)

    by_key = {(r[0],) + (r[1],): i for i, r in enumerate(raw)}
    for e in g.edges:
        nkey = tuple(-k for k in _jump_key(e.jump))
        e.reversal = by_key.get((e.terminal, nkey))

    _check_strong_connectivity(g)
    return g


def _jump_key(jump):
    return tuple(int(round(j * _GRID)) for j in jump)


def _check_strong_connectivity(g):
    n = g.n_nodes
    for adj, direction in ((g.out_edges, "forward"), (g.in_edges, "backward")):
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            y = stack.pop()
            for ei in adj[y]:
                e = g.edges[ei]
                nxt = e.terminal if direction == "forward" else e.origin
                if not seen[nxt]:
                    seen[nxt] = True
                    stack.append(nxt)
        if not seen.all():
            u = int(np.flatnonzero(~seen)[0])
            a, b = (0, u) if direction == "forward" else (u, 0)
            raise NotStronglyConnected(
                f"node {g.nodes[b].coords} is unreachable from node "
                f"{g.nodes[a].coords}: no {direction} path")


def project_edges(g):
    """Collapse edges onto ordered quotient node pairs."""
    pair_index = {}
    pairs = []
    kappa = np.empty(g.n_edges, dtype=np.int64)
    rates = []
    for e in g.edges:
        p = (e.origin, e.terminal)
        if p not in pair_index:
            pair_index[p] = len(pairs)
            pairs.append(p)
            rates.append(0.0)
        kappa[e.index] = pair_index[p]
        rates[pair_index[p]] += e.rate

    commutes = True
    for e in g.edges:
        rev_pair = (e.terminal, e.origin)
        if rev_pair in pair_index and e.reversal is None:
            commutes = False
            break

    return ProjectedEdgeMap(
        pairs=pairs,
        kappa=kappa,
        aggregated_rate=np.array(rates),
        bijective=len(pairs) == g.n_edges,
        commutes_with_reversals=commutes,
    )


def lift_displacement(g, edge_path):
    """Total real-space displacement along a chained edge sequence."""
    total = np.zeros(g.dim)
    prev_terminal = None
    for ei in edge_path:
        e = g.edges[ei]
        if prev_terminal is not None and e.origin != prev_terminal:
            raise BrokenPath(
                f"edge {ei} starts at node {e.origin}, previous edge ended "
                f"at node {prev_terminal}")
        total += e.jump
        prev_terminal = e.terminal
    return total


def _format_float(x):
    # repr gives the shortest string that round-trips, which keeps files canonical
    return repr(float(x))


def dump_graph(g):
    """Serialize to the text format; deterministic given canonical ordering."""
    lines = [f"# {k}: {v}" for k, v in g.meta.items()]
    lines.append(f"d={g.dim}")
    for nd in g.nodes:
        lines.append("node " + str(nd.index) + " "
                     + " ".join(_format_float(c) for c in nd.coords))
    for e in g.edges:
        lines.append("edge " + str(e.origin) + " "
                     + " ".join(_format_float(j) for j in e.jump) + " "
                     + _format_float(e.rate))
    return "\n".join(lines) + "\n"


def parse_graph(text):
    """Parse the text format and rebuild the canonical graph.

    Leading ``# key: value`` comment lines are kept as metadata so that a
    parse/serialize round trip is byte identical; all other comments are
    dropped.
    """
    dim = None
    meta = {}
    in_preamble = True
    coords_by_index = {}
    edges = []
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if in_preamble and ":" in body:
                k, v = body.split(":", 1)
                meta[k.strip()] = v.strip()
            continue
        in_preamble = False
        if line.startswith("d="):
            dim = int(line[2:])
            continue
        tokens = line.split()
        if dim is None:
            raise DanglingEdge(f"line {lineno}: dimension header d=<int> must come first")
        if tokens[0] == "node":
            if len(tokens) != 2 + dim:
                raise DanglingEdge(f"line {lineno}: node line needs index and {dim} coordinates")
            idx = int(tokens[1])
            if idx in coords_by_index:
                raise DuplicateNode(f"line {lineno}: node index {idx} repeated")
            coords_by_index[idx] = np.array([float(t) for t in tokens[2:]])
        elif tokens[0] == "edge":
            if len(tokens) != 3 + dim:
                raise DanglingEdge(
                    f"line {lineno}: edge line needs origin, {dim} jump components, rate")
            edges.append((int(tokens[1]),
                          np.array([float(t) for t in tokens[2:2 + dim]]),
                          float(tokens[2 + dim])))
        else:
            raise DanglingEdge(f"line {lineno}: unknown record {tokens[0]!r}")
    if dim is None:
        raise DanglingEdge("missing dimension header d=<int>")

    order = sorted(coords_by_index)
    coords = [coords_by_index[i] for i in order]
    pos = {old: k for k, old in enumerate(order)}
    remapped = []
    for o, j, r in edges:
        if o not in pos:
            raise DanglingEdge(f"edge references unknown node index {o}")
        remapped.append((pos[o], j, r))
    return build_quotient_graph(dim, coords, remapped, meta=meta)


def load_graph(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph(fh.read())


def save_graph(g, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_graph(g))
