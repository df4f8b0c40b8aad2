"""Monte Carlo estimation of long-run diffusivity from sampled walks.

Two samplers live here.  The first runs the continuous-time jump chain of a
quotient graph and tracks the lifted displacement.  The second runs a
wait-then-step walk in the plane whose steps reflect specularly off periodic
obstructions, the continuum counterpart of the obstructed lattices built in
:mod:`periwalk.geometry`.  Both report mean squared displacement on a fixed
time grid and fit a diffusivity with a path-resampling bootstrap interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegenerateGrid, DriftNotCentered
from .geometry import ObstructionSpec
from .graph import QuotientGraph
from .homogenize import long_run_drift, null_drift_tolerance, rate_matrix
from .linalg import stationary_nullvector

MIN_PATHS = 100
BOOTSTRAP_RESAMPLES = 1000
BOOTSTRAP_CHUNK = 200
DEFAULT_GRID_POINTS = 50
DEFAULT_TARGET_CELLS = 30.0


# ---------------------------------------------------------------------------
# single-path event tracing

@dataclass(frozen=True)
class WalkState:
    """State of one walk just after a jump."""

    time: float
    node: int
    displacement: np.ndarray


def simulate_ctmc(g, t_end, seed, start_node=0):
    """Jump events of one continuous-time path on ``g`` up to ``t_end``.

    Returns the post-jump states in time order; a horizon shorter than the
    first holding time gives an empty list.  ``displacement`` entries are
    cumulative lifted jumps from the start node, so they live in the full
    space rather than the unit cell.
    """
    if t_end < 0.0:
        raise ValueError("t_end must be nonnegative")
    if not 0 <= start_node < g.n_nodes:
        raise ValueError(f"start_node {start_node} out of range")
    a = g.arrays()
    raw = _kernels.ctmc_events_py(a.indptr, a.cum_rates, a.lam0, a.targets,
                                  a.jumps, start_node, float(t_end), seed)
    return [WalkState(time=float(t), node=int(y), displacement=dx)
            for t, y, dx in raw]


def occupation_fractions(events, t_end, n_nodes, start_node=0):
    """Fraction of ``[0, t_end]`` spent in each quotient node."""
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    frac = np.zeros(n_nodes)
    node = start_node
    t = 0.0
    for ev in events:
        frac[node] += ev.time - t
        node = ev.node
        t = ev.time
    frac[node] += t_end - t
    return frac / t_end


# ---------------------------------------------------------------------------
# reflecting walk configuration

@dataclass(frozen=True)
class ReflectingWalkConfig:
    """Planar wait-then-step walk among reflecting periodic obstructions.

    The walker sits still for ``wait`` time units, then moves instantaneously
    along a fresh uniform direction for arc length ``step``, bouncing
    specularly off obstruction walls.  The default waiting time ``step**2 / 4``
    makes the free walk diffuse with unit coefficient in the plane.
    """

    step: float
    wait: float = None
    obstruction: ObstructionSpec = field(default_factory=ObstructionSpec)
    start: tuple = None
    max_reflections: int = 64

    def __post_init__(self):
        if self.step <= 0.0:
            raise ValueError("step must be positive")
        if self.wait is None:
            object.__setattr__(self, "wait", self.step ** 2 / 4.0)
        if self.wait <= 0.0:
            raise ValueError("wait must be positive")
        if self.obstruction.dim != 2:
            raise ValueError("reflecting walk runs in the plane only")
        if self.start is None:
            object.__setattr__(self, "start", (0.375, 0.375))
        start = np.asarray(self.start, dtype=np.float64)
        if start.shape != (2,):
            raise ValueError("start must be a point in the plane")
        if self.obstruction.contains(start):
            raise ValueError("start lies inside an obstruction")
        object.__setattr__(self, "start", (float(start[0]), float(start[1])))
        if self.max_reflections < 1:
            raise ValueError("max_reflections must be at least 1")


def _box_arrays(obstruction):
    lo = np.array([b[0] for b in obstruction.boxes], dtype=np.float64)
    hi = np.array([b[1] for b in obstruction.boxes], dtype=np.float64)
    return lo.reshape(-1, 2), hi.reshape(-1, 2)


def reflect_segment(start, direction, length, obstruction=None,
                    max_reflections=64):
    """Trace one straight shot of given arc length with specular bounces.

    Returns ``(end, vertices, n_bounces)`` where ``vertices`` lists the wall
    contact points in order.  Raises :class:`ReflectionOverflow` when the
    bounce cap is exceeded, which flags a corner trap rather than a long but
    finite cascade.
    """
    from .errors import ReflectionOverflow

    if obstruction is None:
        obstruction = ObstructionSpec()
    pos = np.array(start, dtype=np.float64).copy()
    vel = np.array(direction, dtype=np.float64).copy()
    norm = float(np.hypot(vel[0], vel[1]))
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    vel /= norm
    lo, hi = _box_arrays(obstruction)
    verts = np.zeros((max_reflections + 1, 2))
    nb = _kernels._march_py(pos, vel, float(length), lo, hi, max_reflections,
                            verts)
    if nb < 0:
        raise ReflectionOverflow(
            f"segment exceeded {max_reflections} reflections")
    return pos, verts[:nb].copy(), int(nb)


# ---------------------------------------------------------------------------
# mean squared displacement estimation

@dataclass
class MsdEstimate:
    """Mean squared displacement curve with a fitted diffusivity.

    ``msd`` averages the squared displacement over paths at each grid time;
    ``stderr`` is the across-path standard error of that mean.  ``d_e`` comes
    from a zero-intercept least squares fit of ``msd`` against ``2 * dim * t``
    and ``ci95`` brackets it by resampling whole paths.  Per-axis variants
    divide by ``2 t`` instead, one independent coordinate at a time.
    """

    times: np.ndarray
    msd: np.ndarray
    stderr: np.ndarray
    d_e: float
    ci95: tuple
    n_paths: int
    seed: int
    dim: int
    d_e_axes: np.ndarray = None
    ci95_axes: np.ndarray = None
    axis_msd: np.ndarray = None
    source: str = "custom"
    path_squares: np.ndarray = field(default=None, repr=False)
    axis_squares: np.ndarray = field(default=None, repr=False)


def _fit_slope(times, values, weights=None):
    """Zero-intercept least squares slope of ``values`` against ``times``.

    The time grid runs along the last axis of ``values``; leading axes are
    fitted independently.  Only strictly positive times enter the fit, and
    fewer than three distinct ones leave the slope underdetermined for our
    purposes and raise :class:`DegenerateGrid`.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    keep = times > 0.0
    t = times[keep]
    if np.unique(t).size < 3:
        raise DegenerateGrid("need at least 3 distinct positive times to fit")
    y = values[..., keep]
    w = np.ones_like(t) if weights is None else np.asarray(weights)[keep]
    den = float(np.dot(w * t, t))
    return y @ (w * t) / den


def default_time_grid(g, n_points=DEFAULT_GRID_POINTS,
                      target_cells=DEFAULT_TARGET_CELLS):
    """Uniform grid long enough to diffuse across ``target_cells`` periods.

    The horizon solves ``2 * dim * d_free * t = target_cells**2`` with
    ``d_free`` the diffusivity the jump rates would give with no geometry in
    the way, a scale that is cheap and always available.
    """
    a = g.arrays()
    sq = np.einsum("ed,ed->e", a.jumps, a.jumps) * a.rates
    per_node = np.add.reduceat(sq, a.indptr[:-1]) if g.n_edges else np.zeros(1)
    d_free = float(np.mean(per_node)) / (2.0 * g.dim)
    if d_free <= 0.0:
        raise ValueError("graph has no moving edges")
    t_end = target_cells ** 2 / (2.0 * g.dim * d_free)
    return np.linspace(0.0, t_end, n_points)


def _validate_grid(t_grid):
    ts = np.asarray(t_grid, dtype=np.float64)
    if ts.ndim != 1 or ts.size == 0:
        raise ValueError("time grid must be a nonempty 1-D array")
    if ts[0] < 0.0 or np.any(np.diff(ts) < 0.0):
        raise ValueError("time grid must be nonnegative and sorted")
    return ts


def _bootstrap_ci(path_squares, axis_squares, ts, dim, seed):
    """Percentile intervals for the fitted diffusivity by path resampling."""
    n_paths = path_squares.shape[0]
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, 0xB00457])
    total = np.empty(BOOTSTRAP_RESAMPLES)
    axes = np.empty((BOOTSTRAP_RESAMPLES, dim))
    flat_axis = axis_squares.reshape(n_paths, -1)
    done = 0
    while done < BOOTSTRAP_RESAMPLES:
        m = min(BOOTSTRAP_CHUNK, BOOTSTRAP_RESAMPLES - done)
        counts = rng.multinomial(n_paths, np.full(n_paths, 1.0 / n_paths),
                                 size=m).astype(np.float64)
        msd_b = counts @ path_squares / n_paths
        axis_b = (counts @ flat_axis / n_paths).reshape(m, ts.size, dim)
        total[done:done + m] = _fit_slope(ts, msd_b) / (2.0 * dim)
        axes[done:done + m] = _fit_slope(ts, axis_b.transpose(0, 2, 1)) / 2.0
        done += m
    lo, hi = np.percentile(total, [2.5, 97.5])
    axis_ci = np.percentile(axes, [2.5, 97.5], axis=0).T
    return (float(lo), float(hi)), axis_ci


def _lattice_label(g):
    meta = g.meta or {}
    fam = meta.get("family")
    if fam is None:
        return f"custom dim={g.dim} nodes={g.n_nodes}"
    parts = [str(fam)]
    for key in ("h", "interaction"):
        if key in meta:
            parts.append(f"{key}={meta[key]}")
    return " ".join(parts)


def estimate_msd(system, t_grid, n_paths, seed, *, center=False, start_node=0,
                 backend=None, n_threads=None):
    """Estimate mean squared displacement over many independent paths.

    ``system`` is either a quotient graph, sampled by its jump chain, or a
    :class:`ReflectingWalkConfig`, sampled by the reflecting walk.  With a
    graph whose long-run drift is nonzero the squared displacement grows
    ballistically and the fit is meaningless, so the call refuses with
    :class:`DriftNotCentered` unless ``center=True`` subtracts the exact
    drift ``u * t`` from every path first.
    """
    if n_paths < MIN_PATHS:
        raise ValueError(f"need at least {MIN_PATHS} paths, got {n_paths}")
    ts = _validate_grid(t_grid)
    if n_threads is not None:
        _kernels.set_threads(n_threads)

    if isinstance(system, ReflectingWalkConfig):
        lo, hi = _box_arrays(system.obstruction)
        starts = np.tile(np.asarray(system.start), (n_paths, 1))
        out, _ = _kernels.reflect_paths(starts, system.step, system.wait,
                                        lo, hi, ts, seed,
                                        system.max_reflections,
                                        backend=backend)
        disp = out - np.asarray(system.start)
        dim = 2
        source = f"reflecting step={system.step!r} wait={system.wait!r}"
    elif isinstance(system, QuotientGraph):
        g = system
        if not 0 <= start_node < g.n_nodes:
            raise ValueError(f"start_node {start_node} out of range")
        rm = rate_matrix(g)
        pi = stationary_nullvector(rm.transpose)
        u_bar = long_run_drift(g, pi)
        drifty = np.max(np.abs(u_bar)) > null_drift_tolerance(g)
        if drifty and not center:
            raise DriftNotCentered(
                "long-run drift is nonzero; pass center=True to subtract it")
        a = g.arrays()
        starts = np.full(n_paths, start_node, dtype=np.int64)
        disp, _, _ = _kernels.ctmc_paths(a.indptr, a.cum_rates, a.lam0,
                                         a.targets, a.jumps, starts, ts, seed,
                                         backend=backend)
        if center and drifty:
            disp = disp - u_bar[None, None, :] * ts[None, :, None]
        dim = g.dim
        source = _lattice_label(g)
    else:
        raise TypeError("system must be a QuotientGraph or "
                        "ReflectingWalkConfig")

    axis_squares = disp ** 2
    path_squares = axis_squares.sum(axis=2)
    msd = path_squares.mean(axis=0)
    stderr = path_squares.std(axis=0, ddof=1) / np.sqrt(n_paths)
    axis_msd = axis_squares.mean(axis=0)

    d_e = float(_fit_slope(ts, msd)) / (2.0 * dim)
    d_e_axes = _fit_slope(ts, axis_msd.T) / 2.0
    ci95, ci95_axes = _bootstrap_ci(path_squares, axis_squares, ts, dim, seed)

    return MsdEstimate(times=ts, msd=msd, stderr=stderr, d_e=d_e, ci95=ci95,
                       n_paths=int(n_paths), seed=int(seed), dim=dim,
                       d_e_axes=d_e_axes, ci95_axes=ci95_axes,
                       axis_msd=axis_msd, source=source,
                       path_squares=path_squares, axis_squares=axis_squares)


def fit_diffusivity(est, weights=None):
    """Refit ``(d_e, ci95)`` from a stored estimate.

    With the per-path squares at hand the interval comes from the same
    bootstrap as :func:`estimate_msd`; otherwise it falls back to propagating
    the per-time standard errors through the linear fit, which ignores the
    correlation between grid times and so tends to run narrow.
    """
    slope = _fit_slope(est.times, est.msd, weights=weights)
    d_e = float(slope) / (2.0 * est.dim)
    if est.path_squares is not None and est.axis_squares is not None:
        ci95, _ = _bootstrap_ci(est.path_squares, est.axis_squares,
                                est.times, est.dim, est.seed)
        return d_e, ci95
    keep = est.times > 0.0
    t = est.times[keep]
    w = np.ones_like(t) if weights is None else np.asarray(weights)[keep]
    den = float(np.dot(w * t, t))
    var = float(np.dot((w * t) ** 2, est.stderr[keep] ** 2)) / den ** 2
    half = 1.96 * np.sqrt(var) / (2.0 * est.dim)
    return d_e, (d_e - half, d_e + half)


# ---------------------------------------------------------------------------
# CSV round trips

def format_msd_csv(est):
    """Estimate as CSV text with seed and source recorded in comments."""
    lines = [f"# seed={est.seed}", f"# graph={est.source}",
             "time,msd,stderr,n_paths"]
    for i in range(est.times.size):
        lines.append(f"{float(est.times[i])!r},{float(est.msd[i])!r},"
                     f"{float(est.stderr[i])!r},{est.n_paths}")
    return "\n".join(lines) + "\n"


def write_msd_csv(path, est):
    with open(path, "w") as fh:
        fh.write(format_msd_csv(est))


def read_msd_csv(path, dim=2):
    """Parse a CSV written by :func:`write_msd_csv`.

    The per-path samples are gone, so the returned estimate carries the
    curve, the refitted diffusivity, and the propagated-error interval.
    """
    seed = 0
    source = "custom"
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("seed="):
                    seed = int(body[5:])
                elif body.startswith("graph="):
                    source = body[6:]
                continue
            if line.startswith("time,"):
                continue
            parts = line.split(",")
            rows.append((float(parts[0]), float(parts[1]), float(parts[2]),
                         int(parts[3])))
    if not rows:
        raise ValueError(f"no data rows in {path}")
    times = np.array([r[0] for r in rows])
    msd = np.array([r[1] for r in rows])
    stderr = np.array([r[2] for r in rows])
    n_paths = rows[0][3]
    est = MsdEstimate(times=times, msd=msd, stderr=stderr, d_e=0.0,
                      ci95=(0.0, 0.0), n_paths=n_paths, seed=seed, dim=dim,
                      source=source)
    try:
        est.d_e, est.ci95 = fit_diffusivity(est)
    except DegenerateGrid:
        est.d_e = float("nan")
        est.ci95 = (float("nan"), float("nan"))
    return est


def write_events_csv(path, events, seed, source="custom"):
    """Write a jump-event trace as CSV, one row per jump."""
    dim = events[0].displacement.size if events else 0
    cols = ",".join(f"dx{k + 1}" for k in range(dim))
    header = f"time,node,{cols}" if dim else "time,node"
    lines = [f"# seed={seed}", f"# graph={source}", header]
    for ev in events:
        dx = ",".join(repr(float(v)) for v in ev.displacement)
        lines.append(f"{float(ev.time)!r},{ev.node},{dx}" if dim
                     else f"{float(ev.time)!r},{ev.node}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
