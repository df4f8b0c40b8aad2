"""Simulation kernels in two interchangeable engines.

The jit engine compiles per-path loops and runs them across threads; the
numpy engine drives every path in lockstep with masked vector updates.
Both draw from the per-path streams of :mod:`._rng`, consume draws in the
same order, and compare floats with identical expressions, so a given
(seed, path) produces the same trajectory bit for bit on either engine.
Step directions are sampled by normalizing a point drawn uniformly from
the disk rather than through cos/sin: compilers round transcendentals
differently, while multiply, divide, and square root are exact enough to
keep the engines in lockstep.

Select with the PERIWALK_BACKEND environment variable ("numba" or
"numpy"); the default is the jit engine when importable.
"""

import os

import numpy as np

from . import _rng
from .errors import ReflectionOverflow

BACKEND_ENV = "PERIWALK_BACKEND"
_EDGE_EPS = 1e-12  # ray parameter below this is the face we just left
_TAIL_EPS = 1e-15  # residual arc length not worth marching

try:
    import numba
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag instead
    numba = None
    _HAVE_NUMBA = False


def available_backends():
    return ("numba", "numpy") if _HAVE_NUMBA else ("numpy",)


def default_backend():
    choice = os.environ.get(BACKEND_ENV, "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not _HAVE_NUMBA:
            raise ImportError("PERIWALK_BACKEND=numba but numba is not importable")
        return "numba"
    if choice:
        raise ValueError(f"unknown {BACKEND_ENV} value {choice!r}")
    return "numba" if _HAVE_NUMBA else "numpy"


def set_threads(n):
    """Cap the jit engine's thread count; silently ignored without numba."""
    if _HAVE_NUMBA and n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


# ---------------------------------------------------------------------------
# continuous-time walk on the quotient graph

def ctmc_paths_numpy(indptr, cum_rates, lam0, targets, jumps, starts, ts, seed):
    """All paths in lockstep; per-path draws identical to the scalar loop."""
    P = starts.shape[0]
    T = ts.shape[0]
    d = jumps.shape[1]
    n = lam0.shape[0]
    out = np.zeros((P, T, d))
    njumps = np.zeros(P, dtype=np.int64)
    if T == 0:
        return out, njumps, starts.astype(np.int64).copy()

    deg = np.diff(indptr)
    padded = np.full((n, int(deg.max()) if n else 1), np.inf)
    for y in range(n):
        padded[y, :deg[y]] = cum_rates[indptr[y]:indptr[y + 1]]

    with np.errstate(over="ignore", divide="ignore"):
        state, inc = _rng.stream_for_path(seed, np.arange(P, dtype=np.uint64))
        node = starts.astype(np.int64).copy()
        pos = np.zeros((P, d))
        t = np.zeros(P)
        fill = np.zeros(P, dtype=np.int64)
        active = np.ones(P, dtype=bool)
        while active.any():
            new_state, draw = _rng.pcg32_next(state, inc)
            state = np.where(active, new_state, state)
            dt = -np.log(_rng.uniform01(draw)) / lam0[node]
            t_next = np.where(active, t + dt, t)
            while True:
                can = np.flatnonzero(active & (fill < T))
                can = can[ts[fill[can]] < t_next[can]]
                if can.size == 0:
                    break
                out[can, fill[can]] = pos[can]
                fill[can] += 1
            active &= fill < T
            live = np.flatnonzero(active)
            if live.size == 0:
                break
            new_state, draw = _rng.pcg32_next(state, inc)
            state[live] = new_state[live]
            thresh = _rng.uniform01(draw[live]) * lam0[node[live]]
            rows = padded[node[live]]
            sel = np.argmax(rows >= thresh[:, None], axis=1)
            sel = np.minimum(sel, deg[node[live]] - 1)
            e = indptr[node[live]] + sel
            pos[live] += jumps[e]
            node[live] = targets[e]
            t[live] = t_next[live]
            njumps[live] += 1
    return out, njumps, node


def ctmc_events_py(indptr, cum_rates, lam0, targets, jumps, start, t_end, seed,
                   path=0):
    """Jump events of one path up to t_end: (time, node, displacement) rows."""
    events = []
    with np.errstate(over="ignore", divide="ignore"):
        state, inc = _rng.stream_for_path(_rng.as_seed(seed), np.uint64(path))
        y = int(start)
        pos = np.zeros(jumps.shape[1])
        t = 0.0
        while True:
            state, draw = _rng.pcg32_next(state, inc)
            dt = -np.log(_rng.uniform01(draw)) / lam0[y]
            t_next = t + dt
            if t_next > t_end:
                break
            state, draw = _rng.pcg32_next(state, inc)
            thresh = _rng.uniform01(draw) * lam0[y]
            e = indptr[y + 1] - 1
            for k in range(indptr[y], indptr[y + 1]):
                if cum_rates[k] >= thresh:
                    e = k
                    break
            pos = pos + jumps[e]
            y = int(targets[e])
            t = t_next
            events.append((t, y, pos.copy()))
    return events


# ---------------------------------------------------------------------------
# continuous reflecting walk

def _march_py(pos, vel, length, lo, hi, maxb, verts):
    """Advance along a unit direction for a given arc length with specular
    bounces off the periodic boxes; returns the bounce count, or -1 when the
    cap is exceeded.  Bounce points are recorded into ``verts`` as far as it
    has rows (pass a (0, 2) array to skip recording).  The jit engine
    compiles this exact code.
    """
    remaining = length
    bounces = 0
    B = lo.shape[0]
    while remaining > _TAIL_EPS:
        hit_t = remaining + 1.0
        hit_flip0 = False
        hit_flip1 = False
        seg0a = pos[0] + min(vel[0] * remaining, 0.0)
        seg0b = pos[0] + max(vel[0] * remaining, 0.0)
        seg1a = pos[1] + min(vel[1] * remaining, 0.0)
        seg1b = pos[1] + max(vel[1] * remaining, 0.0)
        base0 = np.floor(pos[0])
        base1 = np.floor(pos[1])
        for b in range(B):
            for z0 in range(-1, 2):
                l0 = lo[b, 0] + base0 + z0
                h0 = hi[b, 0] + base0 + z0
                if h0 < seg0a - _EDGE_EPS or l0 > seg0b + _EDGE_EPS:
                    continue
                for z1 in range(-1, 2):
                    l1 = lo[b, 1] + base1 + z1
                    h1 = hi[b, 1] + base1 + z1
                    if h1 < seg1a - _EDGE_EPS or l1 > seg1b + _EDGE_EPS:
                        continue
                    # slab intersection of the ray with this box translate
                    enter0 = -np.inf
                    exit0 = np.inf
                    if vel[0] != 0.0:
                        t1 = (l0 - pos[0]) / vel[0]
                        t2 = (h0 - pos[0]) / vel[0]
                        enter0 = min(t1, t2)
                        exit0 = max(t1, t2)
                    elif pos[0] < l0 or pos[0] > h0:
                        continue
                    enter1 = -np.inf
                    exit1 = np.inf
                    if vel[1] != 0.0:
                        t1 = (l1 - pos[1]) / vel[1]
                        t2 = (h1 - pos[1]) / vel[1]
                        enter1 = min(t1, t2)
                        exit1 = max(t1, t2)
                    elif pos[1] < l1 or pos[1] > h1:
                        continue
                    tmin = max(enter0, enter1)
                    tmax = min(exit0, exit1)
                    if tmax < tmin or tmin <= _EDGE_EPS or tmin > remaining:
                        continue
                    if tmin < hit_t:
                        hit_t = tmin
                        # a corner hit enters both slabs at once: flip both
                        hit_flip0 = enter0 >= tmin - _EDGE_EPS
                        hit_flip1 = enter1 >= tmin - _EDGE_EPS
        if hit_t > remaining:
            pos[0] += vel[0] * remaining
            pos[1] += vel[1] * remaining
            return bounces
        pos[0] += vel[0] * hit_t
        pos[1] += vel[1] * hit_t
        if hit_flip0:
            vel[0] = -vel[0]
        if hit_flip1:
            vel[1] = -vel[1]
        remaining -= hit_t
        if bounces < verts.shape[0]:
            verts[bounces, 0] = pos[0]
            verts[bounces, 1] = pos[1]
        bounces += 1
        if bounces > maxb:
            return -1
    return bounces


def _reflect_path_py(starts, h, wait, lo, hi, ts, seed, path, maxb, out, stats):
    """One path of the reflecting walk; the jit kernel compiles this code."""
    state, inc = _rng.stream_for_path(seed, path)
    T = ts.shape[0]
    pos = np.zeros(2)
    pos[0] = starts[0]
    pos[1] = starts[1]
    vel = np.zeros(2)
    no_verts = np.zeros((0, 2))
    t = 0.0
    fill = 0
    bounces = 0
    while fill < T:
        t_next = t + wait
        while fill < T and ts[fill] < t_next:
            out[fill, 0] = pos[0]
            out[fill, 1] = pos[1]
            fill += 1
        if fill >= T:
            break
        while True:
            state, draw = _rng.pcg32_next(state, inc)
            u = 2.0 * _rng.uniform01(draw) - 1.0
            state, draw = _rng.pcg32_next(state, inc)
            v = 2.0 * _rng.uniform01(draw) - 1.0
            s = u * u + v * v
            if 0.0 < s <= 1.0:
                break
        norm = np.sqrt(s)
        vel[0] = u / norm
        vel[1] = v / norm
        nb = _march_py(pos, vel, h, lo, hi, maxb, no_verts)
        if nb < 0:
            stats[0] = bounces
            stats[1] = 1
            return
        bounces += nb
        t = t_next
    stats[0] = bounces
    stats[1] = 0


def reflect_paths_numpy(starts, h, wait, lo, hi, ts, seed, maxb):
    P = starts.shape[0]
    T = ts.shape[0]
    out = np.zeros((P, T, 2))
    bounces = np.zeros(P, dtype=np.int64)
    status = np.zeros(P, dtype=np.int64)
    stats = np.zeros(2, dtype=np.int64)
    with np.errstate(over="ignore"):
        for p in range(P):
            _reflect_path_py(starts[p], h, wait, lo, hi, ts,
                             seed, np.uint64(p), maxb, out[p], stats)
            bounces[p] = stats[0]
            status[p] = stats[1]
    return out, bounces, status


# ---------------------------------------------------------------------------
# jit engine

if _HAVE_NUMBA:
    _sm = numba.njit(cache=True)(_rng.splitmix64)
    _init = numba.njit(cache=True)(_rng.pcg32_init)

    @numba.njit(cache=True)
    def _stream_nb(seed, path):
        two = np.uint64(2)
        one = np.uint64(1)
        return _init(_sm(seed, path * two), _sm(seed, path * two + one))

    _next_nb = numba.njit(cache=True)(_rng.pcg32_next)
    _u01_nb = numba.njit(cache=True)(_rng.uniform01)
    _march_nb = numba.njit(cache=True)(_march_py)

    @numba.njit(cache=True)
    def _ctmc_path_nb(indptr, cum_rates, lam0, targets, jumps, start, ts, seed,
                      path, out, stats):
        state, inc = _stream_nb(seed, path)
        y = start
        d = jumps.shape[1]
        T = ts.shape[0]
        pos = np.zeros(d)
        t = 0.0
        fill = 0
        jcount = 0
        while True:
            state, draw = _next_nb(state, inc)
            dt = -np.log(_u01_nb(draw)) / lam0[y]
            t_next = t + dt
            while fill < T and ts[fill] < t_next:
                for k in range(d):
                    out[fill, k] = pos[k]
                fill += 1
            if fill >= T:
                break
            state, draw = _next_nb(state, inc)
            thresh = _u01_nb(draw) * lam0[y]
            e = indptr[y + 1] - 1
            for k in range(indptr[y], indptr[y + 1]):
                if cum_rates[k] >= thresh:
                    e = k
                    break
            for k in range(d):
                pos[k] += jumps[e, k]
            y = targets[e]
            t = t_next
            jcount += 1
        stats[0] = jcount
        stats[1] = y

    @numba.njit(cache=True, parallel=True)
    def _ctmc_kernel(indptr, cum_rates, lam0, targets, jumps, starts, ts, seed):
        P = starts.shape[0]
        T = ts.shape[0]
        d = jumps.shape[1]
        out = np.zeros((P, T, d))
        njumps = np.zeros(P, dtype=np.int64)
        final = np.empty(P, dtype=np.int64)
        for p in numba.prange(P):
            stats = np.zeros(2, dtype=np.int64)
            _ctmc_path_nb(indptr, cum_rates, lam0, targets, jumps, starts[p],
                          ts, seed, np.uint64(p), out[p], stats)
            njumps[p] = stats[0]
            final[p] = stats[1]
        return out, njumps, final

    @numba.njit(cache=True, parallel=True)
    def _reflect_kernel(starts, h, wait, lo, hi, ts, seed, maxb):
        P = starts.shape[0]
        T = ts.shape[0]
        out = np.zeros((P, T, 2))
        bounces = np.zeros(P, dtype=np.int64)
        status = np.zeros(P, dtype=np.int64)
        for p in numba.prange(P):
            stats = np.zeros(2, dtype=np.int64)
            _reflect_path_nb(starts[p], h, wait, lo, hi, ts,
                             seed, np.uint64(p), maxb, out[p], stats)
            bounces[p] = stats[0]
            status[p] = stats[1]
        return out, bounces, status

    @numba.njit(cache=True)
    def _reflect_path_nb(starts, h, wait, lo, hi, ts, seed, path, maxb, out,
                         stats):
        state, inc = _stream_nb(seed, path)
        T = ts.shape[0]
        pos = np.zeros(2)
        pos[0] = starts[0]
        pos[1] = starts[1]
        vel = np.zeros(2)
        no_verts = np.zeros((0, 2))
        t = 0.0
        fill = 0
        bounces = 0
        while fill < T:
            t_next = t + wait
            while fill < T and ts[fill] < t_next:
                out[fill, 0] = pos[0]
                out[fill, 1] = pos[1]
                fill += 1
            if fill >= T:
                break
            while True:
                state, draw = _next_nb(state, inc)
                u = 2.0 * _u01_nb(draw) - 1.0
                state, draw = _next_nb(state, inc)
                v = 2.0 * _u01_nb(draw) - 1.0
                s = u * u + v * v
                if 0.0 < s <= 1.0:
                    break
            norm = np.sqrt(s)
            vel[0] = u / norm
            vel[1] = v / norm
            nb = _march_nb(pos, vel, h, lo, hi, maxb, no_verts)
            if nb < 0:
                stats[0] = bounces
                stats[1] = 1
                return
            bounces += nb
            t = t_next
        stats[0] = bounces
        stats[1] = 0


# ---------------------------------------------------------------------------
# dispatchers

def ctmc_paths(indptr, cum_rates, lam0, targets, jumps, starts, ts, seed,
               backend=None):
    """Positions of every path at the grid times, plus jump counts and the
    final quotient node per path."""
    backend = backend or default_backend()
    seed = _rng.as_seed(seed)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    ts = np.ascontiguousarray(ts, dtype=np.float64)
    if backend == "numba":
        return _ctmc_kernel(indptr, cum_rates, lam0, targets, jumps,
                            starts, ts, seed)
    return ctmc_paths_numpy(indptr, cum_rates, lam0, targets, jumps,
                            starts, ts, seed)


def reflect_paths(starts, h, wait, lo, hi, ts, seed, max_reflections,
                  backend=None):
    """Positions of every reflecting-walk path at the grid times.

    Raises :class:`ReflectionOverflow` when any path needs more than the
    allowed bounces inside one step.
    """
    backend = backend or default_backend()
    seed = _rng.as_seed(seed)
    starts = np.ascontiguousarray(starts, dtype=np.float64)
    ts = np.ascontiguousarray(ts, dtype=np.float64)
    lo = np.ascontiguousarray(lo, dtype=np.float64)
    hi = np.ascontiguousarray(hi, dtype=np.float64)
    if backend == "numba":
        out, bounces, status = _reflect_kernel(starts, h, wait, lo, hi, ts,
                                               seed, max_reflections)
    else:
        out, bounces, status = reflect_paths_numpy(starts, h, wait, lo, hi, ts,
                                                   seed, max_reflections)
    bad = np.flatnonzero(status)
    if bad.size:
        raise ReflectionOverflow(
            f"path {int(bad[0])} exceeded {max_reflections} reflections in a "
            "single step")
    return out, bounces


def warmup(backend=None):
    """Compile the kernels on a toy problem so timed runs start hot."""
    backend = backend or default_backend()
    indptr = np.array([0, 2], dtype=np.int64)
    cum = np.array([1.0, 2.0])
    lam0 = np.array([2.0])
    targets = np.array([0, 0], dtype=np.int64)
    jumps = np.array([[1.0], [-1.0]])
    ts = np.array([0.0, 1.0])
    ctmc_paths(indptr, cum, lam0, targets, jumps, np.zeros(2, dtype=np.int64),
               ts, 1, backend=backend)
    lo = np.array([[0.75, 0.75]])
    hi = np.array([[1.0, 1.0]])
    reflect_paths(np.full((2, 2), 0.375), 0.25, 0.015625, lo, hi, ts, 1, 64,
                  backend=backend)
