"""Counter-based per-path random streams.

A PCG32 core per path, seeded through splitmix64, makes the stream of
path p under seed s a pure function of (s, p).  Workers can therefore
draw any path's numbers without coordination, and a vectorized engine
sees bit-identical streams to a scalar loop.

Every function below is written in plain uint64 numpy arithmetic with no
branches, so the same source works on scalars, on whole arrays of
per-path states, and under jit compilation.  Callers must pass uint64
inputs; mixing in signed ints changes the promotion rules.
"""

import numpy as np

_MULT = np.uint64(6364136223846793005)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U1 = np.uint64(1)
_U2 = np.uint64(2)
_U18 = np.uint64(18)
_U27 = np.uint64(27)
_U30 = np.uint64(30)
_U31 = np.uint64(31)
_U32 = np.uint64(32)
_U59 = np.uint64(59)
_MASK32 = np.uint64(0xFFFFFFFF)
_INV32 = 2.0 ** -32


def splitmix64(seed, index):
    """Output number ``index`` of the splitmix64 sequence started at seed."""
    x = seed + (index + _U1) * _GAMMA
    x = (x ^ (x >> _U30)) * _MIX1
    x = (x ^ (x >> _U27)) * _MIX2
    return x ^ (x >> _U31)


def pcg32_init(initstate, initseq):
    """Initial (state, inc) of a PCG32 stream, per the reference seeding."""
    inc = (initseq << _U1) | _U1
    state = (inc + initstate) * _MULT + inc
    return state, inc


def pcg32_next(state, inc):
    """One PCG32 step: returns (new_state, 32-bit output in a uint64)."""
    new = state * _MULT + inc
    xorshifted = (((state >> _U18) ^ state) >> _U27) & _MASK32
    rot = state >> _U59
    out = ((xorshifted >> rot) | (xorshifted << ((_U32 - rot) & _U31))) & _MASK32
    return new, out


def stream_for_path(seed, path):
    """Initial (state, inc) for one path (or an array of paths) of a seed."""
    initstate = splitmix64(seed, path * _U2)
    initseq = splitmix64(seed, path * _U2 + _U1)
    return pcg32_init(initstate, initseq)


def uniform01(out):
    """Map a 32-bit draw into the open interval (0, 1)."""
    return (out * 1.0 + 0.5) * _INV32


def as_seed(seed):
    """Coerce any integer (sign included) into a uint64 seed."""
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
