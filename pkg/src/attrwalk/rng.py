"""Seed derivation and a counter-style splitmix64 generator usable inside numba kernels.

Every random stream in the package is derived from a single integer seed:
``derive_seed(seed, "walks")`` etc. hashes the stage name together with the
global seed through :class:`numpy.random.SeedSequence`.
"""

import zlib

import numba
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


def derive_seed(seed: int, stage: str) -> int:
    """63-bit seed for ``stage`` derived from the global ``seed``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(stage.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@numba.njit(inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(inline="always")
def stream_state(seed, a, b):
    """Initial state of the stream keyed by ``(seed, a, b)``."""
    # callers from Python may hand in signed ints; int64 + uint64 would promote to float
    s = mix64(np.uint64(seed) + _GOLDEN)
    s = mix64(s ^ (np.uint64(a) + _GOLDEN))
    return mix64(s ^ (np.uint64(b) + _GOLDEN))


@numba.njit(inline="always")
def next_u64(state):
    state = np.uint64(state) + _GOLDEN
    return state, mix64(state)


@numba.njit(inline="always")
def next_float(state):
    """Uniform double in [0, 1)."""
    state, x = next_u64(state)
    return state, float(x >> _S11) * _INV53


@numba.njit(inline="always")
def next_below(state, n):
    """Uniform integer in [0, n)."""
    state, u = next_float(state)
    k = int(u * n)
    if k >= n:
        k = n - 1
    return state, k
