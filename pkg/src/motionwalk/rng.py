"""Counter-based uniform streams.

Every draw is a pure function of (master seed, walker id, step, tag), so a
walker's trajectory does not depend on how walkers are batched or scheduled.
The mixer is the SplitMix64 finalizer applied in two keyed rounds.
"""
from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SEED_SALT = np.uint64(0x5851F42D4C957F2D)

TAG_TRANSLATION = 0
TAG_ROTATION = 1

# tags share the step counter; keep them below this
_N_TAGS = 4


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def walker_key(seed: int, walker) -> np.ndarray:
    s = np.asarray(seed & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64)
    w = np.asarray(walker, dtype=np.uint64)
    return _mix(_mix(s ^ _SEED_SALT) + (w + np.uint64(1)) * _GAMMA)


def counter_uint64(seed: int, walker, step, tag: int) -> np.ndarray:
    """64 random bits for each broadcast combination of ``walker`` and ``step``."""
    with np.errstate(over="ignore"):
        key = walker_key(seed, walker)
        ctr = np.asarray(step, dtype=np.uint64) * np.uint64(_N_TAGS) + np.uint64(tag)
        z = key ^ _mix(ctr * _GAMMA + _GAMMA)
        return _mix(z + _GAMMA)


def counter_uniform(seed: int, walker, step, tag: int) -> np.ndarray:
    """Uniform doubles in [0, 1) with 53 random bits."""
    bits = counter_uint64(seed, walker, step, tag)
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


class WalkerStream:
    """The private stream of one walker; ``uniform(step, tag)`` is random access."""

    def __init__(self, seed: int, walker_id: int):
        self.seed = int(seed)
        self.walker_id = int(walker_id)

    def uniform(self, step, tag: int = TAG_TRANSLATION):
        u = counter_uniform(self.seed, self.walker_id, step, tag)
        return float(u) if u.ndim == 0 else u

    def __repr__(self):
        return f"WalkerStream(seed={self.seed}, walker_id={self.walker_id})"
