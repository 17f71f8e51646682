"""Trajectories of S_n = T_1 + R_1 T_2 + ... + R_1...R_{n-1} T_n.

The rotation prefix R_1...R_n is tracked as an integer exponent per rotation
generator, so prefix angles never accumulate rounding. Walkers are processed
in fixed shards of consecutive ids; every random draw comes from the
counter-based stream of (master_seed, walker, step), so results do not depend
on the number of worker processes.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .dynamics import ConfigurationError
from .group_core import Character, TorusRotation, rotate_blocks
from .rng import TAG_ROTATION, TAG_TRANSLATION, counter_uniform
from .step_laws import RotationLaw, TranslationLaw, exponent_angles, identity_law, step_fourier_series

log = logging.getLogger(__name__)

SHARD_SIZE = 4096
_BLOCK_ELEMENTS = 1 << 20


def geometric_checkpoints(n_steps: int) -> tuple[int, ...]:
    """1, 2, 10, 20, 100, 200, ... up to ``n_steps`` (always included)."""
    out = []
    p = 1
    while p <= n_steps:
        out.extend(c for c in (p, 2 * p) if c <= n_steps)
        p *= 10
    if not out or out[-1] != n_steps:
        out.append(n_steps)
    return tuple(sorted(set(out)))


@dataclass(frozen=True)
class WalkConfig:
    translation_law: TranslationLaw
    n_steps: int
    rotation_law: RotationLaw | None = None
    checkpoints: tuple[int, ...] | None = None
    ensemble_size: int = 1
    master_seed: int = 0
    track_increments: bool = False

    def __post_init__(self):
        if self.rotation_law is None:
            object.__setattr__(self, "rotation_law", identity_law(self.d))
        if self.rotation_law.dim != self.d:
            raise ConfigurationError(
                f"rotation law acts on d={self.rotation_law.dim}, translations on d={self.d}"
            )
        if self.n_steps < 1:
            raise ConfigurationError("n_steps must be >= 1")
        if self.ensemble_size < 1:
            raise ConfigurationError("ensemble_size must be >= 1")
        cps = geometric_checkpoints(self.n_steps) if self.checkpoints is None else self.checkpoints
        cps = tuple(int(c) for c in cps)
        if list(cps) != sorted(set(cps)):
            raise ConfigurationError(f"checkpoints must be strictly increasing: {cps}")
        if not cps or cps[0] < 1 or cps[-1] > self.n_steps:
            raise ConfigurationError(f"checkpoints {cps} must lie in [1, {self.n_steps}]")
        object.__setattr__(self, "checkpoints", cps)

    @property
    def d(self) -> int:
        return self.translation_law.d

    @property
    def lattice(self) -> bool:
        """Positions stay in Z^d when no rotations are applied."""
        return self.rotation_law.is_identity


@dataclass
class TrajectoryRecord:
    walker_id: int
    checkpoints: tuple[int, ...]
    positions: np.ndarray  # (C, d) S_n at each checkpoint
    exponents: np.ndarray  # (C, n_gen) generator exponents of R_1...R_n
    increments: np.ndarray  # (C, d) X_n = R_1...R_{n-1} T_n
    rotation_law: RotationLaw = field(repr=False)

    def prefix(self, k: int) -> TorusRotation:
        """Rotation prefix R_1...R_n at the k-th checkpoint."""
        return self.rotation_law.rotation_of(self.exponents[k])


@dataclass
class ShardResult:
    walker_ids: np.ndarray
    checkpoints: tuple[int, ...]
    positions: np.ndarray  # (W, C, d)
    exponents: np.ndarray  # (W, C, n_gen)
    increments: np.ndarray  # (W, C, d)
    inc_sum: np.ndarray | None = None  # (n_steps, d) sum over walkers of X_n
    inc_sq_sum: np.ndarray | None = None  # (n_steps,) sum over walkers of |X_n|^2

    def record(self, k: int, law: RotationLaw) -> TrajectoryRecord:
        return TrajectoryRecord(
            int(self.walker_ids[k]),
            self.checkpoints,
            self.positions[k],
            self.exponents[k],
            self.increments[k],
            law,
        )


def advance(
    position: np.ndarray,
    exponents: np.ndarray,
    translations: np.ndarray,
    rotation_codes: np.ndarray,
    law: RotationLaw,
):
    """Apply a block of B steps to W walkers.

    position: (W, d), exponents: (W, n_gen), translations: (B, W, d),
    rotation_codes: (B, W). Returns positions (B, W, d) after each step,
    exponents (B, W, n_gen) after each step, and the rotated steps X (B, W, d).
    Step i uses the prefix before R_i is drawn, so T_1 enters unrotated.
    """
    if law.is_identity:
        x = translations.astype(float)
        m_after = np.broadcast_to(exponents, translations.shape[:2] + exponents.shape[-1:])
    else:
        inc = law.outcome_increments()[rotation_codes]
        m_after = exponents[None] + np.cumsum(inc, axis=0)
        angles = exponent_angles(m_after - inc, law.generators)
        x = rotate_blocks(angles, translations)
    # prepend the start so cumsum adds steps strictly in order
    s = np.cumsum(np.concatenate([position[None], x], axis=0), axis=0)[1:]
    return s, m_after, x


def forced_walk(translations, rotation_codes, law: RotationLaw):
    """Run one walker through prescribed draws.

    ``translations`` is (n, d) arbitrary vectors, ``rotation_codes`` is (n,)
    outcome codes of ``law``. Returns (positions (n, d), exponents (n, n_gen)).
    """
    t = np.asarray(translations, dtype=float)
    codes = np.asarray(rotation_codes, dtype=np.int64)
    if t.ndim != 2 or t.shape[1] != law.dim:
        raise ConfigurationError(f"forced translations of shape {t.shape} for d={law.dim}")
    if codes.shape != (t.shape[0],):
        raise ConfigurationError("one rotation code per step is required")
    s, m, _ = advance(
        np.zeros((1, law.dim)),
        np.zeros((1, law.n_generators), dtype=np.int64),
        t[:, None, :],
        codes[:, None],
        law,
    )
    return s[:, 0], m[:, 0]


def simulate_shard(config: WalkConfig, start: int, stop: int) -> ShardResult:
    """Simulate walkers ``start .. stop-1``."""
    d = config.d
    tlaw, rlaw = config.translation_law, config.rotation_law
    walkers = np.arange(start, stop, dtype=np.uint64)
    W = len(walkers)
    C = len(config.checkpoints)
    cps = np.asarray(config.checkpoints)
    out_pos = np.zeros((W, C, d))
    out_exp = np.zeros((W, C, rlaw.n_generators), dtype=np.int64)
    out_inc = np.zeros((W, C, d))
    track = config.track_increments
    inc_sum = np.zeros((config.n_steps, d)) if track else None
    inc_sq = np.zeros(config.n_steps) if track else None

    steps_table = tlaw.outcome_vectors()
    pos = np.zeros((W, d))
    exps = np.zeros((W, rlaw.n_generators), dtype=np.int64)
    block = max(1, min(config.n_steps, _BLOCK_ELEMENTS // (W * (d + 2))))
    i0 = 0
    while i0 < config.n_steps:
        i1 = min(config.n_steps, i0 + block)
        steps = np.arange(i0 + 1, i1 + 1, dtype=np.uint64)
        u_t = counter_uniform(config.master_seed, walkers[None, :], steps[:, None], TAG_TRANSLATION)
        t_codes = tlaw.sample_codes(steps.astype(np.int64), u_t)
        if rlaw.is_identity:
            r_codes = np.zeros(u_t.shape, dtype=np.int64)
        else:
            u_r = counter_uniform(config.master_seed, walkers[None, :], steps[:, None], TAG_ROTATION)
            r_codes = rlaw.sample_codes(steps.astype(np.int64), u_r)
        s, m, x = advance(pos, exps, steps_table[t_codes], r_codes, rlaw)
        sel = np.nonzero((cps > i0) & (cps <= i1))[0]
        for k in sel:
            row = cps[k] - i0 - 1
            out_pos[:, k] = s[row]
            out_exp[:, k] = m[row]
            out_inc[:, k] = x[row]
        if track:
            inc_sum[i0:i1] = x.sum(axis=1)
            inc_sq[i0:i1] = np.einsum("bwd,bwd->b", x, x)
        pos = s[-1]
        exps = np.array(m[-1])
        i0 = i1
    return ShardResult(walkers.astype(np.int64), config.checkpoints, out_pos, out_exp, out_inc, inc_sum, inc_sq)


def run_walk(config: WalkConfig, walker_id: int) -> TrajectoryRecord:
    return simulate_shard(config, walker_id, walker_id + 1).record(0, config.rotation_law)


def shard_bounds(ensemble_size: int, shard_size: int = SHARD_SIZE) -> list[tuple[int, int]]:
    return [(a, min(a + shard_size, ensemble_size)) for a in range(0, ensemble_size, shard_size)]


def _shard_task(args):
    config, start, stop = args
    return simulate_shard(config, start, stop)


def iter_shards(config: WalkConfig, workers: int = 1) -> Iterator[ShardResult]:
    """Shards in walker order; ``workers`` > 1 uses a process pool."""
    bounds = shard_bounds(config.ensemble_size)
    if workers <= 1 or len(bounds) == 1:
        for a, b in bounds:
            yield simulate_shard(config, a, b)
        return
    log.info("simulating %d shards on %d workers", len(bounds), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(_shard_task, [(config, a, b) for a, b in bounds])


def run_ensemble(config: WalkConfig, workers: int = 1) -> Iterator[TrajectoryRecord]:
    for shard in iter_shards(config, workers):
        for k in range(len(shard.walker_ids)):
            yield shard.record(k, config.rotation_law)


def expected_product_operator(law: RotationLaw, n: int) -> np.ndarray:
    """E(R_1 ... R_n) as a d x d matrix.

    Block m is the complex number E chi_m(R_1...R_n), where chi_m reads the
    angle of block m, written as the 2 x 2 matrix [[re, -im], [im, re]].
    A trailing fixed axis (odd d) keeps the entry 1.
    """
    d = law.dim
    op = np.eye(d)
    if law.is_identity or n < 1:
        return op
    for b in range(law.r):
        idx = [0] * law.r
        idx[b] = 1
        z = np.prod(step_fourier_series(law, np.arange(1, n + 1), Character(tuple(idx))))
        i = 2 * b
        op[i : i + 2, i : i + 2] = [[z.real, -z.imag], [z.imag, z.real]]
    return op


def operator_norm(op: np.ndarray) -> float:
    return float(np.linalg.norm(op, 2))
