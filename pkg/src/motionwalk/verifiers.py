"""Estimators and limit-theorem checks over walk ensembles.

Summaries are built per shard and merged pairwise in a fixed tree over shard
index, so aggregate floats depend only on the ensemble size, never on how
shards were scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import ergodic_mean
from .group_core import Character, TorusRotation
from .step_laws import RotationLaw, TranslationLaw, exponent_angles
from .walk_engine import ShardResult, WalkConfig, iter_shards


class UsageError(ValueError):
    """A verifier was applied to a walk it does not make sense for."""


@dataclass
class EnsembleSummary:
    """Mergeable per-checkpoint aggregates of an ensemble."""

    checkpoints: tuple[int, ...]
    lattice: bool
    characters: tuple[Character, ...]
    count: int
    mean: np.ndarray  # (C, d) mean of S_n
    m2: np.ndarray  # (C, d, d) centered co-moment sums of S_n
    char_sums: np.ndarray  # (C, n_chars) complex sums of chi(R_1...R_n)
    return_counts: np.ndarray  # (C,) walkers with S_n == 0 (lattice walks only)
    inc_sum: np.ndarray | None = None
    inc_sq_sum: np.ndarray | None = None
    positions: np.ndarray | None = field(default=None, repr=False)  # (M, C, d)

    @classmethod
    def from_shard(
        cls,
        shard: ShardResult,
        law: RotationLaw,
        characters: Sequence[Character] = (),
        lattice: bool = False,
        keep_positions: bool = False,
    ) -> "EnsembleSummary":
        pos = shard.positions
        W = pos.shape[0]
        mean = pos.mean(axis=0)
        dev = pos - mean
        m2 = np.einsum("wci,wcj->cij", dev, dev)
        chars = tuple(characters)
        sums = np.zeros((len(shard.checkpoints), len(chars)), dtype=complex)
        if chars:
            angles = exponent_angles(shard.exponents, law.generators)  # (W, C, r)
            for q, chi in enumerate(chars):
                sums[:, q] = character_values(angles, chi).sum(axis=0)
        returns = np.all(pos == 0.0, axis=-1).sum(axis=0) if lattice else np.zeros(len(shard.checkpoints), int)
        return cls(
            shard.checkpoints,
            lattice,
            chars,
            W,
            mean,
            m2,
            sums,
            returns.astype(np.int64),
            shard.inc_sum,
            shard.inc_sq_sum,
            pos if keep_positions else None,
        )

    def merge(self, other: "EnsembleSummary") -> "EnsembleSummary":
        """Chan et al. pairwise combination of means and co-moments."""
        na, nb = self.count, other.count
        n = na + nb
        delta = other.mean - self.mean
        mean = self.mean + delta * (nb / n)
        m2 = self.m2 + other.m2 + np.einsum("ci,cj->cij", delta, delta) * (na * nb / n)

        def add(a, b):
            return None if a is None or b is None else a + b

        pos = None
        if self.positions is not None and other.positions is not None:
            pos = np.concatenate([self.positions, other.positions], axis=0)
        return EnsembleSummary(
            self.checkpoints,
            self.lattice,
            self.characters,
            n,
            mean,
            m2,
            self.char_sums + other.char_sums,
            self.return_counts + other.return_counts,
            add(self.inc_sum, other.inc_sum),
            add(self.inc_sq_sum, other.inc_sq_sum),
            pos,
        )

    def index(self, n: int) -> int:
        try:
            return self.checkpoints.index(n)
        except ValueError:
            raise UsageError(f"n={n} is not a recorded checkpoint {self.checkpoints}") from None

    def covariance(self, n: int) -> np.ndarray:
        """Sample covariance of S_n / sqrt(n)."""
        k = self.index(n)
        ddof = 1 if self.count > 1 else 0
        cov = self.m2[k] / (self.count - ddof) / n
        return 0.5 * (cov + cov.T)

    def character_moment(self, n: int, chi: Character) -> complex:
        if chi.is_trivial:
            return 1.0 + 0.0j
        return complex(self.char_sums[self.index(n), self.characters.index(chi)] / self.count)

    def increment_variance(self) -> np.ndarray:
        """Unbiased E|X_n - E X_n|^2 for n = 1..n_steps."""
        if self.inc_sum is None:
            raise UsageError("walk was run without increment tracking")
        M = self.count
        mean = self.inc_sum / M
        var = self.inc_sq_sum / M - np.einsum("nd,nd->n", mean, mean)
        if M > 1:
            var = var * (M / (M - 1))
        return np.maximum(var, 0.0)


def tree_reduce(items: list[EnsembleSummary]) -> EnsembleSummary:
    """Merge adjacent pairs level by level; the tree shape depends only on len(items)."""
    if not items:
        raise ValueError("nothing to reduce")
    level = list(items)
    while len(level) > 1:
        nxt = [level[i].merge(level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def summarize(
    config: WalkConfig,
    characters: Sequence[Character] = (),
    workers: int = 1,
    keep_positions: bool = False,
) -> EnsembleSummary:
    law = config.rotation_law
    parts = [
        EnsembleSummary.from_shard(shard, law, characters, config.lattice, keep_positions)
        for shard in iter_shards(config, workers)
    ]
    return tree_reduce(parts)


# ---------------------------------------------------------------------------
# Haar measure


def character_values(angles: np.ndarray, chi: Character) -> np.ndarray:
    """chi evaluated on block angles ``angles[..., r]``."""
    k = np.asarray(chi.indices, dtype=float)
    t = angles @ k
    t = t - np.floor(t)
    return np.exp(2j * np.pi * t)


def character_moment(samples, chi: Character) -> complex:
    """(1/M) sum_m chi(prefix_m) over rotation samples.

    ``samples`` is an (M, r) array of block angles or a list of TorusRotation.
    """
    if chi.is_trivial:
        return 1.0 + 0.0j
    if len(samples) and isinstance(samples[0], TorusRotation):
        samples = np.array([s.block_angles for s in samples])
    return complex(character_values(np.asarray(samples, dtype=float), chi).mean())


def moment_tolerance(M: int) -> float:
    return 3.0 / math.sqrt(M) + 0.005


def haar_verdict(moments: dict[Character, complex], M: int) -> bool:
    """All non-trivial moments are indistinguishable from 0 at 3/sqrt(M) + 0.005."""
    tol = moment_tolerance(M)
    return all(abs(z) <= tol for chi, z in moments.items() if not chi.is_trivial)


# ---------------------------------------------------------------------------
# CLT


def isotropy_score(cov: np.ndarray) -> float:
    """Largest off-diagonal magnitude plus spread of the diagonal."""
    cov = np.asarray(cov)
    diag = np.diag(cov)
    off = cov - np.diag(diag)
    off_max = float(np.max(np.abs(off))) if cov.shape[0] > 1 else 0.0
    return off_max + float(diag.max() - diag.min())


def clt_covariance(summary: EnsembleSummary, n: int) -> tuple[np.ndarray, float]:
    cov = summary.covariance(n)
    return cov, isotropy_score(cov)


# ---------------------------------------------------------------------------
# LLT


def llt_reference(d: int, A, n: int) -> float:
    """2 / (sqrt(det A) (4 pi n)^(d/2)), the asymptotic P(S_2n = 0)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape != (d, d):
        raise ValueError(f"A must be {d} x {d}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not np.allclose(A, A.T) or np.linalg.eigvalsh(A).min() <= 0:
        raise ValueError("A must be symmetric positive definite")
    return 2.0 / (math.sqrt(np.linalg.det(A)) * (4.0 * math.pi * n) ** (d / 2))


def return_frequency(summary: EnsembleSummary, n: int) -> float:
    """Fraction of walkers with S_n exactly 0."""
    if not summary.lattice:
        raise UsageError("point returns are only defined for lattice (unrotated) walks")
    return float(summary.return_counts[summary.index(n)] / summary.count)


def return_stderr(p: float, M: int) -> float:
    return math.sqrt(p * (1.0 - p) / M)


def exact_simple_return(d: int, n_steps: int) -> float:
    """P(S_n = 0) for the uniform simple walk on Z^1 or Z^2."""
    if n_steps % 2:
        return 0.0
    h = n_steps // 2
    p1 = math.comb(n_steps, h) / 2.0**n_steps
    if d == 1:
        return p1
    if d == 2:
        # the 45-degree change of variables makes the two coordinates independent 1-d walks
        return p1 * p1
    raise ValueError("closed form available for d = 1, 2 only")


def llt_slope(half_steps: Sequence[int], probabilities: Sequence[float]) -> float:
    """Least-squares slope of log P(S_2n = 0) against log n."""
    x = np.log(np.asarray(half_steps, dtype=float))
    y = np.log(np.asarray(probabilities, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# SLLN


def compute_v0(law: TranslationLaw, n_avg: int = 100_000) -> np.ndarray:
    """(2 E(h_j | invariant field) - 1/d)_j estimated by Birkhoff averages."""
    d = law.d
    return np.array([2.0 * ergodic_mean(h, law.ds, n_avg) - 1.0 / d for h in law.profiles])


def invariant_projection(law: RotationLaw) -> np.ndarray:
    """Orthogonal projection onto vectors fixed by every generator of ``law``."""
    P = np.eye(law.dim)
    if law.is_identity:
        return P
    active = np.any(law.generators != 0.0, axis=0)
    for b in np.nonzero(active)[0]:
        P[2 * b, 2 * b] = P[2 * b + 1, 2 * b + 1] = 0.0
    return P


def slln_target(config: WalkConfig, n_avg: int = 100_000) -> np.ndarray:
    return invariant_projection(config.rotation_law) @ compute_v0(config.translation_law, n_avg)


@dataclass
class SllnResult:
    checkpoints: tuple[int, ...]
    alpha: float
    target: np.ndarray
    median: np.ndarray  # (C,) median of |S_n / n^alpha - target|
    q90: np.ndarray
    component_median: np.ndarray  # (C, d) median of S_n / n^alpha per coordinate
    decreasing: bool
    alpha_in_range: bool


def slln_scaled(summary: EnsembleSummary, alpha: float, target) -> SllnResult:
    if summary.positions is None:
        raise UsageError("scaled-norm quantiles need per-walker positions (keep_positions)")
    n = np.asarray(summary.checkpoints, dtype=float)
    target = np.asarray(target, dtype=float)
    scaled = summary.positions / (n[None, :, None] ** alpha)
    norms = np.linalg.norm(scaled - target, axis=-1)
    median = np.median(norms, axis=0)
    q90 = np.quantile(norms, 0.9, axis=0)
    tail = median[-3:]
    decreasing = bool(np.all(np.diff(tail) < 0)) if len(tail) >= 2 else False
    return SllnResult(
        summary.checkpoints,
        alpha,
        target,
        median,
        q90,
        np.median(scaled, axis=0),
        decreasing,
        alpha > 0.5,
    )


@dataclass
class SummabilityResult:
    alpha: float
    partial_sums: np.ndarray
    tail_fraction: float
    summable: bool


def summability_diagnostic(x_variance, alpha: float) -> SummabilityResult:
    """Partial sums of E|X_n - E X_n|^2 / n^(2 alpha).

    Flattening criterion: the increment over the last decade of n is below 1%
    of the total.
    """
    v = np.asarray(x_variance, dtype=float)
    N = len(v)
    n = np.arange(1, N + 1, dtype=float)
    sums = np.cumsum(v / n ** (2.0 * alpha))
    total = float(sums[-1]) if N else 0.0
    if total == 0.0:
        return SummabilityResult(alpha, sums, 0.0, True)
    head = N // 10
    tail = total - (float(sums[head - 1]) if head >= 1 else 0.0)
    frac = tail / total
    return SummabilityResult(alpha, sums, frac, frac < 0.01)
