"""Dynamical systems on E = [0, 1) with Lebesgue measure, and profile functions.

A profile is a function E -> [0, B] that modulates one step probability of a
dynamic walk through the orbit point tau^i(x0).

Known-good (profile, system) pairs for the Birkhoff-growth conditions are an
irrational rotation driving a trigonometric profile; an identity map driving a
non-constant profile is the standard failing case (linear growth).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .rng import counter_uint64


class ConfigurationError(ValueError):
    """Invalid law, profile or system parameters."""


ROTATION = "irrational_rotation"
DOUBLING = "doubling"
IDENTITY = "identity"

# Bits of the 2-adic expansion that fit in one double.
_MANTISSA_BITS = 53


def _looks_rational(x: float, max_den: int = 10**4, tol: float = 1e-12) -> bool:
    return abs(float(Fraction(x).limit_denominator(max_den)) - x) < tol


@dataclass(frozen=True)
class DynamicalSystem:
    """tau acting on [0, 1) with starting point ``x0``.

    ``gamma`` is only used by the rotation x -> x + gamma (mod 1).
    ``surrogate_seed`` feeds the binary tail appended to ``x0`` for the
    doubling map, so that its orbit does not collapse to 0 after 53 steps.
    """

    kind: str
    x0: float = 0.0
    gamma: float = 0.0
    surrogate_seed: int = 0

    def __post_init__(self):
        if self.kind not in (ROTATION, DOUBLING, IDENTITY):
            raise ConfigurationError(f"unknown dynamical system kind {self.kind!r}")
        if not 0.0 <= self.x0 < 1.0:
            raise ConfigurationError(f"x0 must lie in [0, 1), got {self.x0}")
        if self.kind == ROTATION and not 0.0 < self.gamma < 1.0:
            raise ConfigurationError(f"rotation gamma must lie in (0, 1), got {self.gamma}")

    @classmethod
    def rotation(cls, gamma: float, x0: float = 0.0) -> "DynamicalSystem":
        return cls(ROTATION, x0=x0, gamma=gamma)

    @classmethod
    def doubling(cls, x0: float, surrogate_seed: int = 0) -> "DynamicalSystem":
        return cls(DOUBLING, x0=x0, surrogate_seed=surrogate_seed)

    @classmethod
    def identity(cls, x0: float = 0.0) -> "DynamicalSystem":
        return cls(IDENTITY, x0=x0)

    @property
    def ergodic(self) -> bool:
        if self.kind == IDENTITY:
            return False
        if self.kind == ROTATION:
            return not _looks_rational(self.gamma)
        return True

    @property
    def metadata(self) -> dict:
        meta = {"kind": self.kind, "x0": self.x0, "ergodic": self.ergodic}
        if self.kind == ROTATION:
            meta["gamma"] = self.gamma
        if self.kind == DOUBLING:
            meta["orbit"] = "doubling-surrogate"
            meta["surrogate_seed"] = self.surrogate_seed
        return meta


def _split_gamma(gamma: float) -> tuple[float, float]:
    # high part carries 26 significant bits, so i * hi is exact for i < 2**27
    hi = math.ldexp(math.floor(math.ldexp(gamma, 26)), -26)
    return hi, gamma - hi


def orbit(ds: DynamicalSystem, indices) -> np.ndarray:
    """tau^i(x0) for an array of non-negative integers ``i``."""
    idx = np.asarray(indices, dtype=np.int64)
    if np.any(idx < 0):
        raise ValueError("orbit indices must be non-negative")
    if ds.kind == IDENTITY:
        return np.full(idx.shape, ds.x0)
    if ds.kind == ROTATION:
        hi, lo = _split_gamma(ds.gamma)
        prod = idx.astype(float) * hi
        x = (prod - np.floor(prod)) + (ds.x0 + idx * lo)
        x = x - np.floor(x)
        x[x >= 1.0] = 0.0
        return x
    return np.array([_doubling_point(ds.x0, ds.surrogate_seed, int(i)) for i in idx.ravel()]).reshape(
        idx.shape
    )


def iterate(ds: DynamicalSystem, i: int) -> float:
    return float(orbit(ds, [i])[0])


@lru_cache(maxsize=1 << 16)
def _tail_word(seed: int, k: int) -> int:
    return int(counter_uint64(seed, 0xD0B1, k, 0))


def _doubling_point(x0: float, seed: int, i: int) -> float:
    """Bits i+1 .. i+53 of x0's extended binary expansion.

    Word 0 (bits 1..64) holds the exact binary digits of the float ``x0``;
    every later 64-bit word is drawn from a counter-based stream keyed by
    ``seed``. Shifting the expansion left by ``i`` is exactly i applications
    of x -> 2x mod 1.
    """
    q, s = divmod(i, 64)
    pair = (_expansion_word(x0, seed, q) << 64) | _expansion_word(x0, seed, q + 1)
    window = (pair >> (128 - s - _MANTISSA_BITS)) & ((1 << _MANTISSA_BITS) - 1)
    return math.ldexp(window, -_MANTISSA_BITS)


def _expansion_word(x0: float, seed: int, k: int) -> int:
    if k == 0:
        return int(x0 * 2.0**64)  # exact: x0 has at most 53 significant bits
    return _tail_word(seed, k)


# ---------------------------------------------------------------------------
# profiles

CONSTANT = "constant"
AFFINE_COSINE = "affine_cosine"
INDICATOR = "indicator"


@dataclass(frozen=True)
class Profile:
    """A function [0, 1) -> [0, bound].

    constant: ``c``; affine_cosine: ``a + b cos(2 pi x)``; indicator:
    ``bound`` when ``x < s`` else 0.
    """

    kind: str
    bound: float
    c: float = 0.0
    a: float = 0.0
    b: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        B = self.bound
        if not B > 0:
            raise ConfigurationError(f"profile bound must be positive, got {B}")
        if self.kind == CONSTANT:
            if not 0.0 <= self.c <= B:
                raise ConfigurationError(f"constant {self.c} outside [0, {B}]")
        elif self.kind == AFFINE_COSINE:
            if self.a - abs(self.b) < 0.0 or self.a + abs(self.b) > B:
                raise ConfigurationError(
                    f"affine cosine a={self.a}, b={self.b} leaves [0, {B}]"
                )
        elif self.kind == INDICATOR:
            if not 0.0 <= self.s <= 1.0:
                raise ConfigurationError(f"indicator threshold {self.s} outside [0, 1]")
        else:
            raise ConfigurationError(f"unknown profile kind {self.kind!r}")

    @classmethod
    def constant(cls, c: float, bound: float) -> "Profile":
        return cls(CONSTANT, bound, c=c)

    @classmethod
    def affine_cosine(cls, a: float, b: float, bound: float) -> "Profile":
        return cls(AFFINE_COSINE, bound, a=a, b=b)

    @classmethod
    def indicator(cls, s: float, bound: float) -> "Profile":
        return cls(INDICATOR, bound, s=s)

    @property
    def integral(self) -> float:
        """Closed-form integral against Lebesgue measure on [0, 1)."""
        if self.kind == CONSTANT:
            return self.c
        if self.kind == AFFINE_COSINE:
            return self.a
        return self.bound * self.s

    @property
    def is_indicator(self) -> bool:
        return self.kind == INDICATOR

    def __call__(self, x):
        return profile_eval(self, x)


def profile_eval(p: Profile, x):
    """Evaluate ``p`` at a point or array of points of [0, 1)."""
    xa = np.asarray(x, dtype=float)
    if p.kind == CONSTANT:
        out = np.full(xa.shape, p.c)
    elif p.kind == AFFINE_COSINE:
        out = p.a + p.b * np.cos(2.0 * np.pi * xa)
    else:
        out = np.where(xa < p.s, p.bound, 0.0)
    if np.any(out < 0.0) or np.any(out > p.bound):
        raise ConfigurationError(f"profile value left [0, {p.bound}]")
    return float(out) if out.ndim == 0 else out


def profile_along_orbit(p: Profile, ds: DynamicalSystem, indices) -> np.ndarray:
    return np.asarray(profile_eval(p, orbit(ds, indices)), dtype=float)


# ---------------------------------------------------------------------------
# Birkhoff diagnostics


def birkhoff_deviation(p: Profile, ds: DynamicalSystem, n: int) -> np.ndarray:
    """D_m = |sum_{i=1}^m (p(tau^i x0) - int p)| for m = 1..n."""
    vals = profile_along_orbit(p, ds, np.arange(1, n + 1)) - p.integral
    return np.abs(np.cumsum(vals))


def deviation_trends(p: Profile, ds: DynamicalSystem, n: int) -> dict[str, np.ndarray]:
    """D_m / sqrt(m) and D_m log(m) / sqrt(m), the finite-n surrogates
    for the o(sqrt n) and o(sqrt n / log n) growth conditions."""
    dev = birkhoff_deviation(p, ds, n)
    m = np.arange(1, n + 1, dtype=float)
    root = np.sqrt(m)
    return {"m": m, "deviation": dev, "h2": dev / root, "h1": dev * np.log(m) / root}


def ergodic_mean(p: Profile, ds: DynamicalSystem, n: int) -> float:
    """Birkhoff average (1/n) sum_{i=1}^n p(tau^i x0).

    For an ergodic map this estimates int p; for the identity map it returns
    p(x0), which is the conditional expectation given the invariant field.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if p.kind == CONSTANT:
        return p.c
    if ds.kind == IDENTITY:
        return float(profile_eval(p, ds.x0))
    vals = profile_along_orbit(p, ds, np.arange(1, n + 1))
    return math.fsum(vals) / n


def lint_incommensurable(angles, max_coeff: int = 8, tol: float = 1e-9) -> list[str]:
    """Warn about small integer relations c_0 + sum c_k theta_k = 0.

    Floats cannot certify independence over Q; this only catches obvious
    resonances in user-supplied angles.
    """
    import itertools

    found = []
    angles = [float(a) for a in angles]
    rng = range(-max_coeff, max_coeff + 1)
    for coeffs in itertools.product(rng, repeat=len(angles)):
        if not any(coeffs):
            continue
        s = sum(c * a for c, a in zip(coeffs, angles))
        if abs(s - round(s)) < tol:
            found.append(f"integer relation {coeffs} with sum {s:.3g}")
            break
    for msg in found:
        warnings.warn(f"rotation angles {angles} look commensurable: {msg}", stacklevel=2)
    return found
