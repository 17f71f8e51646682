"""Arithmetic on motion groups K x| R^d where K is a torus inside SO(d).

Rotations are stored as block angles measured in turns (1 turn = 2*pi rad).
Block ``m`` rotates the coordinate plane ``(2m, 2m+1)``; when ``d`` is odd the
last coordinate is left fixed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


class DimensionError(ValueError):
    """Raised when operands live in incompatible dimensions."""


def wrap_turns(x: float) -> float:
    """Fractional part of ``x`` in [0, 1)."""
    r = x - math.floor(x)
    # x slightly below an integer rounds up to exactly 1.0
    return 0.0 if r >= 1.0 else r


def wrap_turns_array(x: np.ndarray) -> np.ndarray:
    r = x - np.floor(x)
    r[r >= 1.0] = 0.0
    return r


def n_blocks(d: int) -> int:
    return d // 2


@dataclass(frozen=True)
class TorusRotation:
    ambient_dim: int
    block_angles: tuple[float, ...]

    def __post_init__(self):
        if self.ambient_dim < 1:
            raise DimensionError(f"ambient_dim must be >= 1, got {self.ambient_dim}")
        angles = tuple(wrap_turns(float(a)) for a in self.block_angles)
        if len(angles) != n_blocks(self.ambient_dim):
            raise DimensionError(
                f"d={self.ambient_dim} needs {n_blocks(self.ambient_dim)} block angles, "
                f"got {len(angles)}"
            )
        object.__setattr__(self, "block_angles", angles)

    @classmethod
    def identity(cls, d: int) -> "TorusRotation":
        return cls(d, (0.0,) * n_blocks(d))

    @classmethod
    def planar(cls, angle: float) -> "TorusRotation":
        """SO(2) rotation by ``angle`` turns."""
        return cls(2, (angle,))

    @property
    def n_blocks(self) -> int:
        return len(self.block_angles)

    def __matmul__(self, other: "TorusRotation") -> "TorusRotation":
        return compose_rotations(self, other)

    def inverse(self) -> "TorusRotation":
        return TorusRotation(self.ambient_dim, tuple(-a for a in self.block_angles))

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.ambient_dim,):
            raise DimensionError(f"vector of shape {v.shape} for d={self.ambient_dim}")
        return rotate_blocks(np.asarray(self.block_angles), v)


def compose_rotations(r1: TorusRotation, r2: TorusRotation) -> TorusRotation:
    if r1.ambient_dim != r2.ambient_dim:
        raise DimensionError(f"cannot compose d={r1.ambient_dim} with d={r2.ambient_dim}")
    return TorusRotation(
        r1.ambient_dim, tuple(a + b for a, b in zip(r1.block_angles, r2.block_angles))
    )


def rotate_blocks(angles: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate ``v[..., d]`` by block angles ``angles[..., r]`` (broadcasting).

    This is the single implementation of the torus action shared by the
    scalar group operations and the vectorized walk kernel.
    """
    out = np.array(v, dtype=float, copy=True)
    r = angles.shape[-1]
    if r == 0:
        return out
    phase = TWO_PI * angles
    c = np.cos(phase)
    s = np.sin(phase)
    x = v[..., 0 : 2 * r : 2]
    y = v[..., 1 : 2 * r : 2]
    out[..., 0 : 2 * r : 2] = c * x - s * y
    out[..., 1 : 2 * r : 2] = s * x + c * y
    return out


def torus_embed(rot: TorusRotation) -> np.ndarray:
    """The d x d orthogonal matrix of ``rot``."""
    d = rot.ambient_dim
    m = np.eye(d)
    for b, a in enumerate(rot.block_angles):
        c, s = math.cos(TWO_PI * a), math.sin(TWO_PI * a)
        i = 2 * b
        m[i : i + 2, i : i + 2] = [[c, -s], [s, c]]
    return m


@dataclass(frozen=True)
class Character:
    """Character of the r-torus: (t_1..t_r) -> exp(2 pi i sum k_m t_m)."""

    indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(k) for k in self.indices))

    @property
    def is_trivial(self) -> bool:
        return not any(self.indices)

    def label(self) -> str:
        return ";".join(str(k) for k in self.indices)


def character_eval(chi: Character, rot: TorusRotation) -> complex:
    if len(chi.indices) != rot.n_blocks:
        raise DimensionError(
            f"character of length {len(chi.indices)} on a {rot.n_blocks}-block torus"
        )
    if chi.is_trivial:
        return 1.0 + 0.0j
    # reduce the exponent in turns before converting to radians
    t = wrap_turns(math.fsum(k * a for k, a in zip(chi.indices, rot.block_angles)))
    return complex(math.cos(TWO_PI * t), math.sin(TWO_PI * t))


@dataclass(frozen=True)
class MotionElement:
    rotation: TorusRotation
    translation: np.ndarray = field(compare=False)

    def __post_init__(self):
        t = np.array(self.translation, dtype=float)
        if t.shape != (self.rotation.ambient_dim,):
            raise DimensionError(
                f"translation of shape {t.shape} for d={self.rotation.ambient_dim}"
            )
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)

    @property
    def dim(self) -> int:
        return self.rotation.ambient_dim

    @classmethod
    def identity(cls, d: int) -> "MotionElement":
        return cls(TorusRotation.identity(d), np.zeros(d))

    def __eq__(self, other):
        if not isinstance(other, MotionElement):
            return NotImplemented
        return self.rotation == other.rotation and np.array_equal(
            self.translation, other.translation
        )

    def __hash__(self):
        return hash((self.rotation, self.translation.tobytes()))

    def __mul__(self, other: "MotionElement") -> "MotionElement":
        return compose(self, other)


def compose(g1: MotionElement, g2: MotionElement) -> MotionElement:
    """(R1, T1)(R2, T2) = (R1 R2, T1 + R1 T2)."""
    if g1.dim != g2.dim:
        raise DimensionError(f"cannot compose d={g1.dim} with d={g2.dim}")
    return MotionElement(
        compose_rotations(g1.rotation, g2.rotation),
        g1.translation + g1.rotation.apply(g2.translation),
    )


def inverse(g: MotionElement) -> MotionElement:
    r_inv = g.rotation.inverse()
    return MotionElement(r_inv, -r_inv.apply(g.translation))


def apply(g: MotionElement, v: Sequence[float]) -> np.ndarray:
    """Affine action v -> R v + T."""
    return g.rotation.apply(v) + g.translation


def product_chain(elements: Iterable[MotionElement], d: int | None = None) -> MotionElement:
    """Left fold of :func:`compose`; the empty product is the identity.

    ``d`` is only needed to size the identity of an empty chain (default 2).
    """
    acc = None
    for g in elements:
        acc = g if acc is None else compose(acc, g)
    if acc is None:
        return MotionElement.identity(2 if d is None else d)
    return acc
