"""Per-step laws of dynamic walks.

Translation steps live on the unit vectors +-e_j of Z^d. Rotation steps are
+-g for a finite set of torus generators g, so a product of rotation steps is
determined by an integer exponent per generator. The outcome code ``o`` of a
law with ``n`` cells means cell ``o // 2`` with sign ``+`` when ``o`` is even.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ConfigurationError, DynamicalSystem, Profile, profile_along_orbit
from .dynamics import lint_incommensurable
from .group_core import Character, DimensionError, TorusRotation, character_eval, n_blocks
from .rng import TAG_ROTATION, TAG_TRANSLATION, WalkerStream

GOLDEN = 0.61803398874989484820  # (sqrt 5 - 1) / 2
SQRT2_M1 = 0.41421356237309504880
SQRT3_M1 = 0.73205080756887729353


def _check_bound(p: Profile, bound: float, where: str):
    if not math.isclose(p.bound, bound, rel_tol=0, abs_tol=1e-15):
        raise ConfigurationError(f"{where}: profile bound {p.bound} should be {bound}")


def _signed_pairs(plus: np.ndarray, total: float) -> np.ndarray:
    """Interleave p(+) and total - p(+) along a new last axis."""
    return np.stack([plus, total - plus], axis=-1)


def _sample_codes(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling.

    probs: (steps, K) cell probabilities; u: (steps, walkers) uniforms.
    Returns (steps, walkers) integer codes in [0, K).
    """
    cdf = np.cumsum(probs, axis=-1)
    cdf = cdf / cdf[:, -1:]
    thresholds = cdf[:, None, :-1]
    return np.sum(u[..., None] >= thresholds, axis=-1, dtype=np.int64)


@dataclass(frozen=True)
class TranslationLaw:
    """P(T_i = +e_j) = h_j(tau^i x0), P(T_i = -e_j) = 1/d - h_j(tau^i x0)."""

    profiles: tuple[Profile, ...]
    ds: DynamicalSystem

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if not self.profiles:
            raise ConfigurationError("translation law needs at least one profile")
        for j, p in enumerate(self.profiles):
            _check_bound(p, 1.0 / self.d, f"h_{j + 1}")

    @property
    def d(self) -> int:
        return len(self.profiles)

    @classmethod
    def uniform(cls, d: int, ds: DynamicalSystem | None = None) -> "TranslationLaw":
        ds = ds or DynamicalSystem.identity()
        return cls(tuple(Profile.constant(0.5 / d, 1.0 / d) for _ in range(d)), ds)

    def probabilities(self, steps) -> np.ndarray:
        """(len(steps), 2d) cell probabilities ordered +e_1, -e_1, +e_2, ..."""
        steps = np.atleast_1d(np.asarray(steps, dtype=np.int64))
        h = np.stack([profile_along_orbit(p, self.ds, steps) for p in self.profiles], axis=-1)
        return _signed_pairs(h, 1.0 / self.d).reshape(len(steps), 2 * self.d)

    def outcome_vectors(self) -> np.ndarray:
        """(2d, d) table of +-e_j in code order."""
        eye = np.eye(self.d)
        return np.stack([eye, -eye], axis=1).reshape(2 * self.d, self.d)

    def sample_codes(self, steps: np.ndarray, u: np.ndarray) -> np.ndarray:
        return _sample_codes(self.probabilities(steps), u)


def translation_distribution(law: TranslationLaw, i: int) -> list[tuple[np.ndarray, float]]:
    if i < 1:
        raise ValueError("step index starts at 1")
    probs = law.probabilities([i])[0]
    return [(v, float(p)) for v, p in zip(law.outcome_vectors(), probs)]


def sample_translation(law: TranslationLaw, i: int, stream: WalkerStream) -> np.ndarray:
    u = np.array([[stream.uniform(i, TAG_TRANSLATION)]])
    code = law.sample_codes(np.array([i]), u)[0, 0]
    return law.outcome_vectors()[code]


# ---------------------------------------------------------------------------
# rotation laws


@dataclass(frozen=True)
class RotationLaw:
    """A law on +-g_k for generators g_k of a torus in SO(dim).

    ``generators`` is (n_gen, r) block angles in turns; ``profiles[k]`` gives
    the probability of +g_k, with ``cell_mass - profiles[k]`` for -g_k.
    """

    variant: str
    dim: int
    generators: np.ndarray = field(compare=False)
    profiles: tuple[Profile, ...] = ()
    ds: DynamicalSystem = field(default_factory=DynamicalSystem.identity)

    def __post_init__(self):
        g = np.array(self.generators, dtype=float)
        r = n_blocks(self.dim)
        if g.ndim != 2 or g.shape[1] != r:
            g = g.reshape(-1, r) if r else np.zeros((0, 0))
        g = g - np.floor(g)
        g.setflags(write=False)
        object.__setattr__(self, "generators", g)
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if len(self.profiles) != g.shape[0]:
            raise ConfigurationError(
                f"{len(self.profiles)} profiles for {g.shape[0]} rotation generators"
            )
        for k, p in enumerate(self.profiles):
            _check_bound(p, self.cell_mass, f"rotation profile {k + 1}")

    @property
    def n_generators(self) -> int:
        return self.generators.shape[0]

    @property
    def r(self) -> int:
        return n_blocks(self.dim)

    @property
    def cell_mass(self) -> float:
        return 1.0 / self.n_generators if self.n_generators else 1.0

    @property
    def is_identity(self) -> bool:
        return self.n_generators == 0

    @property
    def degenerate(self) -> bool:
        """Indicator profiles put all mass on one outcome at every step."""
        return any(p.is_indicator for p in self.profiles)

    def probabilities(self, steps) -> np.ndarray:
        """(len(steps), 2 n_gen) probabilities ordered +g_1, -g_1, +g_2, ..."""
        steps = np.atleast_1d(np.asarray(steps, dtype=np.int64))
        if self.is_identity:
            return np.ones((len(steps), 1))
        f = np.stack([profile_along_orbit(p, self.ds, steps) for p in self.profiles], axis=-1)
        return _signed_pairs(f, self.cell_mass).reshape(len(steps), 2 * self.n_generators)

    def outcome_angles(self) -> np.ndarray:
        """(2 n_gen, r) block angles of the outcomes in code order."""
        if self.is_identity:
            return np.zeros((1, self.r))
        g = self.generators
        return np.stack([g, -g], axis=1).reshape(2 * self.n_generators, self.r)

    def outcome_increments(self) -> np.ndarray:
        """(2 n_gen, n_gen) change of the generator exponents per outcome code."""
        n = self.n_generators
        eye = np.eye(n, dtype=np.int64)
        return np.stack([eye, -eye], axis=1).reshape(2 * n, n)

    def sample_codes(self, steps: np.ndarray, u: np.ndarray) -> np.ndarray:
        if self.is_identity:
            return np.zeros(u.shape, dtype=np.int64)
        return _sample_codes(self.probabilities(steps), u)

    def rotation_of(self, exponents) -> TorusRotation:
        """The torus element prod_k g_k ** exponents[k]."""
        m = np.asarray(exponents, dtype=np.int64)
        return TorusRotation(self.dim, tuple(exponent_angles(m, self.generators)))


def exponent_angles(m: np.ndarray, generators: np.ndarray) -> np.ndarray:
    """Block angles (mod 1) of prod_k g_k ** m[..., k]."""
    if generators.shape[0] == 0:
        return np.zeros(m.shape[:-1] + (generators.shape[1],))
    a = (m[..., :, None].astype(float) * generators).sum(axis=-2)
    a = a - np.floor(a)
    a[a >= 1.0] = 0.0
    return a


def identity_law(dim: int) -> RotationLaw:
    return RotationLaw("identity", dim, np.zeros((0, n_blocks(dim))))


def so2_law(theta: float, f: Profile, ds: DynamicalSystem, dim: int = 2) -> RotationLaw:
    """+-theta in the first coordinate plane with P(+theta) = f(tau^j x0).

    For ``dim`` > 2 the remaining coordinates are left fixed.
    """
    if dim < 2:
        raise DimensionError("an SO(2) rotation law needs dim >= 2")
    g = np.zeros((1, n_blocks(dim)))
    g[0, 0] = theta
    return RotationLaw("so2", dim, g, (f,), ds)


def monothetic_law(a: TorusRotation, f: Profile, ds: DynamicalSystem, lint: bool = True) -> RotationLaw:
    """+-a for a single generator a whose powers are dense in the torus."""
    if lint and a.n_blocks > 1:
        lint_incommensurable(a.block_angles)
    return RotationLaw("monothetic", a.ambient_dim, np.array([a.block_angles]), (f,), ds)


def torus_basis_law(
    angles, profiles, ds: DynamicalSystem, dim: int | None = None, lint: bool = True
) -> RotationLaw:
    """e_k = rotation by theta_k in the k-th plane, all other blocks fixed.

    P(e_k) = f_k(tau^j x0) and P(e_k^-1) = 1/r - f_k(tau^j x0).
    """
    angles = [float(t) for t in angles]
    r = len(angles)
    dim = 2 * r if dim is None else dim
    if n_blocks(dim) < r:
        raise DimensionError(f"{r} basis angles do not fit in d={dim}")
    if lint:
        lint_incommensurable(angles)
    g = np.zeros((r, n_blocks(dim)))
    g[np.arange(r), np.arange(r)] = angles
    return RotationLaw("torus_basis", dim, g, tuple(profiles), ds)


def rotation_distribution(law: RotationLaw, j: int) -> list[tuple[TorusRotation, float]]:
    if j < 1:
        raise ValueError("step index starts at 1")
    probs = law.probabilities([j])[0]
    return [
        (TorusRotation(law.dim, tuple(a)), float(p))
        for a, p in zip(law.outcome_angles(), probs)
    ]


def sample_rotation(law: RotationLaw, j: int, stream: WalkerStream) -> TorusRotation:
    u = np.array([[stream.uniform(j, TAG_ROTATION)]])
    code = law.sample_codes(np.array([j]), u)[0, 0]
    return TorusRotation(law.dim, tuple(law.outcome_angles()[code]))


# ---------------------------------------------------------------------------
# Fourier transforms


def _check_character(law: RotationLaw, chi: Character):
    if len(chi.indices) != law.r:
        raise DimensionError(f"character {chi.indices} on a {law.r}-block torus")


def step_fourier_series(law: RotationLaw, steps, chi: Character) -> np.ndarray:
    """mu_j^(chi) = sum over outcomes of P(outcome) chi(outcome), for each j."""
    _check_character(law, chi)
    steps = np.atleast_1d(np.asarray(steps, dtype=np.int64))
    if chi.is_trivial or law.is_identity:
        return np.ones(len(steps), dtype=complex)
    phase = law.outcome_angles() @ np.asarray(chi.indices, dtype=float)
    phase = phase - np.floor(phase)
    vals = np.exp(2j * np.pi * phase)
    return law.probabilities(steps) @ vals


def step_fourier(law: RotationLaw, j: int, chi: Character) -> complex:
    return complex(step_fourier_series(law, [j], chi)[0])


def step_fourier_direct(law: RotationLaw, j: int, chi: Character) -> complex:
    """Same transform summed outcome by outcome through ``character_eval``."""
    return sum(p * character_eval(chi, rot) for rot, p in rotation_distribution(law, j))


def product_fourier_complex(law: RotationLaw, n: int, chi: Character) -> np.ndarray:
    """E chi(R_1 ... R_m) for m = 1..n (independent steps, abelian group)."""
    return np.cumprod(step_fourier_series(law, np.arange(1, n + 1), chi))


def step_modulus(values: np.ndarray) -> np.ndarray:
    """|mu_j^(chi)|, clipped to 1: a convex combination of unit complex
    numbers cannot exceed 1, only rounding can push it over."""
    return np.minimum(np.abs(values), 1.0)


def product_fourier_series(law: RotationLaw, n: int, chi: Character) -> np.ndarray:
    """prod_{j<=m} |mu_j^(chi)| for m = 1..n."""
    return np.cumprod(step_modulus(step_fourier_series(law, np.arange(1, n + 1), chi)))


def product_fourier(law: RotationLaw, n: int, chi: Character) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(product_fourier_series(law, n, chi)[-1])


def so2_modulus_squared(theta: float, k: int, f) -> np.ndarray:
    """Closed form 1 - 4 sin^2(2 pi k theta) f (1 - f) of |mu_j(k)|^2."""
    f = np.asarray(f, dtype=float)
    return 1.0 - 4.0 * math.sin(2.0 * math.pi * k * theta) ** 2 * f * (1.0 - f)


def mixing_floor(law: RotationLaw, n: int) -> np.ndarray:
    """(1/n) sum_j f_k(tau^j x)(cell_mass - f_k(tau^j x)) per generator.

    Stays away from zero unless a profile is an indicator.
    """
    p = law.probabilities(np.arange(1, n + 1))
    plus, minus = p[:, 0::2], p[:, 1::2]
    return (plus * minus).mean(axis=0)
