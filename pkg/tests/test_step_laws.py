import math

import numpy as np
import pytest
from scipy import stats

from motionwalk.dynamics import ConfigurationError, DynamicalSystem, Profile
from motionwalk.group_core import Character, DimensionError, TorusRotation
from motionwalk.rng import TAG_ROTATION, TAG_TRANSLATION, WalkerStream, counter_uniform
from motionwalk.step_laws import (
    GOLDEN,
    SQRT2_M1,
    SQRT3_M1,
    TranslationLaw,
    identity_law,
    mixing_floor,
    monothetic_law,
    product_fourier,
    product_fourier_complex,
    product_fourier_series,
    rotation_distribution,
    sample_rotation,
    sample_translation,
    so2_law,
    so2_modulus_squared,
    step_fourier,
    step_fourier_direct,
    step_fourier_series,
    step_modulus,
    torus_basis_law,
    translation_distribution,
)
from motionwalk.walk_engine import WalkConfig, simulate_shard

ROT = DynamicalSystem.rotation(SQRT2_M1)
ONE_DRAW_COUNT = 1_000_000


def cosine_so2(theta=GOLDEN, ds=ROT):
    return so2_law(theta, Profile.affine_cosine(0.5, 0.25, 1.0), ds)


def torus_d4():
    f = [Profile.affine_cosine(0.25, 0.125, 0.5), Profile.affine_cosine(0.25, -0.125, 0.5)]
    return torus_basis_law([SQRT2_M1, SQRT3_M1], f, ROT)


def test_uniform_translation_distribution():
    dist = translation_distribution(TranslationLaw.uniform(2), 5)
    assert len(dist) == 4
    assert all(p == 0.25 for _, p in dist)
    np.testing.assert_array_equal([v for v, _ in dist], [[1, 0], [-1, 0], [0, 1], [0, -1]])


def test_cosine_translation_distribution_at_origin():
    law = TranslationLaw(
        (Profile.affine_cosine(0.25, 0.125, 0.5), Profile.constant(0.25, 0.5)),
        DynamicalSystem.identity(0.0),
    )
    probs = [p for _, p in translation_distribution(law, 1)]
    assert probs[:2] == [0.375, 0.125]


def test_degenerate_translation():
    law = TranslationLaw((Profile.constant(1.0, 1.0),), DynamicalSystem.identity())
    assert [p for _, p in translation_distribution(law, 3)] == [1.0, 0.0]
    u = counter_uniform(9, np.arange(100_000)[None, :], np.array([[1]]), TAG_TRANSLATION)
    assert np.all(law.sample_codes(np.array([1]), u) == 0)


def test_distributions_sum_to_one():
    law = TranslationLaw(
        tuple(Profile.affine_cosine(1 / 6, 1 / 12, 1 / 3) for _ in range(3)), DynamicalSystem.rotation(GOLDEN)
    )
    p = law.probabilities(np.arange(1, 5000))
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    for rlaw in (cosine_so2(), torus_d4()):
        q = rlaw.probabilities(np.arange(1, 5000))
        assert np.all(q >= 0)
        np.testing.assert_allclose(q.sum(axis=1), 1.0, atol=1e-12)


def test_translation_profile_bound_checked():
    with pytest.raises(ConfigurationError):
        TranslationLaw((Profile.constant(0.25, 1.0), Profile.constant(0.25, 1.0)), ROT)
    with pytest.raises(ConfigurationError):
        so2_law(GOLDEN, Profile.constant(0.25, 0.5), ROT)


def _chi_square_p(codes, probs):
    counts = np.bincount(codes, minlength=len(probs))
    keep = probs > 0
    assert np.all(counts[~keep] == 0)
    expected = probs[keep] * len(codes)
    return stats.chisquare(counts[keep], expected).pvalue


def test_translation_sampling_chi_square():
    law = TranslationLaw(
        (Profile.affine_cosine(0.25, 0.125, 0.5), Profile.constant(0.1, 0.5)), DynamicalSystem.rotation(GOLDEN)
    )
    i = 17
    u = counter_uniform(123, np.arange(ONE_DRAW_COUNT)[None, :], np.array([[i]]), TAG_TRANSLATION)
    codes = law.sample_codes(np.array([i]), u)[0]
    assert _chi_square_p(codes, law.probabilities([i])[0]) > 0.001


def test_uniform_translation_frequencies_within_three_sigma():
    law = TranslationLaw.uniform(3)
    u = counter_uniform(5, np.arange(ONE_DRAW_COUNT)[None, :], np.array([[1]]), TAG_TRANSLATION)
    counts = np.bincount(law.sample_codes(np.array([1]), u)[0], minlength=6)
    p = 1 / 6
    assert np.all(np.abs(counts - p * ONE_DRAW_COUNT) <= 3 * math.sqrt(ONE_DRAW_COUNT * p * (1 - p)) + 1)
    assert _chi_square_p(law.sample_codes(np.array([1]), u)[0], np.full(6, p)) > 0.001


def test_zero_probability_cell_never_sampled():
    # h_j = 1/d leaves no mass on -e_j
    law = TranslationLaw((Profile.constant(0.5, 0.5), Profile.constant(0.5, 0.5)), ROT)
    u = counter_uniform(1, np.arange(200_000)[None, :], np.array([[1]]), TAG_TRANSLATION)
    codes = law.sample_codes(np.array([1]), u)[0]
    assert not np.any(codes % 2 == 1)


def test_single_draw_matches_vectorized_path():
    law = TranslationLaw.uniform(2)
    rlaw = cosine_so2()
    cfg = WalkConfig(law, 1, rlaw, (1,), ensemble_size=50, master_seed=77)
    shard = simulate_shard(cfg, 0, 50)
    for w in range(50):
        stream = WalkerStream(77, w)
        np.testing.assert_array_equal(sample_translation(law, 1, stream), shard.positions[w, 0])
        rot = sample_rotation(rlaw, 1, stream)
        assert rot == rlaw.rotation_of(shard.exponents[w, 0])


def test_sampling_is_deterministic():
    law = cosine_so2()
    a = [sample_rotation(law, j, WalkerStream(3, 4)) for j in range(1, 50)]
    b = [sample_rotation(law, j, WalkerStream(3, 4)) for j in range(1, 50)]
    assert a == b
    c = [sample_rotation(law, j, WalkerStream(3, 5)) for j in range(1, 50)]
    assert a != c


def test_rotation_sampling_chi_square():
    law = torus_d4()
    j = 9
    u = counter_uniform(321, np.arange(ONE_DRAW_COUNT)[None, :], np.array([[j]]), TAG_ROTATION)
    codes = law.sample_codes(np.array([j]), u)[0]
    assert _chi_square_p(codes, law.probabilities([j])[0]) > 0.001


def test_rotation_distribution_examples():
    half = so2_law(0.3, Profile.constant(0.5, 1.0), ROT)
    dist = rotation_distribution(half, 1)
    assert [p for _, p in dist] == [0.5, 0.5]
    assert dist[0][0] == TorusRotation.planar(0.3)
    assert dist[1][0] == TorusRotation.planar(-0.3)

    ind = so2_law(GOLDEN, Profile.indicator(0.5, 1.0), ROT)
    for j in range(1, 30):
        probs = sorted(p for _, p in rotation_distribution(ind, j))
        assert probs == [0.0, 1.0]

    basis = torus_basis_law([SQRT2_M1, SQRT3_M1], [Profile.constant(0.25, 0.5)] * 2, ROT)
    dist = rotation_distribution(basis, 4)
    assert [p for _, p in dist] == [0.25] * 4
    assert dist[2][0] == TorusRotation(4, (0.0, SQRT3_M1))


def test_indicator_rotation_follows_orbit():
    law = so2_law(GOLDEN, Profile.indicator(0.5, 1.0), ROT)
    x = ROT
    for j in range(1, 40):
        expected = GOLDEN if ((j * SQRT2_M1) % 1.0) < 0.5 else -GOLDEN
        rot = sample_rotation(law, j, WalkerStream(0, j))
        assert rot == TorusRotation.planar(expected)


def test_monothetic_law_outcomes():
    a = TorusRotation(4, (SQRT2_M1, SQRT3_M1))
    law = monothetic_law(a, Profile.constant(0.7, 1.0), ROT)
    dist = rotation_distribution(law, 2)
    assert dist[0] == (a, 0.7)
    assert dist[1][0] == a.inverse() and dist[1][1] == pytest.approx(0.3)


def test_step_fourier_trivial_character():
    for law in (cosine_so2(), torus_d4(), identity_law(3)):
        assert step_fourier(law, 5, Character((0,) * law.r)) == 1.0


def test_step_fourier_matches_direct_sum_and_closed_form():
    law = cosine_so2()
    for k in range(-4, 7):
        chi = Character((k,))
        for j in (1, 2, 50, 333):
            z = step_fourier(law, j, chi)
            assert abs(z - step_fourier_direct(law, j, chi)) <= 1e-12
            f = law.probabilities([j])[0, 0]
            assert abs(abs(z) ** 2 - so2_modulus_squared(GOLDEN, k, f)) <= 1e-12


def test_step_fourier_half_profile_gives_cosine():
    law = so2_law(GOLDEN, Profile.constant(0.5, 1.0), ROT)
    for k in range(1, 6):
        assert abs(step_fourier(law, 3, Character((k,)))) == pytest.approx(abs(math.cos(2 * math.pi * k * GOLDEN)), abs=1e-12)


def test_step_fourier_incompatible_character():
    with pytest.raises(DimensionError):
        step_fourier(cosine_so2(), 1, Character((1, 0)))


def test_indicator_fourier_has_unit_modulus():
    law = so2_law(GOLDEN, Profile.indicator(0.5, 1.0), ROT)
    for k in range(1, 6):
        s = step_fourier_series(law, np.arange(1, 500), Character((k,)))
        np.testing.assert_allclose(np.abs(s), 1.0, atol=1e-12)
        assert np.all(product_fourier_series(law, 500, Character((k,))) >= 1.0 - 1e-12)


def test_product_fourier_multiplicative_and_monotone():
    for law, chi in ((cosine_so2(), Character((3,))), (torus_d4(), Character((1, -1)))):
        series = product_fourier_series(law, 300, chi)
        mods = step_modulus(step_fourier_series(law, np.arange(1, 301), chi))
        for n in range(2, 301):
            assert series[n - 1] == series[n - 2] * mods[n - 1]
        assert np.all(np.diff(series) <= 0.0)
        assert product_fourier(law, 300, chi) == series[-1]
        np.testing.assert_allclose(np.abs(product_fourier_complex(law, 300, chi)), series, rtol=1e-12)


def test_product_fourier_trivial_character():
    assert product_fourier(cosine_so2(), 200, Character((0,))) == 1.0


def test_product_fourier_golden_first_character():
    assert product_fourier(cosine_so2(), 200, Character((1,))) < 0.01


def test_mixing_floor_positive_for_smooth_profiles():
    assert np.all(mixing_floor(cosine_so2(), 10_000) > 0.18)
    assert np.all(mixing_floor(torus_d4(), 10_000) > 0.04)
    ind = so2_law(GOLDEN, Profile.indicator(0.5, 1.0), ROT)
    assert np.all(mixing_floor(ind, 10_000) == 0.0)


@pytest.mark.parametrize("n", [10, 100])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_monte_carlo_character_moments_match_product(n, k):
    law = cosine_so2()
    M = 20_000
    cfg = WalkConfig(TranslationLaw.uniform(2), n, law, (n,), ensemble_size=M, master_seed=1000 + k)
    shard = simulate_shard(cfg, 0, M)
    theta = law.generators[0, 0]
    phase = (shard.exponents[:, 0, 0] * (k * theta)) % 1.0
    emp = np.exp(2j * np.pi * phase).mean()
    exact = product_fourier_complex(law, n, Character((k,)))[-1]
    assert abs(emp - exact) <= 3 / math.sqrt(M) + 0.005
