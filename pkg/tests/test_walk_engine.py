import math

import numpy as np
import pytest

from motionwalk.dynamics import ConfigurationError, DynamicalSystem, Profile
from motionwalk.group_core import Character, MotionElement, TorusRotation, product_chain
from motionwalk.rng import WalkerStream
from motionwalk.step_laws import (
    GOLDEN,
    SQRT2_M1,
    SQRT3_M1,
    RotationLaw,
    TranslationLaw,
    identity_law,
    product_fourier,
    sample_translation,
    so2_law,
    torus_basis_law,
)
from motionwalk.walk_engine import (
    SHARD_SIZE,
    WalkConfig,
    expected_product_operator,
    forced_walk,
    geometric_checkpoints,
    iter_shards,
    operator_norm,
    run_ensemble,
    run_walk,
    simulate_shard,
)

ROT = DynamicalSystem.rotation(SQRT2_M1)


def golden_so2():
    return so2_law(GOLDEN, Profile.affine_cosine(0.5, 0.25, 1.0), ROT)


def random_forced(rng, law, n):
    d = law.dim
    t = np.zeros((n, d))
    axes = rng.integers(0, d, n)
    t[np.arange(n), axes] = rng.choice([-1.0, 1.0], n)
    codes = rng.integers(0, 2 * law.n_generators, n)
    return t, codes


def chain_of(t, codes, law):
    angles = law.outcome_angles()
    return [MotionElement(TorusRotation(law.dim, tuple(angles[c])), t[i]) for i, c in enumerate(codes)]


def test_geometric_checkpoints():
    assert geometric_checkpoints(1) == (1,)
    assert geometric_checkpoints(250) == (1, 2, 10, 20, 100, 200, 250)
    assert geometric_checkpoints(1000) == (1, 2, 10, 20, 100, 200, 1000)


def test_config_validation():
    law = TranslationLaw.uniform(2)
    with pytest.raises(ConfigurationError):
        WalkConfig(law, 10, checkpoints=(5, 11))
    with pytest.raises(ConfigurationError):
        WalkConfig(law, 10, checkpoints=(5, 3))
    with pytest.raises(ConfigurationError):
        WalkConfig(law, 10, ensemble_size=0)
    with pytest.raises(ConfigurationError):
        WalkConfig(law, 10, rotation_law=identity_law(3))
    assert WalkConfig(law, 10).lattice
    assert not WalkConfig(law, 10, golden_so2()).lattice


def test_identity_rotation_gives_integer_positions():
    cfg = WalkConfig(TranslationLaw.uniform(3), 500, ensemble_size=200, master_seed=4)
    shard = simulate_shard(cfg, 0, 200)
    assert np.all(shard.positions == np.round(shard.positions))
    # parity: each step changes the coordinate sum by one
    s = shard.positions.sum(axis=-1)
    assert np.all((s - np.asarray(cfg.checkpoints)) % 2 == 0)


def test_first_step_is_unrotated():
    law = TranslationLaw.uniform(2)
    cfg = WalkConfig(law, 1, golden_so2(), ensemble_size=64, master_seed=9)
    for w in range(64):
        rec = run_walk(cfg, w)
        np.testing.assert_array_equal(rec.positions[0], sample_translation(law, 1, WalkerStream(9, w)))


def test_forced_quarter_turn_example():
    law = so2_law(0.25, Profile.constant(0.5, 1.0), ROT)
    pos, exps = forced_walk([[1.0, 0.0], [1.0, 0.0]], [0, 0], law)
    np.testing.assert_allclose(pos[-1], [1.0, 1.0], atol=1e-15)
    assert law.rotation_of(exps[-1]) == TorusRotation.planar(0.5)


@pytest.mark.parametrize("dyadic", [True, False])
def test_fold_equivalence_with_product_chain(dyadic):
    rng = np.random.default_rng(21)
    for _ in range(300):
        d = int(rng.integers(2, 6))
        r = d // 2
        n_gen = int(rng.integers(1, r + 1))
        if dyadic:
            angles = rng.integers(0, 2**20, (n_gen, r)) / 2**20
        else:
            angles = rng.random((n_gen, r))
        law = _generic_law(d, angles)
        n = int(rng.integers(1, 21))
        t, codes = random_forced(rng, law, n)
        pos, exps = forced_walk(t, codes, law)
        for k in range(1, n + 1):
            g = product_chain(chain_of(t[:k], codes[:k], law), d=d)
            np.testing.assert_allclose(pos[k - 1], g.translation, atol=1e-9, rtol=0)
            got = law.rotation_of(exps[k - 1]).block_angles
            if dyadic:
                assert got == g.rotation.block_angles
            else:
                diff = np.abs(np.array(got) - np.array(g.rotation.block_angles))
                assert np.all(np.minimum(diff, 1 - diff) <= 1e-12)


def _generic_law(d, angles):
    n_gen = angles.shape[0]
    prof = [Profile.constant(0.5 / n_gen, 1.0 / n_gen)] * n_gen
    return RotationLaw("torus_basis", d, angles, prof, ROT)


def test_norm_bound_and_checkpoint_increments():
    cfg = WalkConfig(TranslationLaw.uniform(4), 300, torus_basis_law([SQRT2_M1, SQRT3_M1],
                     [Profile.constant(0.25, 0.5)] * 2, ROT), ensemble_size=300, master_seed=2)
    shard = simulate_shard(cfg, 0, 300)
    cps = np.asarray(cfg.checkpoints)
    norms = np.linalg.norm(shard.positions, axis=-1)
    assert np.all(norms <= cps + 1e-9)
    gaps = np.linalg.norm(np.diff(shard.positions, axis=1), axis=-1)
    assert np.all(gaps <= np.diff(cps) + 1e-9)
    np.testing.assert_allclose(np.linalg.norm(shard.increments, axis=-1), 1.0, atol=1e-12)


def test_prefix_matches_step_by_step_composition():
    law = golden_so2()
    cfg = WalkConfig(TranslationLaw.uniform(2), 40, law, tuple(range(1, 41)), ensemble_size=5, master_seed=8)
    for w in range(5):
        rec = run_walk(cfg, w)
        # exponent of the single generator moves by +-1 per step
        assert np.all(np.abs(np.diff(rec.exponents[:, 0])) == 1)
        assert abs(rec.exponents[0, 0]) == 1
        # rebuild positions from the recorded prefixes
        s = rec.positions[0].copy()
        for k in range(1, 40):
            step = rec.prefix(k - 1).inverse().apply(rec.positions[k] - rec.positions[k - 1])
            assert np.allclose(np.abs(step).sum(), 1.0, atol=1e-9)
            s = s + rec.prefix(k - 1).apply(step)
        np.testing.assert_allclose(s, rec.positions[-1], atol=1e-9)


def test_single_walker_ensemble_equals_run_walk():
    cfg = WalkConfig(TranslationLaw.uniform(2), 50, golden_so2(), ensemble_size=1, master_seed=13)
    (rec,) = list(run_ensemble(cfg))
    ref = run_walk(cfg, 0)
    np.testing.assert_array_equal(rec.positions, ref.positions)
    np.testing.assert_array_equal(rec.exponents, ref.exponents)


def test_walker_independent_of_shard_position():
    cfg = WalkConfig(TranslationLaw.uniform(2), 30, golden_so2(), ensemble_size=SHARD_SIZE + 10, master_seed=6)
    shards = list(iter_shards(cfg))
    assert [len(s.walker_ids) for s in shards] == [SHARD_SIZE, 10]
    rec = run_walk(cfg, SHARD_SIZE + 3)
    np.testing.assert_array_equal(shards[1].positions[3], rec.positions)
    again = simulate_shard(cfg, SHARD_SIZE + 2, SHARD_SIZE + 5)
    np.testing.assert_array_equal(again.positions[1], rec.positions)


def test_same_seed_is_deterministic():
    cfg = WalkConfig(TranslationLaw.uniform(2), 200, golden_so2(), ensemble_size=100, master_seed=99)
    a, b = simulate_shard(cfg, 0, 100), simulate_shard(cfg, 0, 100)
    assert a.positions.tobytes() == b.positions.tobytes()
    other = simulate_shard(WalkConfig(cfg.translation_law, 200, cfg.rotation_law, ensemble_size=100, master_seed=100), 0, 100)
    assert a.positions.tobytes() != other.positions.tobytes()


def test_pool_matches_serial():
    cfg = WalkConfig(TranslationLaw.uniform(2), 20, golden_so2(), ensemble_size=2 * SHARD_SIZE + 1, master_seed=3)
    serial = list(iter_shards(cfg, workers=1))
    pooled = list(iter_shards(cfg, workers=2))
    for a, b in zip(serial, pooled):
        assert a.positions.tobytes() == b.positions.tobytes()


def test_simple_walk_ensemble_mean_near_origin():
    n, M = 400, 10_000
    cfg = WalkConfig(TranslationLaw.uniform(2), n, checkpoints=(n,), ensemble_size=M, master_seed=17)
    mean = np.mean(np.concatenate([s.positions[:, 0] for s in iter_shards(cfg)]), axis=0)
    assert np.all(np.abs(mean) <= 4 * math.sqrt(n / M))


def test_increment_accumulators():
    cfg = WalkConfig(TranslationLaw.uniform(2), 25, golden_so2(), tuple(range(1, 26)), ensemble_size=40,
                     master_seed=1, track_increments=True)
    shard = simulate_shard(cfg, 0, 40)
    np.testing.assert_allclose(shard.inc_sum, shard.increments.sum(axis=0), atol=1e-12)
    np.testing.assert_allclose(shard.inc_sq_sum, 40.0, atol=1e-9)


def test_expected_operator_identity():
    for d in (1, 2, 5):
        np.testing.assert_array_equal(expected_product_operator(identity_law(d), 100), np.eye(d))


def test_expected_operator_symmetric_two_point():
    theta = 0.1
    law = so2_law(theta, Profile.constant(0.5, 1.0), ROT)
    for n in (1, 2, 7):
        np.testing.assert_allclose(expected_product_operator(law, n), math.cos(2 * math.pi * theta) ** n * np.eye(2),
                                   atol=1e-14)


def test_expected_operator_matches_monte_carlo():
    law = golden_so2()
    n, M = 10, 20_000
    cfg = WalkConfig(TranslationLaw.uniform(2), n, law, (n,), ensemble_size=M, master_seed=31)
    shard = simulate_shard(cfg, 0, M)
    phi = 2 * np.pi * ((shard.exponents[:, 0, 0] * GOLDEN) % 1.0)
    emp = np.array([[np.cos(phi).mean(), -np.sin(phi).mean()], [np.sin(phi).mean(), np.cos(phi).mean()]])
    assert np.max(np.abs(emp - expected_product_operator(law, n))) <= 3 / math.sqrt(M) + 0.005


def test_expected_operator_norm_decays_and_is_monotone():
    law = golden_so2()
    norms = [operator_norm(expected_product_operator(law, n)) for n in range(1, 201)]
    assert norms[-1] < 0.01
    assert np.all(np.diff(norms) <= 1e-15)
    assert norms[-1] == pytest.approx(product_fourier(law, 200, Character((1,))), rel=1e-9)


def test_expected_operator_odd_dimension_keeps_axis():
    law = so2_law(GOLDEN, Profile.affine_cosine(0.5, 0.25, 1.0), ROT, dim=3)
    op = expected_product_operator(law, 100)
    assert op[2, 2] == 1.0
    assert operator_norm(op) == 1.0
