import numpy as np
import pytest

from profl.attacks import (
    AttackConfig,
    BenignStats,
    apply_stealth,
    apply_untargeted,
    flip_labels,
)


def test_attack_config_validation():
    AttackConfig(kind="targeted", ratio=0.5, source=0, target=6).validate()
    with pytest.raises(ValueError):
        AttackConfig(kind="targeted", ratio=0.6).validate()
    with pytest.raises(ValueError):
        AttackConfig(kind="targeted", source=3, target=3).validate()
    with pytest.raises(ValueError):
        AttackConfig(kind="backdoor").validate()


def test_untargeted_is_scaled_ascent():
    g = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(apply_untargeted(g, 0.0), np.zeros(3))
    assert np.array_equal(apply_untargeted(g, 1.0), -g)
    assert np.array_equal(apply_untargeted(g, 5.0), -5.0 * g)


def test_flip_labels():
    y = np.array([0, 1, 6, 0, 3])
    flipped = flip_labels(y, source=0, target=6)
    assert flipped.tolist() == [6, 1, 6, 6, 3]
    assert y.tolist() == [0, 1, 6, 0, 3]  # original untouched
    benign_shard = np.array([1, 2, 3])
    assert np.array_equal(flip_labels(benign_shard, 0, 6), benign_shard)


def _benign_cluster(rng, n=8, dims=50, sigma=1.0):
    return [rng.normal(0.0, sigma, size=dims) for _ in range(n)]


def test_stealth_noop_with_zero_spikes():
    rng = np.random.default_rng(0)
    benign = _benign_cluster(rng)
    stats = BenignStats.from_gradients(benign)
    g = benign[0] + 0.1
    result = apply_stealth(g, stats, 0, rng)
    assert np.array_equal(result.gradient, g)
    assert result.feasible


def test_stealth_feasible_spikes_break_dimension_envelope():
    # camouflaged at the user level, conspicuous in each spiked dimension
    rng = np.random.default_rng(1)
    benign = _benign_cluster(rng)
    stats = BenignStats.from_gradients(benign)
    base = np.stack(benign).mean(axis=0)
    result = apply_stealth(base.copy(), stats, 3, rng)
    assert result.feasible
    diff = result.gradient - stats.mean
    assert float(diff @ diff) < stats.max_pairwise_sq  # stealth inequality
    stack = np.stack(benign)
    mu = stack.mean(axis=0)
    sigma = stack.std(axis=0)
    spiked = result.spiked
    assert (np.abs(result.gradient[spiked]) > np.abs(mu[spiked]) + 3 * sigma[spiked]).any()


def test_stealth_infeasible_base_flagged():
    rng = np.random.default_rng(2)
    benign = _benign_cluster(rng)
    stats = BenignStats.from_gradients(benign)
    far = stats.mean + 100.0  # way outside the pairwise envelope
    result = apply_stealth(far, stats, 4, rng)
    assert not result.feasible
    assert result.magnitude == 0.0
    # the spiked coordinates collapse to the benign mean (feasibility bound)
    assert np.allclose(result.gradient[result.spiked], stats.mean[result.spiked])


def test_stealth_respects_clip_bound():
    rng = np.random.default_rng(3)
    benign = [rng.normal(0.0, 5.0, size=30) for _ in range(6)]
    stats = BenignStats.from_gradients(benign)
    result = apply_stealth(stats.mean.copy(), stats, 1, rng, clip=2.0)
    assert np.abs(result.gradient[result.spiked]).max() <= 2.0


def test_stealth_rejects_too_many_spikes():
    rng = np.random.default_rng(4)
    stats = BenignStats.from_gradients(_benign_cluster(rng, dims=10))
    with pytest.raises(ValueError):
        apply_stealth(np.zeros(10), stats, 11, rng)


def test_benign_stats_pairwise_max():
    a = np.zeros(3)
    b = np.array([3.0, 0.0, 0.0])
    c = np.array([0.0, 4.0, 0.0])
    stats = BenignStats.from_gradients([a, b, c])
    assert stats.max_pairwise_sq == 25.0  # |b - c|^2
    assert np.allclose(stats.mean, np.array([1.0, 4.0 / 3.0, 0.0]))
