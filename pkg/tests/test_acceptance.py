"""Acceptance suite: one test per pinned criterion, tolerances stated inline.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the PASS line and
timing for each criterion.  The two robustness criteria use real MNIST IDX
files when present under ./data (or ./data/mnist); otherwise they run on an
MNIST-shaped synthetic stand-in (784 features, 10 classes, 6000 train
samples) so the suite is self-contained.
"""

import random
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from profl.attacks import AttackConfig
from profl.datasets import load_mnist, synthetic_blobs
from profl.defense import pairwise_squared_distances, plaintext_aggregate
from profl.encoding import encode_signed
from profl.paillier import encrypt, full_decrypt, hom_add, hom_scale, part_dec1, part_dec2
from profl.protocols import pauta_lower_median
from profl.simulation import FederatedSimulation
from profl.transport import PHASE_SEC_DIS


class Budget:
    def __init__(self, name: str, seconds: float):
        self.name = name
        self.seconds = seconds
        self.start = time.monotonic()

    def check(self) -> None:
        elapsed = time.monotonic() - self.start
        assert elapsed < self.seconds, f"{self.name} exceeded {self.seconds}s ({elapsed:.1f}s)"
        print(f"\n[acceptance] {self.name}: PASS ({elapsed:.1f}s)")


def desk_dataset():
    for root in (Path("data/mnist"), Path("data")):
        try:
            return load_mnist(root), "mnist"
        except FileNotFoundError:
            continue
    return (
        synthetic_blobs(0, n_train=6000, n_test=1000, features=784, classes=10),
        "synthetic stand-in",
    )


def encrypted_sim(dataset, n_users, seed, attack=None, rounds=None):
    return FederatedSimulation(
        dataset=dataset,
        n_users=n_users,
        seed=seed,
        attack=attack,
        mode="encrypted",
        batch_size=32,
        modulus_bits=256,
        allow_insecure=True,
    )


def test_c1_crypto_correctness(key256):
    """1000 random plaintexts: both decrypt routes and both hom laws exact."""
    budget = Budget("criterion 1 (crypto correctness, 256-bit)", 30.0)
    pk, sk, share1, share2 = key256
    rng = random.Random(101)
    for _ in range(1000):
        m = rng.randrange(pk.n)
        c = encrypt(pk, m, rng)
        assert full_decrypt(sk, c) == m
        assert part_dec2(share2, c, part_dec1(share1, c)) == m
    for _ in range(200):
        a, b = rng.randrange(pk.n), rng.randrange(pk.n)
        assert full_decrypt(sk, hom_add(pk, encrypt(pk, a, rng), encrypt(pk, b, rng))) == (
            a + b
        ) % pk.n
        assert full_decrypt(sk, hom_scale(pk, encrypt(pk, a, rng), b)) == a * b % pk.n
    budget.check()


def test_c2_secdis_oracle_equivalence(key256, server_pair):
    """100 random 32-dim signed fixed-point pairs decrypt to the exact oracle."""
    budget = Budget("criterion 2 (blinded-distance oracle equivalence)", 120.0)
    pk, sk, _, _ = key256
    _, s1, _ = server_pair(crypto_seed=202)
    rng = random.Random(202)
    np_rng = np.random.default_rng(202)
    deg = 10**6
    for _ in range(100):
        gx = encode_signed(np_rng.uniform(-10, 10, size=32), deg)
        gy = encode_signed(np_rng.uniform(-10, 10, size=32), deg)
        cts_x = [encrypt(pk, int(v) % pk.n, rng) for v in gx]
        cts_y = [encrypt(pk, int(v) % pk.n, rng) for v in gy]
        d = s1.sec_dis(cts_x, cts_y)
        oracle = sum((int(a) - int(b)) ** 2 for a, b in zip(gx, gy))
        assert full_decrypt(sk, d) == oracle
    budget.check()


def _pauta_oracle(values):
    n = len(values)
    mean = Fraction(sum(values), n)
    var = sum((Fraction(v) - mean) ** 2 for v in values) / n
    kept = sorted(v for v in values if (Fraction(v) - mean) ** 2 <= 9 * var)
    return kept[(len(kept) - 1) // 2], n - len(kept)


def test_c3_secsel_secrep_oracle_equivalence(key256, server_pair):
    """100 instances each vs top-k / outlier-median oracles; Chebyshev floor."""
    budget = Budget("criterion 3 (selection + representative oracles)", 120.0)
    pk, _, _, _ = key256
    _, s1, _ = server_pair(crypto_seed=303)
    rng = random.Random(303)

    for _ in range(100):
        n = rng.randint(2, 10)
        k = (n + 1) // 2
        sums = [rng.randint(0, 10**6) for _ in range(n)]
        enc_sums = [encrypt(pk, s, rng) for s in sums]
        expected = sorted(sorted(range(n), key=lambda i: (sums[i], i))[:k])
        assert s1.select_smallest(enc_sums, k) == expected

    for i in range(100):
        n = rng.randint(1, 15)
        if i % 3 == 0:  # clustered values plus one far outlier
            values = [rng.randint(-100, 100) for _ in range(n)] + [10**7]
        else:
            values = [rng.randint(-(10**7), 10**7) for _ in range(n)]
        cts = [encrypt(pk, v % pk.n, rng) for v in values]
        assert s1.dim_median(cts) == _pauta_oracle(values)

    adversarial = [
        [0] * 35 + [10**9],
        [10**9, -(10**9)] * 20,
        [7] * 40,
        [0] * 17 + [10**9] * 2,
        list(range(-20, 21, 2)),
        [42],
    ]
    for values in adversarial:
        med, rejected = pauta_lower_median(values)
        assert rejected <= len(values) // 9 + 1
        assert rejected < len(values)  # survivors never empty
        assert (med, rejected) == _pauta_oracle(values)
    budget.check()


def test_c4_mode_equivalence_end_to_end():
    """n=5 users, 20-dim model, 3 rounds: encrypted == plaintext, bit exact."""
    budget = Budget("criterion 4 (end-to-end mode equivalence)", 300.0)
    dataset = synthetic_blobs(404, n_train=400, n_test=100, features=4, classes=4)
    attack = AttackConfig(kind="untargeted", ratio=0.4, stealth=True, spike_count=3)
    kwargs = dict(
        dataset=dataset, n_users=5, seed=404, attack=attack,
        batch_size=32, modulus_bits=256, allow_insecure=True,
    )
    plain = FederatedSimulation(mode="plain", **kwargs)
    enc = FederatedSimulation(mode="encrypted", **kwargs)
    assert plain.model.dims == 20
    history_plain = plain.run(3)
    history_enc = enc.run(3)
    for a, b in zip(plain.aggregates, enc.aggregates):
        assert np.array_equal(a, b)  # identical encoded aggregates
    assert np.array_equal(plain.model.flat(), enc.model.flat())
    for mp, me in zip(history_plain, history_enc):
        assert mp.acc == me.acc and mp.acc_source == me.acc_source
    budget.check()


def test_c5_untargeted_robustness_desk_scale():
    """50% untargeted+stealth, 500 rounds: Acc >= 0.85 and AI >= 0.25."""
    budget = Budget("criterion 5 (untargeted robustness)", 900.0)
    dataset, source_name = desk_dataset()
    print(f"\n[acceptance] criterion 5 dataset: {source_name}")
    attack = AttackConfig(kind="untargeted", ratio=0.5, stealth=True, beta=5.0, spike_count=10)
    defended = FederatedSimulation(
        dataset=dataset, n_users=20, seed=505, attack=attack, defense="profl", mode="plain"
    ).run(500)
    baseline = FederatedSimulation(
        dataset=dataset, n_users=20, seed=505, attack=attack, defense="fedavg", mode="plain"
    ).run(500)
    acc, acc_base = defended[-1].acc, baseline[-1].acc
    print(f"[acceptance] criterion 5 acc={acc:.3f} baseline={acc_base:.3f}")
    assert acc >= 0.85
    assert acc - acc_base >= 0.25
    budget.check()


def test_c6_targeted_robustness_desk_scale():
    """50% targeted(0->6)+stealth: source acc >= 0.88 and AI_source >= 0.40."""
    budget = Budget("criterion 6 (targeted robustness)", 900.0)
    dataset, source_name = desk_dataset()
    print(f"\n[acceptance] criterion 6 dataset: {source_name}")
    attack = AttackConfig(
        kind="targeted", ratio=0.5, stealth=True, source=0, target=6, spike_count=10
    )
    defended = FederatedSimulation(
        dataset=dataset, n_users=20, seed=606, attack=attack, defense="profl", mode="plain"
    ).run(500)
    baseline = FederatedSimulation(
        dataset=dataset, n_users=20, seed=606, attack=attack, defense="fedavg", mode="plain"
    ).run(500)
    acc_s, acc_s_base = defended[-1].acc_source, baseline[-1].acc_source
    print(f"[acceptance] criterion 6 acc_source={acc_s:.3f} baseline={acc_s_base:.3f}")
    assert acc_s >= 0.88
    assert acc_s - acc_s_base >= 0.40
    budget.check()


def _stealth_instance(seed, n=5, dims=40, spikes=2, frac=0.45, deg=10**4):
    """Benign cluster plus one in-envelope spiked copy of the central user."""
    rng = np.random.default_rng(seed)
    benign = rng.normal(0.0, 1.0, size=(n - 1, dims))
    encoded_benign = np.rint(benign * deg).astype(np.int64)
    dist = pairwise_squared_distances(encoded_benign)
    central = int(np.argmin([sum(row) for row in dist]))
    d_max_sq = max(max(row) for row in dist) / deg**2
    t = frac * np.sqrt(d_max_sq / spikes)
    attacker = benign[central].copy()
    coords = np.sort(rng.choice(dims, size=spikes, replace=False))
    attacker[coords] = t
    diff = attacker - benign[central]
    assert float(diff @ diff) < d_max_sq  # the stealth distance inequality
    matrix = np.vstack([encoded_benign, np.rint(attacker * deg).astype(np.int64)[None]])
    return matrix, coords, n - 1


def test_c7_stealth_ablation():
    """Selection-only aggregation admits in-envelope spikes; the full
    pipeline never lets a spiked value reach the aggregate (10 seeds)."""
    budget = Budget("criterion 7 (stealth ablation)", 120.0)
    admitted, leaked = 0, 0
    for seed in range(10):
        matrix, coords, attacker = _stealth_instance(seed)
        select_only = plaintext_aggregate(matrix, feature_filter=False)
        full = plaintext_aggregate(matrix)
        assert select_only.survivors == full.survivors
        if attacker in select_only.survivors:
            admitted += 1  # its spikes enter the survivor average directly
            spiked_values = matrix[attacker][coords]
            if np.any(full.gradient[coords] == spiked_values):
                leaked += 1
            # the full pipeline's medians stay inside the benign range
            benign_cols = matrix[:attacker][:, coords]
            assert np.all(full.gradient[coords] <= benign_cols.max(axis=0))
            assert np.all(full.gradient[coords] >= benign_cols.min(axis=0))
    print(f"\n[acceptance] criterion 7 admitted={admitted}/10 leaked={leaked}/10")
    assert admitted >= 1
    assert leaked == 0
    budget.check()


def test_c8_communication_scaling():
    """Encrypted per-round ledger totals over n in {3,5,10} fit an affine
    model in n with relative residuals < 10% (shape, not absolute MB)."""
    budget = Budget("criterion 8 (communication scaling)", 600.0)
    rounds = 2
    ns = [3, 5, 10]
    totals = []
    for n in ns:
        dataset = synthetic_blobs(808, n_train=60 * n, n_test=40, features=4, classes=4)
        sim = encrypted_sim(dataset, n_users=n, seed=808)
        sim.run(rounds)
        totals.append(sim.fabric.ledger.total_bytes() / rounds)
    design = np.vstack([np.ones(len(ns)), ns]).T
    coef, *_ = np.linalg.lstsq(design, np.array(totals), rcond=None)
    fit = design @ coef
    residuals = np.abs(fit - totals) / np.array(totals)
    print(f"\n[acceptance] criterion 8 per-round bytes={totals} residuals={residuals.round(4)}")
    assert np.all(residuals < 0.10)
    assert coef[1] > 0  # grows with the user count
    budget.check()


def test_c9_pair_count_invariant():
    """Exactly n(n-1)/2 blinded-distance executions per round, per ledger."""
    budget = Budget("criterion 9 (pair-count invariant)", 300.0)
    rounds = 2
    for n in (3, 5):
        dataset = synthetic_blobs(909, n_train=60 * n, n_test=40, features=4, classes=4)
        sim = encrypted_sim(dataset, n_users=n, seed=909)
        sim.run(rounds)
        assert sim.fabric.ledger.instances[PHASE_SEC_DIS] == rounds * n * (n - 1) // 2
    budget.check()
