"""Federated training loop: key center, users, servers, rounds.

One round follows the deployment sequence: the primary server broadcasts
the (fixed-point quantized, encrypted) model, users train locally or apply
their poisoning behaviour, gradients are clipped, encoded and uploaded
encrypted, the two servers run the robust aggregation, and S1 decodes the
aggregate and steps the model with w' = w - lr * g.

Two crypto modes share every training-side random draw, so the encrypted
pipeline and the plaintext fast path produce bit-identical encoded
aggregates and model trajectories for the same seed.  The fast path feeds
the reference aggregator; the encrypted path runs the full two-server
protocol stack over the message fabric.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from . import encoding, models, paillier, wire
from .attacks import (
    AttackConfig,
    BEHAVIOR_BENIGN,
    BEHAVIOR_TARGETED,
    BEHAVIOR_UNTARGETED,
    BenignStats,
    StealthResult,
    UserState,
    apply_stealth,
    apply_untargeted,
    flip_labels,
)
from .datasets import Dataset, iid_shards
from .defense import AggregationResult, SecureAggregator, plaintext_aggregate
from .protocols import AssistingServer, PrimaryServer
from .transport import (
    Fabric,
    KC,
    Message,
    PHASE_KEY_DISTRIBUTION,
    PHASE_MODEL_BROADCAST,
    PHASE_UPLOAD,
    S1,
    S2,
    user as user_party,
)

MODE_PLAIN = "plain"
MODE_ENCRYPTED = "encrypted"

DEFENSE_FULL = "profl"
DEFENSE_SELECT_ONLY = "multikrum"
DEFENSE_NONE = "fedavg"

KEY_ID_MODEL = "pkm"
KEY_ID_GRADIENT = "pkg"


@dataclass
class RoundMetrics:
    round_index: int
    acc: float
    acc_source: float
    payload_bytes: int
    ai: float | None = None
    ai_source: float | None = None


@dataclass
class KeyMaterial:
    pk_model: paillier.PaillierPublicKey
    sk_model: paillier.PaillierSecretKey
    pk_grad: paillier.PaillierPublicKey
    share1: paillier.SecretKeyShare
    share2: paillier.SecretKeyShare


def key_center_init(
    fabric: Fabric,
    n_users: int,
    modulus_bits: int,
    rng: random.Random,
    allow_insecure: bool = False,
) -> KeyMaterial:
    """Generate both key pairs, split the gradient key, distribute all keys.

    Distribution map: pk_m, pk_g and share 1 to S1; pk_g and share 2 to S2;
    sk_m and pk_g to every user.  One message per recipient (n + 2 total).
    """
    pk_m, sk_m = paillier.keygen(modulus_bits, KEY_ID_MODEL, rng, allow_insecure)
    pk_g, sk_g = paillier.keygen(modulus_bits, KEY_ID_GRADIENT, rng, allow_insecure)
    share1, share2 = paillier.key_split(sk_g, rng)

    s1_payload = (
        paillier.serialize_public_key(pk_m)
        + paillier.serialize_public_key(pk_g)
        + paillier.serialize_key_share(share1)
    )
    fabric.send(Message(KC, S1, PHASE_KEY_DISTRIBUTION, "keys", s1_payload))
    s2_payload = paillier.serialize_public_key(pk_g) + paillier.serialize_key_share(share2)
    fabric.send(Message(KC, S2, PHASE_KEY_DISTRIBUTION, "keys", s2_payload))
    user_payload = paillier.serialize_secret_key(sk_m) + paillier.serialize_public_key(pk_g)
    for uid in range(n_users):
        fabric.send(Message(KC, user_party(uid), PHASE_KEY_DISTRIBUTION, "keys", user_payload))
    return KeyMaterial(pk_m, sk_m, pk_g, share1, share2)


class FederatedSimulation:
    """Holds the full world state for one federated training run."""

    def __init__(
        self,
        dataset: Dataset,
        n_users: int,
        seed: int,
        attack: AttackConfig | None = None,
        defense: str = DEFENSE_FULL,
        mode: str = MODE_PLAIN,
        lr: float = 0.05,
        momentum: float = 0.5,
        batch_size: int = 256,
        local_steps: int = 1,
        deg: int = encoding.DEFAULT_DEG,
        clip: float = encoding.DEFAULT_CLIP,
        modulus_bits: int = paillier.DEFAULT_MODULUS_BITS,
        allow_insecure: bool = False,
        record_trace: bool = False,
    ):
        if n_users < 2:
            raise ValueError("the defense requires at least 2 users")
        if mode not in (MODE_PLAIN, MODE_ENCRYPTED):
            raise ValueError(f"unknown mode {mode!r}")
        if defense not in (DEFENSE_FULL, DEFENSE_SELECT_ONLY, DEFENSE_NONE):
            raise ValueError(f"unknown defense {defense!r}")
        if mode == MODE_ENCRYPTED and defense != DEFENSE_FULL:
            raise ValueError("encrypted mode runs the full defense only")
        attack = attack or AttackConfig()
        attack.validate()
        if attack.kind == BEHAVIOR_TARGETED and (
            attack.source >= dataset.classes or attack.target >= dataset.classes
        ):
            raise ValueError(
                f"attack classes ({attack.source}->{attack.target}) exceed the "
                f"{dataset.classes}-class dataset"
            )

        self.dataset = dataset
        self.n_users = n_users
        self.attack = attack
        self.defense = defense
        self.mode = mode
        self.deg = deg
        self.clip = clip
        self.local_steps = local_steps
        self.features = dataset.features
        self.classes = dataset.classes

        # independent, purpose-tagged streams so both modes draw identically
        def np_rng(tag: int) -> np.random.Generator:
            return np.random.default_rng(np.random.SeedSequence([seed, tag]))

        shard_rng = np_rng(1)
        model_rng = np_rng(2)
        assign_rng = np_rng(3)
        self.attack_rng = np_rng(4)
        user_seed = np.random.SeedSequence([seed, 5])

        self.model = models.init_model(self.features, self.classes, lr, model_rng)
        shards = iid_shards(dataset.train_x, dataset.train_y, n_users, shard_rng)

        n_malicious = min(int(round(attack.ratio * n_users)), n_users // 2)
        malicious = set()
        if attack.kind != "none" and n_malicious:
            malicious = set(
                int(u) for u in assign_rng.choice(n_users, size=n_malicious, replace=False)
            )
        behavior_of = {
            uid: (attack.kind if uid in malicious else BEHAVIOR_BENIGN)
            for uid in range(n_users)
        }

        self.users: list[UserState] = []
        for uid, child in enumerate(user_seed.spawn(n_users)):
            x, y = shards[uid]
            state = UserState(
                user_id=uid,
                shard_x=x,
                shard_y=y,
                behavior=behavior_of[uid],
                stealth=attack.stealth and behavior_of[uid] != BEHAVIOR_BENIGN,
                batch_size=batch_size,
                momentum=momentum,
                rng=np.random.default_rng(child),
            )
            if state.behavior == BEHAVIOR_TARGETED:
                state.flipped_y = flip_labels(y, attack.source, attack.target)
            self.users.append(state)

        self.history: list[RoundMetrics] = []
        self.aggregates: list[np.ndarray] = []
        self.aggregation_reports: list[AggregationResult] = []
        self.last_stealth: dict[int, StealthResult] = {}

        self.fabric: Fabric | None = None
        if mode == MODE_ENCRYPTED:
            crypto_rng = random.Random(seed ^ 0x5EC0_0001)
            self.fabric = Fabric(record_trace=record_trace)
            self.keys = key_center_init(
                self.fabric, n_users, modulus_bits, crypto_rng, allow_insecure
            )
            self._receive_keys()
            encoding.check_headroom(
                self.model.dims, clip, deg, self.keys.pk_grad.n, accumulations=max(n_users - 1, 1)
            )
            s2 = AssistingServer(self.pk_grad, self.share2, self.fabric)
            s1 = PrimaryServer(
                self.pk_grad,
                self.share1,
                self.fabric,
                s2,
                crypto_rng=random.Random(seed ^ 0x5EC0_0002),
                select_rng=random.Random(seed ^ 0x5EC0_0003),
            )
            self.server1 = s1
            self.server2 = s2
            self.aggregator = SecureAggregator(s1)
            self._user_crypto_rngs = [
                random.Random((seed ^ 0x5EC0_0100) + uid) for uid in range(n_users)
            ]
        else:
            # same encodability constraint the encrypted pipeline would impose
            encoding.check_headroom(
                self.model.dims,
                clip,
                deg,
                1 << (modulus_bits - 1),
                accumulations=max(n_users - 1, 1),
            )

    def _receive_keys(self) -> None:
        """Parties consume their key-distribution messages (wiring check)."""
        msg = self.fabric.recv(S1)
        buf = msg.payload
        self.pk_model = paillier.deserialize_public_key(buf)
        off = len(paillier.serialize_public_key(self.pk_model))
        self.pk_grad = paillier.deserialize_public_key(buf[off:])
        off += len(paillier.serialize_public_key(self.pk_grad))
        self.share1 = paillier.deserialize_key_share(buf[off:])

        msg = self.fabric.recv(S2)
        buf = msg.payload
        pk_g2 = paillier.deserialize_public_key(buf)
        off = len(paillier.serialize_public_key(pk_g2))
        self.share2 = paillier.deserialize_key_share(buf[off:])

        self.user_keys = []
        for uid in range(self.n_users):
            buf = self.fabric.recv(user_party(uid)).payload
            sk_m = paillier.deserialize_secret_key(buf)
            off = len(paillier.serialize_secret_key(sk_m))
            pk_g = paillier.deserialize_public_key(buf[off:])
            self.user_keys.append((sk_m, pk_g))

    # -- local work -----------------------------------------------------------

    def _local_gradient(self, state: UserState, flat_params: np.ndarray) -> np.ndarray:
        labels = state.flipped_y if state.behavior == BEHAVIOR_TARGETED else state.shard_y
        grad = np.zeros_like(flat_params)
        for _ in range(self.local_steps):
            idx = state.batch_indices()
            grad += models.cross_entropy_gradient(
                flat_params, state.shard_x[idx], labels[idx], self.features, self.classes
            )
        if state.velocity is None:
            state.velocity = np.zeros_like(flat_params)
        state.velocity = state.momentum * state.velocity + grad
        return state.velocity.copy()

    def _compute_encoded_gradients(self, flat_params: np.ndarray) -> np.ndarray:
        """All users' submitted gradients as signed encoded ints [n, dims]."""
        raw: list[np.ndarray] = []
        for state in self.users:
            g = self._local_gradient(state, flat_params)
            if state.behavior == BEHAVIOR_UNTARGETED:
                g = apply_untargeted(g, self.attack.beta)
            raw.append(np.clip(g, -self.clip, self.clip))

        self.last_stealth = {}
        stealth_users = [s for s in self.users if s.stealth]
        if stealth_users:
            benign = [raw[s.user_id] for s in self.users if s.behavior == BEHAVIOR_BENIGN]
            stats = (
                BenignStats.from_gradients(benign)
                if len(benign) >= 1
                else BenignStats(np.zeros(self.model.dims), 0.0)
            )
            for state in stealth_users:
                result = apply_stealth(
                    raw[state.user_id],
                    stats,
                    self.attack.spike_count,
                    self.attack_rng,
                    clip=self.clip,
                )
                raw[state.user_id] = np.clip(result.gradient, -self.clip, self.clip)
                self.last_stealth[state.user_id] = result

        return np.stack([encoding.encode_signed(g, self.deg) for g in raw])

    def _quantized_params(self) -> np.ndarray:
        return encoding.decode_signed(
            encoding.encode_signed(self.model.flat(), self.deg), self.deg
        )

    # -- aggregation paths ------------------------------------------------------

    def _aggregate_plain(self, encoded: np.ndarray) -> np.ndarray:
        if self.defense == DEFENSE_NONE:
            return np.asarray(encoded, dtype=np.float64).mean(axis=0) / self.deg
        result = plaintext_aggregate(encoded, feature_filter=self.defense == DEFENSE_FULL)
        self.aggregation_reports.append(result)
        self.aggregates.append(result.gradient.copy())
        return encoding.decode_signed(result.gradient, self.deg)

    def _aggregate_encrypted(self, encoded: np.ndarray, quantized: np.ndarray) -> np.ndarray:
        pk_m, pk_g = self.pk_model, self.pk_grad
        n_model = pk_m.n
        width_m = 2 * wire.modulus_bytes(n_model)
        model_residues = [int(v) % n_model for v in encoding.encode_signed(quantized, self.deg)]
        s1_rng = self.server1.crypto_rng
        model_cts = [paillier.encrypt(pk_m, m, s1_rng) for m in model_residues]
        broadcast = wire.pack_fixed([ct.value for ct in model_cts], width_m)
        for uid in range(self.n_users):
            self.fabric.send(
                Message(S1, user_party(uid), PHASE_MODEL_BROADCAST, "model", broadcast)
            )

        n_grad = pk_g.n
        width_g = 2 * wire.modulus_bytes(n_grad)
        for uid in range(self.n_users):
            sk_m, user_pk_g = self.user_keys[uid]
            msg = self.fabric.recv(user_party(uid))
            received = [
                paillier.full_decrypt(sk_m, paillier.Ciphertext(v, pk_m.key_id))
                for v in wire.unpack_fixed(msg.payload, width_m)
            ]
            # users train on exactly the broadcast (quantized) parameters
            assert received == model_residues
            user_rng = self._user_crypto_rngs[uid]
            cts = [
                paillier.encrypt(user_pk_g, int(v) % n_grad, user_rng)
                for v in encoded[uid]
            ]
            self.fabric.send(
                Message(
                    user_party(uid),
                    S1,
                    PHASE_UPLOAD,
                    "gradient",
                    wire.pack_fixed([ct.value for ct in cts], width_g),
                )
            )

        uploads = [
            [
                paillier.Ciphertext(v, pk_g.key_id)
                for v in wire.unpack_fixed(self.fabric.recv(S1).payload, width_g)
            ]
            for _ in range(self.n_users)
        ]
        result = self.aggregator.aggregate(uploads)
        self.aggregation_reports.append(result)
        self.aggregates.append(result.gradient.copy())
        return encoding.decode_signed(result.gradient, self.deg)

    # -- round loop ---------------------------------------------------------------

    def run_round(self) -> RoundMetrics:
        round_index = self.model.round_index
        bytes_before = 0
        if self.fabric is not None:
            self.fabric.ledger.start_round(round_index)
            bytes_before = self.fabric.ledger.total_bytes()

        quantized = self._quantized_params()
        encoded = self._compute_encoded_gradients(quantized)
        if self.mode == MODE_ENCRYPTED:
            gradient = self._aggregate_encrypted(encoded, quantized)
        else:
            gradient = self._aggregate_plain(encoded)
        self.model.apply_gradient(gradient)

        payload_bytes = 0
        if self.fabric is not None:
            payload_bytes = self.fabric.ledger.total_bytes() - bytes_before
        metrics = RoundMetrics(
            round_index=round_index,
            acc=models.accuracy(self.model, self.dataset.test_x, self.dataset.test_y),
            acc_source=models.class_accuracy(
                self.model, self.dataset.test_x, self.dataset.test_y, self.attack.source
            ),
            payload_bytes=payload_bytes,
        )
        self.history.append(metrics)
        return metrics

    def run(self, rounds: int) -> list[RoundMetrics]:
        for _ in range(rounds):
            self.run_round()
        if self.fabric is not None:
            self.fabric.ledger.finish()
        return self.history
