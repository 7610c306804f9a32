"""Blinded two-server subprotocols over encrypted gradients.

Three protocols run between the primary server S1 (key share 1, public
key) and the assisting server S2 (key share 2):

* blinded squared distance: S1 additively blinds two encrypted vectors
  with fresh noise, partially decrypts them, and ships both to S2.  S2
  finishes decryption, squares the blinded differences and returns them.
  S1 then cancels the noise homomorphically with the seven-factor
  correction product and accumulates the per-coordinate results into one
  ciphertext holding the exact squared Euclidean distance.
* joint selection: both servers decrypt the per-user distance sums (an
  accepted leakage), and S1 picks the k users with the smallest sums via
  randomized quickselect, ties broken by lowest index.
* blinded per-dimension representative: S1 shifts every survivor's value
  in one dimension by a shared scalar, S2 removes 3-sigma outliers from
  the shifted values (population sigma, exact integer arithmetic) and
  returns the lower median, which S1 unshifts.

S2 only ever sees blinded values; S1 never transmits its noise.  The
per-dimension shift is drawn from [1, N/4) rather than all of Z_N* so the
shifted signed window can never wrap, keeping order statistics exactly
shift-invariant (the statistical hiding loss is ~2^-200 at test moduli).
"""

from __future__ import annotations

import math
import random

from . import wire
from .encoding import to_signed
from .paillier import (
    Ciphertext,
    KeyMismatchError,
    PaillierPublicKey,
    PartialCiphertext,
    SecretKeyShare,
    encrypt,
    hom_add,
    hom_scale,
    part_dec1,
    part_dec2,
)
from .transport import (
    S1,
    S2,
    Fabric,
    Message,
    PHASE_SEC_DIS,
    PHASE_SEC_REP,
    PHASE_SEC_SEL,
)

_ONESHOT_UID_BASE = 1 << 20


def pauta_lower_median(values: list[int]) -> tuple[int, int]:
    """3-sigma outlier rejection then lower median, on signed integers.

    A value v is kept iff |v - mean| <= 3 * population sigma, evaluated
    exactly: with d_i = n*v_i - sum(v), keep iff n*d_i^2 <= 9*sum(d_j^2).
    The test is invariant under a common additive shift of all values.
    Returns (median of survivors, number of rejected values); survivors can
    never be empty (at most floor(n/9) values can sit strictly outside
    3 sigma).  The lower median is always one of the submitted values.
    """
    n = len(values)
    if n == 0:
        raise ValueError("need at least one value")
    total = sum(values)
    devs = [n * v - total for v in values]
    dev_sq_sum = sum(d * d for d in devs)
    kept = [v for v, d in zip(values, devs) if n * d * d <= 9 * dev_sq_sum]
    kept.sort()
    return kept[(len(kept) - 1) // 2], n - len(kept)


def quickselect_smallest(keys: list, k: int, rng: random.Random) -> list[int]:
    """Indices of the k smallest entries of ``keys`` in expected O(n) time.

    Entries are compared as-is (pass (value, index) tuples for a total
    order); the returned index list is sorted ascending.
    """
    n = len(keys)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for {n} entries")
    arr = [(key, i) for i, key in enumerate(keys)]
    lo, hi, target = 0, n - 1, k - 1
    while lo < hi:
        pivot = arr[rng.randrange(lo, hi + 1)][0]
        i, j = lo, hi
        while i <= j:
            while arr[i][0] < pivot:
                i += 1
            while arr[j][0] > pivot:
                j -= 1
            if i <= j:
                arr[i], arr[j] = arr[j], arr[i]
                i += 1
                j -= 1
        if target <= j:
            hi = j
        elif target >= i:
            lo = i
        else:
            break
    threshold = arr[target][0]
    return sorted(i for key, i in arr if key <= threshold)


class AssistingServer:
    """S2: completes decryptions on blinded data and computes statistics."""

    def __init__(self, pk: PaillierPublicKey, share: SecretKeyShare, fabric: Fabric):
        if share.share_index != 2:
            raise KeyMismatchError("assisting server requires the index-2 share")
        self.pk = pk
        self.share = share
        self.fabric = fabric
        self._blinded: dict[int, list[int]] = {}

    def clear_cache(self) -> None:
        self._blinded.clear()

    def serve_one(self) -> None:
        msg = self.fabric.recv(S2)
        handler = {
            "blind": self._on_blind,
            "pair": self._on_pair,
            "sums": self._on_sums,
            "dim": self._on_dim,
        }[msg.kind]
        handler(msg)

    def _on_blind(self, msg: Message) -> None:
        uid = int.from_bytes(msg.payload[:4], "big")
        self._blinded[uid] = self._finish_decrypt(msg.payload[4:])

    def _finish_decrypt(self, payload: bytes) -> list[int]:
        width = 2 * wire.modulus_bytes(self.pk.n)
        values = wire.unpack_fixed(payload, width)
        half = len(values) // 2
        out = []
        for ct_val, partial_val in zip(values[:half], values[half:]):
            ct = Ciphertext(ct_val, self.pk.key_id)
            partial = PartialCiphertext(partial_val, self.pk.key_id)
            out.append(part_dec2(self.share, ct, partial))
        return out

    def _on_pair(self, msg: Message) -> None:
        i = int.from_bytes(msg.payload[:4], "big")
        j = int.from_bytes(msg.payload[4:8], "big")
        wx, wy = self._blinded[i], self._blinded[j]
        n = self.pk.n
        dis = [(a - b) * (a - b) % n for a, b in zip(wx, wy)]
        payload = wire.pack_fixed(dis, wire.modulus_bytes(n))
        self.fabric.send(Message(S2, S1, PHASE_SEC_DIS, "pair_result", payload))

    def _on_sums(self, msg: Message) -> None:
        sums = self._finish_decrypt(msg.payload)
        payload = wire.pack_fixed(sums, wire.modulus_bytes(self.pk.n))
        self.fabric.send(Message(S2, S1, PHASE_SEC_SEL, "sums_result", payload))

    def _on_dim(self, msg: Message) -> None:
        residues = self._finish_decrypt(msg.payload)
        n = self.pk.n
        signed = [to_signed(v, n) for v in residues]
        median, rejected = pauta_lower_median(signed)
        payload = wire.pack_fixed([median % n], wire.modulus_bytes(n))
        payload += rejected.to_bytes(4, "big")
        self.fabric.send(Message(S2, S1, PHASE_SEC_REP, "dim_result", payload))


class PrimaryServer:
    """S1: drives the protocols, holds the blinding noise and key share 1."""

    def __init__(
        self,
        pk: PaillierPublicKey,
        share: SecretKeyShare,
        fabric: Fabric,
        peer: AssistingServer,
        crypto_rng: random.Random,
        select_rng: random.Random | None = None,
    ):
        if share.share_index != 1:
            raise KeyMismatchError("primary server requires the index-1 share")
        self.pk = pk
        self.share = share
        self.fabric = fabric
        self.peer = peer
        self.crypto_rng = crypto_rng
        self.select_rng = select_rng or random.Random(0)
        self._blinds: dict[int, list[int]] = {}
        self._oneshot_uid = _ONESHOT_UID_BASE
        self.audit_dim_blinds: list[int] = []

    # -- plumbing ----------------------------------------------------------

    def _enc(self, m: int) -> Ciphertext:
        return encrypt(self.pk, m, self.crypto_rng)

    def _exchange(self, phase: str, kind: str, payload: bytes, reply: bool = True) -> bytes | None:
        self.fabric.send(Message(S1, S2, phase, kind, payload))
        self.peer.serve_one()
        if reply:
            return self.fabric.recv(S1).payload
        return None

    def reset_round(self) -> None:
        self._blinds.clear()
        self.audit_dim_blinds.clear()
        self.peer.clear_cache()

    def encrypt_zero(self) -> Ciphertext:
        return self._enc(0)

    # -- blinded squared distance ------------------------------------------

    def _fresh_unit_vector(self, length: int) -> list[int]:
        out = []
        while len(out) < length:
            r = self.crypto_rng.randrange(1, self.pk.n)
            if math.gcd(r, self.pk.n) == 1:
                out.append(r)
        return out

    def blind_upload(self, uid: int, cts: list[Ciphertext]) -> None:
        """Blind one encrypted vector, part-decrypt it and ship it to S2.

        Done once per user per round; the stored noise vector is reused for
        every pairwise distance involving this user.
        """
        noise = self._fresh_unit_vector(len(cts))
        self._blinds[uid] = noise
        blinded = [hom_add(self.pk, ct, self._enc(r)) for ct, r in zip(cts, noise)]
        partials = [part_dec1(self.share, ct) for ct in blinded]
        width = 2 * wire.modulus_bytes(self.pk.n)
        payload = uid.to_bytes(4, "big")
        payload += wire.pack_fixed([ct.value for ct in blinded], width)
        payload += wire.pack_fixed([p.value for p in partials], width)
        self._exchange(PHASE_SEC_DIS, "blind", payload, reply=False)

    def _correction_term(self, ct_x: Ciphertext, ct_y: Ciphertext, rx: int, ry: int) -> Ciphertext:
        # seven-factor product cancelling the blinding from (x'-y')^2
        n = self.pk.n
        factors = (
            hom_scale(self.pk, ct_x, (-2 * rx) % n),
            self._enc((-rx * rx) % n),
            hom_scale(self.pk, ct_x, (2 * ry) % n),
            hom_scale(self.pk, ct_y, (2 * rx) % n),
            self._enc((2 * rx * ry) % n),
            hom_scale(self.pk, ct_y, (-2 * ry) % n),
            self._enc((-ry * ry) % n),
        )
        acc = factors[0]
        for factor in factors[1:]:
            acc = hom_add(self.pk, acc, factor)
        return acc

    def pair_distance(
        self, i: int, j: int, cts_i: list[Ciphertext], cts_j: list[Ciphertext]
    ) -> Ciphertext:
        """Encrypted squared distance between two already-uploaded vectors."""
        if len(cts_i) != len(cts_j):
            raise ValueError("gradient dimension mismatch")
        payload = i.to_bytes(4, "big") + j.to_bytes(4, "big")
        reply = self._exchange(PHASE_SEC_DIS, "pair", payload)
        dis_blinded = wire.unpack_fixed(reply, wire.modulus_bytes(self.pk.n))
        rx, ry = self._blinds[i], self._blinds[j]
        total = None
        for k in range(len(cts_i)):
            t_ct = self._correction_term(cts_i[k], cts_j[k], rx[k], ry[k])
            dis_ct = hom_add(self.pk, self._enc(dis_blinded[k]), t_ct)
            total = dis_ct if total is None else hom_add(self.pk, total, dis_ct)
        self.fabric.ledger.count_instance(PHASE_SEC_DIS)
        return total

    def sec_dis(self, cts_x: list[Ciphertext], cts_y: list[Ciphertext]) -> Ciphertext:
        """One-shot blinded distance between two encrypted vectors."""
        if len(cts_x) != len(cts_y):
            raise ValueError("gradient dimension mismatch")
        uid_x, uid_y = self._oneshot_uid, self._oneshot_uid + 1
        self._oneshot_uid += 2
        self.blind_upload(uid_x, cts_x)
        self.blind_upload(uid_y, cts_y)
        result = self.pair_distance(uid_x, uid_y, cts_x, cts_y)
        for uid in (uid_x, uid_y):
            self._blinds.pop(uid, None)
            self.peer._blinded.pop(uid, None)
        return result

    # -- joint selection -----------------------------------------------------

    def select_smallest(self, enc_sums: list[Ciphertext], k: int) -> list[int]:
        """Jointly decrypt the distance sums; return indices of k smallest.

        Both servers learn the plaintext sums (accepted leakage).  Ties
        break toward the lower index; the result is deterministic.
        """
        n = len(enc_sums)
        if n < 2:
            raise ValueError("selection requires at least two candidates")
        if k > n:
            raise ValueError(f"cannot select {k} of {n}")
        partials = [part_dec1(self.share, ct) for ct in enc_sums]
        width = 2 * wire.modulus_bytes(self.pk.n)
        payload = wire.pack_fixed([ct.value for ct in enc_sums], width)
        payload += wire.pack_fixed([p.value for p in partials], width)
        reply = self._exchange(PHASE_SEC_SEL, "sums", payload)
        sums = wire.unpack_fixed(reply, wire.modulus_bytes(self.pk.n))
        keys = [(s, i) for i, s in enumerate(sums)]
        return quickselect_smallest(keys, k, self.select_rng)

    # -- blinded per-dimension representative ---------------------------------

    def dim_median(self, cts: list[Ciphertext]) -> tuple[int, int]:
        """Outlier-filtered lower median of one dimension, as a signed int.

        Returns (median, rejected_count).  S2 sees the values under one
        shared additive shift and never learns the shift.
        """
        if not cts:
            raise ValueError("need at least one survivor value")
        n = self.pk.n
        r = self.crypto_rng.randrange(1, n // 4)
        self.audit_dim_blinds.append(r)
        enc_r = self._enc(r)
        blinded = [hom_add(self.pk, ct, enc_r) for ct in cts]
        partials = [part_dec1(self.share, ct) for ct in blinded]
        width = 2 * wire.modulus_bytes(n)
        payload = wire.pack_fixed([ct.value for ct in blinded], width)
        payload += wire.pack_fixed([p.value for p in partials], width)
        reply = self._exchange(PHASE_SEC_REP, "dim", payload)
        c1 = wire.modulus_bytes(n)
        med_blinded = int.from_bytes(reply[:c1], "big")
        rejected = int.from_bytes(reply[c1 : c1 + 4], "big")
        self.fabric.ledger.count_instance(PHASE_SEC_REP)
        return to_signed((med_blinded - r) % n, n), rejected
