"""Two-trapdoor additively homomorphic cryptosystem.

A Paillier variant with generator fixed to N+1.  Besides the usual
keygen / encrypt / decrypt triple, the secret trapdoor can be split into
two additive shares so that decryption takes one partial step on each of
two non-colluding servers:

    key_split(sk)          -> (share_1, share_2)
    part_dec1(share_1, c)  -> partial value
    part_dec2(share_2, c, partial) -> plaintext

The split works over the modulus lambda*N: the combined exponent is the
CRT element delta with delta = 0 (mod lambda) and delta = 1 (mod N), for
which c^delta = 1 + m*N (mod N^2).  Ciphertext products add plaintexts
and ciphertext powers scale them, both mod N.

Everything here is deterministic given the caller-supplied ``random.Random``
source; keys and ciphertexts are immutable values.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from . import wire

DEFAULT_MODULUS_BITS = 1024
MIN_MODULUS_BITS = 256
MILLER_RABIN_ROUNDS = 64

_SMALL_PRIMES: list[int] = []


def _small_primes(limit: int = 2000) -> list[int]:
    global _SMALL_PRIMES
    if not _SMALL_PRIMES:
        sieve = bytearray([1]) * (limit + 1)
        sieve[0:2] = b"\x00\x00"
        for i in range(2, int(limit**0.5) + 1):
            if sieve[i]:
                sieve[i * i :: i] = b"\x00" * len(sieve[i * i :: i])
        _SMALL_PRIMES = [i for i in range(2, limit + 1) if sieve[i]]
    return _SMALL_PRIMES


class KeyMismatchError(ValueError):
    """Operands belong to different key pairs or the wrong share was used."""


def is_probable_prime(n: int, rng: random.Random, rounds: int = MILLER_RABIN_ROUNDS) -> bool:
    """Miller-Rabin primality test with ``rounds`` random bases."""
    if n < 2:
        return False
    for p in _small_primes():
        if n == p:
            return True
        if n % p == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng: random.Random) -> int:
    # top two bits set so the product of two such primes has exactly 2*bits bits
    while True:
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | (1 << (bits - 2)) | 1
        if is_probable_prime(cand, rng):
            return cand


@dataclass(frozen=True)
class PaillierPublicKey:
    """Public key: modulus N, generator N+1 (implicit), cached N^2."""

    n: int
    key_id: str

    @property
    def g(self) -> int:
        return self.n + 1

    @property
    def n_sq(self) -> int:
        return self.n * self.n


@dataclass(frozen=True)
class PaillierSecretKey:
    """Secret trapdoor: Carmichael value lam and mu = lam^-1 mod N."""

    lam: int
    mu: int
    n: int
    key_id: str


@dataclass(frozen=True)
class SecretKeyShare:
    """One additive share of the decryption exponent, held by one server."""

    share_index: int
    value: int
    n: int
    key_id: str


@dataclass(frozen=True)
class Ciphertext:
    """Element of the residue group mod N^2, tagged with its key pair."""

    value: int
    key_id: str


@dataclass(frozen=True)
class PartialCiphertext:
    """Stage-1 partial decryption; only valid as input to part_dec2."""

    value: int
    key_id: str


def keygen(
    modulus_bits: int = DEFAULT_MODULUS_BITS,
    key_id: str = "key",
    rng: random.Random | None = None,
    allow_insecure: bool = False,
) -> tuple[PaillierPublicKey, PaillierSecretKey]:
    """Generate a key pair with an N of exactly ``modulus_bits`` bits.

    Moduli below 1024 bits are only accepted with ``allow_insecure=True``
    (test mode); below 256 bits they are rejected outright.
    """
    if modulus_bits < MIN_MODULUS_BITS:
        raise ValueError(f"modulus_bits must be >= {MIN_MODULUS_BITS}, got {modulus_bits}")
    if modulus_bits % 2:
        raise ValueError("modulus_bits must be even")
    if modulus_bits < DEFAULT_MODULUS_BITS and not allow_insecure:
        raise ValueError(
            f"{modulus_bits}-bit moduli are insecure; pass allow_insecure=True for test use"
        )
    rng = rng or random.Random()
    half = modulus_bits // 2
    p = _random_prime(half, rng)
    q = _random_prime(half, rng)
    while q == p:
        q = _random_prime(half, rng)
    n = p * q
    lam = math.lcm(p - 1, q - 1)
    mu = pow(lam, -1, n)
    return PaillierPublicKey(n, key_id), PaillierSecretKey(lam, mu, n, key_id)


def key_split(
    sk: PaillierSecretKey, rng: random.Random | None = None
) -> tuple[SecretKeyShare, SecretKeyShare]:
    """Split the trapdoor into two additive shares mod lambda*N.

    The shares sum to delta = lam*mu, the CRT element that is 0 mod lambda
    and 1 mod N.  share_1 is uniform over [1, lambda*N).
    """
    rng = rng or random.Random()
    modulus = sk.lam * sk.n
    delta = sk.lam * sk.mu  # = CRT(0 mod lam, 1 mod n), since mu = lam^-1 mod n
    s1 = rng.randrange(1, modulus)
    s2 = (delta - s1) % modulus
    return (
        SecretKeyShare(1, s1, sk.n, sk.key_id),
        SecretKeyShare(2, s2, sk.n, sk.key_id),
    )


def encrypt(pk: PaillierPublicKey, m: int, rng: random.Random) -> Ciphertext:
    """Encrypt m in [0, N) as (1+N)^m * r^N mod N^2 with random unit r."""
    if not 0 <= m < pk.n:
        raise ValueError(f"plaintext {m} out of range [0, N)")
    while True:
        r = rng.randrange(1, pk.n)
        if math.gcd(r, pk.n) == 1:
            break
    n_sq = pk.n_sq
    value = (1 + m * pk.n) % n_sq  # (1+N)^m mod N^2
    value = value * pow(r, pk.n, n_sq) % n_sq
    return Ciphertext(value, pk.key_id)


def _l_function(u: int, n: int) -> int:
    return (u - 1) // n


def _check_ciphertext(c: Ciphertext, n: int, key_id: str) -> None:
    if not isinstance(c, Ciphertext):
        raise TypeError(f"expected a Ciphertext, got {type(c).__name__}")
    if c.key_id != key_id:
        raise KeyMismatchError(f"ciphertext under key {c.key_id!r}, expected {key_id!r}")
    if not 1 <= c.value < n * n or math.gcd(c.value, n) != 1:
        raise ValueError("ciphertext value is not in the group mod N^2")


def full_decrypt(sk: PaillierSecretKey, c: Ciphertext) -> int:
    """Recover m = L(c^lambda mod N^2) * mu mod N."""
    _check_ciphertext(c, sk.n, sk.key_id)
    u = pow(c.value, sk.lam, sk.n * sk.n)
    return _l_function(u, sk.n) * sk.mu % sk.n


def part_dec1(share: SecretKeyShare, c: Ciphertext) -> PartialCiphertext:
    """Stage-1 partial decryption: c^share_1 mod N^2."""
    if share.share_index != 1:
        raise KeyMismatchError("part_dec1 requires the index-1 share")
    _check_ciphertext(c, share.n, share.key_id)
    return PartialCiphertext(pow(c.value, share.value, share.n * share.n), share.key_id)


def part_dec2(share: SecretKeyShare, c: Ciphertext, partial: PartialCiphertext) -> int:
    """Stage-2 partial decryption, completing stage 1 to the plaintext.

    The caller must pair ``c`` with the partial produced from the same
    ciphertext; a mismatched pair yields garbage rather than an error.
    """
    if share.share_index != 2:
        raise KeyMismatchError("part_dec2 requires the index-2 share")
    if not isinstance(partial, PartialCiphertext):
        raise TypeError(f"expected a PartialCiphertext, got {type(partial).__name__}")
    _check_ciphertext(c, share.n, share.key_id)
    if partial.key_id != share.key_id:
        raise KeyMismatchError("partial ciphertext under a different key")
    n_sq = share.n * share.n
    u = pow(c.value, share.value, n_sq) * partial.value % n_sq
    return _l_function(u, share.n) % share.n


def hom_add(pk: PaillierPublicKey, a: Ciphertext, b: Ciphertext) -> Ciphertext:
    """Ciphertext of the sum: a*b mod N^2 decrypts to (m_a + m_b) mod N."""
    _check_ciphertext(a, pk.n, pk.key_id)
    _check_ciphertext(b, pk.n, pk.key_id)
    return Ciphertext(a.value * b.value % pk.n_sq, pk.key_id)


def hom_scale(pk: PaillierPublicKey, c: Ciphertext, a: int) -> Ciphertext:
    """Ciphertext of the scaled value: c^a decrypts to m*a mod N.

    Scaling by N-1 realises negation, which is how subtraction terms are
    formed inside the blinded-distance protocol.
    """
    if not 0 <= a < pk.n:
        raise ValueError(f"scalar {a} out of range [0, N)")
    _check_ciphertext(c, pk.n, pk.key_id)
    return Ciphertext(pow(c.value, a, pk.n_sq), pk.key_id)


# -- key serialization (length-prefixed fields, 4-byte key id) ------------


def serialize_public_key(pk: PaillierPublicKey) -> bytes:
    return wire.encode_key_id(pk.key_id) + wire.encode_uint(pk.n)


def deserialize_public_key(buf: bytes) -> PaillierPublicKey:
    key_id, off = wire.decode_key_id(buf)
    n, _ = wire.decode_uint(buf, off)
    return PaillierPublicKey(n, key_id)


def serialize_secret_key(sk: PaillierSecretKey) -> bytes:
    return (
        wire.encode_key_id(sk.key_id)
        + wire.encode_uint(sk.lam)
        + wire.encode_uint(sk.mu)
        + wire.encode_uint(sk.n)
    )


def deserialize_secret_key(buf: bytes) -> PaillierSecretKey:
    key_id, off = wire.decode_key_id(buf)
    lam, off = wire.decode_uint(buf, off)
    mu, off = wire.decode_uint(buf, off)
    n, _ = wire.decode_uint(buf, off)
    return PaillierSecretKey(lam, mu, n, key_id)


def serialize_key_share(share: SecretKeyShare) -> bytes:
    return (
        wire.encode_key_id(share.key_id)
        + bytes([share.share_index])
        + wire.encode_uint(share.value)
        + wire.encode_uint(share.n)
    )


def deserialize_key_share(buf: bytes) -> SecretKeyShare:
    key_id, off = wire.decode_key_id(buf)
    index = buf[off]
    off += 1
    value, off = wire.decode_uint(buf, off)
    n, _ = wire.decode_uint(buf, off)
    return SecretKeyShare(index, value, n, key_id)
