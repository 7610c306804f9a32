import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from profl import encoding
from profl.encoding import (
    HeadroomError,
    check_headroom,
    decode_scalar,
    decode_vector,
    encode_scalar,
    encode_vector,
)
from profl.paillier import encrypt, full_decrypt, hom_add

DEG = 10**6


def test_encode_scalar_examples(key256):
    pk, _, _, _ = key256
    n = pk.n
    assert encode_scalar(0.123, DEG, n) == 123000
    assert encode_scalar(-0.5, DEG, n) == n - 500000
    assert encode_scalar(0.0, DEG, n) == 0


def test_decode_scalar_examples(key256):
    pk, _, _, _ = key256
    n = pk.n
    assert decode_scalar(123000, DEG, n) == 0.123
    assert decode_scalar(n - 500000, DEG, n) == -0.5


def test_encode_overflow_rejected():
    with pytest.raises(HeadroomError):
        encode_scalar(3.0, 10, 50)  # 30 >= 50/2


def test_vector_examples(key256):
    pk, _, _, _ = key256
    n = pk.n
    assert encode_vector([0.1, -0.2], DEG, n) == [100000, n - 200000]
    assert encode_vector([], DEG, n) == []
    assert decode_vector([], DEG, n) == []


@given(st.floats(min_value=-10, max_value=10, allow_nan=False))
def test_roundtrip_error_bound(x):
    n = (1 << 255) + 1
    err = abs(decode_scalar(encode_scalar(x, DEG, n), DEG, n) - x)
    assert err <= 1 / (2 * DEG)


def test_roundtrip_large_vector(key256):
    pk, _, _, _ = key256
    rng = np.random.default_rng(0)
    xs = rng.uniform(-10, 10, size=7840)
    back = np.array(decode_vector(encode_vector(xs, DEG, pk.n), DEG, pk.n))
    assert np.all(np.abs(back - xs) <= 1 / (2 * DEG))


def test_signed_fast_path_matches_scalar_encoding(key256):
    pk, _, _, _ = key256
    rng = np.random.default_rng(1)
    xs = rng.uniform(-10, 10, size=500)
    signed = encoding.encode_signed(xs, DEG)
    residues = encode_vector(xs, DEG, pk.n)
    assert [int(v) % pk.n for v in signed] == residues
    assert np.allclose(encoding.decode_signed(signed, DEG), decode_vector(residues, DEG, pk.n))


def test_half_to_even_rounding(key256):
    pk, _, _, _ = key256
    assert encode_scalar(0.5, 1, pk.n) == 0  # ties to even
    assert encode_scalar(1.5, 1, pk.n) == 2
    assert encode_scalar(-0.5, 1, pk.n) == 0


def test_homomorphic_consistency(key256):
    # decode(decrypt(hom_add(E(enc(x)), E(enc(y))))) equals fixed-point x+y
    pk, sk, _, _ = key256
    rng = random.Random(2)
    for _ in range(25):
        x, y = rng.uniform(-5, 5), rng.uniform(-5, 5)
        ex, ey = encode_scalar(x, DEG, pk.n), encode_scalar(y, DEG, pk.n)
        total = hom_add(pk, encrypt(pk, ex, rng), encrypt(pk, ey, rng))
        expected = (
            encoding.to_signed(ex, pk.n) + encoding.to_signed(ey, pk.n)
        ) / DEG
        assert decode_scalar(full_decrypt(sk, total), DEG, pk.n) == expected


def test_check_headroom(key256):
    pk, _, _, _ = key256
    check_headroom(7850, 10.0, DEG, pk.n, accumulations=19)
    with pytest.raises(HeadroomError):
        check_headroom(10, 1.0, 10, 1000)
