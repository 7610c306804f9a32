"""Fixed-point conversion between real gradients and integers mod N.

A real x maps to round(x * deg) treated as a residue mod N, with the upper
half of the residue range decoding as negatives (threshold N/2).  The
simulator works with the signed integers directly (int64 arrays) and maps
to residues only at the crypto boundary; the two views agree whenever the
headroom invariant below holds.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DEG = 10**6
DEFAULT_CLIP = 10.0


class HeadroomError(ValueError):
    """Encoded values could overflow half the modulus during aggregation."""


def encode_scalar(x: float, deg: int, n: int) -> int:
    """round(x*deg) mod N, round-half-to-even; |x*deg| must stay below N/2."""
    scaled = x * deg
    if 2 * abs(scaled) >= n:
        raise HeadroomError(f"|{x} * {deg}| exceeds the N/2 headroom bound")
    return round(scaled) % n


def decode_scalar(value: int, deg: int, n: int) -> float:
    """Inverse of encode_scalar: residues >= N/2 decode as negatives."""
    if 2 * value < n:
        return value / deg
    return (value - n) / deg


def encode_vector(xs, deg: int, n: int) -> list[int]:
    return [encode_scalar(float(x), deg, n) for x in xs]


def decode_vector(values, deg: int, n: int) -> list[float]:
    return [decode_scalar(int(v), deg, n) for v in values]


def to_signed(value: int, n: int) -> int:
    """Map a residue mod N to its signed representative in (-N/2, N/2)."""
    return value if 2 * value < n else value - n


def from_signed(value: int, n: int) -> int:
    return value % n


def encode_signed(xs: np.ndarray, deg: int) -> np.ndarray:
    """Signed fixed-point encoding as int64 (fast path, no modulus)."""
    return np.rint(np.asarray(xs, dtype=np.float64) * deg).astype(np.int64)


def decode_signed(values: np.ndarray, deg: int) -> np.ndarray:
    return np.asarray(values, dtype=np.float64) / deg


def check_headroom(dims: int, clip: float, deg: int, n: int, accumulations: int = 1) -> None:
    """Assert that a full squared-distance accumulation cannot wrap mod N.

    With every coordinate clipped to |x| <= clip, one squared distance is at
    most dims * (2*clip*deg)^2; this must stay below N/2, also after being
    accumulated ``accumulations`` times (n-1 per user in a full round).
    """
    bound = accumulations * dims * (2 * int(round(clip * deg))) ** 2
    if 2 * bound >= n:
        raise HeadroomError(
            f"dims={dims}, clip={clip}, deg={deg} exceed the N/2 headroom of a "
            f"{n.bit_length()}-bit modulus"
        )
