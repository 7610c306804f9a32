"""Byte encodings for keys, ciphertexts and integer vectors.

Two formats are used throughout the package:

* Key material uses length-prefixed fields: every integer is written as a
  4-byte big-endian length followed by its minimal big-endian bytes.  Key
  labels occupy exactly 4 bytes, a share index exactly 1 byte.
* Protocol payloads use fixed-width values so that byte counts depend only
  on the modulus size: an element mod N occupies ``modulus_bytes(N)`` bytes
  and an element mod N^2 twice that.  The communication ledger counts these
  payload bytes and nothing else (message framing is a flat 16-byte header
  that is excluded from the accounting).
"""

from __future__ import annotations

import struct

KEY_ID_BYTES = 4


def modulus_bytes(n: int) -> int:
    """Width in bytes of one value mod ``n`` (big-endian, zero padded)."""
    return (n.bit_length() + 7) // 8


def encode_uint(x: int) -> bytes:
    """Length-prefixed big-endian encoding of a non-negative integer."""
    if x < 0:
        raise ValueError("only non-negative integers are encodable")
    raw = x.to_bytes((x.bit_length() + 7) // 8 or 1, "big")
    return struct.pack(">I", len(raw)) + raw


def decode_uint(buf: bytes, offset: int = 0) -> tuple[int, int]:
    """Decode one length-prefixed integer, returning (value, next_offset)."""
    (length,) = struct.unpack_from(">I", buf, offset)
    offset += 4
    value = int.from_bytes(buf[offset : offset + length], "big")
    return value, offset + length


def encode_key_id(key_id: str) -> bytes:
    raw = key_id.encode("utf-8")
    if len(raw) > KEY_ID_BYTES:
        raise ValueError(f"key id {key_id!r} exceeds {KEY_ID_BYTES} bytes")
    return raw.ljust(KEY_ID_BYTES, b"\x00")


def decode_key_id(buf: bytes, offset: int = 0) -> tuple[str, int]:
    raw = buf[offset : offset + KEY_ID_BYTES].rstrip(b"\x00")
    return raw.decode("utf-8"), offset + KEY_ID_BYTES


def pack_fixed(values, width: int) -> bytes:
    """Concatenate integers as fixed-width big-endian values."""
    out = bytearray()
    for v in values:
        out += int(v).to_bytes(width, "big")
    return bytes(out)


def unpack_fixed(buf: bytes, width: int) -> list[int]:
    if len(buf) % width:
        raise ValueError("payload length is not a multiple of the value width")
    return [int.from_bytes(buf[i : i + width], "big") for i in range(0, len(buf), width)]
