import random

import pytest

from profl import wire
from profl.paillier import encrypt
from profl.transport import (
    DeadlockError,
    Fabric,
    Message,
    PHASE_SEC_DIS,
    PHASE_UPLOAD,
    S1,
    S2,
    user,
)


def test_empty_ledger_is_all_zero():
    fabric = Fabric()
    assert fabric.ledger.total_bytes() == 0
    assert not fabric.ledger.payload_bytes


def test_single_ciphertext_payload_is_256_bytes_at_1024_bits(key1024):
    # a value mod N^2 under a 1024-bit N serializes to exactly 256 bytes
    pk, _ = key1024
    ct = encrypt(pk, 42, random.Random(0))
    payload = wire.pack_fixed([ct.value], 2 * wire.modulus_bytes(pk.n))
    assert len(payload) == 256
    fabric = Fabric()
    fabric.send(Message(user(0), S1, PHASE_UPLOAD, "gradient", payload))
    assert fabric.ledger.payload_bytes[("U0->S1", PHASE_UPLOAD)] == 256


def test_fifo_per_link_and_recv():
    fabric = Fabric()
    for i in range(3):
        fabric.send(Message(S1, S2, PHASE_SEC_DIS, "blind", bytes([i])))
    assert [fabric.recv(S2).payload[0] for _ in range(3)] == [0, 1, 2]


def test_recv_on_empty_queue_signals_deadlock():
    fabric = Fabric()
    with pytest.raises(DeadlockError):
        fabric.recv(S2)


def test_ledger_round_snapshots_and_csv():
    fabric = Fabric()
    fabric.ledger.start_round(0)
    fabric.send(Message(S1, S2, PHASE_SEC_DIS, "blind", b"abcd"))
    fabric.ledger.start_round(1)
    fabric.send(Message(S1, S2, PHASE_SEC_DIS, "blind", b"xy"))
    fabric.send(Message(S2, S1, PHASE_SEC_DIS, "pair_result", b"z"))
    fabric.ledger.finish()
    csv_text = fabric.ledger.to_csv()
    lines = csv_text.strip().splitlines()
    assert lines[0] == "round,link,phase,bytes"
    assert "0,S1->S2,SecDis,4" in lines
    assert "1,S1->S2,SecDis,2" in lines
    assert "1,S2->S1,SecDis,1" in lines


def test_trace_recording_and_determinism():
    def run():
        fabric = Fabric(record_trace=True)
        rng = random.Random(3)
        for _ in range(5):
            fabric.send(
                Message(S1, S2, PHASE_SEC_DIS, "blind", rng.randbytes(8))
            )
        return [m.payload for m in fabric.trace], dict(fabric.ledger.payload_bytes)

    assert run() == run()


def test_ledger_snapshot_is_frozen_copy():
    fabric = Fabric()
    fabric.send(Message(S1, S2, PHASE_SEC_DIS, "blind", b"1234"))
    snap = fabric.ledger_snapshot()
    fabric.send(Message(S1, S2, PHASE_SEC_DIS, "blind", b"56"))
    assert snap.total_bytes() == 4
    assert fabric.ledger.total_bytes() == 6


def test_fixed_width_pack_roundtrip():
    values = [0, 1, 2**64 - 1, 123456789]
    packed = wire.pack_fixed(values, 16)
    assert len(packed) == 64
    assert wire.unpack_fixed(packed, 16) == values
    with pytest.raises(ValueError):
        wire.unpack_fixed(packed[:-3], 16)


def test_length_prefixed_roundtrip():
    for x in (0, 1, 255, 2**300 + 7):
        buf = wire.encode_uint(x)
        value, offset = wire.decode_uint(buf)
        assert value == x and offset == len(buf)
