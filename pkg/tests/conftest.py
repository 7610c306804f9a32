import random

import pytest

from profl import paillier
from profl.protocols import AssistingServer, PrimaryServer
from profl.transport import Fabric


@pytest.fixture(scope="session")
def key256():
    """256-bit test keypair with a two-way share split (deterministic)."""
    rng = random.Random(0xC0FFEE)
    pk, sk = paillier.keygen(256, "pkg", rng, allow_insecure=True)
    share1, share2 = paillier.key_split(sk, rng)
    return pk, sk, share1, share2


@pytest.fixture(scope="session")
def key1024():
    rng = random.Random(0xFEED)
    return paillier.keygen(1024, "pkm", rng)


@pytest.fixture
def server_pair(key256):
    """Fresh fabric plus both protocol servers wired to it."""

    def build(crypto_seed=1, select_seed=2, record_trace=False):
        pk, _, share1, share2 = key256
        fabric = Fabric(record_trace=record_trace)
        s2 = AssistingServer(pk, share2, fabric)
        s1 = PrimaryServer(
            pk, share1, fabric, s2,
            crypto_rng=random.Random(crypto_seed),
            select_rng=random.Random(select_seed),
        )
        return fabric, s1, s2

    return build
