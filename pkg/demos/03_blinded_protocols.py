# The three two-server protocols, with the message fabric doing the books.
#
# Server 1 holds encrypted gradients, key share 1 and all blinding noise;
# server 2 holds key share 2 and only ever sees blinded values.  Every
# message crosses the simulated fabric, which counts payload bytes per link
# and phase.

import random

import numpy as np

from profl import paillier
from profl.encoding import encode_signed
from profl.protocols import AssistingServer, PrimaryServer
from profl.transport import Fabric

rng = random.Random(99)
pk, sk = paillier.keygen(256, key_id="pkg", rng=rng, allow_insecure=True)
share1, share2 = paillier.key_split(sk, rng)

fabric = Fabric()
s2 = AssistingServer(pk, share2, fabric)
s1 = PrimaryServer(pk, share1, fabric, s2, crypto_rng=random.Random(1))

deg = 10**4
gx = np.array([0.5, -1.25, 2.0])
gy = np.array([-0.5, 0.75, 2.0])
enc = lambda vec: [paillier.encrypt(pk, int(v) % pk.n, rng) for v in encode_signed(vec, deg)]

print("blinded squared distance between two encrypted vectors")
d_ct = s1.sec_dis(enc(gx), enc(gy))
d = paillier.full_decrypt(sk, d_ct) / deg**2
print(f"  dec(SecDis) / deg^2 = {d}   (numpy: {float(((gx - gy) ** 2).sum())})")

print("\njoint selection: both servers decrypt the distance sums,")
print("server 1 quickselects the smallest")
sums = [10, 50, 12, 48]
enc_sums = [paillier.encrypt(pk, s, rng) for s in sums]
print(f"  sums {sums}, k=2 -> indices {s1.select_smallest(enc_sums, 2)}")

print("\nblinded per-dimension representative (3-sigma filter + lower median)")
values = [1, 2, 3, 2, 1000]
med, rejected = s1.dim_median([paillier.encrypt(pk, v % pk.n, rng) for v in values])
print(f"  values {values} -> median {med}, rejected {rejected}")
print("  (five values cannot be 3 sigma out; rejection needs n >= 11)")
outliers = [0] * 12 + [10**6]
med, rejected = s1.dim_median([paillier.encrypt(pk, v % pk.n, rng) for v in outliers])
print(f"  twelve zeros plus 10^6 -> median {med}, rejected {rejected}")

print("\nper-link, per-phase payload bytes")
for (link, phase), nbytes in sorted(fabric.ledger.payload_bytes.items()):
    print(f"  {link:8s} {phase:8s} {nbytes:8d}")
