# Fixed-point gradients: reals -> integers mod N and back.
#
# The cryptosystem works on integers mod N, so every gradient coordinate is
# scaled by the precision constant deg and rounded; negatives live in the
# upper half of the residue range.  Addition under encryption then matches
# fixed-point addition of the reals exactly.

import random

import numpy as np

from profl import encoding, paillier

rng = random.Random(7)
pk, sk = paillier.keygen(256, key_id="pkg", rng=rng, allow_insecure=True)
deg = encoding.DEFAULT_DEG

print(f"deg = {deg}: x maps to round(x * deg) mod N")
for x in (0.123, -0.5, 0.0):
    v = encoding.encode_scalar(x, deg, pk.n)
    shown = v if 2 * v < pk.n else f"N - {pk.n - v}"
    print(f"  {x:>7} -> {shown}  -> decodes to {encoding.decode_scalar(v, deg, pk.n)}")

print("\nround-trip error is at most 1/(2*deg)")
xs = np.random.default_rng(0).uniform(-10, 10, size=5)
encoded = encoding.encode_vector(xs, deg, pk.n)
decoded = encoding.decode_vector(encoded, deg, pk.n)
for x, d in zip(xs, decoded):
    print(f"  {x:+.8f} -> {d:+.6f}  (|err| = {abs(x - d):.2e})")

print("\nfixed-point addition survives encryption exactly")
x, y = 1.25, -2.75
cx = paillier.encrypt(pk, encoding.encode_scalar(x, deg, pk.n), rng)
cy = paillier.encrypt(pk, encoding.encode_scalar(y, deg, pk.n), rng)
total = paillier.full_decrypt(sk, paillier.hom_add(pk, cx, cy))
print(f"  decode(dec(E({x}) + E({y}))) = {encoding.decode_scalar(total, deg, pk.n)}")

print("\nheadroom: squared-distance sums must stay below N/2")
encoding.check_headroom(dims=7850, clip=10.0, deg=deg, n=pk.n, accumulations=19)
print("  7850-dim model, clip 10, 19 accumulations: fits a 256-bit modulus")
try:
    encoding.check_headroom(dims=7850, clip=10.0, deg=deg, n=1 << 64)
except encoding.HeadroomError as exc:
    print(f"  64-bit modulus would overflow: {exc}")
