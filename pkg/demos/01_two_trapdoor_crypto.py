# Tour of the two-trapdoor cryptosystem: one key pair, two ways to decrypt.
#
# The gradient key's trapdoor is split into two additive shares so that no
# single server can decrypt a user's upload alone; each server applies its
# share once and only the combination reveals the plaintext.

import random

from profl import paillier

rng = random.Random(2024)

print("generating a 256-bit test key pair (use >= 1024 bits outside demos)")
pk, sk = paillier.keygen(256, key_id="pkg", rng=rng, allow_insecure=True)
print(f"  modulus N has {pk.n.bit_length()} bits, generator is N+1")

message = 123456789
ct = paillier.encrypt(pk, message, rng)
print(f"\nencrypt({message}) -> {str(ct.value)[:40]}... (mod N^2)")
print("full decrypt:", paillier.full_decrypt(sk, ct))

print("\nadditive homomorphism: ciphertext product adds plaintexts")
c3, c4 = paillier.encrypt(pk, 3, rng), paillier.encrypt(pk, 4, rng)
print("  dec(E(3) * E(4)) =", paillier.full_decrypt(sk, paillier.hom_add(pk, c3, c4)))
print("  dec(E(3) ^ 5)    =", paillier.full_decrypt(sk, paillier.hom_scale(pk, c3, 5)))
neg = paillier.hom_scale(pk, paillier.encrypt(pk, 6, rng), pk.n - 1)
print("  scaling by N-1 negates:  dec(E(6)^(N-1)) = N - 6:",
      paillier.full_decrypt(sk, neg) == pk.n - 6)

print("\nsplitting the trapdoor into two server shares")
share1, share2 = paillier.key_split(sk, rng)
partial = paillier.part_dec1(share1, ct)          # at server 1
recovered = paillier.part_dec2(share2, ct, partial)  # completed at server 2
print("  two-stage decryption:", recovered)
print("  matches full decryption:", recovered == message)

print("\nencryption is randomized: same message, fresh ciphertexts")
values = {paillier.encrypt(pk, 5, rng).value for _ in range(5)}
print(f"  5 encryptions of 5 -> {len(values)} distinct ciphertexts")
