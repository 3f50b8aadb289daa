# %% [markdown]
# # An attacker who knows every random value
#
# Worst case: the attacker can regenerate the exact random words used for the
# split and holds one shadow.  With a plain XOR pad that is the whole key.
# With the two-value construction one shadow bit in every random case is a
# constant; the attacker learns something only when the held bit differs from
# that constant, and then the original bit is always 1.

# %%
import itertools

import numpy as np

from shadowshare import RasterImage, partial_knowledge_bit
from shadowshare.analysis import naive_otp_baseline, simulate_known_rng_attack

# %% The per-bit table, enumerated
print("r1 r2 q | p")
for r1, r2, q in itertools.product((0, 1), repeat=3):
    v = partial_knowledge_bit(r1, r2, q)
    print(f" {r1}  {r2} {q} | {v.value if v.determined else '--'}")

# %% Replaying the attack on a noisy 128x128 picture
seed = bytes(range(32))
src = RasterImage(np.random.default_rng(0).integers(0, 256, (128, 128, 3), dtype=np.uint8))
for knows in (False, True):
    print(simulate_known_rng_attack(src, seed, held="first", knows_which=knows).format_line())
print(naive_otp_baseline(src, seed).format_line())

# %% On a black picture the identity-blind attacker learns nothing at all
black = RasterImage(np.zeros((64, 64, 3), np.uint8))
print(simulate_known_rng_attack(black, seed).format_line())
