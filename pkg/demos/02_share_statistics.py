# %% [markdown]
# # What a single shadow image reveals
#
# A shadow of a flat, single-colour image should look exactly like a shadow
# of anything else: every bit plane balanced, and the sample distribution the
# same whichever source produced it.

# %%
import numpy as np

from shadowshare import RandomnessContext, RasterImage, bit_balance, split2
from shadowshare.analysis import share_indistinguishability, subset_secrecy

SEED = "c1" * 32  # deterministic only so the numbers below are reproducible

# %% Bit-plane balance of a shadow of a constant colour
flat = RasterImage(np.broadcast_to(np.array([200, 30, 120], np.uint8), (256, 256, 3)))
first, second = split2(flat, RandomnessContext.deterministic(SEED))
stats = bit_balance(first)
print(stats.format_table())
print("all planes pass:", stats.passes)

# %% The source itself fails the same test badly
print("source passes:", bit_balance(flat).passes)

# %% Black versus white: first-shadow histograms over 100 000 splits
black = RasterImage(np.zeros((1, 1, 3), np.uint8))
white = RasterImage(np.full((1, 1, 3), 255, np.uint8))
print(share_indistinguishability(black, white, 100_000, seed=SEED).format_table())

# %% Three shadows: every proper subset (and its XOR) is equally uninformative
rep = subset_secrecy(RasterImage(np.zeros((1, 1, 1), np.uint8)),
                     RasterImage(np.full((1, 1, 1), 255, np.uint8)), 3, 100_000, seed=SEED)
for subset, r in rep.subsets.items():
    c = r.channels[0]
    print(f"subset {subset}: chi2 {c.statistic:7.1f}  (critical {c.critical_value:.1f})")
