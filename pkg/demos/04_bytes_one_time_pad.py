# %% [markdown]
# # The same construction on arbitrary bytes
#
# A byte string is treated as a one-row greyscale image.

# %%
from shadowshare import RandomnessContext, combine_bytes, split_bytes

message = "attack at dawn".encode()
with RandomnessContext.os_entropy() as ctx:
    parts = split_bytes(message, 4, ctx)

for p in parts:
    print(p.hex())
print(combine_bytes(parts).decode())
print(ctx.wiped)
