"""Colour image secret sharing with bit-exact XOR restoration.

An image is split into two or more shadow images, each indistinguishable from
uniform noise; XOR-ing all of them restores the original exactly.
"""

from .analysis import (
    BitPlaneStats,
    RecoveryReport,
    bit_balance,
    naive_otp_baseline,
    share_indistinguishability,
    simulate_known_rng_attack,
    subset_secrecy,
)
from .core import (
    BitVerdict,
    ChannelWord,
    RandomPair,
    Verdict,
    identity_aware_bit,
    partial_knowledge_bit,
    restore,
    share_bit_oracle,
    share_pair,
)
from .raster_io import (
    RasterImage,
    ShareManifest,
    load_image,
    read_manifest,
    save_image,
    write_manifest,
)
from .rng import Mode, RandomnessContext, draw_pair, wipe
from .scheme import (
    ShareSet,
    SplitRequest,
    combine,
    combine_bytes,
    split,
    split2,
    split_bytes,
    split_n,
)

__version__ = "0.1.0"
