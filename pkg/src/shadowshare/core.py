"""Boolean kernel of the two-random-value share construction.

Every function here operates on single channel words (or single bits) and is
pure.  The whole-image code in :mod:`shadowshare.scheme` applies the same
algebra to numpy arrays through :func:`share_words` and :func:`restore_words`.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DepthMismatchError

SUPPORTED_DEPTHS = (8, 16)


def depth_mask(bit_depth: int) -> int:
    return (1 << bit_depth) - 1


@dataclass(frozen=True)
class ChannelWord:
    """One channel sample of one pixel."""

    value: int
    bit_depth: int = 8

    def __post_init__(self):
        if self.bit_depth not in SUPPORTED_DEPTHS:
            raise ValueError(f"bit_depth must be one of {SUPPORTED_DEPTHS}, got {self.bit_depth}")
        if not 0 <= self.value <= depth_mask(self.bit_depth):
            raise ValueError(f"value {self.value} does not fit in {self.bit_depth} bits")

    def __invert__(self) -> ChannelWord:
        # NOT stays inside the word width
        return ChannelWord(~self.value & depth_mask(self.bit_depth), self.bit_depth)


@dataclass(frozen=True)
class RandomPair:
    r1: ChannelWord
    r2: ChannelWord

    def __post_init__(self):
        if self.r1.bit_depth != self.r2.bit_depth:
            raise DepthMismatchError(
                f"r1 is {self.r1.bit_depth}-bit but r2 is {self.r2.bit_depth}-bit"
            )

    @property
    def bit_depth(self) -> int:
        return self.r1.bit_depth


class Verdict(Enum):
    DETERMINED = "determined"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class BitVerdict:
    """What an attacker can conclude about one bit of the original."""

    tag: Verdict
    value: int | None = None

    def __post_init__(self):
        if self.tag is Verdict.DETERMINED and self.value not in (0, 1):
            raise ValueError("a determined verdict needs a bit value")
        if self.tag is Verdict.UNDETERMINED and self.value is not None:
            raise ValueError("an undetermined verdict carries no value")

    @property
    def determined(self) -> bool:
        return self.tag is Verdict.DETERMINED


UNDETERMINED = BitVerdict(Verdict.UNDETERMINED)


def _require_same_depth(*words: ChannelWord) -> int:
    depths = {w.bit_depth for w in words}
    if len(depths) != 1:
        raise DepthMismatchError(f"channel words have mixed bit depths {sorted(depths)}")
    return depths.pop()


def share_pair(p: ChannelWord, r: RandomPair) -> tuple[ChannelWord, ChannelWord]:
    """Split one channel word into two shadow words.

    Bits set in ``p`` are taken from ``r.r1``, bits clear in ``p`` from
    ``r.r2``; the second shadow is the XOR of ``p`` with the first.
    """
    depth = _require_same_depth(p, r.r1, r.r2)
    s1 = (p.value & r.r1.value) | ((~p).value & r.r2.value)
    s2 = p.value ^ s1
    return ChannelWord(s1, depth), ChannelWord(s2, depth)


def restore(s1: ChannelWord, s2: ChannelWord) -> ChannelWord:
    depth = _require_same_depth(s1, s2)
    return ChannelWord(s1.value ^ s2.value, depth)


def share_bit_oracle(p: int, r1: int, r2: int) -> tuple[int, int]:
    """Single-bit reference for :func:`share_pair`, evaluated as a truth table."""
    if p not in (0, 1) or r1 not in (0, 1) or r2 not in (0, 1):
        raise ValueError("share_bit_oracle takes single bits")
    if p == 1:
        s1 = r1
        s2 = 0 if r1 == 1 else 1
    else:
        s1 = r2
        s2 = r2
    return s1, s2


def partial_knowledge_bit(r1: int, r2: int, q: int) -> BitVerdict:
    """Verdict of an attacker who knows ``r1``, ``r2`` and one share bit ``q``
    but not whether that bit came from the first or the second shadow.

    For every (r1, r2) one of the two shadow bits is the constant ``r2``
    regardless of the original.  Observing that constant says nothing;
    observing its complement pins the held bit to the p-dependent shadow, and
    in all four cases that forces the original bit to 1.
    """
    if r1 not in (0, 1) or r2 not in (0, 1) or q not in (0, 1):
        raise ValueError("partial_knowledge_bit takes single bits")
    if q != r2:
        return BitVerdict(Verdict.DETERMINED, 1)
    return UNDETERMINED


def identity_aware_bit(r1: int, r2: int, q: int, held: str) -> BitVerdict:
    """Verdict of the stronger attacker who also knows which shadow ``q`` is from.

    ``held`` is ``"first"`` or ``"second"``.
    """
    if r1 not in (0, 1) or r2 not in (0, 1) or q not in (0, 1):
        raise ValueError("identity_aware_bit takes single bits")
    if held == "first":
        # s1 = p when (r1, r2) = (1, 0), s1 = not p when (0, 1), constant otherwise
        if r1 == r2:
            return UNDETERMINED
        return BitVerdict(Verdict.DETERMINED, q if r1 == 1 else 1 - q)
    if held == "second":
        # s2 = p when (0, 0), s2 = not p when (1, 1), constant otherwise
        if r1 != r2:
            return UNDETERMINED
        return BitVerdict(Verdict.DETERMINED, q if r1 == 0 else 1 - q)
    raise ValueError(f"held must be 'first' or 'second', got {held!r}")


# -- array forms used by the image pipeline -------------------------------------

def share_words(p: np.ndarray, r1: np.ndarray, r2: np.ndarray, bit_depth: int):
    """Vectorised :func:`share_pair` over arrays of equal shape and dtype."""
    if not (p.dtype == r1.dtype == r2.dtype):
        raise DepthMismatchError(f"dtype mismatch: {p.dtype}, {r1.dtype}, {r2.dtype}")
    mask = p.dtype.type(depth_mask(bit_depth))
    s1 = (p & r1) | ((~p & mask) & r2)
    s2 = p ^ s1
    return s1, s2


def restore_words(s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    if s1.dtype != s2.dtype:
        raise DepthMismatchError(f"dtype mismatch: {s1.dtype} vs {s2.dtype}")
    return s1 ^ s2
