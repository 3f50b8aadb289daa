"""Whole-image splitting into shadow images and XOR recombination."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import share_words
from .errors import GeometryMismatchError, InsufficientSharesError
from .raster_io import RasterImage, ShareManifest, new_group_id
from .rng import RandomnessContext


@dataclass
class SplitRequest:
    source: RasterImage
    total_shares: int
    rng: RandomnessContext
    link_shares: bool = False

    def __post_init__(self):
        if isinstance(self.total_shares, bool) or not isinstance(self.total_shares, int) \
                or self.total_shares < 2:
            raise InsufficientSharesError(f"total_shares must be an integer >= 2, got {self.total_shares!r}")


@dataclass
class ShareSet:
    shares: list[RasterImage]
    manifests: list[ShareManifest] = field(default_factory=list)

    def __len__(self):
        return len(self.shares)

    def __iter__(self):
        return iter(self.shares)

    def __getitem__(self, i):
        return self.shares[i]


def _split_band(samples, rng, bit_depth, level, stream, top, rows, y0):
    h, w, c = samples.shape
    band = samples[top: top + rows]
    r1, r2 = rng.draw_block(w, rows, c, bit_depth, level=level, stream=stream, y0=y0 + top)
    try:
        return share_words(band, r1, r2, bit_depth)
    finally:
        r1.fill(0)
        r2.fill(0)


def split2(source: RasterImage, rng: RandomnessContext, *, level: int = 0, stream: int = 0,
           y0: int = 0, band_rows: int | None = None, workers: int = 1) -> tuple[RasterImage, RasterImage]:
    """Split ``source`` into two shadow images.

    Each channel sample at ``(x, y, c)`` is shared with the random pair drawn
    at that address (and ``level``/``stream``); row ``y`` of the image is
    addressed as ``y0 + y``.  The image can be processed in
    horizontal bands of ``band_rows`` rows, optionally on ``workers`` threads;
    in deterministic mode the output does not depend on either setting.
    """
    a = source.samples
    h, w, c = a.shape
    s1 = np.empty_like(a)
    s2 = np.empty_like(a)
    band_rows = band_rows or h
    tops = range(0, h, band_rows)

    def run(top):
        rows = min(band_rows, h - top)
        b1, b2 = _split_band(a, rng, source.bit_depth, level, stream, top, rows, y0)
        s1[top: top + rows] = b1
        s2[top: top + rows] = b2

    if workers > 1 and len(tops) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, tops))
    else:
        for top in tops:
            run(top)
    return RasterImage(s1, source.bit_depth), RasterImage(s2, source.bit_depth)


def split_n(req: SplitRequest, **kwargs) -> ShareSet:
    """Split into ``req.total_shares`` shadows by re-splitting the second output.

    Level ``k`` splits the running remainder with draws addressed at level
    ``k``, emits the first shadow, and hands the second to level ``k + 1``.
    The last level emits both.  Intermediate remainders are zeroed once used.
    """
    n = req.total_shares
    shares = []
    current = req.source
    for level in range(n - 1):
        first, second = split2(current, req.rng, level=level, **kwargs)
        shares.append(first)
        if current is not req.source:
            current.samples.fill(0)
        current = second
    shares.append(current)

    group_id = new_group_id() if req.link_shares else None
    manifests = [ShareManifest.for_image(s, i, n, group_id) for i, s in enumerate(shares)]
    return ShareSet(shares, manifests)


def split(source: RasterImage, total_shares: int = 2, rng: RandomnessContext | None = None,
          link_shares: bool = False, **kwargs) -> ShareSet:
    """Convenience wrapper around :func:`split_n`; uses OS entropy by default."""
    owned = rng is None
    rng = rng or RandomnessContext.os_entropy()
    try:
        return split_n(SplitRequest(source, total_shares, rng, link_shares), **kwargs)
    finally:
        if owned:
            rng.wipe()


def check_geometry(shares, names=None) -> None:
    """Raise unless every share has the geometry of the first one."""
    names = names or [f"share #{i}" for i in range(len(shares))]
    ref = shares[0].geometry
    for img, name in zip(shares[1:], names[1:]):
        if img.geometry != ref:
            raise GeometryMismatchError(
                f"{name} has geometry {img.geometry} (w, h, c, depth) but {names[0]} has {ref}"
            )


def combine(shares, names=None) -> RasterImage:
    """XOR-fold a complete share set back into the original.

    A wrong or incomplete set cannot be detected and folds to noise.
    """
    shares = list(shares)
    if len(shares) < 2:
        raise InsufficientSharesError(f"combining needs at least 2 shares, got {len(shares)}")
    check_geometry(shares, names)
    out = shares[0].samples.copy()
    for s in shares[1:]:
        np.bitwise_xor(out, s.samples, out=out)
    return RasterImage(out, shares[0].bit_depth)


def split_bytes(data: bytes, total_shares: int, rng: RandomnessContext) -> list[bytes]:
    """Share a byte string as if it were a 1 x len(data) grey 8-bit image."""
    if isinstance(total_shares, bool) or not isinstance(total_shares, int) or total_shares < 2:
        raise InsufficientSharesError(f"total_shares must be an integer >= 2, got {total_shares!r}")
    if not data:
        rng.draw_block(0, 0, 1, 8)  # still refuse a wiped context
        return [b""] * total_shares
    img = RasterImage(np.frombuffer(bytes(data), dtype=np.uint8).reshape(1, -1, 1), 8)
    shares = split_n(SplitRequest(img, total_shares, rng))
    return [s.samples.tobytes() for s in shares]


def combine_bytes(parts) -> bytes:
    parts = [bytes(p) for p in parts]
    if len(parts) < 2:
        raise InsufficientSharesError(f"combining needs at least 2 parts, got {len(parts)}")
    lengths = {len(p) for p in parts}
    if len(lengths) != 1:
        raise GeometryMismatchError(f"parts have differing lengths {sorted(lengths)}")
    if not parts[0]:
        return b""
    out = np.frombuffer(parts[0], dtype=np.uint8).copy()
    for p in parts[1:]:
        out ^= np.frombuffer(p, dtype=np.uint8)
    return out.tobytes()
