"""Sources of the two random words drawn per pixel channel.

Two modes are offered.  ``OS_ENTROPY`` reads the operating system CSPRNG and
is the default.  ``DETERMINISTIC`` evaluates the ChaCha20 block function keyed
by a 32-byte seed at a counter built from the pixel address, so every draw is
a pure function of ``(seed, x, y, channel, slot, level, stream)`` and can be
replayed in any order.  That replayability is exactly what the known-RNG
attack simulation needs, and exactly why the mode is unsafe for real secrets.

Address layout of one ChaCha20 block::

    word 12 = x      word 13 = y      word 14 = level      word 15 = stream
    output word 2*channel + slot  ->  low ``bit_depth`` bits are the draw
"""

from __future__ import annotations

import enum
import os
import threading
import warnings

import numpy as np

from .core import SUPPORTED_DEPTHS, ChannelWord, RandomPair
from .errors import AddressError, ContextWipedError, SeedFormatError


SEED_BYTES = 32
MAX_CHANNELS = 8  # 16 output words per block, two slots per channel
_ADDR_LIMIT = 1 << 32
_CONSTANTS = np.frombuffer(b"expand 32-byte k", dtype="<u4")
# bound on blocks evaluated at once, keeps peak memory near 64 MiB
_BLOCKS_PER_CHUNK = 1 << 18


class DeterministicRandomnessWarning(UserWarning):
    """Shares produced from a seed can be regenerated by anyone holding it."""


class Mode(enum.Enum):
    OS_ENTROPY = "os-entropy"
    DETERMINISTIC = "deterministic"


def parse_seed(text: str) -> bytes:
    """Decode a 64-hex-character seed string."""
    text = text.strip()
    if len(text) != 2 * SEED_BYTES:
        raise SeedFormatError(f"seed must be {2 * SEED_BYTES} hex characters, got {len(text)}")
    try:
        return bytes.fromhex(text)
    except ValueError as exc:
        raise SeedFormatError(f"seed is not valid hex: {exc}") from None


def _rotl(v: np.ndarray, n: int) -> np.ndarray:
    return (v << np.uint32(n)) | (v >> np.uint32(32 - n))


def _quarter(s, a, b, c, d):
    s[a] += s[b]; s[d] ^= s[a]; s[d] = _rotl(s[d], 16)
    s[c] += s[d]; s[b] ^= s[c]; s[b] = _rotl(s[b], 12)
    s[a] += s[b]; s[d] ^= s[a]; s[d] = _rotl(s[d], 8)
    s[c] += s[d]; s[b] ^= s[c]; s[b] = _rotl(s[b], 7)


def chacha20_blocks(key_words: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Evaluate the ChaCha20 block function for many counters at once.

    ``key_words`` holds the eight little-endian key words; ``counters`` is an
    ``(n, 4)`` uint32 array giving state words 12..15 for each block.  Returns
    the ``(n, 16)`` uint32 keystream words.
    """
    counters = np.asarray(counters, dtype=np.uint32)
    n = counters.shape[0]
    init = [np.full(n, w, dtype=np.uint32) for w in _CONSTANTS]
    init += [np.full(n, w, dtype=np.uint32) for w in key_words]
    init += [counters[:, i].copy() for i in range(4)]
    s = [w.copy() for w in init]
    with np.errstate(over="ignore"):
        for _ in range(10):
            _quarter(s, 0, 4, 8, 12)
            _quarter(s, 1, 5, 9, 13)
            _quarter(s, 2, 6, 10, 14)
            _quarter(s, 3, 7, 11, 15)
            _quarter(s, 0, 5, 10, 15)
            _quarter(s, 1, 6, 11, 12)
            _quarter(s, 2, 7, 8, 13)
            _quarter(s, 3, 4, 9, 14)
        out = np.stack([a + b for a, b in zip(s, init)], axis=1)
    for w in s + init:
        w.fill(0)
    return out


def _dtype_for(bit_depth: int):
    if bit_depth not in SUPPORTED_DEPTHS:
        raise ValueError(f"bit_depth must be one of {SUPPORTED_DEPTHS}, got {bit_depth}")
    return np.uint8 if bit_depth == 8 else np.uint16


class RandomnessContext:
    """Supplier of ``(r1, r2)`` draws; wipeable.

    Build one with :meth:`os_entropy` or :meth:`deterministic`.  After
    :meth:`wipe` every draw raises :class:`ContextWipedError`.
    """

    def __init__(self, mode: Mode = Mode.OS_ENTROPY, seed: bytes | None = None):
        self.mode = Mode(mode)
        self._lock = threading.Lock()
        self._wiped = False
        self._seed = bytearray()
        self._key_words = np.zeros(8, dtype=np.uint32)
        if self.mode is Mode.DETERMINISTIC:
            if seed is None or len(seed) != SEED_BYTES:
                raise SeedFormatError(f"deterministic mode needs a {SEED_BYTES}-byte seed")
            self._seed = bytearray(seed)
            self._key_words = np.frombuffer(bytes(self._seed), dtype="<u4").astype(np.uint32)
            warnings.warn("deterministic randomness in use; shares are reproducible from the seed",
                          DeterministicRandomnessWarning, stacklevel=3)
        elif seed is not None:
            raise SeedFormatError("OS entropy mode takes no seed")

    @classmethod
    def os_entropy(cls) -> RandomnessContext:
        return cls(Mode.OS_ENTROPY)

    @classmethod
    def deterministic(cls, seed: bytes | str) -> RandomnessContext:
        if isinstance(seed, str):
            seed = parse_seed(seed)
        return cls(Mode.DETERMINISTIC, bytes(seed))

    @property
    def wiped(self) -> bool:
        return self._wiped

    @property
    def deterministic_mode(self) -> bool:
        return self.mode is Mode.DETERMINISTIC

    def __repr__(self):
        return f"RandomnessContext(mode={self.mode.value}, wiped={self._wiped})"

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.wipe()

    def wipe(self) -> None:
        """Zero the seed and key schedule; every later draw fails.  Idempotent."""
        with self._lock:
            for i in range(len(self._seed)):
                self._seed[i] = 0
            self._key_words.fill(0)
            self._wiped = True

    def _check(self):
        if self._wiped:
            raise ContextWipedError("randomness context has been wiped")

    def draw_block(self, width: int, height: int, channels: int, bit_depth: int,
                   *, level: int = 0, stream: int = 0, x0: int = 0, y0: int = 0):
        """Draw ``(r1, r2)`` for every sample of a ``height x width x channels`` tile.

        The tile's top-left pixel sits at address ``(x0, y0)``.  In
        deterministic mode element ``[y, x, c]`` equals
        ``draw_pair(ctx, x0 + x, y0 + y, c, bit_depth, level=level, stream=stream)``.
        """
        dtype = _dtype_for(bit_depth)
        _check_address(x0, y0, 0, level, stream)
        if width < 0 or height < 0 or not 1 <= channels <= MAX_CHANNELS:
            raise AddressError(f"bad tile geometry {width}x{height}x{channels}")
        if width and height:
            _check_address(x0 + width - 1, y0 + height - 1, channels - 1, level, stream)
        shape = (height, width, channels)
        with self._lock:
            self._check()
            if self.mode is Mode.OS_ENTROPY:
                nbytes = 2 * height * width * channels * np.dtype(dtype).itemsize
                buf = np.frombuffer(bytearray(os.urandom(nbytes)), dtype=dtype)
                return buf[: buf.size // 2].reshape(shape), buf[buf.size // 2:].reshape(shape)
            return self._chacha_tile(shape, dtype, bit_depth, level, stream, x0, y0)

    def _chacha_tile(self, shape, dtype, bit_depth, level, stream, x0, y0):
        height, width, channels = shape
        r1 = np.empty(shape, dtype=dtype)
        r2 = np.empty(shape, dtype=dtype)
        mask = np.uint32((1 << bit_depth) - 1)
        xs = np.arange(x0, x0 + width, dtype=np.uint32)
        rows_per_chunk = max(1, _BLOCKS_PER_CHUNK // max(width, 1))
        for top in range(0, height, rows_per_chunk):
            rows = min(rows_per_chunk, height - top)
            ctr = np.empty((rows * width, 4), dtype=np.uint32)
            ctr[:, 0] = np.tile(xs, rows)
            ctr[:, 1] = np.repeat(np.arange(y0 + top, y0 + top + rows, dtype=np.uint32), width)
            ctr[:, 2] = level
            ctr[:, 3] = stream
            words = chacha20_blocks(self._key_words, ctr)
            words &= mask
            block = words[:, : 2 * channels].reshape(rows, width, channels, 2)
            r1[top: top + rows] = block[..., 0]
            r2[top: top + rows] = block[..., 1]
            words.fill(0)
        return r1, r2


def _check_address(x, y, channel, level, stream):
    for name, v in (("x", x), ("y", y), ("level", level), ("stream", stream)):
        if not 0 <= v < _ADDR_LIMIT:
            raise AddressError(f"{name}={v} outside the 32-bit address space")
    if not 0 <= channel < MAX_CHANNELS:
        raise AddressError(f"channel {channel} outside 0..{MAX_CHANNELS - 1}")


def draw_pair(ctx: RandomnessContext, x: int, y: int, channel: int, depth: int,
              *, level: int = 0, stream: int = 0,
              shape: tuple[int, int, int] | None = None) -> RandomPair:
    """Draw the random pair for one channel sample.

    ``shape`` is the optional ``(width, height, channels)`` of the image being
    processed; addresses outside it raise :class:`AddressError`.
    """
    if shape is not None:
        w, h, c = shape
        if not (0 <= x < w and 0 <= y < h and 0 <= channel < c):
            raise AddressError(f"address ({x}, {y}, {channel}) outside a {w}x{h}x{c} image")
    _check_address(x, y, channel, level, stream)
    # a 1x1 tile at (x, y) with channel+1 channels, keeping only the last
    r1, r2 = ctx.draw_block(1, 1, channel + 1, depth, level=level, stream=stream, x0=x, y0=y)
    pair = RandomPair(ChannelWord(int(r1[0, 0, channel]), depth),
                      ChannelWord(int(r2[0, 0, channel]), depth))
    r1.fill(0)
    r2.fill(0)
    return pair


def wipe(ctx: RandomnessContext) -> None:
    ctx.wipe()
