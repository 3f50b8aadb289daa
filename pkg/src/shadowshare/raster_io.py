"""Lossless raster reading/writing and the share manifest sidecar.

PNG (8/16-bit; grey, grey+alpha, RGB, RGBA) goes through pypng.  PPM/PGM
(plain P2/P3 and raw P5/P6, 8-bit only) is handled here so that test fixtures
need no codec at all.  Lossy containers are refused outright: a single flipped
bit in a share corrupts the restored picture.
"""

from __future__ import annotations

import json
import re
import secrets
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import png

from .core import SUPPORTED_DEPTHS
from .errors import (
    CorruptFileError,
    GeometryMismatchError,
    LossyFormatError,
    ManifestError,
    ManifestVersionError,
    UnsupportedFormatError,
)

MANIFEST_SUFFIX = ".vcs.json"
MANIFEST_VERSION = "1"

_LOSSY_MSG = ("{what} is a lossy format; shares and restored images must be stored "
              "losslessly (PNG, PPM or PGM) or restoration will not be bit-exact")


@dataclass
class RasterImage:
    """A ``height x width x channels`` grid of channel words.

    ``samples`` is a C-ordered uint8 or uint16 array of shape
    ``(height, width, channels)``; flattening it gives the row-major sample
    sequence.  Channel order is grey / grey+alpha / RGB / RGBA by count.
    """

    samples: np.ndarray
    bit_depth: int = 8

    def __post_init__(self):
        if self.bit_depth not in SUPPORTED_DEPTHS:
            raise ValueError(f"bit_depth must be one of {SUPPORTED_DEPTHS}, got {self.bit_depth}")
        a = np.asarray(self.samples)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3:
            raise ValueError(f"samples must be 3-D (height, width, channels), got shape {a.shape}")
        h, w, c = a.shape
        if h < 1 or w < 1:
            raise ValueError(f"image must be at least 1x1, got {w}x{h}")
        if not 1 <= c <= 4:
            raise ValueError(f"channels must be 1..4, got {c}")
        dtype = np.uint8 if self.bit_depth == 8 else np.uint16
        if a.dtype != dtype:
            if a.size and (a.min() < 0 or a.max() >= 1 << self.bit_depth):
                raise ValueError(f"samples do not fit in {self.bit_depth} bits")
            a = a.astype(dtype)
        self.samples = np.ascontiguousarray(a)

    @classmethod
    def from_flat(cls, width, height, channels, bit_depth, samples):
        a = np.asarray(samples)
        if a.size != width * height * channels:
            raise ValueError(f"expected {width * height * channels} samples, got {a.size}")
        return cls(a.reshape(height, width, channels), bit_depth)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]

    @property
    def geometry(self) -> tuple[int, int, int, int]:
        return self.width, self.height, self.channels, self.bit_depth

    def __eq__(self, other):
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.geometry == other.geometry and np.array_equal(self.samples, other.samples)


# -- format sniffing -------------------------------------------------------------

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def sniff_format(head: bytes) -> str:
    if head.startswith(_PNG_MAGIC):
        return "PNG"
    if head.startswith(b"\xff\xd8\xff"):
        return "JPEG"
    if head[:2] in (b"P2", b"P3", b"P5", b"P6"):
        return "PNM"
    if head[:2] in (b"P1", b"P4"):
        return "PBM"
    if head[:2] == b"P7":
        return "PAM"
    if head[:6] in (b"GIF87a", b"GIF89a"):
        return "GIF"
    if head[:2] == b"BM":
        return "BMP"
    if head[:4] in (b"II*\x00", b"MM\x00*"):
        return "TIFF"
    if head[:4] == b"RIFF" and head[8:12] == b"WEBP":
        return "WebP"
    if head[4:12] in (b"ftypavif", b"ftypheic"):
        return "HEIF/AVIF"
    return "unknown"


def load_image(path) -> RasterImage:
    """Read a PNG, PPM or PGM file into a :class:`RasterImage`."""
    path = Path(path)
    data = path.read_bytes()
    kind = sniff_format(data[:16])
    if kind == "JPEG":
        raise LossyFormatError(_LOSSY_MSG.format(what=f"{path.name} (JPEG)"))
    if kind == "PNG":
        return _read_png(data, path)
    if kind == "PNM":
        return _read_pnm(data, path)
    raise UnsupportedFormatError(
        f"{path.name}: detected format {kind}; supported inputs are PNG, PPM and PGM"
    )


def save_image(img: RasterImage, path) -> None:
    """Write ``img`` losslessly; the extension picks PNG or the PPM/PGM family."""
    path = Path(path)
    ext = path.suffix.lower()
    if ext in (".jpg", ".jpeg", ".jpe", ".jfif"):
        raise LossyFormatError(_LOSSY_MSG.format(what=f"{path.name} (JPEG)"))
    if ext == ".png":
        data = _encode_png(img)
    elif ext in (".ppm", ".pgm", ".pnm"):
        data = _encode_pnm(img, ext)
    else:
        raise UnsupportedFormatError(f"{path.name}: cannot write '{ext}' files; use .png, .ppm or .pgm")
    path.write_bytes(data)


# -- PNG ---------------------------------------------------------------------------

def _read_png(data: bytes, path: Path) -> RasterImage:
    try:
        width, height, rows, info = png.Reader(bytes=data).read()
        planes = info["planes"]
        depth = info["bitdepth"]
        dtype = np.uint16 if depth > 8 else np.uint8
        a = np.vstack([np.asarray(r, dtype=dtype) for r in rows])
    except (png.Error, ValueError, EOFError) as exc:
        raise CorruptFileError(f"{path.name}: corrupt PNG ({exc})") from None
    if a.shape != (height, width * planes):
        raise CorruptFileError(f"{path.name}: PNG decoded to unexpected shape {a.shape}")
    a = a.reshape(height, width, planes)
    palette = info.get("palette")
    if palette:
        width_ = max(len(e) for e in palette)
        table = np.array([tuple(e) + (255,) * (width_ - len(e)) for e in palette], dtype=np.uint8)
        if a.max() >= len(table):
            raise CorruptFileError(f"{path.name}: palette index out of range")
        return RasterImage(table[a[..., 0]], 8)
    if depth < 8:
        # low-depth greyscale widened exactly to 8 bits (1->x255, 2->x85, 4->x17)
        a = a * np.uint8(255 // ((1 << depth) - 1))
        depth = 8
    return RasterImage(a, depth)


def _encode_png(img: RasterImage) -> bytes:
    import io

    c = img.channels
    writer = png.Writer(
        img.width,
        img.height,
        greyscale=c in (1, 2),
        alpha=c in (2, 4),
        bitdepth=img.bit_depth,
        compression=6,
    )
    buf = io.BytesIO()
    writer.write_array(buf, img.samples.reshape(-1))
    return buf.getvalue()


# -- PPM / PGM -----------------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _pnm_header(data: bytes, path: Path):
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if not m:
            raise CorruptFileError(f"{path.name}: truncated PNM header")
        fields.append(m.group(1))
        pos = m.end()
    magic = fields[0].decode("ascii", "replace")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise CorruptFileError(f"{path.name}: malformed PNM header") from None
    return magic, width, height, maxval, pos


def _read_pnm(data: bytes, path: Path) -> RasterImage:
    magic, width, height, maxval, pos = _pnm_header(data, path)
    if width < 1 or height < 1 or maxval < 1:
        raise CorruptFileError(f"{path.name}: bad PNM geometry {width}x{height}, maxval {maxval}")
    if maxval > 255:
        raise UnsupportedFormatError(f"{path.name}: 16-bit PNM (maxval {maxval}) is not supported; use PNG")
    channels = 3 if magic in ("P3", "P6") else 1
    count = width * height * channels
    if magic in ("P5", "P6"):
        # exactly one whitespace byte separates the header from the raster
        raw = data[pos + 1: pos + 1 + count]
        if len(raw) != count:
            raise CorruptFileError(f"{path.name}: raster truncated ({len(raw)} of {count} bytes)")
        a = np.frombuffer(raw, dtype=np.uint8)
    else:
        body = re.sub(rb"#[^\n]*", b" ", data[pos:]).split()
        if len(body) < count:
            raise CorruptFileError(f"{path.name}: raster truncated ({len(body)} of {count} samples)")
        try:
            a = np.array([int(t) for t in body[:count]], dtype=np.int64)
        except ValueError:
            raise CorruptFileError(f"{path.name}: non-numeric sample in plain PNM") from None
    if a.max() > maxval:
        raise CorruptFileError(f"{path.name}: sample exceeds maxval {maxval}")
    return RasterImage(a.astype(np.uint8).reshape(height, width, channels), 8)


def _encode_pnm(img: RasterImage, ext: str, plain: bool = False) -> bytes:
    if img.bit_depth != 8:
        raise UnsupportedFormatError(f"PPM/PGM output supports 8-bit samples only, image is {img.bit_depth}-bit")
    if img.channels not in (1, 3):
        raise UnsupportedFormatError(
            f"PPM/PGM cannot hold a {img.channels}-channel image (no alpha support); use PNG"
        )
    if ext == ".ppm" and img.channels != 3:
        raise UnsupportedFormatError("a .ppm file must hold an RGB image; use .pgm for greyscale")
    if ext == ".pgm" and img.channels != 1:
        raise UnsupportedFormatError("a .pgm file must hold a greyscale image; use .ppm for RGB")
    if img.channels == 3:
        magic = "P3" if plain else "P6"
    else:
        magic = "P2" if plain else "P5"
    header = f"{magic}\n{img.width} {img.height}\n255\n".encode("ascii")
    if plain:
        rows = (" ".join(map(str, row)) for row in img.samples.reshape(img.height, -1).tolist())
        return header + "\n".join(rows).encode("ascii") + b"\n"
    return header + img.samples.tobytes()


def save_pnm(img: RasterImage, path, plain: bool = False) -> None:
    """Write PPM/PGM, optionally in the plain (ASCII) P2/P3 variant."""
    path = Path(path)
    path.write_bytes(_encode_pnm(img, path.suffix.lower(), plain=plain))


# -- manifest --------------------------------------------------------------------

_GROUP_ID = re.compile(r"[0-9a-f]{32}")


def new_group_id() -> str:
    return secrets.token_hex(16)


@dataclass
class ShareManifest:
    """Bookkeeping sidecar for one share.

    Holds geometry and position only.  Nothing derived from the original
    image's content may ever be added here.
    """

    share_index: int
    total_shares: int
    width: int
    height: int
    channels: int
    bit_depth: int
    group_id: str | None = None
    format_version: str = field(default=MANIFEST_VERSION)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.format_version != MANIFEST_VERSION:
            raise ManifestVersionError(
                f"manifest format_version {self.format_version!r} is not supported (expected {MANIFEST_VERSION!r})"
            )
        for name in ("share_index", "total_shares", "width", "height", "channels", "bit_depth"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ManifestError(f"manifest field {name} must be an integer, got {v!r}")
        if self.total_shares < 2:
            raise ManifestError(f"total_shares must be at least 2, got {self.total_shares}")
        if not 0 <= self.share_index < self.total_shares:
            raise ManifestError(
                f"share_index {self.share_index} outside 0..{self.total_shares - 1}"
            )
        if self.width < 1 or self.height < 1 or not 1 <= self.channels <= 4:
            raise ManifestError(f"bad geometry {self.width}x{self.height}x{self.channels}")
        if self.bit_depth not in SUPPORTED_DEPTHS:
            raise ManifestError(f"bit_depth must be one of {SUPPORTED_DEPTHS}, got {self.bit_depth}")
        if self.group_id is not None and (
            not isinstance(self.group_id, str) or not _GROUP_ID.fullmatch(self.group_id)
        ):
            raise ManifestError("group_id must be 32 lowercase hex characters")

    @classmethod
    def for_image(cls, img: RasterImage, share_index: int, total_shares: int,
                  group_id: str | None = None) -> ShareManifest:
        return cls(share_index, total_shares, img.width, img.height, img.channels,
                   img.bit_depth, group_id)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["group_id"] is None:
            del d["group_id"]
        return d

    @classmethod
    def from_dict(cls, d) -> ShareManifest:
        if not isinstance(d, dict):
            raise ManifestError("manifest must be a JSON object")
        if "format_version" not in d:
            raise ManifestError("manifest lacks format_version")
        if d["format_version"] != MANIFEST_VERSION:
            raise ManifestVersionError(
                f"manifest format_version {d['format_version']!r} is not supported (expected {MANIFEST_VERSION!r})"
            )
        allowed = {"format_version", "share_index", "total_shares", "width", "height",
                   "channels", "bit_depth", "group_id"}
        unknown = sorted(set(d) - allowed)
        if unknown:
            raise ManifestError(f"manifest has unknown keys {unknown}")
        missing = sorted(allowed - {"group_id"} - set(d))
        if missing:
            raise ManifestError(f"manifest is missing keys {missing}")
        return cls(**d)

    def check_image(self, img: RasterImage, name: str = "share") -> None:
        want = (self.width, self.height, self.channels, self.bit_depth)
        if img.geometry != want:
            raise GeometryMismatchError(
                f"{name}: image geometry {img.geometry} does not match its manifest {want}"
            )


def manifest_path_for(image_path) -> Path:
    p = Path(image_path)
    return p.with_name(p.stem + MANIFEST_SUFFIX)


def write_manifest(m: ShareManifest, path) -> None:
    m.validate()
    Path(path).write_text(json.dumps(m.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_manifest(path) -> ShareManifest:
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ManifestError(f"{path.name}: malformed manifest ({exc})") from None
    try:
        return ShareManifest.from_dict(d)
    except TypeError as exc:
        raise ManifestError(f"{path.name}: {exc}") from None
    except ManifestError as exc:
        raise type(exc)(f"{path.name}: {exc}") from None
