"""Statistical and adversarial checks on shadow images.

* :func:`bit_balance` counts ones per bit plane and scores each plane against a
  fair coin.
* :func:`share_indistinguishability` and :func:`subset_secrecy` compare share
  distributions produced from two different sources.
* :func:`simulate_known_rng_attack` replays the exact random words behind a
  split and measures how many original bits an attacker holding one share can
  pin down; :func:`naive_otp_baseline` does the same for a plain XOR pad.

All chi-square gates use significance 0.001.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .core import depth_mask
from .errors import GeometryMismatchError, InsufficientSamplesError
from .raster_io import RasterImage
from .rng import RandomnessContext
from .scheme import SplitRequest, split2, split_n

ALPHA = 0.001
# trials x samples evaluated per batch in the tiled statistical runs
_BATCH_SAMPLES = 1 << 20


def critical_value(df: int, alpha: float = ALPHA) -> float:
    return float(stats.chi2.isf(alpha, df))


def _unpack_bits(words: np.ndarray, bit_depth: int) -> np.ndarray:
    """``(..., bit_depth)`` array of 0/1, bit 0 is the least significant."""
    w = np.asarray(words)
    shifts = np.arange(bit_depth, dtype=w.dtype)
    return ((w[..., None] >> shifts) & 1).astype(np.uint8)


# -- bit-plane balance --------------------------------------------------------------

@dataclass
class BitPlaneStats:
    """Per-(channel, bit) ones/zeros counts with a 1-d.o.f. chi-square score.

    Arrays are indexed ``[channel, bit]`` with bit 0 the least significant.
    """

    ones: np.ndarray
    zeros: np.ndarray
    chi_square: np.ndarray
    pixels: int

    @property
    def critical(self) -> float:
        return critical_value(1)

    @property
    def planes(self) -> int:
        return self.chi_square.size

    @property
    def failing(self) -> list[tuple[int, int]]:
        idx = np.argwhere(self.chi_square >= self.critical)
        return [tuple(map(int, i)) for i in idx]

    @property
    def passes(self) -> bool:
        return not self.failing

    def rows(self):
        for (c, b), chi in np.ndenumerate(self.chi_square):
            yield {
                "plane": c * self.chi_square.shape[1] + b,
                "channel": c,
                "bit": b,
                "ones": int(self.ones[c, b]),
                "zeros": int(self.zeros[c, b]),
                "chi_square": float(chi),
            }

    def to_dict(self) -> dict:
        return {
            "kind": "bit_balance",
            "pixels": self.pixels,
            "alpha": ALPHA,
            "critical_value": self.critical,
            "passes": self.passes,
            "planes": list(self.rows()),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["plane", "chi_square"])
        for r in self.rows():
            w.writerow([r["plane"], repr(r["chi_square"])])
        return buf.getvalue()

    def format_table(self) -> str:
        lines = [f"bit-plane balance over {self.pixels} pixels "
                 f"(chi-square, 1 d.o.f., critical {self.critical:.3f})",
                 f"{'ch':>3} {'bit':>3} {'ones':>10} {'zeros':>10} {'chi2':>10}  gate"]
        for r in self.rows():
            ok = "ok" if r["chi_square"] < self.critical else "FAIL"
            lines.append(f"{r['channel']:>3} {r['bit']:>3} {r['ones']:>10} {r['zeros']:>10} "
                         f"{r['chi_square']:>10.3f}  {ok}")
        return "\n".join(lines)


def bit_balance(img: RasterImage) -> BitPlaneStats:
    n = img.width * img.height
    flat = img.samples.reshape(-1, img.channels)
    ones = np.zeros((img.channels, img.bit_depth), dtype=np.int64)
    for b in range(img.bit_depth):
        ones[:, b] = ((flat >> b) & 1).sum(axis=0, dtype=np.int64)
    zeros = n - ones
    chi = (ones - n / 2) ** 2 / (n / 4)
    return BitPlaneStats(ones, zeros, chi, n)


# -- two-sample distribution comparisons --------------------------------------------

def two_sample_chi_square(r: np.ndarray, s: np.ndarray) -> tuple[float, int]:
    """Chi-square statistic and d.o.f. for two binned samples of possibly unequal size."""
    r = np.asarray(r, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    nr, ns = r.sum(), s.sum()
    keep = (r + s) > 0
    r, s = r[keep], s[keep]
    chi = np.sum((np.sqrt(ns / nr) * r - np.sqrt(nr / ns) * s) ** 2 / (r + s))
    return float(chi), int(keep.sum()) - 1


@dataclass
class ChannelComparison:
    channel: int
    statistic: float
    dof: int
    critical_value: float
    p_value: float

    @property
    def passes(self) -> bool:
        return self.statistic < self.critical_value


@dataclass
class IndistinguishabilityReport:
    trials: int
    bins: int
    channels: list[ChannelComparison]
    label: str = "first-share distribution, source A vs source B"

    @property
    def passes(self) -> bool:
        return all(c.passes for c in self.channels)

    def to_dict(self) -> dict:
        return {"kind": "indistinguishability", "label": self.label, "trials": self.trials,
                "bins": self.bins, "alpha": ALPHA, "passes": self.passes,
                "channels": [asdict(c) for c in self.channels]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["channel", "statistic"])
        for c in self.channels:
            w.writerow([c.channel, repr(c.statistic)])
        return buf.getvalue()

    def format_table(self) -> str:
        lines = [f"{self.label}: {self.trials} trials, {self.bins} bins per channel",
                 f"{'ch':>3} {'chi2':>10} {'dof':>5} {'critical':>10} {'p':>8}  gate"]
        for c in self.channels:
            lines.append(f"{c.channel:>3} {c.statistic:>10.3f} {c.dof:>5} {c.critical_value:>10.3f} "
                         f"{c.p_value:>8.4f}  {'ok' if c.passes else 'FAIL'}")
        return "\n".join(lines)


def _compare(hist_a: np.ndarray, hist_b: np.ndarray) -> list[ChannelComparison]:
    out = []
    for ch in range(hist_a.shape[0]):
        chi, dof = two_sample_chi_square(hist_a[ch], hist_b[ch])
        dof = max(dof, 1)
        out.append(ChannelComparison(ch, chi, dof, critical_value(dof), float(stats.chi2.sf(chi, dof))))
    return out


def _bin(words: np.ndarray, bit_depth: int) -> np.ndarray:
    # 16-bit words are binned by their high byte so every bin stays well populated
    return words >> (bit_depth - 8) if bit_depth > 8 else words


def _histograms(words: np.ndarray, bit_depth: int, bins: int) -> np.ndarray:
    """``(channels, bins)`` counts of ``words`` shaped ``(..., channels)``."""
    flat = _bin(words, bit_depth).reshape(-1, words.shape[-1]).astype(np.int64)
    return np.stack([np.bincount(flat[:, c], minlength=bins) for c in range(flat.shape[1])])


def _tile(img: RasterImage, copies: int) -> RasterImage:
    # stacking copies vertically gives every trial its own draw addresses
    return RasterImage(np.tile(img.samples, (copies, 1, 1)), img.bit_depth)


def _trial_batches(img: RasterImage, trials: int):
    per = max(1, _BATCH_SAMPLES // img.samples.size)
    done = 0
    while done < trials:
        k = min(per, trials - done)
        yield done, k
        done += k


def _resolve_rng(rng, seed):
    if rng is not None:
        return rng, False
    if seed is not None:
        return RandomnessContext.deterministic(seed), True
    return RandomnessContext.os_entropy(), True


def _check_pair(img_a: RasterImage, img_b: RasterImage, trials: int):
    if img_a.geometry != img_b.geometry:
        raise GeometryMismatchError(f"sources differ in geometry: {img_a.geometry} vs {img_b.geometry}")
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise InsufficientSamplesError(f"need at least one trial, got {trials!r}")


def share_indistinguishability(img_a: RasterImage, img_b: RasterImage, trials: int,
                               rng: RandomnessContext | None = None, *,
                               seed: bytes | str | None = None) -> IndistinguishabilityReport:
    """Split both sources ``trials`` times and compare first-share histograms.

    Randomness comes from ``rng`` if given, else a deterministic context for
    ``seed``, else OS entropy.  Source A draws on stream 0 and B on stream 1,
    and trial ``t`` occupies rows ``t*h .. t*h+h-1`` of the address space.
    """
    _check_pair(img_a, img_b, trials)
    rng, owned = _resolve_rng(rng, seed)
    depth = img_a.bit_depth
    bins = 256
    hist_a = np.zeros((img_a.channels, bins), dtype=np.int64)
    hist_b = np.zeros_like(hist_a)
    try:
        for start, k in _trial_batches(img_a, trials):
            for img, hist, stream in ((img_a, hist_a, 0), (img_b, hist_b, 1)):
                tall = _tile(img, k)
                first, second = split2(tall, rng, stream=stream, y0=start * img.height)
                hist += _histograms(first.samples, depth, bins)
                second.samples.fill(0)
    finally:
        if owned:
            rng.wipe()
    return IndistinguishabilityReport(trials, bins, _compare(hist_a, hist_b))


@dataclass
class SubsetSecrecyReport:
    total_shares: int
    trials: int
    mode: str
    subsets: dict[tuple[int, ...], IndistinguishabilityReport] = field(default_factory=dict)

    @property
    def passes(self) -> bool:
        return all(r.passes for r in self.subsets.values())

    def to_dict(self) -> dict:
        return {"kind": "subset_secrecy", "total_shares": self.total_shares, "trials": self.trials,
                "mode": self.mode, "passes": self.passes,
                "subsets": {",".join(map(str, k)): v.to_dict() for k, v in self.subsets.items()}}


def proper_subsets(n: int):
    for size in range(1, n):
        yield from itertools.combinations(range(n), size)


def subset_secrecy(img_a: RasterImage, img_b: RasterImage, total_shares: int, trials: int,
                   rng: RandomnessContext | None = None, *, seed: bytes | str | None = None,
                   mode: str = "xor") -> SubsetSecrecyReport:
    """Compare every proper subset of an n-way split of A against the same subset for B.

    ``mode="xor"`` bins the XOR of the subset's samples (256 bins).
    ``mode="tuple"`` bins the joint tuple of the members' top ``8 // size``
    bits, keeping the bin count at 256.  Only 8-bit sources are accepted.
    """
    _check_pair(img_a, img_b, trials)
    if img_a.bit_depth != 8:
        raise ValueError("subset_secrecy works on 8-bit sources")
    if mode not in ("xor", "tuple"):
        raise ValueError(f"mode must be 'xor' or 'tuple', got {mode!r}")
    rng, owned = _resolve_rng(rng, seed)
    subsets = list(proper_subsets(total_shares))
    c = img_a.channels
    hists = {(s, which): np.zeros((c, 256), dtype=np.int64) for s in subsets for which in "ab"}
    try:
        for start, k in _trial_batches(img_a, trials):
            for img, which, stream in ((img_a, "a", 0), (img_b, "b", 1)):
                tall = _tile(img, k)
                split = split_n(SplitRequest(tall, total_shares, rng), stream=stream,
                                y0=start * img.height)
                shares = [sh.samples for sh in split]
                for s in subsets:
                    hists[(s, which)] += _histograms(_subset_words(shares, s, mode), 8, 256)
                for sh in shares:
                    sh.fill(0)
    finally:
        if owned:
            rng.wipe()
    report = SubsetSecrecyReport(total_shares, trials, mode)
    for s in subsets:
        report.subsets[s] = IndistinguishabilityReport(
            trials, 256, _compare(hists[(s, "a")], hists[(s, "b")]),
            label=f"subset {s} ({mode}), source A vs source B")
    return report


def _subset_words(shares: list[np.ndarray], subset: tuple[int, ...], mode: str) -> np.ndarray:
    if mode == "xor":
        acc = shares[subset[0]].copy()
        for i in subset[1:]:
            acc ^= shares[i]
        return acc
    bits = 8 // len(subset)
    acc = np.zeros_like(shares[0])
    for i in subset:
        acc = (acc << bits) | (shares[i] >> (8 - bits))
    return acc


# -- known-RNG attack -----------------------------------------------------------------

CELLS = [(r1, r2, q) for r1 in (0, 1) for r2 in (0, 1) for q in (0, 1)]


@dataclass
class RecoveryReport:
    """Outcome of an attacker replaying the random words behind a split."""

    total_bits: int
    determined_bits: int
    determined_correct_bits: int
    all_determined_are_ones: bool
    label: str = ""
    # (r1, r2, q) -> [undetermined count, determined count]
    cells: dict[tuple[int, int, int], list[int]] = field(default_factory=dict)

    @property
    def determined_fraction(self) -> float:
        return self.determined_bits / self.total_bits if self.total_bits else 0.0

    @property
    def sound(self) -> bool:
        return self.determined_correct_bits == self.determined_bits

    def to_dict(self) -> dict:
        d = {
            "kind": "recovery",
            "label": self.label,
            "total_bits": self.total_bits,
            "determined_bits": self.determined_bits,
            "determined_correct_bits": self.determined_correct_bits,
            "determined_fraction": self.determined_fraction,
            "all_determined_are_ones": self.all_determined_are_ones,
            "sound": self.sound,
        }
        if self.cells:
            d["cells"] = [{"r1": k[0], "r2": k[1], "q": k[2], "undetermined": v[0], "determined": v[1]}
                          for k, v in sorted(self.cells.items())]
        return d

    def format_line(self) -> str:
        return (f"{self.label:<40} determined {self.determined_bits:>9} / {self.total_bits:<9} "
                f"= {self.determined_fraction:.4f}  correct {self.determined_correct_bits:>9}")


def _popcount(words: np.ndarray) -> int:
    return int(np.unpackbits(np.ascontiguousarray(words).view(np.uint8)).sum(dtype=np.int64))


def _recovery(p, q, det, inferred, bit_depth, label, r1=None, r2=None) -> RecoveryReport:
    mask = p.dtype.type(depth_mask(bit_depth))
    correct = det & ~(inferred ^ p) & mask
    zeros_claimed = det & ~inferred & mask
    cells = {}
    if r1 is not None:
        code = (_unpack_bits(r1, bit_depth) * 4 + _unpack_bits(r2, bit_depth) * 2
                + _unpack_bits(q, bit_depth)).ravel()
        d = _unpack_bits(det, bit_depth).ravel()
        tot = np.bincount(code, minlength=8)
        hit = np.bincount(code, weights=d, minlength=8).astype(np.int64)
        cells = {cell: [int(tot[i] - hit[i]), int(hit[i])] for i, cell in enumerate(CELLS)}
    return RecoveryReport(
        total_bits=p.size * bit_depth,
        determined_bits=_popcount(det),
        determined_correct_bits=_popcount(correct),
        all_determined_are_ones=_popcount(zeros_claimed) == 0,
        label=label,
        cells=cells,
    )


def infer_bits(r1: np.ndarray, r2: np.ndarray, q: np.ndarray, bit_depth: int,
               held: str = "first", knows_which: bool = False):
    """Word-level attacker: returns ``(determined_mask, inferred_bits)``.

    The identity-blind rule marks a bit determined (as 1) whenever the held
    bit differs from ``r2``, the value the constant shadow takes in every
    ``(r1, r2)`` case.  The identity-aware rule inverts whichever shadow
    formula depends on ``p`` for the held share.
    """
    mask = q.dtype.type(depth_mask(bit_depth))
    if not knows_which:
        det = (q ^ r2) & mask
        return det, det.copy()
    if held == "first":
        det = (r1 ^ r2) & mask
        inferred = q ^ (~r1 & mask)
    elif held == "second":
        det = ~(r1 ^ r2) & mask
        inferred = q ^ r1
    else:
        raise ValueError(f"held must be 'first' or 'second', got {held!r}")
    return det, inferred & det


def simulate_known_rng_attack(source: RasterImage, seed: bytes | str, held: str = "first",
                              knows_which: bool = False) -> RecoveryReport:
    """Split ``source`` in two with ``seed``, then attack one share with the replayed draws.

    The attacker only ever sees the held share and the random words; the
    source is used afterwards to score each claimed bit.
    """
    if held not in ("first", "second"):
        raise ValueError(f"held must be 'first' or 'second', got {held!r}")
    depth = source.bit_depth
    ctx = RandomnessContext.deterministic(seed)
    try:
        s1, s2 = split2(source, ctx)
        q = (s1 if held == "first" else s2).samples
        # replay: the attacker regenerates the exact words from the seed
        r1, r2 = ctx.draw_block(source.width, source.height, source.channels, depth)
    finally:
        ctx.wipe()
    det, inferred = infer_bits(r1, r2, q, depth, held, knows_which)
    who = "identity-aware" if knows_which else "identity-blind"
    return _recovery(source.samples, q, det, inferred, depth,
                     f"two-value scheme, {who}, holds {held}", r1, r2)


def naive_otp_baseline(source: RasterImage, seed: bytes | str, held: str = "second") -> RecoveryReport:
    """Plain XOR pad: first share is the pad, second is ``source ^ pad``.

    An attacker who knows the pad recovers everything from the second share
    and nothing from the first.
    """
    if held not in ("first", "second"):
        raise ValueError(f"held must be 'first' or 'second', got {held!r}")
    depth = source.bit_depth
    ctx = RandomnessContext.deterministic(seed)
    try:
        pad, _ = ctx.draw_block(source.width, source.height, source.channels, depth)
    finally:
        ctx.wipe()
    p = source.samples
    mask = p.dtype.type(depth_mask(depth))
    if held == "second":
        q = p ^ pad
        det = np.full_like(p, mask)
        inferred = q ^ pad
    else:
        q = pad
        det = np.zeros_like(p)
        inferred = det
    return _recovery(p, q, det, inferred, depth, f"naive XOR pad, holds {held}")


def attack_comparison(source: RasterImage, seed: bytes | str, held: str = "first",
                      knows_which: bool = False) -> dict:
    scheme = simulate_known_rng_attack(source, seed, held, knows_which)
    naive = naive_otp_baseline(source, seed)
    ratio = scheme.determined_fraction / naive.determined_fraction if naive.determined_fraction else None
    return {"scheme": scheme, "naive": naive, "ratio": ratio}


def dumps_report(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"
