"""Exit criteria for the package, one test per criterion.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import itertools
import time
from fractions import Fraction

import numpy as np
import pytest

from shadowshare import cli
from shadowshare.analysis import (
    bit_balance,
    naive_otp_baseline,
    share_indistinguishability,
    simulate_known_rng_attack,
    subset_secrecy,
)
from shadowshare.core import (
    BitVerdict,
    Verdict,
    identity_aware_bit,
    partial_knowledge_bit,
    share_bit_oracle,
)
from shadowshare.errors import ContextWipedError, LossyFormatError
from shadowshare.raster_io import RasterImage, load_image, save_image
from shadowshare.rng import RandomnessContext, draw_pair
from shadowshare.scheme import SplitRequest, combine, split_n

CI_SEED = "c1" * 32
ATTACK_SEED = bytes(range(32))
CHI2_1DOF_CRIT = 10.828
BITS = (0, 1)


def _image(kind, w, h, channels, depth, rng):
    top = (1 << depth) - 1
    dtype = np.uint8 if depth == 8 else np.uint16
    if kind == "random":
        a = rng.integers(0, top + 1, (h, w, channels))
    elif kind == "constant":
        a = np.broadcast_to(rng.integers(0, top + 1, channels), (h, w, channels))
    elif kind == "black":
        a = np.zeros((h, w, channels))
    elif kind == "white":
        a = np.full((h, w, channels), top)
    elif kind == "two-color":
        c1, c2 = rng.integers(0, top + 1, (2, channels))
        mask = (np.add.outer(np.arange(h), np.arange(w)) // 8) % 2 == 0
        a = np.where(mask[..., None], c1, c2)
    else:  # gradient
        g = np.linspace(0, top, w).round()
        a = np.broadcast_to(g[None, :, None], (h, w, channels))
    return RasterImage(np.array(a, dtype=dtype), depth)


@pytest.mark.criterion("AC1 full restoration over the fixture suite")
def test_ac1_full_restoration(criterion):
    rng = np.random.default_rng(2024)
    kinds = ["random", "constant", "black", "white", "two-color", "gradient"]
    formats = [(3, 8), (4, 8), (3, 16)]
    sizes = [(17, 13), (128, 96), (512, 512)]
    start = time.perf_counter()
    cases = differing = 0
    for i, (kind, (channels, depth), n) in enumerate(itertools.product(kinds, formats, [2, 3, 4, 5])):
        w, h = sizes[i % len(sizes)]
        src = _image(kind, w, h, channels, depth, rng)
        ctx = RandomnessContext.deterministic(rng.bytes(32)) if i % 9 == 0 else RandomnessContext.os_entropy()
        shares = split_n(SplitRequest(src, n, ctx))
        ctx.wipe()
        assert all(s.geometry == src.geometry for s in shares)
        restored = combine(shares)
        differing += int(np.unpackbits((restored.samples ^ src.samples).view(np.uint8)).sum())
        cases += 1
    elapsed = time.perf_counter() - start
    criterion["text"] = f"{cases} cases, {differing} differing bits, {elapsed:.2f}s"
    assert differing == 0
    assert elapsed < 10.0


INFERENCE_TABLE = [  # case, r1, r2, q, p (None for "--")
    (1, 0, 0, 0, None),
    (2, 0, 0, 1, 1),
    (3, 0, 1, 0, 1),
    (4, 0, 1, 1, None),
    (5, 1, 0, 0, None),
    (6, 1, 0, 1, 1),
    (7, 1, 1, 0, 1),
    (8, 1, 1, 1, None),
]


@pytest.mark.criterion("AC2 inference table reproduced exactly")
def test_ac2_inference_table(criterion):
    matched = 0
    for case, r1, r2, q, p in INFERENCE_TABLE:
        expected = BitVerdict(Verdict.UNDETERMINED) if p is None else BitVerdict(Verdict.DETERMINED, p)
        assert partial_knowledge_bit(r1, r2, q) == expected, f"row {case}"
        matched += 1
    criterion["text"] = f"{matched}/8 rows"


@pytest.mark.criterion("AC3 attack soundness over all 16 single-bit cases")
def test_ac3_soundness(criterion):
    determined = 0
    for p, r1, r2, held in itertools.product(BITS, BITS, BITS, (0, 1)):
        q = share_bit_oracle(p, r1, r2)[held]
        v = partial_knowledge_bit(r1, r2, q)
        if v.determined:
            determined += 1
            assert v.value == p
            assert p == 1
    criterion["text"] = f"{determined} determined verdicts, all correct and all p=1"


@pytest.mark.criterion("AC4 known-RNG recovery fractions")
def test_ac4_recovery_fractions(criterion):
    # enumeration oracles first
    blind = Fraction(sum(
        partial_knowledge_bit(r1, r2, share_bit_oracle(p, r1, r2)[h]).determined
        for p, r1, r2, h in itertools.product(BITS, BITS, BITS, (0, 1))), 16)
    aware = Fraction(sum(
        identity_aware_bit(r1, r2, share_bit_oracle(p, r1, r2)[0], "first").determined
        for p, r1, r2 in itertools.product(BITS, repeat=3)), 8)
    assert (blind, aware) == (Fraction(1, 4), Fraction(1, 2))

    src = RasterImage(np.random.default_rng(7).integers(0, 256, (128, 128, 3), dtype=np.uint8))
    b = simulate_known_rng_attack(src, ATTACK_SEED, held="first", knows_which=False)
    a = simulate_known_rng_attack(src, ATTACK_SEED, held="first", knows_which=True)
    n = naive_otp_baseline(src, ATTACK_SEED)
    criterion["text"] = (f"blind {b.determined_fraction:.4f}, aware {a.determined_fraction:.4f}, "
                         f"naive {n.determined_fraction:.4f}")
    assert abs(b.determined_fraction - float(blind)) <= 0.01
    assert abs(a.determined_fraction - float(aware)) <= 0.01
    assert n.determined_fraction == 1.0
    assert b.sound and a.sound and n.sound and b.all_determined_are_ones


@pytest.mark.criterion("AC5 share bit-plane uniformity")
def test_ac5_share_uniformity(criterion):
    src = RasterImage(np.broadcast_to(np.array([200, 30, 120], np.uint8), (256, 256, 3)))
    shares = split_n(SplitRequest(src, 2, RandomnessContext.deterministic(CI_SEED)))
    worst = 0.0
    for s in shares:
        st = bit_balance(s)
        assert st.planes == 24
        worst = max(worst, float(st.chi_square.max()))
        assert (st.chi_square < CHI2_1DOF_CRIT).all()
    criterion["text"] = f"max chi-square {worst:.3f} < {CHI2_1DOF_CRIT}"


@pytest.mark.criterion("AC6 source indistinguishability (black vs white)")
def test_ac6_source_indistinguishability(criterion):
    black = RasterImage(np.zeros((1, 1, 3), np.uint8))
    white = RasterImage(np.full((1, 1, 3), 255, np.uint8))
    rep = share_indistinguishability(black, white, 100_000, seed=CI_SEED)
    criterion["text"] = ", ".join(f"ch{c.channel} {c.statistic:.1f}/{c.critical_value:.1f}"
                                  for c in rep.channels)
    assert rep.passes


@pytest.mark.criterion("AC7 subset secrecy for n=3")
def test_ac7_subset_secrecy(criterion):
    zero = RasterImage(np.zeros((1, 1, 1), np.uint8))
    full = RasterImage(np.full((1, 1, 1), 0xFF, np.uint8))
    rep = subset_secrecy(zero, full, 3, 100_000, seed=CI_SEED, mode="xor")
    worst = max(r.channels[0].statistic for r in rep.subsets.values())
    crit = next(iter(rep.subsets.values())).channels[0].critical_value
    criterion["text"] = f"{len(rep.subsets)} subsets, max chi-square {worst:.1f} (critical ~{crit:.1f})"
    assert len(rep.subsets) == 6
    assert rep.passes


@pytest.mark.criterion("AC8 lossless persistence and JPEG rejection")
def test_ac8_lossless_persistence(criterion, tmp_path):
    rng = np.random.default_rng(8)
    checked = 0
    for channels, depth, ext in [(1, 8, ".png"), (2, 8, ".png"), (3, 8, ".png"), (4, 8, ".png"),
                                 (1, 16, ".png"), (3, 16, ".png"), (4, 16, ".png"),
                                 (3, 8, ".ppm"), (1, 8, ".pgm")]:
        src = _image("random", 33, 21, channels, depth, rng)
        for i, share in enumerate(split_n(SplitRequest(src, 3, RandomnessContext.os_entropy()))):
            path = tmp_path / f"s_{channels}_{depth}_{i}{ext}"
            save_image(share, path)
            back = load_image(path)
            assert back == share and back.bit_depth == depth
            checked += 1
    jpg = tmp_path / "in.jpg"
    jpg.write_bytes(bytes.fromhex("ffd8ffe000104a46494600010100000100010000ffd9"))
    with pytest.raises(LossyFormatError):
        load_image(jpg)
    with pytest.raises(LossyFormatError):
        save_image(src, tmp_path / "out.jpg")
    criterion["text"] = f"{checked} share files bit-exact; JPEG refused on read and write"


@pytest.mark.criterion("AC9 determinism and wipe contracts")
def test_ac9_determinism_and_wipe(criterion, tmp_path):
    src = tmp_path / "src.png"
    save_image(_image("random", 40, 30, 4, 8, np.random.default_rng(9)), src)
    contexts = []
    for out in ("a", "b"):
        code, args = cli.run(["split", str(src), "--shares", "3", "--out-dir", str(tmp_path / out),
                              "--seed", CI_SEED])
        assert code == 0
        contexts.append(args._context)
    for i in range(3):
        assert (tmp_path / "a" / f"share_{i}.png").read_bytes() == \
            (tmp_path / "b" / f"share_{i}.png").read_bytes()
    for ctx in contexts:
        assert ctx.wiped
        with pytest.raises(ContextWipedError):
            draw_pair(ctx, 0, 0, 0, 8)
    criterion["text"] = "3 share files byte-identical across runs; contexts wiped"
