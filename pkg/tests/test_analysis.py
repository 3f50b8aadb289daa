import itertools
import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from shadowshare.analysis import (
    bit_balance,
    critical_value,
    infer_bits,
    naive_otp_baseline,
    share_indistinguishability,
    simulate_known_rng_attack,
    subset_secrecy,
    two_sample_chi_square,
)
from shadowshare.core import identity_aware_bit, partial_knowledge_bit, share_bit_oracle
from shadowshare.errors import GeometryMismatchError, InsufficientSamplesError
from shadowshare.raster_io import RasterImage
from shadowshare.rng import RandomnessContext
from shadowshare.scheme import split2

FIXTURES = Path(__file__).parent / "fixtures"
CI_SEED = "c1" * 32
SEED = bytes(range(32))
BITS = (0, 1)


def img(a, depth=8):
    return RasterImage(np.asarray(a, dtype=np.uint8 if depth == 8 else np.uint16), depth)


def uniform_rgb(size=128, seed=42):
    return img(np.random.default_rng(seed).integers(0, 256, (size, size, 3)))


# -- enumeration oracles ------------------------------------------------------------

def blind_fraction_oracle():
    """Exact determined fraction for uniform p, r1, r2 and either held share."""
    hits = total = 0
    for p, r1, r2, held in itertools.product(BITS, BITS, BITS, (0, 1)):
        q = share_bit_oracle(p, r1, r2)[held]
        hits += partial_knowledge_bit(r1, r2, q).determined
        total += 1
    return Fraction(hits, total)


def aware_fraction_oracle(held):
    hits = total = 0
    for p, r1, r2 in itertools.product(BITS, repeat=3):
        q = share_bit_oracle(p, r1, r2)[0 if held == "first" else 1]
        hits += identity_aware_bit(r1, r2, q, held).determined
        total += 1
    return Fraction(hits, total)


def test_enumeration_oracles():
    assert blind_fraction_oracle() == Fraction(1, 4)
    assert aware_fraction_oracle("first") == Fraction(1, 2)
    assert aware_fraction_oracle("second") == Fraction(1, 2)
    # only p = 1 rows are ever determined, so an all-zero source yields nothing
    for r1, r2, held in itertools.product(BITS, BITS, (0, 1)):
        q = share_bit_oracle(0, r1, r2)[held]
        assert not partial_knowledge_bit(r1, r2, q).determined


def test_first_share_null_by_enumeration():
    # s1 = r2 when p = 0 and s1 = r1 when p = 1: over the 4 equally likely
    # (r1, r2) cases both give s1 = 0 twice and s1 = 1 twice
    for p in BITS:
        counts = [0, 0]
        for r1, r2 in itertools.product(BITS, repeat=2):
            counts[share_bit_oracle(p, r1, r2)[0]] += 1
        assert counts == [2, 2]


# -- bit balance --------------------------------------------------------------------

def test_bit_balance_all_zero():
    st = bit_balance(img(np.zeros((5, 6, 3))))
    n = 30
    assert (st.ones == 0).all() and (st.zeros == n).all()
    assert np.allclose(st.chi_square, n)
    assert not st.passes


def test_bit_balance_alternating():
    a = np.zeros((4, 4, 3), np.uint8)
    a[::2] = 0xFF
    st = bit_balance(img(a))
    assert np.allclose(st.chi_square, 0)
    assert (st.ones + st.zeros == 16).all()
    assert st.passes


def test_bit_balance_16bit_shape():
    st = bit_balance(img(np.zeros((2, 2, 4)), 16))
    assert st.chi_square.shape == (4, 16)
    assert st.planes == 64


def test_bit_balance_frozen_fixture():
    frozen = json.loads((FIXTURES / "constant_256_bit_balance.json").read_text())
    const = img(np.broadcast_to(np.array([200, 30, 120]), (256, 256, 3)))
    shares = split2(const, RandomnessContext.deterministic(CI_SEED))
    for i, s in enumerate(shares):
        st = bit_balance(s)
        assert np.allclose(st.chi_square, frozen[f"share_{i}"], atol=1e-6)
        assert st.planes == 24
        assert (st.chi_square < 10.828).all()


def test_bit_balance_outputs():
    st = bit_balance(img(np.zeros((4, 4, 1))))  # chi-square 16 per plane
    assert st.to_csv().splitlines()[0] == "plane,chi_square"
    assert len(st.to_csv().splitlines()) == 9
    d = st.to_dict()
    assert d["passes"] is False and len(d["planes"]) == 8
    assert "FAIL" in st.format_table()


def test_critical_value():
    assert critical_value(1) == pytest.approx(10.828, abs=5e-4)


# -- two-sample statistic -----------------------------------------------------------

def test_two_sample_matches_contingency_table():
    rng = np.random.default_rng(0)
    a = rng.integers(5, 50, 20)
    b = rng.integers(5, 50, 20)
    chi, dof = two_sample_chi_square(a, b)
    ref = stats.chi2_contingency(np.vstack([a, b]), correction=False)
    assert chi == pytest.approx(ref.statistic)
    assert dof == ref.dof


def test_two_sample_identical_is_zero_and_skips_empty_bins():
    chi, dof = two_sample_chi_square([3, 0, 5], [3, 0, 5])
    assert chi == 0 and dof == 1


# -- indistinguishability -----------------------------------------------------------

def test_indistinguishability_same_source():
    a = img(np.full((1, 1, 3), 99))
    rep = share_indistinguishability(a, a, 20_000, seed=SEED)
    assert rep.passes
    assert len(rep.channels) == 3


def test_indistinguishability_black_vs_white():
    black = img(np.zeros((1, 1, 3)))
    white = img(np.full((1, 1, 3), 255))
    rep = share_indistinguishability(black, white, 100_000, seed=SEED)
    assert rep.passes, rep.format_table()


def test_indistinguishability_detects_leaky_split(monkeypatch):
    # if the first share were the source itself the test must notice
    import shadowshare.analysis as mod

    def leaky(src, rng, **kw):
        return RasterImage(src.samples.copy(), src.bit_depth), RasterImage(src.samples.copy(), src.bit_depth)

    monkeypatch.setattr(mod, "split2", leaky)
    rep = share_indistinguishability(img([[[0]]]), img([[[255]]]), 1000, seed=SEED)
    assert not rep.passes


def test_indistinguishability_16bit():
    a = img(np.zeros((2, 2, 1)), 16)
    b = img(np.full((2, 2, 1), 65535), 16)
    assert share_indistinguishability(a, b, 5000, seed=SEED).passes


def test_indistinguishability_errors():
    a = img(np.zeros((1, 1, 3)))
    with pytest.raises(InsufficientSamplesError):
        share_indistinguishability(a, a, 0, seed=SEED)
    with pytest.raises(GeometryMismatchError):
        share_indistinguishability(a, img(np.zeros((1, 2, 3))), 10, seed=SEED)


def test_indistinguishability_leaves_caller_context_alone():
    a = img(np.zeros((1, 1, 1)))
    ctx = RandomnessContext.os_entropy()
    share_indistinguishability(a, a, 100, rng=ctx)
    assert not ctx.wiped


def test_share_source_independence_repeated():
    rng = np.random.default_rng(99)
    runs, passed = 200, 0
    for _ in range(runs):
        a = img(rng.integers(0, 256, (1, 2, 3)))
        b = img(rng.integers(0, 256, (1, 2, 3)))
        passed += share_indistinguishability(a, b, 2000, seed=rng.bytes(32)).passes
    assert passed >= 0.99 * runs


def test_subset_secrecy_tuple_mode():
    rep = subset_secrecy(img([[[0]]]), img([[[255]]]), 3, 50_000, seed=SEED, mode="tuple")
    assert rep.passes
    assert set(rep.subsets) == {(0,), (1,), (2,), (0, 1), (0, 2), (1, 2)}


def test_subset_secrecy_rejects_16bit():
    a = img(np.zeros((1, 1, 1)), 16)
    with pytest.raises(ValueError):
        subset_secrecy(a, a, 3, 10, seed=SEED)


# -- known-RNG attack ---------------------------------------------------------------

def test_infer_bits_matches_scalar_rules():
    rng = np.random.default_rng(5)
    r1, r2, q = (rng.integers(0, 256, 300, dtype=np.uint8) for _ in range(3))
    for held, knows in itertools.product(("first", "second"), (False, True)):
        det, val = infer_bits(r1, r2, q, 8, held, knows)
        for k in range(0, 300, 7):
            for i in range(8):
                a, b, c = ((int(v[k]) >> i) & 1 for v in (r1, r2, q))
                v = identity_aware_bit(a, b, c, held) if knows else partial_knowledge_bit(a, b, c)
                assert bool((int(det[k]) >> i) & 1) == v.determined
                if v.determined:
                    assert (int(val[k]) >> i) & 1 == v.value


def test_blind_attack_fraction_uniform_source():
    rep = simulate_known_rng_attack(uniform_rgb(), SEED, held="first", knows_which=False)
    assert abs(rep.determined_fraction - float(blind_fraction_oracle())) <= 0.01
    assert rep.all_determined_are_ones
    assert rep.sound
    assert rep.total_bits == 128 * 128 * 3 * 8


def test_blind_attack_all_zero_source():
    for held in ("first", "second"):
        rep = simulate_known_rng_attack(img(np.zeros((32, 32, 3))), SEED, held=held)
        assert rep.determined_fraction == 0


def test_aware_attack_fraction():
    for held in ("first", "second"):
        rep = simulate_known_rng_attack(uniform_rgb(), SEED, held=held, knows_which=True)
        assert abs(rep.determined_fraction - float(aware_fraction_oracle(held))) <= 0.01
        assert rep.sound


def test_inference_table_reproduced_cell_for_cell():
    src = uniform_rgb(64)
    cells = {c: [0, 0] for c in itertools.product(BITS, repeat=3)}
    for held in ("first", "second"):
        rep = simulate_known_rng_attack(src, SEED, held=held)
        for c, (und, det) in rep.cells.items():
            cells[c][0] += und
            cells[c][1] += det
    for (r1, r2, q), (und, det) in cells.items():
        expected = partial_knowledge_bit(r1, r2, q)
        assert und + det > 0
        if expected.determined:
            assert und == 0 and det > 0
        else:
            assert det == 0 and und > 0


@pytest.mark.parametrize("kind", ["random", "zeros", "ones", "gradient"])
def test_monotone_attacker_strength_and_soundness(kind):
    rng = np.random.default_rng(1)
    a = {
        "random": rng.integers(0, 256, (16, 16, 3)),
        "zeros": np.zeros((16, 16, 3)),
        "ones": np.full((16, 16, 3), 255),
        "gradient": np.broadcast_to(np.arange(16)[None, :, None] * 16, (16, 16, 3)),
    }[kind]
    src = img(a)
    for held in ("first", "second"):
        blind = simulate_known_rng_attack(src, SEED, held, False)
        aware = simulate_known_rng_attack(src, SEED, held, True)
        assert blind.sound and aware.sound
        assert aware.determined_fraction >= blind.determined_fraction


def test_attack_on_16bit_source():
    src = img(np.random.default_rng(2).integers(0, 1 << 16, (32, 32, 3)), 16)
    rep = simulate_known_rng_attack(src, SEED)
    assert rep.sound and abs(rep.determined_fraction - 0.25) < 0.02


def test_naive_baseline():
    src = uniform_rgb(64)
    rep = naive_otp_baseline(src, SEED)
    assert rep.determined_fraction == 1.0
    assert rep.sound
    assert not rep.all_determined_are_ones
    pad_only = naive_otp_baseline(src, SEED, held="first")
    assert pad_only.determined_fraction == 0


def test_scheme_vs_naive_comparison():
    src = uniform_rgb()
    scheme = simulate_known_rng_attack(src, SEED)
    naive = naive_otp_baseline(src, SEED)
    assert abs(scheme.determined_fraction - 0.25) <= 0.01
    assert naive.determined_fraction == 1.0


def test_attack_rejects_bad_held():
    with pytest.raises(ValueError):
        simulate_known_rng_attack(uniform_rgb(4), SEED, held="third")
    with pytest.raises(ValueError):
        naive_otp_baseline(uniform_rgb(4), SEED, held="third")


def test_recovery_report_dict():
    d = simulate_known_rng_attack(uniform_rgb(8), SEED).to_dict()
    assert d["sound"] is True
    assert len(d["cells"]) == 8
