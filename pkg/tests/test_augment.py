from __future__ import annotations

import itertools
import random
import re

import pytest

from cutmixout.augment import (
    AugmentationConfig,
    BinaryMask,
    Caption,
    SegmentationStrategy,
    all_valid_masks,
    cutmix,
    cutmix_with,
    cutmixout,
    cutout,
    gen_mask,
    max_run_length,
    original_variant,
    segment,
)
from cutmixout.errors import DataError

PUNCT = SegmentationStrategy(kind="punctuation")
WINDOW3 = SegmentationStrategy(kind="fixed-window", window=3)

WORDS = ["red", "coat", "bag", "tall", "man", "woman", "shoes", "hat", "blue", "jeans"]


def random_caption(rng: random.Random, idx: int) -> Caption:
    n_words = rng.randint(1, 12)
    words = [rng.choice(WORDS) for _ in range(n_words)]
    text = " ".join(words)
    # sprinkle commas and irregular whitespace
    if rng.random() < 0.6 and n_words > 2:
        cut = rng.randint(1, n_words - 1)
        text = " ".join(words[:cut]) + ",   " + " ".join(words[cut:])
    if rng.random() < 0.3:
        text = "  " + text + " "
    return Caption(id=f"r{idx}", text=text)


def make_segmented(segments: list[str], strategy=PUNCT):
    caption = Caption(id="seg", text=", ".join(segments))
    return segment(caption, strategy)


class TestSegmentation:
    def test_punctuation_split(self):
        seg = segment(Caption(id="a", text="a man, wearing a coat, holds a bag"), PUNCT)
        assert seg.segments == ("a man", "wearing a coat", "holds a bag")

    def test_fixed_window(self):
        seg = segment(Caption(id="b", text="one two three four five"), WINDOW3)
        assert seg.segments == ("one two three", "four five")

    def test_single_word_fallback(self):
        seg = segment(Caption(id="c", text="hello"), PUNCT)
        assert seg.segments == ("hello",)

    def test_punctuation_fallback_uses_windows(self):
        seg = segment(Caption(id="d", text="one two three four"), PUNCT)
        assert seg.segments == ("one two three", "four")

    def test_semicolon_and_period(self):
        seg = segment(Caption(id="e", text="a man; red coat. blue jeans"), PUNCT)
        assert seg.segments == ("a man", "red coat", "blue jeans")

    def test_whitespace_caption_rejected(self):
        with pytest.raises(DataError):
            Caption(id="f", text="   ")

    def test_punctuation_only_caption_rejected(self):
        with pytest.raises(DataError):
            segment(Caption(id="g", text=",,,"), PUNCT)

    def test_deterministic(self):
        c = Caption(id="h", text="a man, walking, with a dog")
        assert segment(c, PUNCT) == segment(c, PUNCT)

    def test_round_trip_property(self):
        # joined segments reproduce the normalized text for both strategies
        rng = random.Random(101)
        for i in range(300):
            c = random_caption(rng, i)
            seg_w = segment(c, WINDOW3)
            assert " ".join(seg_w.segments) == " ".join(c.text.split())
            seg_p = segment(c, PUNCT)
            stripped = re.sub(r"[,;.]+", " ", c.text)
            if not stripped.split():
                continue
            expected = " ".join(stripped.split()) if re.search(r"[,;.]", c.text) else " ".join(c.text.split())
            assert " ".join(seg_p.segments) == expected
            assert all(s.split() for s in seg_p.segments)


class TestBinaryMask:
    def test_rejects_all_zero(self):
        with pytest.raises(DataError):
            BinaryMask(bits=(0, 0, 0))

    def test_rejects_split_zero_runs(self):
        with pytest.raises(DataError):
            BinaryMask(bits=(0, 1, 0))

    def test_rejects_non_bits(self):
        with pytest.raises(DataError):
            BinaryMask(bits=(1, 2, 0))

    def test_identity_allowed(self):
        assert BinaryMask(bits=(1, 1, 1)).is_identity

    def test_enumeration_count(self):
        # identity + sum_{run=1..n-1} (n-run+1) single-run masks
        assert len(all_valid_masks(1)) == 1
        assert len(all_valid_masks(4)) == 10
        assert len(all_valid_masks(6)) == 1 + 6 + 5 + 4 + 3 + 2


class TestGenMask:
    def test_n1_identity(self):
        rng = random.Random(0)
        cfg = AugmentationConfig()
        for _ in range(20):
            assert gen_mask(1, cfg, rng).bits == (1,)

    def test_n4_half_fraction_support(self):
        # all draws must land in the 7 masks with run length 1 or 2
        allowed = {
            m.bits
            for m in all_valid_masks(4)
            if not m.is_identity and m.bits.count(0) <= 2
        }
        assert len(allowed) == 7
        rng = random.Random(5)
        cfg = AugmentationConfig(max_mask_fraction=0.5)
        for _ in range(2000):
            assert gen_mask(4, cfg, rng).bits in allowed

    def test_floor_not_bitten_by_float_rounding(self):
        assert max_run_length(10, 0.3) == 3
        assert max_run_length(4, 0.5) == 2
        assert max_run_length(3, 1.0) == 2  # capped to keep one segment

    def test_run_length_uniform(self):
        rng = random.Random(7)
        cfg = AugmentationConfig(max_mask_fraction=0.3)
        counts = {1: 0, 2: 0, 3: 0}
        n_draws = 10000
        for _ in range(n_draws):
            mask = gen_mask(10, cfg, rng)
            counts[mask.bits.count(0)] += 1
        for length, count in counts.items():
            assert abs(count / n_draws - 1 / 3) < 0.02, (length, count)

    def test_invariants_over_grid(self):
        rng = random.Random(11)
        for n in (1, 2, 3, 5, 8, 13):
            for frac in (0.2, 0.5, 1.0):
                cfg = AugmentationConfig(max_mask_fraction=frac)
                cap = max_run_length(n, frac)
                for _ in range(300):
                    mask = gen_mask(n, cfg, rng)
                    assert len(mask) == n
                    assert 1 in mask.bits
                    assert mask.bits.count(0) <= max(cap, 0)


class TestCutout:
    CFG = AugmentationConfig()

    def test_delete(self):
        seg = make_segmented(["a man", "in red", "holds a bag"])
        out = cutout(seg, BinaryMask(bits=(1, 0, 1)), self.CFG)
        assert out.text == "a man holds a bag"

    def test_identity_mask(self):
        seg = make_segmented(["x"])
        assert cutout(seg, BinaryMask(bits=(1,)), self.CFG).text == "x"

    def test_special_token_collapses_run(self):
        seg = make_segmented(["a", "b", "c", "d"])
        cfg = AugmentationConfig(cutout_policy="special-token")
        out = cutout(seg, BinaryMask(bits=(1, 0, 0, 1)), cfg)
        assert out.text == "a [MASK] d"

    def test_length_mismatch(self):
        seg = make_segmented(["a", "b", "c"])
        with pytest.raises(DataError):
            cutout(seg, BinaryMask(bits=(1, 0)), self.CFG)

    def test_output_id_carries_source(self):
        seg = make_segmented(["a", "b"])
        out = cutout(seg, BinaryMask(bits=(1, 0)), self.CFG)
        assert out.id.startswith(seg.source.id)
        assert out.id != seg.source.id

    def test_filter_join_oracle_exhaustive(self):
        # every caption up to 6 segments, every single-zero-run mask
        rng = random.Random(23)
        for n in range(1, 7):
            segments = [
                " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 3)))
                for _ in range(n)
            ]
            seg = make_segmented(segments)
            assert seg.n == n
            for mask in all_valid_masks(n):
                expected = " ".join(s for s, b in zip(segments, mask.bits) if b)
                assert cutout(seg, mask, self.CFG).text == expected


class TestCutmix:
    def test_all_ones_identity_for_every_shuffle(self):
        segments = ["a man", "red coat", "blue bag"]
        seg = make_segmented(segments)
        mask = BinaryMask(bits=(1, 1, 1))
        for perm in itertools.permutations(segments):
            assert cutmix_with(seg, perm, mask).text == seg.normalized_text

    def test_positional_substitution(self):
        seg = make_segmented(["a", "b", "c"])
        out = cutmix_with(seg, ("c", "a", "b"), BinaryMask(bits=(1, 0, 1)))
        assert out.text == "a a c"

    def test_exhaustive_positional_semantics(self):
        rng = random.Random(29)
        for n in range(1, 6):
            segments = [f"s{i} w{rng.randint(0, 9)}" for i in range(n)]
            seg = make_segmented(segments)
            for perm in itertools.permutations(segments):
                for mask in all_valid_masks(n):
                    out = cutmix_with(seg, perm, mask)
                    expected = " ".join(
                        a if b else a2 for a, a2, b in zip(segments, perm, mask.bits)
                    )
                    assert out.text == expected

    def test_uniform_shuffle_frequency(self):
        seg = make_segmented(["a", "b"])
        mask = BinaryMask(bits=(0, 1))
        rng = random.Random(31)
        first_a = 0
        n_draws = 1000
        for _ in range(n_draws):
            out = cutmix(seg, mask, rng)
            first = out.text.split()[0]
            assert first in ("a", "b")
            first_a += first == "a"
        assert abs(first_a / n_draws - 0.5) < 0.05

    def test_length_mismatch(self):
        seg = make_segmented(["a", "b", "c"])
        with pytest.raises(DataError):
            cutmix(seg, BinaryMask(bits=(1, 1)), random.Random(0))


class TestCutMixOut:
    CAPTION = Caption(id="q", text="a man, wearing a coat, holds a bag, black shoes")

    def test_exact_k(self):
        for k in (1, 3, 8):
            assert len(cutmixout(self.CAPTION, AugmentationConfig(k=k, seed=1))) == k

    def test_degenerate_all_cutout(self):
        cfg = AugmentationConfig(p_mix=0.0, p_out=1.0, k=3, seed=2)
        assert all(v.op == "cutout" for v in cutmixout(self.CAPTION, cfg))

    def test_degenerate_all_cutmix(self):
        cfg = AugmentationConfig(p_mix=1.0, p_out=0.0, k=3, seed=2)
        assert all(v.op == "cutmix" for v in cutmixout(self.CAPTION, cfg))

    def test_determinism(self):
        cfg = AugmentationConfig(k=8, seed=42)
        a = cutmixout(self.CAPTION, cfg)
        b = cutmixout(self.CAPTION, cfg)
        assert a == b

    def test_seeds_decorrelate(self):
        differing = 0
        for s in range(100):
            a = cutmixout(self.CAPTION, AugmentationConfig(k=4, seed=s))
            b = cutmixout(self.CAPTION, AugmentationConfig(k=4, seed=s + 1000))
            differing += [v.text for v in a] != [v.text for v in b]
        assert differing > 0

    def test_mixture_frequency(self):
        cfg = AugmentationConfig(p_mix=0.7, p_out=0.3, k=40, seed=9)
        variants = []
        for i in range(50):
            c = Caption(id=f"m{i}", text="a man, red coat, blue jeans, white shoes")
            variants.extend(cutmixout(c, cfg))
        frac = sum(v.op == "cutmix" for v in variants) / len(variants)
        assert abs(frac - 0.7) < 0.05

    def test_variant_metadata(self):
        vs = cutmixout(self.CAPTION, AugmentationConfig(k=3, seed=4))
        assert [v.variant_index for v in vs] == [1, 2, 3]
        assert all(v.parent_id == "q" for v in vs)
        assert len({v.id for v in vs}) == 3

    def test_original_variant(self):
        v = original_variant(self.CAPTION)
        assert v.variant_index == 0 and v.op == "original"
        assert v.text == self.CAPTION.text


class TestConfigValidation:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(DataError):
            AugmentationConfig(p_mix=0.7, p_out=0.7)

    def test_k_positive(self):
        with pytest.raises(DataError):
            AugmentationConfig(k=0)

    def test_fraction_range(self):
        with pytest.raises(DataError):
            AugmentationConfig(max_mask_fraction=0.0)
        with pytest.raises(DataError):
            AugmentationConfig(max_mask_fraction=1.5)

    def test_policy_checked(self):
        with pytest.raises(DataError):
            AugmentationConfig(cutout_policy="drop")

    def test_strategy_checked(self):
        with pytest.raises(DataError):
            SegmentationStrategy(kind="sentencepiece")
        with pytest.raises(DataError):
            SegmentationStrategy(window=0)
