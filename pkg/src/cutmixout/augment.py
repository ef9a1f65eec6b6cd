"""Caption segmentation and cutout/cutmix variant synthesis.

A caption is split into ordered sub-sentences (segments). A binary mask with
a single contiguous zero-run selects which segments are kept; masked segments
are either dropped (cutout) or replaced positionally from a shuffled copy of
the segment list (cutmix). The mixture draws one of the two operations per
variant with probability ``p_mix`` / ``p_out``.

All randomness flows from explicit seeds; every operation is a pure function
of its inputs.
"""

from __future__ import annotations

import hashlib
import math
import random
import re
from dataclasses import dataclass, field

from .errors import DataError

SEPARATOR_RE = re.compile(r"[,;.]+")

CUTOUT = "cutout"
CUTMIX = "cutmix"
ORIGINAL = "original"

POLICY_DELETE = "delete"
POLICY_SPECIAL_TOKEN = "special-token"


@dataclass(frozen=True)
class Caption:
    """An identified caption; text must contain at least one word token."""

    id: str
    text: str

    def __post_init__(self):
        if not self.text.split():
            raise DataError(f"caption {self.id!r} is empty (no word tokens)")

    @property
    def words(self) -> list[str]:
        return self.text.split()


@dataclass(frozen=True)
class SegmentationStrategy:
    """How captions are split into segments.

    ``punctuation`` splits at commas, semicolons and periods, falling back to
    fixed windows of ``window`` words when no such punctuation is present.
    ``fixed-window`` always uses windows of ``window`` words (last window may
    be shorter).
    """

    kind: str = "punctuation"
    window: int = 3

    def __post_init__(self):
        if self.kind not in ("punctuation", "fixed-window"):
            raise DataError(f"unknown segmentation strategy {self.kind!r}")
        if self.window < 1:
            raise DataError(f"window must be positive, got {self.window}")


@dataclass(frozen=True)
class SegmentedCaption:
    """A caption split into ordered, nonempty word spans.

    Joining ``segments`` with single spaces reproduces the normalized caption
    text (whitespace collapsed; separator punctuation removed when the
    punctuation strategy applied).
    """

    source: Caption
    segments: tuple[str, ...]
    strategy: SegmentationStrategy

    def __post_init__(self):
        if not self.segments:
            raise DataError(f"caption {self.source.id!r} produced no segments")
        if any(not s.split() for s in self.segments):
            raise DataError(f"caption {self.source.id!r} has an empty segment")

    @property
    def n(self) -> int:
        return len(self.segments)

    @property
    def normalized_text(self) -> str:
        return " ".join(self.segments)


@dataclass(frozen=True)
class BinaryMask:
    """Per-segment keep(1)/replace(0) bits.

    At least one bit is 1, and the zero bits form at most one contiguous run
    (no zeros at all is the identity mask).
    """

    bits: tuple[int, ...]

    def __post_init__(self):
        if not self.bits:
            raise DataError("mask must be nonempty")
        if any(b not in (0, 1) for b in self.bits):
            raise DataError(f"mask bits must be 0/1, got {self.bits}")
        if 1 not in self.bits:
            raise DataError("mask must keep at least one segment")
        zeros = [i for i, b in enumerate(self.bits) if b == 0]
        if zeros and zeros[-1] - zeros[0] + 1 != len(zeros):
            raise DataError(f"mask zero bits must be one contiguous run, got {self.bits}")

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def is_identity(self) -> bool:
        return 0 not in self.bits


@dataclass(frozen=True)
class AugmentationConfig:
    """Knobs for variant synthesis. ``p_mix + p_out`` must equal 1."""

    p_mix: float = 0.5
    p_out: float = 0.5
    k: int = 8
    max_mask_fraction: float = 0.5
    cutout_policy: str = POLICY_DELETE
    special_token: str = "[MASK]"
    strategy: SegmentationStrategy = field(default_factory=SegmentationStrategy)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_mix <= 1.0 or not 0.0 <= self.p_out <= 1.0:
            raise DataError(f"probabilities must lie in [0,1], got p_mix={self.p_mix} p_out={self.p_out}")
        if abs(self.p_mix + self.p_out - 1.0) > 1e-9:
            raise DataError(f"p_mix + p_out must equal 1, got {self.p_mix} + {self.p_out}")
        if self.k < 1:
            raise DataError(f"variant count k must be >= 1, got {self.k}")
        if not 0.0 < self.max_mask_fraction <= 1.0:
            raise DataError(f"max_mask_fraction must lie in (0,1], got {self.max_mask_fraction}")
        if self.cutout_policy not in (POLICY_DELETE, POLICY_SPECIAL_TOKEN):
            raise DataError(f"unknown cutout policy {self.cutout_policy!r}")


@dataclass(frozen=True)
class Variant(Caption):
    """A synthesized caption variant; carries provenance for reporting."""

    parent_id: str = ""
    variant_index: int = 0
    op: str = CUTOUT


def segment(caption: Caption, strategy: SegmentationStrategy) -> SegmentedCaption:
    """Split a caption into segments according to the strategy.

    Deterministic. Raises DataError if nothing but whitespace/separator
    punctuation remains.
    """
    if strategy.kind == "punctuation" and SEPARATOR_RE.search(caption.text):
        chunks = SEPARATOR_RE.split(caption.text)
        segments = [" ".join(c.split()) for c in chunks]
        segments = [s for s in segments if s]
        if not segments:
            raise DataError(f"caption {caption.id!r} is empty after removing punctuation")
    else:
        words = caption.words
        w = strategy.window
        segments = [" ".join(words[i : i + w]) for i in range(0, len(words), w)]
    return SegmentedCaption(source=caption, segments=tuple(segments), strategy=strategy)


def max_run_length(n: int, max_mask_fraction: float) -> int:
    """Longest zero-run gen_mask may draw: floor(fraction*n), capped at n-1
    so at least one segment survives."""
    # epsilon guards against 0.3*10 == 2.999...; fractions near an integer
    # from below by <1e-9 are treated as that integer
    return min(math.floor(max_mask_fraction * n + 1e-9), n - 1)


def gen_mask(n: int, cfg: AugmentationConfig, rng: random.Random) -> BinaryMask:
    """Draw a mask with one contiguous zero-run.

    Run length is uniform on {1, ..., floor(max_mask_fraction*n)} and the
    start offset uniform over valid positions. Degenerate sizes (n=1, or a
    fraction too small to allow a run) yield the identity mask.
    """
    if n < 1:
        raise DataError(f"segment count must be >= 1, got {n}")
    longest = max_run_length(n, cfg.max_mask_fraction)
    if longest == 0:
        return BinaryMask(bits=(1,) * n)
    run = rng.randint(1, longest)
    start = rng.randint(0, n - run)
    bits = [1] * n
    for i in range(start, start + run):
        bits[i] = 0
    return BinaryMask(bits=tuple(bits))


def _check_mask(seg: SegmentedCaption, mask: BinaryMask) -> None:
    if len(mask) != seg.n:
        raise DataError(
            f"mask length {len(mask)} does not match segment count {seg.n} "
            f"for caption {seg.source.id!r}"
        )


def cutout(seg: SegmentedCaption, mask: BinaryMask, cfg: AugmentationConfig) -> Caption:
    """Drop masked segments (delete policy) or collapse each zero-run into a
    single special token (special-token policy)."""
    _check_mask(seg, mask)
    if cfg.cutout_policy == POLICY_DELETE:
        parts = [s for s, b in zip(seg.segments, mask.bits) if b]
    else:
        parts = []
        prev_bit = 1
        for s, b in zip(seg.segments, mask.bits):
            if b:
                parts.append(s)
            elif prev_bit:
                parts.append(cfg.special_token)
            prev_bit = b
    return Caption(id=f"{seg.source.id}#{CUTOUT}", text=" ".join(parts))


def cutmix_with(seg: SegmentedCaption, shuffled: tuple[str, ...], mask: BinaryMask) -> Caption:
    """Positional mix: keep segment i where the bit is 1, take position i of
    ``shuffled`` where it is 0."""
    _check_mask(seg, mask)
    if len(shuffled) != seg.n:
        raise DataError(f"shuffled copy has {len(shuffled)} segments, expected {seg.n}")
    parts = [a if b else a2 for a, a2, b in zip(seg.segments, shuffled, mask.bits)]
    return Caption(id=f"{seg.source.id}#{CUTMIX}", text=" ".join(parts))


def cutmix(seg: SegmentedCaption, mask: BinaryMask, rng: random.Random) -> Caption:
    """Cutmix against a uniform random permutation of the segments."""
    _check_mask(seg, mask)
    shuffled = list(seg.segments)
    rng.shuffle(shuffled)
    return cutmix_with(seg, tuple(shuffled), mask)


def derive_seed(seed: int, *parts: str) -> int:
    """Stable 64-bit stream seed from a base seed and string labels."""
    h = hashlib.blake2b(digest_size=8, key=(seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"))
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def cutmixout(caption: Caption, cfg: AugmentationConfig) -> list[Variant]:
    """Synthesize exactly ``cfg.k`` variants of one caption.

    Each variant draws a fresh mask, then applies cutmix with probability
    ``p_mix`` and cutout otherwise. The result is a pure function of
    (caption, cfg): the random stream is derived from cfg.seed and the
    caption's id and text.
    """
    seg = segment(caption, cfg.strategy)
    rng = random.Random(derive_seed(cfg.seed, caption.id, caption.text))
    variants = []
    for i in range(1, cfg.k + 1):
        mask = gen_mask(seg.n, cfg, rng)
        if rng.random() < cfg.p_mix:
            produced = cutmix(seg, mask, rng)
            op = CUTMIX
        else:
            produced = cutout(seg, mask, cfg)
            op = CUTOUT
        variants.append(
            Variant(
                id=f"{caption.id}#aug{i}",
                text=produced.text,
                parent_id=caption.id,
                variant_index=i,
                op=op,
            )
        )
    return variants


def original_variant(caption: Caption, strategy: SegmentationStrategy | None = None) -> Variant:
    """The unmodified caption, tagged as variant 0.

    With a strategy this is the identity-mask output (segments joined by
    single spaces), so its tokens match those of the generated variants.
    """
    text = segment(caption, strategy).normalized_text if strategy else caption.text
    return Variant(
        id=f"{caption.id}#aug0",
        text=text,
        parent_id=caption.id,
        variant_index=0,
        op=ORIGINAL,
    )


def all_valid_masks(n: int) -> list[BinaryMask]:
    """Enumerate every mask with a single contiguous zero-run and >=1 kept
    segment (identity included). Exhaustive-test helper."""
    masks = [BinaryMask(bits=(1,) * n)]
    for run in range(1, n):
        for start in range(0, n - run + 1):
            bits = [1] * n
            for i in range(start, start + run):
                bits[i] = 0
            masks.append(BinaryMask(bits=tuple(bits)))
    return masks
