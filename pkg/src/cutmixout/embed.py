"""Embedding math: projection, variant aggregation, and text-image fusion.

Embedding vectors are plain 1-D numpy float arrays. Neural encoders live
behind the EmbeddingProvider contract; this package ships only the
deterministic bag-of-words mock provider, real encoders hand their output
over as embedding files.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

from .augment import Caption
from .errors import DataError


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Validate and return a finite 1-D float64 array."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DataError(f"{name} must be a nonempty 1-D array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DataError(f"{name} contains non-finite entries")
    return v


def as_matrix(entries, name: str = "matrix") -> np.ndarray:
    """Validate and return a finite 2-D float64 array."""
    m = np.asarray(entries, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DataError(f"{name} must be 2-D with positive shape, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DataError(f"{name} contains non-finite entries")
    return m


def l2_normalize(v: np.ndarray, name: str = "vector") -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise DataError(f"cannot normalize zero-norm {name}")
    return v / norm


@dataclass(frozen=True)
class JointEmbedding:
    """Concatenated text and image halves; either half may be empty."""

    values: np.ndarray
    dim_text: int
    dim_image: int

    def __post_init__(self):
        if self.dim_text < 0 or self.dim_image < 0:
            raise DataError("half dimensions must be nonnegative")
        if self.values.shape != (self.dim_text + self.dim_image,):
            raise DataError(
                f"joint embedding length {self.values.shape} does not match "
                f"d_t={self.dim_text} + d_i={self.dim_image}"
            )
        self.values.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.dim_text + self.dim_image

    def split(self) -> tuple[np.ndarray, np.ndarray]:
        return self.values[: self.dim_text], self.values[self.dim_text :]


def project(v, matrix) -> np.ndarray:
    """Apply a linear projection (matrix-vector product).

    The default pipeline uses the identity projection; providers are expected
    to emit already-projected embeddings.
    """
    v = as_vector(v)
    w = as_matrix(matrix, "projection matrix")
    if w.shape[1] != v.shape[0]:
        raise DataError(f"projection expects dim {w.shape[1]}, vector has dim {v.shape[0]}")
    return w @ v


def identity_projection(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=np.float64)


def load_projection(path) -> np.ndarray:
    """Load a projection matrix from a .npy file, for providers that emit
    unprojected features."""
    return as_matrix(np.load(path), f"projection matrix from {path}")


def aggregate(variant_embeddings: Sequence, normalize: bool = True) -> np.ndarray:
    """Element-wise sum of variant embeddings, L2-normalized by default.

    The sum is exactly rounded (fsum per coordinate), so the result is
    bit-identical under permutation of the input list.
    """
    if len(variant_embeddings) == 0:
        raise DataError("aggregate requires at least one embedding")
    vectors = [as_vector(v, f"embedding {i}") for i, v in enumerate(variant_embeddings)]
    dim = vectors[0].shape[0]
    for i, v in enumerate(vectors[1:], start=1):
        if v.shape[0] != dim:
            raise DataError(f"embedding {i} has dim {v.shape[0]}, expected {dim}")
    stacked = np.stack(vectors)
    total = np.array([math.fsum(stacked[:, j]) for j in range(dim)], dtype=np.float64)
    if normalize:
        return l2_normalize(total, "aggregated embedding")
    return total


def fuse(text, image, normalize_halves: bool = True) -> JointEmbedding:
    """Concatenate text and image embeddings, text first.

    Each present half is independently L2-normalized unless disabled. Passing
    None for one half gives the degenerate single-modality embedding.
    """
    if text is None and image is None:
        raise DataError("fuse requires at least one of text/image")
    halves = []
    dims = []
    for name, half in (("text", text), ("image", image)):
        if half is None:
            dims.append(0)
            continue
        v = as_vector(half, f"{name} embedding")
        if normalize_halves:
            v = l2_normalize(v, f"{name} embedding")
        halves.append(v)
        dims.append(v.shape[0])
    return JointEmbedding(
        values=np.concatenate(halves) if len(halves) > 1 else halves[0].copy(),
        dim_text=dims[0],
        dim_image=dims[1],
    )


def _word_bucket(word: str, dim: int, salt: int) -> int:
    h = hashlib.blake2b(
        word.encode("utf-8"),
        digest_size=8,
        key=(salt & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"),
    )
    return int.from_bytes(h.digest(), "little") % dim


def mock_embed(caption: Caption, dim: int, salt: int = 0) -> np.ndarray:
    """Deterministic bag-of-words hash embedding.

    Every word token bumps one hashed basis coordinate; the count vector is
    L2-normalized. Order-insensitive, duplicate-sensitive.
    """
    if dim < 2:
        raise DataError(f"mock embedding dim must be >= 2, got {dim}")
    counts = np.zeros(dim, dtype=np.float64)
    for word in caption.words:
        counts[_word_bucket(word, dim, salt)] += 1.0
    return l2_normalize(counts, "mock embedding")


@runtime_checkable
class EmbeddingProvider(Protocol):
    """Batch encoder boundary. Implementations must be deterministic or
    declare otherwise in their metadata sidecar."""

    dim_text: int
    dim_image: int

    def embed_text(self, captions: Iterable[Caption]) -> list[np.ndarray]: ...

    def embed_image(self, image_refs: Iterable[str]) -> list[np.ndarray]: ...


# image refs hash in a separate stream from caption words
_IMAGE_SALT_LABEL = 0x696D6167_65726566


class MockProvider:
    """Self-contained provider backed by mock_embed; used for tests and the
    fully in-process pipeline mode."""

    def __init__(self, dim_text: int = 64, dim_image: int = 64, seed: int = 0):
        self.dim_text = dim_text
        self.dim_image = dim_image
        self._text_salt = seed
        self._image_salt = seed ^ _IMAGE_SALT_LABEL

    def embed_text(self, captions: Iterable[Caption]) -> list[np.ndarray]:
        return [mock_embed(c, self.dim_text, self._text_salt) for c in captions]

    def embed_image(self, image_refs: Iterable[str]) -> list[np.ndarray]:
        return [
            mock_embed(Caption(id=ref, text=ref), self.dim_image, self._image_salt)
            for ref in image_refs
        ]
