"""Image/text encoders behind one batch interface.

ClipEncoder wraps a pretrained transformers CLIP checkpoint and emits raw
(unnormalized) feature vectors; any normalization is left to the consumer.
StubEncoder is a deterministic hash-based stand-in with the same interface
and declared dimension, used for tests and dry runs without model weights.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Protocol

import numpy as np

from .models import ModelSpec


class Encoder(Protocol):
    dim: int

    def encode_images(self, paths: list[str]) -> np.ndarray: ...

    def encode_texts(self, texts: list[str]) -> np.ndarray: ...


def _hash_vector(payload: bytes, dim: int, domain: bytes) -> np.ndarray:
    # counter-mode blake2b expansion; deterministic across platforms
    out = np.empty(dim, dtype=np.float32)
    n_blocks = (dim + 15) // 16
    raw = bytearray()
    for block in range(n_blocks):
        h = hashlib.blake2b(payload, digest_size=64, person=domain[:16],
                            salt=block.to_bytes(16, "little"))
        raw.extend(h.digest())
    words = np.frombuffer(bytes(raw), dtype="<u4")[:dim]
    # map uint32 -> (-1, 1)
    out[:] = (words.astype(np.float64) / 2**31 - 1.0).astype(np.float32)
    return out


class StubEncoder:
    """Deterministic offline encoder; images hash their file bytes, texts
    hash their UTF-8 string."""

    def __init__(self, spec: ModelSpec):
        self.dim = spec.dim
        self.tag = spec.tag

    def encode_images(self, paths: list[str]) -> np.ndarray:
        vectors = [
            _hash_vector(Path(p).read_bytes(), self.dim, b"stub-image")
            for p in paths
        ]
        return np.stack(vectors) if vectors else np.empty((0, self.dim), dtype=np.float32)

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        vectors = [
            _hash_vector(t.encode("utf-8"), self.dim, b"stub-text") for t in texts
        ]
        return np.stack(vectors) if vectors else np.empty((0, self.dim), dtype=np.float32)


class ClipEncoder:
    """Pretrained CLIP via transformers; weights are downloaded on first use."""

    def __init__(self, spec: ModelSpec, device: str = "cpu"):
        if spec.hf_name is None:
            raise RuntimeError(
                f"model tag {spec.tag!r} has no transformers checkpoint; "
                "use an open-clip based export instead"
            )
        import torch
        from transformers import CLIPModel, CLIPProcessor

        self._torch = torch
        self.dim = spec.dim
        self.tag = spec.tag
        self.device = device
        self.model = CLIPModel.from_pretrained(spec.hf_name).to(device).eval()
        self.processor = CLIPProcessor.from_pretrained(spec.hf_name)

    def encode_images(self, paths: list[str]) -> np.ndarray:
        from PIL import Image

        images = [Image.open(p).convert("RGB") for p in paths]
        inputs = self.processor(images=images, return_tensors="pt").to(self.device)
        with self._torch.no_grad():
            features = self.model.get_image_features(**inputs)
        return features.cpu().numpy().astype(np.float32)

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        inputs = self.processor(
            text=texts, return_tensors="pt", padding=True, truncation=True
        ).to(self.device)
        with self._torch.no_grad():
            features = self.model.get_text_features(**inputs)
        return features.cpu().numpy().astype(np.float32)


def build_encoder(spec: ModelSpec, stub: bool, device: str = "cpu") -> Encoder:
    return StubEncoder(spec) if stub else ClipEncoder(spec, device=device)
