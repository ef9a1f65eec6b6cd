"""Supported model tags.

"ViT-32" in some write-ups is ambiguous; this exporter maps it to ViT-B/32
explicitly rather than guessing elsewhere. ResNet-50 CLIP weights are not
distributed through the transformers hub, so the RN50 tag requires the
open-clip backend (not bundled).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ModelSpec:
    tag: str
    hf_name: str | None  # None: unavailable through transformers
    dim: int


_SPECS = [
    ModelSpec("ViT-B/32", "openai/clip-vit-base-patch32", 512),
    ModelSpec("ViT-B/16", "openai/clip-vit-base-patch16", 512),
    ModelSpec("ViT-L/14", "openai/clip-vit-large-patch14", 768),
    ModelSpec("RN50", None, 1024),
]

_ALIASES = {
    "ViT-32": "ViT-B/32",
    "ViT-B32": "ViT-B/32",
    "ViT-B16": "ViT-B/16",
    "ViT-L14": "ViT-L/14",
    "ResNet50": "RN50",
}

REGISTRY = {spec.tag: spec for spec in _SPECS}
SUPPORTED_TAGS = tuple(REGISTRY) + tuple(_ALIASES)


def resolve_tag(tag: str) -> ModelSpec:
    canonical = _ALIASES.get(tag, tag)
    spec = REGISTRY.get(canonical)
    if spec is None:
        raise KeyError(
            f"unknown model tag {tag!r}; supported: {', '.join(sorted(SUPPORTED_TAGS))}"
        )
    return spec
