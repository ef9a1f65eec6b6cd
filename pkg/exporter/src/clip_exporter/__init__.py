"""Batch image/text embedding exporter producing EMB1 files."""

__version__ = "0.1.0"
