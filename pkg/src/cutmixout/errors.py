"""Exception types shared across the package.

The CLI maps these onto stable exit codes: usage errors exit 2 (argparse),
DataError and subclasses exit 3, OSError exits 4.
"""


class DataError(ValueError):
    """Invalid input data, configuration, or contract violation."""


class EmbeddingFormatError(DataError):
    """Malformed embedding file (bad magic, truncation, header mismatch)."""
