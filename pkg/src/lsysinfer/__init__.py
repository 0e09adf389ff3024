"""Inference on linear systems with non-negative solutions."""

from importlib import metadata

__all__ = ["cli", "core", "inference", "mixedlogit"]

try:
    __version__ = metadata.version("lsysinfer")
except metadata.PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"
