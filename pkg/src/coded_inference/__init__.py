"""Coded prediction serving: Berrut rational codec, error location, and harnesses."""

__version__ = "0.1.0"

from coded_inference.codec import (
    CodingConfig,
    decode,
    encode,
    make_config,
    replication_worker_count,
)
from coded_inference.errors import CodedInferenceError
from coded_inference.locator import LocatorReport, locate_corrupted

__all__ = [
    "CodingConfig",
    "make_config",
    "encode",
    "decode",
    "replication_worker_count",
    "CodedInferenceError",
    "LocatorReport",
    "locate_corrupted",
    "__version__",
]
