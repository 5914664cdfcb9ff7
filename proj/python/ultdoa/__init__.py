"""Uplink TDoA positioning: bindings to the C++ core plus plain-numpy readers
for the files handed to an external model host."""

from ._core import (
    Config,
    Dataset,
    UltdoaError,
    ce90,
    cir_topic,
    decode_dataset,
    decode_message,
    encode_message,
    error_cdf,
    estimate_toa,
    fingerprint,
    load_config,
    mae,
    parse_config,
    percentile,
    preprocess,
    read_dataset,
    read_fingerprints,
    simulate,
    solve,
    write_dataset,
)
from .files import load_fingerprints, load_metadata

__all__ = [
    "Config",
    "Dataset",
    "UltdoaError",
    "ce90",
    "cir_topic",
    "decode_dataset",
    "decode_message",
    "encode_message",
    "error_cdf",
    "estimate_toa",
    "fingerprint",
    "load_config",
    "load_fingerprints",
    "load_metadata",
    "mae",
    "parse_config",
    "percentile",
    "preprocess",
    "read_dataset",
    "read_fingerprints",
    "simulate",
    "solve",
    "write_dataset",
]
