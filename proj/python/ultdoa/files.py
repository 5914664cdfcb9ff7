"""Readers for fingerprint batches (CIRF) and their sidecar metadata that
need only numpy, so a model host does not have to import the extension."""

import json
import struct
import zlib

import numpy as np

_MAGIC = b"CIRF"
_VERSION = 1


class FormatError(ValueError):
    pass


def load_fingerprints(path):
    """Returns dict(inputs[n, rows, cols], labels[n, 2], masks[n, rows],
    timestamps[n], row_order[(ru, antenna)])."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 28 or data[:4] != _MAGIC:
        raise FormatError("not a fingerprint batch")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != crc:
        raise FormatError("checksum mismatch")
    version, _, rows, cols, count = struct.unpack_from("<HHIIQ", data, 4)
    if version != _VERSION:
        raise FormatError(f"unsupported version {version}")
    off = 24
    row_order = np.frombuffer(data, "<i4", 2 * rows, off).reshape(rows, 2)
    off += 8 * rows
    # Fixed-size records: t, x, y, mask bytes, values.
    rec = np.dtype([("t", "<i8"), ("xy", "<f8", 2), ("mask", "u1", rows), ("v", "<f8", rows * cols)])
    if len(data) - 4 - off != rec.itemsize * count:
        raise FormatError("truncated payload")
    recs = np.frombuffer(data, rec, count, off)
    return {
        "inputs": recs["v"].reshape(count, rows, cols).copy(),
        "labels": recs["xy"].copy(),
        "masks": recs["mask"].copy(),
        "timestamps": recs["t"].copy(),
        "row_order": [tuple(int(v) for v in r) for r in row_order],
    }


def load_metadata(path):
    """alpha_norm, gamma, columns and row order used to build the batch."""
    with open(path) as f:
        meta = json.load(f)
    meta["row_order"] = [tuple(r) for r in meta["row_order"]]
    return meta
