"""LRPF v1 writer (little-endian).

Layout:
    magic   4 bytes  b"LRPF"
    version u32      1
    dtype   u32      1 = float64
    d       u32      feature dimension
    n       u64      record count
    payload n records of: label u32, then d float64 values
    checksum u64     FNV-1a (64-bit) over the payload bytes
"""

import struct

import numpy as np

MAGIC = b"LRPF"
VERSION = 1
DTYPE_FLOAT64 = 1
_HEADER = struct.Struct("<4sIIIQ")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data):
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def write_features(path, labels, X):
    """Write a (d x n) float matrix with one integer label per column."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.uint32)
    if X.ndim != 2:
        raise ValueError("X must be a d x n matrix")
    d, n = X.shape
    if labels.shape != (n,):
        raise ValueError("one label per column required")
    rec = np.zeros(n, dtype=np.dtype([("label", "<u4"), ("x", "<f8", (d,))]))
    rec["label"] = labels
    rec["x"] = X.T
    payload = rec.tobytes()
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, DTYPE_FLOAT64, d, n))
        f.write(payload)
        f.write(struct.pack("<Q", fnv1a64(payload)))
