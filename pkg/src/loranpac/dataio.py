"""Binary feature-file format (LRPF v1), learner checkpoints, and synthetic
dataset generation.

LRPF layout (little-endian):
    magic   4 bytes  b"LRPF"
    version u32      1
    dtype   u32      1 = float64 (other values reserved)
    d       u32      feature dimension
    n       u64      record count
    payload n records of: label u32, then d float64 values
    checksum u64     FNV-1a (64-bit) over the payload bytes
"""

import json
import struct
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import FormatError, InvalidInputError

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
    """Write a (d x n) feature matrix with per-column integer labels."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.uint32)
    if X.ndim != 2:
        raise InvalidInputError("X must be a d x n matrix")
    d, n = X.shape
    if labels.shape != (n,):
        raise InvalidInputError("one label per column required")
    rec = np.zeros(n, dtype=np.dtype([("label", "<u4"), ("x", "<f8", (d,))]))
    rec["label"] = labels
    rec["x"] = X.T
    payload = rec.tobytes()
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, DTYPE_FLOAT64, d, n))
        f.write(payload)
        f.write(struct.pack("<Q", fnv1a64(payload)))


def read_features(path):
    """Read an LRPF file; returns (labels, X) with X of shape (d, n)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError("file shorter than header", offset=len(raw))
    magic, version, dtype, d, n = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    if dtype != DTYPE_FLOAT64:
        raise FormatError(f"unsupported dtype tag {dtype}", offset=8)
    payload_len = n * (4 + 8 * d)
    expected = _HEADER.size + payload_len + 8
    if len(raw) != expected:
        raise FormatError(
            f"file length {len(raw)} != expected {expected}", offset=len(raw)
        )
    payload = raw[_HEADER.size : _HEADER.size + payload_len]
    (stored,) = struct.unpack_from("<Q", raw, _HEADER.size + payload_len)
    actual = fnv1a64(payload)
    if stored != actual:
        raise FormatError(
            f"checksum mismatch: stored {stored:#x}, computed {actual:#x}",
            offset=_HEADER.size + payload_len,
        )
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros((d, 0))
    rec = np.frombuffer(payload, dtype=np.dtype([("label", "<u4"), ("x", "<f8", (d,))]))
    return rec["label"].astype(np.int64), np.ascontiguousarray(rec["x"].T)


# ---------------------------------------------------------------------------
# synthetic data


@dataclass
class SyntheticSpec:
    model: str  # "gaussian-mixture" | "planted-linear"
    d: int
    classes: int
    samples_per_class: int
    test_samples_per_class: int = 20
    noise: float = 0.0
    spectrum: Optional[list] = None  # planted singular values of the train block
    separation: float = 10.0  # mixture mean separation (in noise std units)
    seed: int = 0

    def __post_init__(self):
        if self.model not in ("gaussian-mixture", "planted-linear"):
            raise InvalidInputError(f"unknown synthetic model {self.model!r}")
        if self.spectrum is not None and any(s < 0 for s in self.spectrum):
            raise InvalidInputError("planted spectrum must be non-negative")


def _random_orthonormal(rng, rows, cols):
    Q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    return Q


def _planted_linear(spec, rng):
    M = spec.classes * spec.samples_per_class
    sigma = np.asarray(
        spec.spectrum if spec.spectrum is not None else np.linspace(10.0, 1.0, min(spec.d, M)),
        dtype=np.float64,
    )
    r = len(sigma)
    if r > min(spec.d, M):
        raise InvalidInputError(f"spectrum length {r} exceeds min(d, M)={min(spec.d, M)}")
    U = _random_orthonormal(rng, spec.d, r)
    V = _random_orthonormal(rng, M, r)
    H = (U * sigma) @ V.T
    W_star = rng.standard_normal((spec.classes, spec.d)) / np.sqrt(spec.d)
    scores = W_star @ H + spec.noise * rng.standard_normal((spec.classes, M))
    labels = np.argmax(scores, axis=0)
    # columns drawn from a Gaussian whose covariance matches (1/M) H H^T
    n_test = spec.classes * spec.test_samples_per_class
    H_test = (U * (sigma / np.sqrt(M))) @ rng.standard_normal((r, n_test))
    test_labels = np.argmax(W_star @ H_test, axis=0)
    sidecar = {"W_star": W_star, "U": U, "sigma": sigma}
    return (labels, H), (test_labels, H_test), sidecar


def _gaussian_mixture(spec, rng):
    means = spec.separation * _random_orthonormal(rng, spec.d, min(spec.d, spec.classes))
    if spec.classes > spec.d:
        raise InvalidInputError("gaussian-mixture needs classes <= d")
    std = spec.noise if spec.noise > 0 else 1.0

    def draw(per_class):
        labels = np.repeat(np.arange(spec.classes), per_class)
        X = means[:, labels] + std * rng.standard_normal((spec.d, len(labels)))
        return labels, X

    return draw(spec.samples_per_class), draw(spec.test_samples_per_class), {"means": means}


def gen_synthetic(spec, out_dir):
    """Generate a (train, test) FeatureFile pair plus a sidecar with the
    ground-truth quantities needed by the bound evaluators."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    if spec.model == "planted-linear":
        train, test, sidecar = _planted_linear(spec, rng)
    else:
        train, test, sidecar = _gaussian_mixture(spec, rng)
    write_features(out / "train.lrpf", train[0], train[1])
    write_features(out / "test.lrpf", test[0], test[1])
    np.savez(out / "sidecar.npz", **sidecar)
    manifest = {"format": "LRPF", "version": VERSION, "spec": asdict(spec)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out / "train.lrpf", out / "test.lrpf"


# ---------------------------------------------------------------------------
# learner checkpoints

CHECKPOINT_VERSION = 1


def save_checkpoint(path, learner):
    if learner.state is None:
        raise InvalidInputError("cannot checkpoint a learner before the first task")
    labels = np.array(sorted(learner.class_map, key=learner.class_map.get), dtype=np.int64)
    np.savez(
        path,
        version=CHECKPOINT_VERSION,
        E=learner.E,
        zeta=learner.policy.zeta,
        r_max=learner.policy.r_max,
        U=learner.state.U,
        S=learner.state.S,
        M=learner.state.M,
        t=learner.state.t,
        k_history=np.array(learner.state.k_history, dtype=np.int64),
        J=learner.cov.J,
        class_labels=labels,
    )


def load_checkpoint(path):
    from .itsvd import TruncatedFactorState
    from .solver import ContinualLearner, LabelFeatureCovariance, TruncationPolicy

    with np.load(path) as z:
        if int(z["version"]) != CHECKPOINT_VERSION:
            raise FormatError(f"unsupported checkpoint version {int(z['version'])}")
        learner = ContinualLearner(
            E=int(z["E"]),
            policy=TruncationPolicy(zeta=float(z["zeta"]), r_max=int(z["r_max"])),
        )
        learner.state = TruncatedFactorState(
            U=z["U"],
            S=z["S"],
            M=int(z["M"]),
            t=int(z["t"]),
            k_history=tuple(int(k) for k in z["k_history"]),
        )
        learner.cov = LabelFeatureCovariance(J=z["J"], n_classes=z["J"].shape[0])
        learner.class_map = {int(lab): i for i, lab in enumerate(z["class_labels"])}
    return learner
