"""EEGB trial archives and JSON/CSV exports.

EEGB layout (all little-endian)::

    magic        4 bytes  b"EEGB"
    version      uint32   1
    n_trials     uint32
    n_samples    uint32
    n_channels   uint32
    sample_rate  float32
    channel names, n_channels times: uint32 byte length + UTF-8 bytes
    labels       n_trials x int8 (-1 or +1)
    samples      float32, trial-major, then time, then channel

The session index is not part of the format; readers take it as an argument.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .core import AdditiveModel, Precondition, SessionDataset, Term, validate_dataset

__all__ = [
    "MAGIC",
    "VERSION",
    "MODEL_FORMAT_VERSION",
    "write_eegb",
    "read_eegb",
    "eegb_header_size",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "dump_json",
]

MAGIC = b"EEGB"
VERSION = 1
MODEL_FORMAT_VERSION = 1
_FIXED = struct.Struct("<4sIIIIf")


def eegb_header_size(channel_names, n_trials: int) -> int:
    names = sum(4 + len(c.encode("utf-8")) for c in channel_names)
    return _FIXED.size + names + n_trials


def write_eegb(d: SessionDataset, path) -> None:
    if len(d.trials) == 0:
        raise ValueError("empty dataset")
    problems = [p for p in validate_dataset(d) if p != "single-class dataset"]
    if problems:
        raise ValueError("invalid dataset: " + ", ".join(problems))
    parts = [_FIXED.pack(MAGIC, VERSION, len(d), d.n_samples, d.n_channels, d.sample_rate_hz)]
    for name in d.channel_names:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
    parts.append(d.labels.astype("<i1").tobytes())
    parts.append(d.data.astype("<f4").tobytes(order="C"))
    Path(path).write_bytes(b"".join(parts))


def read_eegb(path, session_index: int = 0) -> SessionDataset:
    buf = Path(path).read_bytes()
    if len(buf) < _FIXED.size or buf[:4] != MAGIC:
        raise ValueError("not an EEGB file")
    magic, version, n_trials, n_samples, n_channels, fs = _FIXED.unpack_from(buf, 0)
    if version != VERSION:
        raise ValueError(f"unsupported EEGB version {version}")
    if min(n_trials, n_samples, n_channels) == 0:
        raise ValueError("EEGB counts must be positive")
    pos = _FIXED.size
    names = []
    for _ in range(n_channels):
        if pos + 4 > len(buf):
            raise ValueError("length mismatch")
        (length,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        if pos + length > len(buf):
            raise ValueError("length mismatch")
        names.append(buf[pos:pos + length].decode("utf-8"))
        pos += length
    payload = 4 * n_trials * n_samples * n_channels
    if len(buf) != pos + n_trials + payload:
        raise ValueError("length mismatch")
    labels = np.frombuffer(buf, dtype="<i1", count=n_trials, offset=pos).astype(np.int64)
    if not np.isin(labels, (-1, 1)).all():
        raise ValueError("invalid label")
    pos += n_trials
    data = np.frombuffer(buf, dtype="<f4", count=n_trials * n_samples * n_channels, offset=pos)
    data = data.reshape(n_trials, n_samples, n_channels).astype(np.float64)
    return SessionDataset.from_arrays(data, labels, float(fs), tuple(names), session_index)


# --------------------------------------------------------------------------
# models

def model_to_dict(model: AdditiveModel) -> dict:
    return {
        "format": "ssboost-model",
        "version": MODEL_FORMAT_VERSION,
        "mode": model.mode,
        "intercept": model.intercept,
        "selected_k": model.selected_k,
        "sample_rate_hz": model.sample_rate_hz,
        "channel_names": list(model.channel_names),
        "terms": [{"alpha": t.alpha, "precondition": t.precondition.to_dict(),
                   "learner": t.learner.to_dict()} for t in model.terms],
    }


def model_from_dict(d: dict) -> AdditiveModel:
    from .boost import BaseLearner

    if d.get("format") != "ssboost-model":
        raise ValueError("not a model file")
    if d.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model version {d.get('version')}")
    terms = tuple(Term(t["alpha"], BaseLearner.from_dict(t["learner"]),
                       Precondition.from_dict(t["precondition"])) for t in d["terms"])
    return AdditiveModel(d["intercept"], terms, d["selected_k"], d["mode"], d["sample_rate_hz"],
                         tuple(d["channel_names"]))


def dump_json(obj, path) -> None:
    """Write JSON deterministically (sorted keys, fixed separators)."""
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def save_model(model: AdditiveModel, path) -> None:
    dump_json(model_to_dict(model), path)


def load_model(path) -> AdditiveModel:
    return model_from_dict(json.loads(Path(path).read_text()))
