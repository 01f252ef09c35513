"""Channel and band importance profiles and their drift across sessions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core import GLOBAL_BAND, AdditiveModel

__all__ = [
    "N_BINS",
    "BIN_LOWS",
    "ImportanceProfile",
    "channel_importance",
    "band_importance",
    "normalized_variance",
    "temporal_differences",
    "band_center_of_mass",
    "importance_profile",
    "class_bandpower_summary",
]

BIN_LOWS = np.arange(GLOBAL_BAND.low_hz, GLOBAL_BAND.high_hz)
N_BINS = BIN_LOWS.size


def _alphas(model: AdditiveModel, absolute: bool) -> np.ndarray:
    a = np.array([t.alpha for t in model.active_terms], dtype=np.float64)
    return np.abs(a) if absolute else a


def channel_importance(model: AdditiveModel, absolute: bool = False) -> np.ndarray:
    """Sum of ``alpha_k`` over the selected terms whose channel subset holds each channel.

    ``absolute=True`` sums ``|alpha_k|`` instead of the signed weights.
    """
    out = np.zeros(model.n_channels)
    for a, term in zip(_alphas(model, absolute), model.active_terms):
        out += a * term.precondition.channels.mask
    return out


def band_importance(model: AdditiveModel, absolute: bool = False) -> np.ndarray:
    """Per-Hz importance: unit bin ``[l, l+1)`` accumulates ``alpha_k`` of every band containing it."""
    out = np.zeros(N_BINS)
    for a, term in zip(_alphas(model, absolute), model.active_terms):
        b = term.precondition.band
        out[b.low_hz - GLOBAL_BAND.low_hz: b.high_hz - GLOBAL_BAND.low_hz] += a
    return out


def normalized_variance(importance) -> float:
    """Population variance of the importance vector after scaling it to sum 1."""
    v = np.asarray(importance, dtype=np.float64)
    total = v.sum()
    if total == 0 or not np.isfinite(total):
        raise ValueError("empty profile")
    return float(np.var(v / total))


def band_center_of_mass(band_imp) -> float:
    """Importance-weighted mean of the unit-bin centers, in Hz."""
    w = np.asarray(band_imp, dtype=np.float64)
    if w.shape != (N_BINS,):
        raise ValueError(f"expected {N_BINS} bins")
    total = w.sum()
    if total == 0 or not np.isfinite(total):
        raise ValueError("empty profile")
    return float((BIN_LOWS + 0.5) @ w / total)


@dataclass(frozen=True, eq=False)
class ImportanceProfile:
    session_index: int
    channel_importance: np.ndarray
    band_importance: np.ndarray
    channel_variance: float = float("nan")

    def __post_init__(self):
        ch = np.array(self.channel_importance, dtype=np.float64)
        bd = np.array(self.band_importance, dtype=np.float64)
        if bd.shape != (N_BINS,):
            raise ValueError(f"band importance needs {N_BINS} bins")
        if not (np.isfinite(ch).all() and np.isfinite(bd).all()):
            raise ValueError("importance vectors must be finite")
        object.__setattr__(self, "channel_importance", ch)
        object.__setattr__(self, "band_importance", bd)

    @property
    def band_com(self) -> float:
        try:
            return band_center_of_mass(self.band_importance)
        except ValueError:
            return float("nan")

    def to_dict(self):
        return {"session_index": self.session_index,
                "channel_importance": self.channel_importance.tolist(),
                "band_importance": self.band_importance.tolist(),
                "channel_variance": self.channel_variance}

    @classmethod
    def from_dict(cls, d):
        return cls(d["session_index"], d["channel_importance"], d["band_importance"],
                   d["channel_variance"])


def importance_profile(model: AdditiveModel, session_index: int = 0,
                       absolute: bool = False) -> ImportanceProfile:
    ch = channel_importance(model, absolute)
    try:
        var = normalized_variance(ch)
    except ValueError:
        var = float("nan")
    return ImportanceProfile(session_index, ch, band_importance(model, absolute), var)


def temporal_differences(profiles, targets, kind: str = "channel") -> dict:
    """Deviation of each target's importance from its mean over sessions.

    ``targets`` are channel indices (``kind="channel"``) or unit-bin indices
    (``kind="band"``).  Each entry holds the difference series, the Spearman
    correlation of the raw series with session index, and a ``constant``
    flag; constant series report a correlation of 0.
    """
    if len(profiles) < 2:
        raise ValueError("need at least two profiles")
    attr = {"channel": "channel_importance", "band": "band_importance"}[kind]
    vectors = [getattr(p, attr) for p in profiles]
    if len({v.shape for v in vectors}) != 1:
        raise ValueError("importance vectors differ in length")
    mat = np.stack(vectors)
    sessions = np.array([p.session_index for p in profiles])
    out = {}
    for tgt in targets:
        series = mat[:, tgt]
        constant = bool(np.ptp(series) == 0)
        rho = 0.0 if constant else float(stats.spearmanr(sessions, series)[0])
        out[tgt] = {"differences": series - series.mean(), "spearman": rho, "constant": constant}
    return out


def class_bandpower_summary(dataset, bands) -> dict:
    """Class-averaged log band power per (band, channel), for external plotting."""
    from .features import extract_bandpower_baseline

    feats = np.stack([extract_bandpower_baseline(t, bands, dataset.sample_rate_hz)
                      for t in dataset.trials])
    y = dataset.labels
    shape = (len(bands), dataset.n_channels)
    return {c: feats[y == c].mean(axis=0).reshape(shape) for c in (-1, 1)}
