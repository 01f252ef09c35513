"""Domain types shared across the package.

All types are frozen dataclasses.  Arrays held by them are copied and marked
read-only on construction, so instances can be shared between workers.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from functools import cached_property
from typing import TYPE_CHECKING, Any, Sequence

import numpy as np

if TYPE_CHECKING:
    from .boost import BaseLearner

__all__ = [
    "DEFAULT_CHANNELS",
    "GLOBAL_BAND",
    "MODES",
    "TrialMatrix",
    "SessionDataset",
    "ChannelSet",
    "Band",
    "Precondition",
    "Term",
    "AdditiveModel",
    "BoostConfig",
    "validate_dataset",
    "sign_label",
]

DEFAULT_CHANNELS = ("C5", "C6", "FC3", "FC4", "C3", "C4",
                    "CP3", "CP4", "P3", "P4", "C1", "C2")
DEFAULT_MIN_CHANNELS = 4
MODES = ("PLAIN", "SB", "FB", "SFB")


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def sign_label(x):
    """Map real scores to labels in {-1, +1}; zero maps to +1."""
    x = np.asarray(x)
    out = np.where(x >= 0, 1, -1).astype(np.int64)
    return int(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class TrialMatrix:
    """One trial: a time-major ``(n_samples, n_channels)`` block and a label."""

    samples: np.ndarray
    label: int

    def __post_init__(self):
        arr = _frozen_array(self.samples)
        if arr.ndim != 2:
            raise ValueError("trial samples must be a 2-D (time, channel) array")
        if arr.shape[0] < 2 or arr.shape[1] < 1:
            raise ValueError(f"invalid trial shape {arr.shape}")
        if int(self.label) not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label!r}")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "label", int(self.label))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    def with_samples(self, samples) -> "TrialMatrix":
        return TrialMatrix(samples, self.label)

    def __eq__(self, other):
        if not isinstance(other, TrialMatrix):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.samples, other.samples)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SessionDataset:
    """All trials recorded in one session (day ``session_index``)."""

    trials: tuple
    sample_rate_hz: float
    channel_names: tuple
    session_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "trials", tuple(self.trials))
        object.__setattr__(self, "channel_names", tuple(str(c) for c in self.channel_names))
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "session_index", int(self.session_index))
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.session_index < 0:
            raise ValueError("session_index must be non-negative")

    @classmethod
    def from_arrays(cls, data, labels, sample_rate_hz, channel_names=None, session_index=0):
        """Build a dataset from a ``(n_trials, n_samples, n_channels)`` array."""
        data = np.asarray(data, dtype=np.float64)
        if channel_names is None:
            n_ch = data.shape[2]
            channel_names = DEFAULT_CHANNELS if n_ch == len(DEFAULT_CHANNELS) else \
                tuple(f"ch{i}" for i in range(n_ch))
        trials = tuple(TrialMatrix(x, int(y)) for x, y in zip(data, labels))
        return cls(trials, sample_rate_hz, channel_names, session_index)

    def __len__(self):
        return len(self.trials)

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)

    @property
    def n_samples(self) -> int:
        return self.trials[0].n_samples

    @cached_property
    def data(self) -> np.ndarray:
        """Stacked samples, shape ``(n_trials, n_samples, n_channels)``."""
        return _frozen_array(np.stack([t.samples for t in self.trials]))

    @cached_property
    def labels(self) -> np.ndarray:
        return _frozen_array([t.label for t in self.trials], dtype=np.int64)

    def subset(self, indices) -> "SessionDataset":
        return SessionDataset(tuple(self.trials[i] for i in indices), self.sample_rate_hz,
                              self.channel_names, self.session_index)

    def __eq__(self, other):
        if not isinstance(other, SessionDataset):
            return NotImplemented
        return (self.sample_rate_hz == other.sample_rate_hz
                and self.channel_names == other.channel_names
                and self.session_index == other.session_index
                and self.trials == other.trials)

    __hash__ = None


def validate_dataset(d: SessionDataset) -> list:
    """Return the list of violated dataset invariants; empty means valid."""
    report = []
    if len(d.trials) == 0:
        return ["empty dataset"]
    channel_counts = {t.n_channels for t in d.trials}
    if channel_counts != {len(d.channel_names)}:
        report.append("channel count mismatch")
    if len({t.n_samples for t in d.trials}) > 1:
        report.append("sample count mismatch")
    if len(set(d.channel_names)) != len(d.channel_names):
        report.append("duplicate channel names")
    if not all(np.isfinite(t.samples).all() for t in d.trials):
        report.append("non-finite samples")
    if len({t.label for t in d.trials}) < 2:
        report.append("single-class dataset")
    return report


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Binary channel mask.

    ``min_channels`` only applies at construction; pass 1 for masks that do
    not feed CSP (e.g. plain projections).
    """

    mask: np.ndarray
    min_channels: int = field(default=DEFAULT_MIN_CHANNELS, compare=False)
    _key: int = field(init=False, repr=False, compare=False, default=0)

    def __post_init__(self):
        mask = _frozen_array(np.asarray(self.mask).astype(bool), dtype=bool)
        if mask.ndim != 1 or mask.size == 0:
            raise ValueError("channel mask must be a non-empty 1-D vector")
        if mask.sum() < self.min_channels:
            raise ValueError(f"channel set has {int(mask.sum())} channels, "
                             f"fewer than min_channels={self.min_channels}")
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "_key", int(sum(1 << int(i) for i in np.flatnonzero(mask))))

    @classmethod
    def full(cls, n_channels: int) -> "ChannelSet":
        return cls(np.ones(n_channels, dtype=bool), min_channels=1)

    @classmethod
    def from_key(cls, key: int, n_channels: int, min_channels: int = DEFAULT_MIN_CHANNELS):
        return cls(((key >> np.arange(n_channels)) & 1).astype(bool), min_channels)

    @classmethod
    def from_names(cls, names, channel_names, min_channels: int = 1):
        names = set(names)
        unknown = names - set(channel_names)
        if unknown:
            raise ValueError(f"unknown channels: {sorted(unknown)}")
        return cls([c in names for c in channel_names], min_channels)

    @property
    def n_channels(self) -> int:
        return self.mask.size

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def key(self) -> int:
        """Integer value with bit ``i`` set when channel ``i`` is selected."""
        return self._key

    @property
    def is_full(self) -> bool:
        return bool(self.mask.all())

    def __eq__(self, other):
        if not isinstance(other, ChannelSet):
            return NotImplemented
        return np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.n_channels, self._key))

    def __repr__(self):
        return f"ChannelSet({''.join('1' if m else '0' for m in self.mask)})"

    def to_dict(self):
        return {"mask": [int(m) for m in self.mask]}

    @classmethod
    def from_dict(cls, d, min_channels: int = 1):
        return cls(d["mask"], min_channels)


@dataclass(frozen=True, order=True)
class Band:
    """Integer frequency band ``[low_hz, high_hz]`` inside 5-40 Hz."""

    low_hz: int
    high_hz: int

    def __post_init__(self):
        lo, hi = int(self.low_hz), int(self.high_hz)
        if (lo, hi) != (self.low_hz, self.high_hz):
            raise ValueError("band edges must be integers")
        if not (5 <= lo < hi <= 40):
            raise ValueError(f"band [{lo},{hi}] outside 5-40 Hz")
        if not (5 <= hi - lo <= 35):
            raise ValueError(f"band [{lo},{hi}] violates the 5-35 Hz length constraint")
        object.__setattr__(self, "low_hz", lo)
        object.__setattr__(self, "high_hz", hi)

    @property
    def width(self) -> int:
        return self.high_hz - self.low_hz

    @property
    def center(self) -> float:
        return 0.5 * (self.low_hz + self.high_hz)

    def covers_unit(self, low: int) -> bool:
        """True if the unit interval ``[low, low+1]`` lies inside the band."""
        return self.low_hz <= low and low + 1 <= self.high_hz

    def __repr__(self):
        return f"Band({self.low_hz},{self.high_hz})"

    def to_dict(self):
        return {"low_hz": self.low_hz, "high_hz": self.high_hz}

    @classmethod
    def from_dict(cls, d):
        return cls(d["low_hz"], d["high_hz"])


GLOBAL_BAND = Band(5, 40)


@dataclass(frozen=True)
class Precondition:
    """A (channel subset, band) pair identifying one base learner."""

    channels: ChannelSet
    band: Band
    mode: str = "SFB"

    def __post_init__(self):
        mode = self.mode.upper()
        if mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        if mode in ("SB", "PLAIN") and self.band != GLOBAL_BAND:
            raise ValueError(f"{mode} precondition must use the global band")
        if mode in ("FB", "PLAIN") and not self.channels.is_full:
            raise ValueError(f"{mode} precondition must use the full channel set")

    @classmethod
    def plain(cls, n_channels: int) -> "Precondition":
        return cls(ChannelSet.full(n_channels), GLOBAL_BAND, "PLAIN")

    @property
    def sort_key(self) -> tuple:
        """Canonical order: channel mask value, then band edges."""
        return (self.channels.key, self.band.low_hz, self.band.high_hz)

    @property
    def is_default(self) -> bool:
        return self.channels.is_full and self.band == GLOBAL_BAND

    def to_dict(self):
        return {"channels": self.channels.to_dict()["mask"], "band": [self.band.low_hz, self.band.high_hz],
                "mode": self.mode}

    @classmethod
    def from_dict(cls, d):
        return cls(ChannelSet(d["channels"], min_channels=1), Band(*d["band"]), d["mode"])


@dataclass(frozen=True)
class Term:
    alpha: float
    learner: "BaseLearner"
    precondition: Precondition


@dataclass(frozen=True)
class AdditiveModel:
    """Intercept plus an ordered list of weighted base learners.

    Only the first ``selected_k`` terms take part in evaluation.
    """

    intercept: float
    terms: tuple = ()
    selected_k: int = 0
    mode: str = "PLAIN"
    sample_rate_hz: float = 256.0
    channel_names: tuple = DEFAULT_CHANNELS

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if not 0 <= self.selected_k <= len(self.terms):
            raise ValueError("selected_k must lie in [0, len(terms)]")
        if not np.isfinite(self.intercept) or not all(np.isfinite(t.alpha) for t in self.terms):
            raise ValueError("model weights must be finite")

    @property
    def active_terms(self) -> tuple:
        return self.terms[: self.selected_k]

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)


@dataclass(frozen=True)
class BoostConfig:
    k_max: int = 60
    subset_fraction: float = 0.7
    epsilon: float = 0.01
    pool_cap_multiple: int = 20
    candidate_sample_size: int = 256
    csp_dim: int = 4
    svm_cost: float = 1.0
    validation_fraction: float = 0.1
    rng_seed: int = 0
    min_channels: int = DEFAULT_MIN_CHANNELS

    def __post_init__(self):
        if self.k_max < 0:
            raise ValueError("k_max must be non-negative")
        if not 0 < self.subset_fraction <= 1:
            raise ValueError("subset_fraction must lie in (0, 1]")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.pool_cap_multiple < 1:
            raise ValueError("pool_cap_multiple must be >= 1")
        if self.candidate_sample_size < 1:
            raise ValueError("candidate_sample_size must be >= 1")
        if self.csp_dim < 2 or self.csp_dim % 2:
            raise ValueError("csp_dim must be a positive even integer")
        if self.csp_dim > 2 * self.min_channels:
            raise ValueError("csp_dim must not exceed 2 * min_channels")
        if not self.svm_cost > 0:
            raise ValueError("svm_cost must be positive")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "BoostConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown BoostConfig keys: {sorted(unknown)}")
        return cls(**d)

    def replace(self, **changes: Any) -> "BoostConfig":
        return BoostConfig(**{**self.to_dict(), **changes})
