"""Synthetic sessions with a planted spatial-spectral class signature.

Every channel carries band-limited background noise.  Planted channels
additionally carry a narrowband component confined to the planted band whose
amplitude depends on the class, so the class difference is a variance shift
that CSP can pick up only through the planted channels and band.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import DEFAULT_CHANNELS, GLOBAL_BAND, Band, ChannelSet, SessionDataset
from .dsp import band_bin_mask

__all__ = ["PlantSpec", "DriftSchedule", "generate_session", "generate_drift_series",
           "interpolate_band", "migrate_channels"]

DELTA = 0.5


@dataclass(frozen=True)
class PlantSpec:
    """Ground truth for one synthetic session.

    ``snr`` is the power of the planted component at the class-average
    amplitude ``a`` over the (unit) broadband background power, so
    ``a**2 = snr``.  ``noise_jitter`` is the log-normal sigma of a per-trial,
    per-channel gain on the background and ``amplitude_jitter`` the same for
    the planted component; both gains have unit mean power.
    """

    planted_channels: ChannelSet
    planted_band: Band
    snr: float = 5.0
    n_trials: int = 120
    n_samples: int = 1024
    sample_rate_hz: float = 256.0
    seed: int = 0
    channel_names: tuple = DEFAULT_CHANNELS
    noise_jitter: float = 0.0
    amplitude_jitter: float = 0.0
    shuffle_labels: bool = False

    def __post_init__(self):
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if self.planted_channels.n_channels != len(self.channel_names):
            raise ValueError("planted channel mask does not match channel_names")
        if self.n_trials < 2 or self.n_trials % 2:
            raise ValueError("n_trials must be even and >= 2")
        if not self.snr > 0:
            raise ValueError("snr must be positive")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if self.noise_jitter < 0 or self.amplitude_jitter < 0:
            raise ValueError("jitter must be non-negative")
        band_bin_mask(self.n_samples, self.sample_rate_hz, GLOBAL_BAND)

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)

    def to_dict(self):
        return {"planted_channels": [self.channel_names[i] for i in self.planted_channels.indices],
                "planted_band": [self.planted_band.low_hz, self.planted_band.high_hz],
                "snr": self.snr, "n_trials": self.n_trials, "n_samples": self.n_samples,
                "sample_rate_hz": self.sample_rate_hz, "seed": self.seed,
                "channel_names": list(self.channel_names), "noise_jitter": self.noise_jitter,
                "amplitude_jitter": self.amplitude_jitter, "shuffle_labels": self.shuffle_labels}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        names = tuple(d.pop("channel_names", DEFAULT_CHANNELS))
        planted = d.pop("planted_channels")
        if all(isinstance(c, str) for c in planted):
            mask = ChannelSet.from_names(planted, names)
        else:
            mask = ChannelSet(planted, min_channels=1)
        band = Band(*d.pop("planted_band"))
        return cls(mask, band, channel_names=names, **d)


def _band_noise(rng, shape, n_samples, keep) -> np.ndarray:
    """Gaussian noise confined to the ``keep`` rfft bins, unit expected power.

    ``shape`` is ``(n_trials, n_channels)``; output is
    ``(n_trials, n_samples, n_channels)``.
    """
    n_bins = keep.size
    spec = np.zeros((shape[0], n_bins, shape[1]), dtype=np.complex128)
    k = int(keep.sum())
    spec[:, keep, :] = rng.standard_normal((shape[0], k, shape[1])) \
        + 1j * rng.standard_normal((shape[0], k, shape[1]))
    x = np.fft.irfft(spec, n=n_samples, axis=1)
    # each kept (non-DC, non-Nyquist) bin contributes (2/n)^2 * E|X|^2 / 2 = 4/n^2
    return x * (n_samples / (2.0 * np.sqrt(k)))


def _unit_power_gain(rng, sigma, shape):
    # log-normal amplitude gain with E[gain^2] = 1
    return np.exp(sigma * rng.standard_normal(shape) - sigma ** 2)


def generate_session(spec: PlantSpec, session_index: int = 0) -> SessionDataset:
    """Draw a balanced, shuffled session from ``spec``; deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    n, t, c = spec.n_trials, spec.n_samples, spec.n_channels
    g_keep = band_bin_mask(t, spec.sample_rate_hz, GLOBAL_BAND)
    p_keep = band_bin_mask(t, spec.sample_rate_hz, spec.planted_band)

    labels = rng.permutation(np.repeat([1, -1], n // 2))
    noise = _band_noise(rng, (n, c), t, g_keep)
    if spec.noise_jitter > 0:
        noise *= _unit_power_gain(rng, spec.noise_jitter, (n, 1, c))

    idx = spec.planted_channels.indices
    planted = _band_noise(rng, (n, idx.size), t, p_keep)
    amp = np.sqrt(spec.snr) * (1.0 + DELTA * labels)[:, None]
    if spec.amplitude_jitter > 0:
        amp = amp * _unit_power_gain(rng, spec.amplitude_jitter, (n, idx.size))
    data = noise
    data[:, :, idx] += planted * amp[:, None, :]
    if spec.shuffle_labels:
        labels = rng.permutation(labels)
    return SessionDataset.from_arrays(data, labels, spec.sample_rate_hz, spec.channel_names,
                                      session_index)


@dataclass(frozen=True)
class DriftSchedule:
    sessions: tuple
    band_centers: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "sessions", tuple(self.sessions))
        if not self.sessions:
            raise ValueError("empty drift schedule")
        if len({s.n_channels for s in self.sessions}) != 1:
            raise ValueError("inconsistent channel count across sessions")
        object.__setattr__(self, "band_centers", tuple(s.planted_band.center for s in self.sessions))

    def __len__(self):
        return len(self.sessions)

    def to_dict(self):
        return {"sessions": [s.to_dict() for s in self.sessions]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(PlantSpec.from_dict(s) for s in d["sessions"]))


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def interpolate_band(start: Band, end: Band, n_sessions: int) -> list:
    """Linearly move the lower edge (rounded half-up), keeping the width."""
    if start.width != end.width:
        raise ValueError("start and end bands must have the same width")
    if n_sessions < 2:
        raise ValueError("n_sessions must be >= 2")
    return [Band(lo, lo + start.width) for lo in
            (_round_half_up(start.low_hz + (end.low_hz - start.low_hz) * t / (n_sessions - 1))
             for t in range(n_sessions))]


def migrate_channels(start: ChannelSet, end: ChannelSet, n_sessions: int) -> list:
    """Swap channels of ``start`` for those of ``end`` one step at a time.

    Channels only in ``start`` are replaced in ascending index order by
    channels only in ``end``; after ``t`` of ``n_sessions - 1`` steps,
    ``round_half_up(t * n_swap / (n_sessions - 1))`` swaps have happened.
    """
    if start.size != end.size or start.n_channels != end.n_channels:
        raise ValueError("start and end channel sets must have equal size")
    leaving = [i for i in start.indices if not end.mask[i]]
    arriving = [i for i in end.indices if not start.mask[i]]
    out = []
    for t in range(n_sessions):
        m = _round_half_up(t * len(leaving) / (n_sessions - 1))
        mask = start.mask.copy()
        mask[leaving[:m]] = False
        mask[arriving[:m]] = True
        out.append(ChannelSet(mask, min_channels=1))
    return out


def generate_drift_series(n_sessions: int, start_band: Band, end_band: Band,
                          start_channels: ChannelSet, end_channels: ChannelSet,
                          base: PlantSpec) -> DriftSchedule:
    """Per-session specs drifting from the start to the end configuration.

    Session ``t`` is seeded with ``base.seed + t``.
    """
    bands = interpolate_band(start_band, end_band, n_sessions)
    channels = migrate_channels(start_channels, end_channels, n_sessions)
    return DriftSchedule(tuple(replace(base, planted_channels=ch, planted_band=b, seed=base.seed + t)
                               for t, (b, ch) in enumerate(zip(bands, channels))))
