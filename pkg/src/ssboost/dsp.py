"""Deterministic trial preprocessing: detrend, brickwall band-pass, channel
projection and trace-normalized spatial covariance."""
from __future__ import annotations

import numpy as np
from scipy import signal

from .core import GLOBAL_BAND, Band, ChannelSet, TrialMatrix

__all__ = [
    "detrend",
    "bandpass",
    "project_channels",
    "covariance_normalized",
    "band_bin_mask",
    "band_edges",
    "bandpass_array",
    "preprocess_array",
]

_FREQ_TOL = 1e-9


def _check_finite(x: np.ndarray):
    if not np.isfinite(x).all():
        raise ValueError("non-finite samples")


def detrend(t: TrialMatrix) -> TrialMatrix:
    """Subtract the least-squares line (intercept and slope) from every channel."""
    _check_finite(t.samples)
    return t.with_samples(signal.detrend(t.samples, axis=0, type="linear"))


def band_edges(band) -> tuple[float, float]:
    """``(low, high)`` of a :class:`Band` or of a plain pair.

    Plain pairs allow analysis bands (e.g. narrow baselines) that are not
    members of any precondition universe.
    """
    if isinstance(band, Band):
        return float(band.low_hz), float(band.high_hz)
    lo, hi = (float(v) for v in band)
    if not 0 <= lo < hi:
        raise ValueError(f"invalid band edges ({lo}, {hi})")
    return lo, hi


def band_bin_mask(n_samples: int, fs: float, band) -> np.ndarray:
    """Boolean mask over ``rfft`` bins whose frequency lies in ``band`` (inclusive)."""
    lo, hi = band_edges(band)
    if fs <= 2 * hi:
        raise ValueError("band above Nyquist")
    freqs = np.fft.rfftfreq(n_samples, d=1.0 / fs)
    return (freqs >= lo - _FREQ_TOL) & (freqs <= hi + _FREQ_TOL)


def bandpass_array(x: np.ndarray, band, fs: float, axis: int = -2) -> np.ndarray:
    """Zero-phase brickwall filter of a real array along its time ``axis``."""
    n = x.shape[axis]
    keep = band_bin_mask(n, fs, band)
    spec = np.fft.rfft(x, axis=axis)
    shape = [1] * spec.ndim
    shape[axis] = keep.size
    spec = spec * keep.reshape(shape)
    return np.fft.irfft(spec, n=n, axis=axis)


def bandpass(t: TrialMatrix, b, fs: float) -> TrialMatrix:
    """Keep only the FFT bins inside ``b``; the output is real and zero-phase."""
    _check_finite(t.samples)
    return t.with_samples(bandpass_array(t.samples, b, fs, axis=0))


def project_channels(t: TrialMatrix, s) -> TrialMatrix:
    """Select the columns of ``t`` where the mask is set, keeping their order."""
    mask = s.mask if isinstance(s, ChannelSet) else np.asarray(s).astype(bool)
    if mask.shape != (t.n_channels,):
        raise ValueError(f"mask length {mask.size} does not match {t.n_channels} channels")
    if not mask.any():
        raise ValueError("empty channel set")
    return t.with_samples(t.samples[:, mask])


def covariance_normalized(t: TrialMatrix) -> np.ndarray:
    """``X^T X / trace(X^T X)`` for the time-by-channel block ``X``."""
    x = t.samples
    c = x.T @ x
    tr = np.trace(c)
    if not tr > 0:
        raise ValueError("degenerate trial")
    c = c / tr
    return 0.5 * (c + c.T)


def preprocess_array(data: np.ndarray, fs: float, band: Band = GLOBAL_BAND) -> np.ndarray:
    """Linear detrend followed by the 5-40 Hz pre-filter.

    ``data`` has shape ``(..., n_samples, n_channels)``.
    """
    _check_finite(data)
    return bandpass_array(signal.detrend(data, axis=-2, type="linear"), band, fs, axis=-2)
