"""Channel-subset and band universes, and the preconditions built from them."""
from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Iterator

import numpy as np

from .core import GLOBAL_BAND, Band, BoostConfig, ChannelSet, Precondition

__all__ = [
    "BandUniverseSpec",
    "ConstraintReport",
    "MAX_ENUMERATION_CHANNELS",
    "count_channel_subsets",
    "enumerate_channel_subsets",
    "channel_subset_keys",
    "sample_channel_subsets",
    "generate_band_universe",
    "verify_band_constraints",
    "build_universe",
]

MAX_ENUMERATION_CHANNELS = 20


@dataclass(frozen=True)
class BandUniverseSpec:
    global_low: int = 5
    global_high: int = 40
    window_lengths: tuple = (5, 10, 15, 20, 25, 30, 35)
    strides: tuple = (2, 3, 4, 5, 5, 5, 5)

    def __post_init__(self):
        object.__setattr__(self, "window_lengths", tuple(int(w) for w in self.window_lengths))
        object.__setattr__(self, "strides", tuple(int(s) for s in self.strides))
        if len(self.window_lengths) != len(self.strides) or not self.window_lengths:
            raise ValueError("window_lengths and strides must be non-empty and aligned")
        if any(not 5 <= w <= 35 for w in self.window_lengths):
            raise ValueError("window lengths must lie in [5, 35]")
        if any(s < 1 for s in self.strides):
            raise ValueError("strides must be >= 1")
        if any(w > self.global_high - self.global_low for w in self.window_lengths):
            raise ValueError("window longer than the global band")
        Band(self.global_low, self.global_high)

    @property
    def global_band(self) -> Band:
        return Band(self.global_low, self.global_high)


def count_channel_subsets(n_channels: int, min_size: int) -> int:
    return sum(comb(n_channels, i) for i in range(min_size, n_channels + 1))


def _check_enumeration(n_channels: int, min_size: int):
    if n_channels > MAX_ENUMERATION_CHANNELS:
        raise ValueError("universe too large; use sampler")
    if not 1 <= min_size <= n_channels:
        raise ValueError("need 1 <= min_size <= n_channels")


def channel_subset_keys(n_channels: int, min_size: int) -> np.ndarray:
    """Ascending integer keys of every mask with at least ``min_size`` bits set."""
    _check_enumeration(n_channels, min_size)
    keys = np.arange(1 << n_channels, dtype=np.int64)
    popcount = np.zeros_like(keys)
    for bit in range(n_channels):
        popcount += (keys >> bit) & 1
    return keys[popcount >= min_size]


def enumerate_channel_subsets(n_channels: int, min_size: int) -> tuple[int, Iterator[ChannelSet]]:
    """Count and lazily enumerate valid channel masks in ascending key order.

    Bit ``i`` of a key corresponds to channel ``i``.
    """
    keys = channel_subset_keys(n_channels, min_size)

    def _iter():
        for k in keys:
            yield ChannelSet.from_key(int(k), n_channels, min_size)

    return int(keys.size), _iter()


def sample_channel_subsets(n_channels: int, min_size: int, q: int, seed: int) -> list:
    """``q`` distinct valid masks drawn uniformly; the full mask is always included.

    Returned in ascending key order.  ``q`` larger than the universe returns
    the whole universe.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    full = (1 << n_channels) - 1
    if n_channels > MAX_ENUMERATION_CHANNELS:
        return _sample_large(n_channels, min_size, q, seed)
    keys = channel_subset_keys(n_channels, min_size)
    if q >= keys.size:
        chosen = keys
    else:
        rng = np.random.default_rng(seed)
        others = keys[keys != full]
        chosen = np.sort(np.append(rng.choice(others, size=q - 1, replace=False), full))
    return [ChannelSet.from_key(int(k), n_channels, min_size) for k in chosen]


def _sample_large(n_channels: int, min_size: int, q: int, seed: int) -> list:
    # rejection sampling over uniform bit masks; only for universes too big to list
    if not 1 <= min_size <= n_channels or n_channels > 62:
        raise ValueError("need 1 <= min_size <= n_channels <= 62")
    if q >= count_channel_subsets(n_channels, min_size):
        raise ValueError("universe too large; use sampler")
    rng = np.random.default_rng(seed)
    full = (1 << n_channels) - 1
    chosen = {full}
    while len(chosen) < q:
        bits = rng.integers(0, 2, size=n_channels)
        if bits.sum() >= min_size:
            chosen.add(int(bits @ (1 << np.arange(n_channels, dtype=np.int64))))
    return [ChannelSet.from_key(k, n_channels, min_size) for k in sorted(chosen)]


def generate_band_universe(spec: BandUniverseSpec = BandUniverseSpec()) -> list:
    """Sliding-window sub-bands of the global band, with right-edge completion."""
    lo, hi = spec.global_low, spec.global_high
    edges = set()
    for w, s in zip(spec.window_lengths, spec.strides):
        edges.update((l, l + w) for l in range(lo, hi - w + 1, s))
        edges.add((hi - w, hi))
    return [Band(a, b) for a, b in sorted(edges)]


@dataclass(frozen=True)
class ConstraintReport:
    cover_ok: bool
    length_ok: bool
    overlap_ok: bool
    equal_counts: tuple

    @property
    def equal_ratio(self) -> float:
        lo = min(self.equal_counts)
        return float("inf") if lo == 0 else max(self.equal_counts) / lo

    def to_dict(self):
        return {"cover_ok": self.cover_ok, "length_ok": self.length_ok,
                "overlap_ok": self.overlap_ok, "equal_counts": list(self.equal_counts),
                "equal_min": min(self.equal_counts), "equal_max": max(self.equal_counts)}


def verify_band_constraints(bands, global_band: Band = GLOBAL_BAND) -> ConstraintReport:
    """Check Cover, Length and Overlap; report per-unit coverage counts."""
    units = range(global_band.low_hz, global_band.high_hz)
    counts = tuple(sum(b.covers_unit(u) for b in bands) for u in units)
    length_ok = all(5 <= b.high_hz - b.low_hz <= 35 for b in bands)
    return ConstraintReport(
        cover_ok=all(c >= 1 for c in counts),
        length_ok=length_ok,
        overlap_ok=all(c >= 2 for c in counts),
        equal_counts=counts,
    )


def build_universe(mode: str, n_channels: int = 12, config: BoostConfig | None = None,
                   band_spec: BandUniverseSpec = BandUniverseSpec(),
                   q: int | None = None, seed: int | None = None) -> list:
    """Preconditions for one boosting mode, in canonical order.

    SB enumerates every valid channel subset (or samples ``q`` of them), FB
    uses every band of the band universe, SFB takes the Cartesian product
    (or a sample of ``q`` pairs that always contains the default pair), and
    PLAIN is the single default pair.
    """
    config = config or BoostConfig()
    mode = mode.upper()
    seed = config.rng_seed if seed is None else seed
    full = ChannelSet.full(n_channels)
    G = band_spec.global_band
    if mode == "PLAIN":
        return [Precondition(full, G, "PLAIN")]
    if mode == "FB":
        return [Precondition(full, b, "FB") for b in generate_band_universe(band_spec)]
    if mode == "SB":
        if q is None:
            _, subsets = enumerate_channel_subsets(n_channels, config.min_channels)
        else:
            subsets = sample_channel_subsets(n_channels, config.min_channels, q, seed)
        return [Precondition(s, G, "SB") for s in subsets]
    if mode == "SFB":
        keys = channel_subset_keys(n_channels, config.min_channels)
        bands = generate_band_universe(band_spec)
        total = keys.size * len(bands)
        full_key = (1 << n_channels) - 1
        default = int(np.searchsorted(keys, full_key)) * len(bands) + bands.index(G)
        if q is None or q >= total:
            flat = np.arange(total)
        else:
            rng = np.random.default_rng(seed)
            others = rng.choice(total - 1, size=q - 1, replace=False)
            others = others + (others >= default)
            flat = np.sort(np.append(others, default))
        masks = {}
        out = []
        for i in flat:
            key = int(keys[i // len(bands)])
            if key not in masks:
                masks[key] = ChannelSet.from_key(key, n_channels, config.min_channels)
            out.append(Precondition(masks[key], bands[i % len(bands)], "SFB"))
        return out
    raise ValueError(f"unknown mode {mode!r}")
