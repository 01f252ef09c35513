"""CSP spatial filters, log-variance features and a band-power baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Band, TrialMatrix
from .dsp import bandpass_array, covariance_normalized

__all__ = [
    "CspModel",
    "fit_csp",
    "fit_csp_from_covariances",
    "extract_features",
    "log_variance_features",
    "extract_bandpower_baseline",
]

REG_SCALE = 1e-6


@dataclass(frozen=True, eq=False)
class CspModel:
    """Spatial filters (rows) with their generalized eigenvalues.

    ``class_covariances`` holds the regularized per-class mean covariances the
    filters were solved against; the whitening and eigen-consistency checks
    are made against these.
    """

    filters: np.ndarray
    eigenvalues: np.ndarray
    class_covariances: tuple = ()

    def __post_init__(self):
        filters = np.array(self.filters, dtype=np.float64)
        eig = np.array(self.eigenvalues, dtype=np.float64)
        if filters.ndim != 2 or filters.shape[0] != eig.size:
            raise ValueError("filters must be (csp_dim, n_channels) matching the eigenvalues")
        filters.setflags(write=False)
        eig.setflags(write=False)
        object.__setattr__(self, "filters", filters)
        object.__setattr__(self, "eigenvalues", eig)

    @property
    def csp_dim(self) -> int:
        return self.filters.shape[0]

    @property
    def n_channels(self) -> int:
        return self.filters.shape[1]

    def to_dict(self):
        return {"filters": self.filters.tolist(), "eigenvalues": self.eigenvalues.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["filters"], dtype=np.float64), np.array(d["eigenvalues"], dtype=np.float64))


def _canonical_sign(vectors: np.ndarray) -> np.ndarray:
    # column-wise: make the largest-magnitude entry positive (first one on ties)
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def fit_csp_from_covariances(cov_pos: np.ndarray, cov_neg: np.ndarray, d: int) -> CspModel:
    """Solve ``cov_pos w = mu (cov_pos + cov_neg) w`` by whitening.

    Both inputs are class-mean trace-normalized covariances; each is
    regularized with ``1e-6 * trace`` on the diagonal before solving.
    """
    n = cov_pos.shape[0]
    if d > n:
        raise ValueError("insufficient channels")
    if d < 2 or d % 2:
        raise ValueError("csp_dim must be a positive even integer")
    if not (np.isfinite(cov_pos).all() and np.isfinite(cov_neg).all()):
        raise ValueError("covariance not finite")
    eye = np.eye(n)
    s1 = cov_pos + REG_SCALE * np.trace(cov_pos) * eye
    s2 = cov_neg + REG_SCALE * np.trace(cov_neg) * eye
    composite = s1 + s2
    evals, evecs = np.linalg.eigh(composite)
    if evals[0] <= 0:
        raise ValueError("composite covariance is not positive definite")
    whitener = (evecs / np.sqrt(evals)).T
    white = whitener @ s1 @ whitener.T
    mu, v = np.linalg.eigh(0.5 * (white + white.T))
    v = _canonical_sign(v)
    # descending eigenvalue order, ties by ascending index (stable sort)
    order = np.argsort(-mu, kind="stable")
    pick = np.concatenate([order[: d // 2], order[len(order) - d // 2:]])
    filters = v[:, pick].T @ whitener
    return CspModel(filters, np.clip(mu[pick], 0.0, 1.0), (s1, s2))


def fit_csp(left, right, d: int = 4) -> CspModel:
    """Fit CSP on two lists of trials (one per class).

    The first list plays the role of the numerator class: its variance is
    maximized by the first ``d/2`` filters.
    """
    if not left or not right:
        raise ValueError("both classes need at least one trial")
    shapes = {t.samples.shape for t in (*left, *right)}
    if len(shapes) != 1:
        raise ValueError("all trials must share one shape")
    if d > next(iter(shapes))[1]:
        raise ValueError("insufficient channels")
    c1 = np.mean([covariance_normalized(t) for t in left], axis=0)
    c2 = np.mean([covariance_normalized(t) for t in right], axis=0)
    return fit_csp_from_covariances(c1, c2, d)


def log_variance_features(filters: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """Normalized log-variance features from per-trial scatter matrices.

    ``covs`` has shape ``(..., n_channels, n_channels)``; the variance along
    filter ``w`` is proportional to ``w^T C w``.
    """
    var = np.einsum("jc,...cd,jd->...j", filters, covs, filters)
    total = var.sum(axis=-1, keepdims=True)
    if np.any(~(total > 0)):
        raise ValueError("degenerate trial")
    return np.log(var / total)


def extract_features(m: CspModel, t: TrialMatrix) -> np.ndarray:
    """``log(var_j / sum_j var_j)`` for each CSP filter ``w_j``."""
    if t.n_channels != m.n_channels:
        raise ValueError(f"trial has {t.n_channels} channels, model expects {m.n_channels}")
    x = t.samples - t.samples.mean(axis=0)
    return log_variance_features(m.filters, x.T @ x)


def extract_bandpower_baseline(t: TrialMatrix, bands, fs: float) -> np.ndarray:
    """Log mean-square amplitude per (band, channel), band-major."""
    out = []
    for b in bands:
        power = np.mean(bandpass_array(t.samples, b, fs, axis=0) ** 2, axis=0)
        if np.any(~(power > 0)):
            raise ValueError("degenerate trial")
        out.append(np.log(power))
    return np.concatenate(out)
