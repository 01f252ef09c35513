"""Stochastic gradient boosting over precondition-specific CSP learners.

Each boosting step draws a subset from a resample pool that over-represents
misclassified trials, picks the pretrained base learner whose hard outputs
best fit the pseudo-residuals on that subset, and adds it with the
closed-form squared-loss step size computed on the full training split.
"""
from __future__ import annotations

import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field

import numpy as np

from .core import (GLOBAL_BAND, AdditiveModel, Band, BoostConfig, Precondition,
                   SessionDataset, Term, TrialMatrix, sign_label, validate_dataset)
from .dsp import bandpass_array, band_bin_mask, preprocess_array
from .features import CspModel, fit_csp_from_covariances, log_variance_features
from .learner import LinearModel, decision_function, predict_label, train_linear

__all__ = [
    "BaseLearner",
    "ResamplePool",
    "IterationRecord",
    "BoostTrace",
    "SpectralCache",
    "LearnerCache",
    "init_intercept",
    "pseudo_residuals",
    "draw_subset",
    "score_candidate",
    "select_base_learner",
    "line_search_alpha",
    "compute_duplication",
    "update_pool",
    "stratified_split",
    "train_session",
    "predict",
    "predict_dataset",
    "squared_loss",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaseLearner:
    """CSP filters followed by a linear classifier; outputs hard labels."""

    csp: CspModel
    linear: LinearModel

    def decision_from_scatter(self, scatter: np.ndarray) -> np.ndarray:
        """Real-valued classifier output for trials given their scatter matrices."""
        return decision_function(self.linear, log_variance_features(self.csp.filters, scatter))

    def predict_from_scatter(self, scatter: np.ndarray) -> np.ndarray:
        """Labels for trials given their (projected, band-limited) scatter matrices."""
        return predict_label(self.linear, log_variance_features(self.csp.filters, scatter))

    def to_dict(self):
        return {"csp": self.csp.to_dict(), "linear": self.linear.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(CspModel.from_dict(d["csp"]), LinearModel.from_dict(d["linear"]))


# --------------------------------------------------------------------------
# loss, residuals and step sizes

def squared_loss(labels, scores) -> float:
    r = np.asarray(labels, dtype=np.float64) - np.asarray(scores, dtype=np.float64)
    return 0.5 * float(r @ r)


def init_intercept(labels) -> float:
    """Constant minimizing the squared loss: the label mean."""
    y = np.asarray(labels, dtype=np.float64)
    if y.size == 0:
        raise ValueError("empty label vector")
    return float(y.mean())


def pseudo_residuals(labels, scores) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64)
    f = np.asarray(scores, dtype=np.float64)
    if y.shape != f.shape:
        raise ValueError("labels and scores differ in length")
    return y - f


def score_candidate(outputs, residuals) -> tuple[float, float]:
    """Least-squares fit ``residuals ~ rho * outputs`` on a subset.

    Returns ``(rho, sse)``.  Outputs are hard labels, so ``rho`` reduces to
    ``mean(r * f)``.
    """
    f = np.asarray(outputs, dtype=np.float64)
    r = np.asarray(residuals, dtype=np.float64)
    if f.size == 0:
        raise ValueError("empty subset")
    rho = float(r @ f) / float(f @ f)
    res = r - rho * f
    return rho, float(res @ res)


def line_search_alpha(labels, prev_scores, outputs) -> float:
    """Exact squared-loss step ``argmin_a sum (y - F - a f)^2`` over all samples."""
    f = np.asarray(outputs, dtype=np.float64)
    r = pseudo_residuals(labels, prev_scores)
    if f.shape != r.shape:
        raise ValueError("outputs and labels differ in length")
    denom = float(f @ f)
    return 0.0 if denom == 0 else float(r @ f) / denom


def compute_duplication(e: float, epsilon: float) -> int:
    """Copies added per misclassified pool entry: ``max(1, floor((1-e)/(e+eps)))``."""
    if not 0 <= e < 1:
        raise ValueError("error rate must lie in [0, 1)")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return max(1, int(np.floor((1.0 - e) / (e + epsilon))))


# --------------------------------------------------------------------------
# resample pool

@dataclass(frozen=True, eq=False)
class ResamplePool:
    """Multiset over training positions ``0..N-1`` stored as multiplicities."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.ndim != 1 or (c < 0).any():
            raise ValueError("pool counts must be a non-negative vector")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def initial(cls, n: int) -> "ResamplePool":
        return cls(np.ones(n, dtype=np.int64))

    @property
    def origin_size(self) -> int:
        return self.counts.size

    @property
    def size(self) -> int:
        return int(self.counts.sum())

    @property
    def entries(self) -> np.ndarray:
        return np.repeat(np.arange(self.counts.size), self.counts)

    def __len__(self):
        return self.size


def draw_subset(pool: ResamplePool, n_hat: int, rng) -> np.ndarray:
    """First ``n_hat`` entries of a random permutation of the pool."""
    rng = np.random.default_rng(rng)
    if n_hat > pool.size:
        raise ValueError(f"n_hat={n_hat} exceeds pool size {pool.size}")
    if n_hat <= 0:
        return np.empty(0, dtype=np.int64)
    return rng.permutation(pool.entries)[:n_hat]


def update_pool(pool: ResamplePool, misclassified, d: int, cap: int | None = None,
                rng=None) -> ResamplePool:
    """Grow each misclassified index from ``M`` to ``(d+1)M`` copies.

    If the pool then exceeds ``cap`` the surplus copies (beyond one per index)
    are thinned uniformly without replacement, which keeps every index present
    and preserves expected multiplicity ratios of the surplus.
    """
    counts = pool.counts.copy()
    idx = np.unique(np.asarray(misclassified, dtype=np.int64))
    if idx.size and (idx.min() < 0 or idx.max() >= counts.size):
        raise ValueError("misclassified index out of range")
    counts[idx] *= d + 1
    if cap is not None and counts.sum() > cap:
        if cap < counts.size:
            raise ValueError("cap smaller than the original training set")
        rng = np.random.default_rng(rng)
        surplus = counts - 1
        counts = 1 + rng.multivariate_hypergeometric(surplus, cap - counts.size)
    return ResamplePool(counts)


# --------------------------------------------------------------------------
# memoized preprocessing and base learners

class SpectralCache:
    """Per-band scatter matrices ``X_B^T X_B`` for every trial of a dataset.

    Trials are detrended and transformed once; the scatter of the brickwall
    band-limited signal is then a sum of cross-spectra over the bins in the
    band (Parseval), so any channel subset is a sub-block and no inverse
    transform is needed.
    """

    def __init__(self, data: np.ndarray, fs: float):
        data = np.asarray(data, dtype=np.float64)
        if not np.isfinite(data).all():
            raise ValueError("non-finite samples")
        from scipy.signal import detrend

        self.n_samples = data.shape[1]
        self.fs = float(fs)
        self._keep = band_bin_mask(self.n_samples, self.fs, GLOBAL_BAND)
        self._spec = np.fft.rfft(detrend(data, axis=1, type="linear"), axis=1)[:, self._keep, :]
        self._bins = np.flatnonzero(self._keep)
        self._scatter = {}

    def scatter(self, band: Band) -> np.ndarray:
        """Scatter matrices, shape ``(n_trials, n_channels, n_channels)``."""
        got = self._scatter.get(band)
        if got is None:
            sel = band_bin_mask(self.n_samples, self.fs, band)[self._bins]
            z = self._spec[:, sel, :]
            # non-DC, non-Nyquist rfft bins count twice in Parseval's sum
            got = (2.0 / self.n_samples) * np.einsum("tkc,tkd->tcd", z.conj(), z).real
            got = 0.5 * (got + got.transpose(0, 2, 1))
            got.setflags(write=False)
            self._scatter[band] = got
        return got

    def projected(self, precondition: Precondition) -> np.ndarray:
        idx = precondition.channels.indices
        return self.scatter(precondition.band)[:, idx[:, None], idx]


def learner_seed(rng_seed: int, precondition: Precondition) -> int:
    ss = np.random.SeedSequence([int(rng_seed) & 0xFFFFFFFF, *precondition.sort_key])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def fit_base_learner(scatter: np.ndarray, labels, config: BoostConfig, seed: int = 0) -> BaseLearner:
    """CSP + linear classifier on per-trial scatter matrices of one precondition."""
    y = np.asarray(labels)
    tr = np.trace(scatter, axis1=1, axis2=2)
    if np.any(~(tr > 0)):
        raise ValueError("degenerate trial")
    normed = scatter / tr[:, None, None]
    csp = fit_csp_from_covariances(normed[y == 1].mean(axis=0), normed[y == -1].mean(axis=0),
                                   config.csp_dim)
    feats = log_variance_features(csp.filters, scatter)
    linear = train_linear(feats, y, config.svm_cost, seed)
    return BaseLearner(csp, linear)


class LearnerCache:
    """Trains each precondition's learner once on the training split and
    memoizes its hard outputs and decision values on every trial."""

    def __init__(self, spectral: SpectralCache, labels, train_idx, config: BoostConfig,
                 executor: Executor | None = None):
        self.spectral = spectral
        self.labels = np.asarray(labels)
        self.train_idx = np.asarray(train_idx)
        self.config = config
        self.executor = executor
        self._store = {}

    def _train(self, prec: Precondition):
        scatter = self.spectral.projected(prec)
        try:
            learner = fit_base_learner(scatter[self.train_idx], self.labels[self.train_idx],
                                       self.config, learner_seed(self.config.rng_seed, prec))
        except (ValueError, np.linalg.LinAlgError) as exc:
            log.debug("precondition %s failed: %s", prec, exc)
            return None
        margin = learner.decision_from_scatter(scatter)
        return learner, np.where(margin >= 0, 1, -1).astype(np.int8), margin

    def prefetch(self, candidates):
        todo = [p for p in dict.fromkeys(candidates) if p not in self._store]
        for band in dict.fromkeys(p.band for p in todo):
            self.spectral.scatter(band)
        if self.executor is not None and len(todo) > 1:
            results = list(self.executor.map(self._train, todo))
        else:
            results = [self._train(p) for p in todo]
        for p, res in zip(todo, results):
            self._store[p] = res

    def get(self, prec: Precondition):
        """``(learner, outputs, decision_values)`` or ``None`` if training failed."""
        if prec not in self._store:
            self.prefetch([prec])
        return self._store[prec]

    def __len__(self):
        return len(self._store)


def select_base_learner(candidates, subset, residuals, cache: LearnerCache):
    """Candidate whose outputs best fit the residuals on ``subset``.

    ``subset`` holds positions into the training split (duplicates allowed)
    and ``residuals`` is the residual vector over the training split.  Exact
    ties in the residual sum of squares (common once several learners are
    perfect on the subset) are broken by how well the real-valued decision
    values fit the residuals, then by canonical order.  Returns
    ``(precondition, learner, rho, sse)``.
    """
    if not candidates:
        raise ValueError("no candidates")
    ordered = sorted(dict.fromkeys(candidates), key=lambda p: p.sort_key)
    cache.prefetch(ordered)
    r_sub = np.asarray(residuals)[subset]
    best, best_key = None, None
    for prec in ordered:
        got = cache.get(prec)
        if got is None:
            continue
        learner, outputs, margin = got
        rho, sse = score_candidate(outputs[cache.train_idx][subset], r_sub)
        key = (sse, _soft_sse(margin[cache.train_idx][subset], r_sub))
        if best is None or key < best_key:
            best, best_key = (prec, learner, rho, sse), key
    if best is None:
        raise ValueError("no viable candidate")
    return best


def _soft_sse(g: np.ndarray, r: np.ndarray) -> float:
    # residual sum of squares of the least-squares fit r ~ c * g
    gg = float(g @ g)
    rr = float(r @ r)
    return rr if gg == 0 else rr - float(r @ g) ** 2 / gg


# --------------------------------------------------------------------------
# training driver

@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    precondition: Precondition
    alpha: float
    rho: float
    sse: float
    training_error: float
    duplication: int
    pool_size: int
    validation_error: float
    training_loss: float

    def to_dict(self):
        return {"iteration": self.iteration, "precondition": self.precondition.to_dict(),
                "alpha": self.alpha, "rho": self.rho, "sse": self.sse,
                "training_error": self.training_error, "duplication": self.duplication,
                "pool_size": self.pool_size, "validation_error": self.validation_error,
                "training_loss": self.training_loss}


@dataclass
class BoostTrace:
    records: list = field(default_factory=list)
    initial_loss: float = 0.0
    initial_validation_error: float = float("nan")
    selected_k: int = 0
    n_train: int = 0
    n_validation: int = 0
    learners_trained: int = 0

    def __len__(self):
        return len(self.records)

    @property
    def losses(self) -> np.ndarray:
        return np.array([self.initial_loss] + [r.training_loss for r in self.records])

    @property
    def validation_errors(self) -> np.ndarray:
        return np.array([self.initial_validation_error] + [r.validation_error for r in self.records])

    def to_dict(self):
        return {"initial_loss": self.initial_loss,
                "initial_validation_error": self.initial_validation_error,
                "selected_k": self.selected_k, "n_train": self.n_train,
                "n_validation": self.n_validation, "learners_trained": self.learners_trained,
                "records": [r.to_dict() for r in self.records]}


def stratified_split(labels, fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Split positions into (train, validation) keeping class proportions."""
    y = np.asarray(labels)
    rng = np.random.default_rng(rng)
    val = []
    for c in (-1, 1):
        idx = np.flatnonzero(y == c)
        n_val = int(np.floor(fraction * idx.size + 0.5))
        if fraction > 0 and idx.size > 1:
            n_val = max(1, min(n_val, idx.size - 1))
        else:
            n_val = 0
        val.append(rng.permutation(idx)[:n_val])
    val = np.sort(np.concatenate(val)).astype(np.int64)
    train = np.setdiff1d(np.arange(y.size), val)
    return train, val


def _sample_candidates(universe, size: int, default, rng) -> list:
    if size >= len(universe):
        return list(universe)
    picks = rng.choice(len(universe), size=size, replace=False)
    chosen = [universe[i] for i in np.sort(picks)]
    if default is not None and default not in chosen:
        chosen[-1] = default
    return chosen


def train_session(dataset: SessionDataset, universe, config: BoostConfig = BoostConfig(),
                  executor: Executor | None = None):
    """Fit an additive model on one session.  Returns ``(model, trace)``."""
    problems = validate_dataset(dataset)
    if problems:
        raise ValueError("invalid dataset: " + ", ".join(problems))
    universe = sorted(dict.fromkeys(universe), key=lambda p: p.sort_key)
    if not universe:
        raise ValueError("empty precondition universe")
    n_ch = dataset.n_channels
    if any(p.channels.n_channels != n_ch for p in universe):
        raise ValueError("precondition channel count does not match the dataset")
    mode = universe[0].mode
    default = next((p for p in universe if p.is_default), None)

    ss = np.random.SeedSequence(int(config.rng_seed) & 0xFFFFFFFF)
    split_rng, draw_rng, cand_rng, pool_rng = (np.random.default_rng(s) for s in ss.spawn(4))

    y_all = dataset.labels
    train_idx, val_idx = stratified_split(y_all, config.validation_fraction, split_rng)
    y = y_all[train_idx].astype(np.float64)
    y_val = y_all[val_idx]
    n = train_idx.size
    n_hat = min(n, max(1, int(np.floor(config.subset_fraction * n + 0.5))))
    cap = config.pool_cap_multiple * n

    spectral = SpectralCache(dataset.data, dataset.sample_rate_hz)
    cache = LearnerCache(spectral, y_all, train_idx, config, executor)

    f0 = init_intercept(y)
    scores = np.full(n, f0)
    val_scores = np.full(val_idx.size, f0)
    pool = ResamplePool.initial(n)

    def val_error(s):
        return float(np.mean(sign_label(s) != y_val)) if val_idx.size else float("nan")

    trace = BoostTrace(initial_loss=squared_loss(y, scores), initial_validation_error=val_error(val_scores),
                       n_train=int(n), n_validation=int(val_idx.size))
    terms = []
    for k in range(1, config.k_max + 1):
        subset = draw_subset(pool, n_hat, draw_rng)
        residuals = pseudo_residuals(y, scores)
        candidates = _sample_candidates(universe, config.candidate_sample_size, default, cand_rng)
        prec, learner, rho, sse = select_base_learner(candidates, subset, residuals, cache)
        outputs = cache.get(prec)[1]
        f_train = outputs[train_idx].astype(np.float64)
        alpha = line_search_alpha(y, scores, f_train)
        scores = scores + alpha * f_train
        val_scores = val_scores + alpha * outputs[val_idx]
        wrong = np.flatnonzero(sign_label(scores) != y)
        e = wrong.size / n
        d = compute_duplication(min(e, 1 - 1e-12), config.epsilon)
        pool = update_pool(pool, wrong, d, cap, pool_rng)
        terms.append(Term(alpha, learner, prec))
        trace.records.append(IterationRecord(
            iteration=k, precondition=prec, alpha=alpha, rho=rho, sse=sse, training_error=e,
            duplication=d, pool_size=pool.size, validation_error=val_error(val_scores),
            training_loss=squared_loss(y, scores)))

    if val_idx.size and terms:
        # earliest k >= 1 with minimal validation error
        selected_k = 1 + int(np.argmin(trace.validation_errors[1:]))
    else:
        selected_k = len(terms)
    trace.selected_k = selected_k
    trace.learners_trained = len(cache)
    model = AdditiveModel(f0, tuple(terms), selected_k, mode, dataset.sample_rate_hz,
                          dataset.channel_names)
    return model, trace


# --------------------------------------------------------------------------
# prediction

def _term_scatter_direct(x: np.ndarray, prec: Precondition, fs: float) -> np.ndarray:
    z = bandpass_array(x[:, prec.channels.mask], prec.band, fs, axis=0)
    z = z - z.mean(axis=0)
    return z.T @ z


def predict(model: AdditiveModel, trial: TrialMatrix, cache=None) -> tuple[float, int]:
    """Score ``F0 + sum alpha_k f_k`` over the selected prefix and its label.

    ``cache`` may map preconditions to precomputed outputs for this trial;
    otherwise each term runs project, band-pass and CSP features directly.
    """
    if trial.n_channels != model.n_channels:
        raise ValueError(f"trial has {trial.n_channels} channels, model expects {model.n_channels}")
    x = preprocess_array(trial.samples, model.sample_rate_hz)
    score = model.intercept
    for term in model.active_terms:
        if cache is not None and term.precondition in cache:
            f = cache[term.precondition]
        else:
            f = int(term.learner.predict_from_scatter(
                _term_scatter_direct(x, term.precondition, model.sample_rate_hz)))
        score += term.alpha * f
    return float(score), sign_label(score)


def predict_dataset(model: AdditiveModel, dataset: SessionDataset) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`predict` over every trial; returns ``(scores, labels)``."""
    if dataset.n_channels != model.n_channels:
        raise ValueError(f"dataset has {dataset.n_channels} channels, model expects {model.n_channels}")
    scores = np.full(len(dataset), model.intercept)
    if model.selected_k:
        spectral = SpectralCache(dataset.data, dataset.sample_rate_hz)
        outputs = {}
        for term in model.active_terms:
            if term.precondition not in outputs:
                outputs[term.precondition] = term.learner.predict_from_scatter(
                    spectral.projected(term.precondition))
            scores = scores + term.alpha * outputs[term.precondition]
    return scores, sign_label(scores)
