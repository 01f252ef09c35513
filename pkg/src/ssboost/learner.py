"""Soft-margin linear SVM trained by sequential minimal optimization."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

__all__ = ["LinearModel", "train_linear", "predict_label", "decision_function"]

TOL = 1e-6
MAX_ITER = 10_000_000


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray
    bias: float
    cost: float = 1.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or not np.isfinite(w).all() or not np.isfinite(self.bias):
            raise ValueError("linear model parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    def to_dict(self):
        return {"weights": self.weights.tolist(), "bias": self.bias, "cost": self.cost}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["weights"], dtype=np.float64), d["bias"], d["cost"])


_TAU = 1e-12


@numba.njit(cache=True, nogil=True)
def _smo(k, y, cost, tol, max_iter):
    # SMO with second-order working-set selection on a precomputed linear
    # kernel; returns dual variables, offset rho and the final KKT gap.
    n = y.size
    alpha = np.zeros(n)
    grad = -np.ones(n)
    kd = np.empty(n)
    for t in range(n):
        kd[t] = k[t, t]
    gap = np.inf
    for _ in range(max_iter):
        gmax = -np.inf
        i = -1
        for t in range(n):
            if y[t] > 0:
                if alpha[t] < cost and -grad[t] >= gmax:
                    gmax = -grad[t]
                    i = t
            elif alpha[t] > 0 and grad[t] >= gmax:
                gmax = grad[t]
                i = t
        gmax2 = -np.inf
        j = -1
        best = np.inf
        if i >= 0:
            for t in range(n):
                if y[t] > 0:
                    if alpha[t] > 0:
                        diff = gmax + grad[t]
                        if grad[t] >= gmax2:
                            gmax2 = grad[t]
                        if diff > 0:
                            quad = kd[i] + kd[t] - 2.0 * y[i] * k[i, t]
                            if quad <= 0:
                                quad = _TAU
                            obj = -diff * diff / quad
                            if obj <= best:
                                best = obj
                                j = t
                elif alpha[t] < cost:
                    diff = gmax - grad[t]
                    if -grad[t] >= gmax2:
                        gmax2 = -grad[t]
                    if diff > 0:
                        quad = kd[i] + kd[t] + 2.0 * y[i] * k[i, t]
                        if quad <= 0:
                            quad = _TAU
                        obj = -diff * diff / quad
                        if obj <= best:
                            best = obj
                            j = t
        gap = gmax + gmax2
        if gap < tol or j < 0:
            break
        old_i = alpha[i]
        old_j = alpha[j]
        if y[i] != y[j]:
            quad = kd[i] + kd[j] - 2.0 * k[i, j]
            if quad <= 0:
                quad = _TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > cost:
                    alpha[i] = cost
                    alpha[j] = cost - diff
            elif alpha[j] > cost:
                alpha[j] = cost
                alpha[i] = cost + diff
        else:
            quad = kd[i] + kd[j] - 2.0 * k[i, j]
            if quad <= 0:
                quad = _TAU
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > cost:
                if alpha[i] > cost:
                    alpha[i] = cost
                    alpha[j] = total - cost
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > cost:
                if alpha[j] > cost:
                    alpha[j] = cost
                    alpha[i] = total - cost
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total
        di = alpha[i] - old_i
        dj = alpha[j] - old_j
        for t in range(n):
            grad[t] += y[t] * (y[i] * k[t, i] * di + y[j] * k[t, j] * dj)
    ub = np.inf
    lb = -np.inf
    n_free = 0
    free_sum = 0.0
    for t in range(n):
        yg = y[t] * grad[t]
        if alpha[t] >= cost:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            free_sum += yg
    rho = free_sum / n_free if n_free > 0 else 0.5 * (ub + lb)
    return alpha, rho, gap


def train_linear(features, labels, cost: float = 1.0, seed: int = 0) -> LinearModel:
    """Soft-margin linear SVM: ``min 0.5 |w|^2 + cost * sum(hinge)`` with a free bias.

    Solved in the dual by SMO until the maximal KKT violation drops below
    ``1e-6``.  The solver is deterministic; ``seed`` is accepted for
    interface stability and does not change the result.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ValueError("features must be (n_samples, n_features) matching labels")
    if x.shape[0] < 2:
        raise ValueError("need at least two training samples")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise ValueError("labels must be -1 or +1")
    if np.unique(y).size < 2:
        raise ValueError("single-class training set")
    if not np.isfinite(x).all():
        raise ValueError("non-finite features")
    # centering leaves the solution unchanged (free bias) and helps conditioning
    mean = x.mean(axis=0)
    xc = x - mean
    alpha, rho, _ = _smo(xc @ xc.T, y, float(cost), TOL, MAX_ITER)
    w = (alpha * y) @ xc
    return LinearModel(w, float(-rho - w @ mean), float(cost))


def decision_function(m: LinearModel, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != m.weights.size:
        raise ValueError(f"feature dimension {x.shape[-1]} does not match model ({m.weights.size})")
    return x @ m.weights + m.bias


def predict_label(m: LinearModel, feature):
    """``sign(w.x + b)`` with zero mapped to +1; accepts one vector or a batch."""
    score = decision_function(m, feature)
    out = np.where(score >= 0, 1, -1)
    return int(out) if out.ndim == 0 else out
