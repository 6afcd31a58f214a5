"""Vector-scaling calibration baseline and direct evaluation helpers."""

import warnings as _warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .generators import softmax_rows
from .metrics import get_metric
from .samples import SampleSet, check_probability_matrix, confusion_from_labels


def nll_and_grad(probs, labels, diag_weights, bias, floor=1e-12):
    """Mean NLL of softmax(diag_weights * p + bias) and its analytic gradient.

    With z = w * p + c and q = softmax(z), d nll / dz = (q - onehot(y)) / n,
    which chains to gw_j = mean_i (q_ij - y_ij) p_ij and gc_j = mean_i (q_ij - y_ij).
    """
    P = np.clip(np.asarray(probs, dtype=np.float64), floor, None)
    y = np.asarray(labels)
    n = P.shape[0]
    Z = P * diag_weights + bias
    Zs = Z - Z.max(axis=1, keepdims=True)
    log_q = Zs - np.log(np.exp(Zs).sum(axis=1, keepdims=True))
    nll = -float(log_q[np.arange(n), y].mean())
    G = np.exp(log_q)
    G[np.arange(n), y] -= 1.0
    G /= n
    return nll, (G * P).sum(axis=0), G.sum(axis=0)


class VectorScaler(BaseEstimator, TransformerMixin):
    """Per-class affine recalibration of probability outputs.

    Fits diagonal weights and a bias by full-batch gradient descent on the
    mean NLL of softmax(w * p + c), from the identity/zero initialization.
    The best iterate seen is kept, so the final NLL never exceeds the
    initial one.
    """

    def __init__(self, learning_rate=0.1, max_iter=2000, grad_tol=1e-7, prob_floor=1e-12):
        self.learning_rate = learning_rate
        self.max_iter = max_iter
        self.grad_tol = grad_tol
        self.prob_floor = prob_floor

    def fit(self, X, y):
        sample_set = SampleSet(np.asarray(X, dtype=np.float64), np.asarray(y))
        if sample_set.n == 0:
            raise ValueError("cannot fit on an empty sample set")
        m = sample_set.num_classes
        if sample_set.n < m:
            _warnings.warn(
                f"fitting {2 * m} calibration parameters on only {sample_set.n} samples",
                UserWarning,
                stacklevel=2,
            )
        P, labels = sample_set.probs, sample_set.labels
        w = np.ones(m)
        c = np.zeros(m)
        nll, gw, gc = nll_and_grad(P, labels, w, c, floor=self.prob_floor)
        best = (nll, w.copy(), c.copy())
        self.initial_nll_ = nll
        steps = 0
        for steps in range(1, self.max_iter + 1):
            if float(np.sqrt(gw @ gw + gc @ gc)) <= self.grad_tol:
                steps -= 1
                break
            w = w - self.learning_rate * gw
            c = c - self.learning_rate * gc
            nll, gw, gc = nll_and_grad(P, labels, w, c, floor=self.prob_floor)
            if nll < best[0]:
                best = (nll, w.copy(), c.copy())
        self.final_nll_, self.diag_weights_, self.bias_ = best
        self.n_iter_ = steps
        self.n_classes_ = m
        return self

    def _check_fitted(self):
        if not hasattr(self, "diag_weights_"):
            raise NotFittedError("this VectorScaler instance is not fitted yet")

    def transform(self, X):
        """Calibrated probability matrix."""
        self._check_fitted()
        P = check_probability_matrix(np.asarray(X, dtype=np.float64))
        if P.shape[1] != self.n_classes_:
            raise ValueError(f"expected {self.n_classes_} classes, got {P.shape[1]}")
        P = np.clip(P, self.prob_floor, None)
        return softmax_rows(P * self.diag_weights_ + self.bias_)

    def predict(self, X):
        return np.argmax(self.transform(X), axis=1)


def clean_eval(sample_set, metric):
    """Metric of the untouched argmax rule — the no-adaptation reference point."""
    metric = get_metric(metric)
    return float(metric(confusion_from_labels(sample_set, np.argmax(sample_set.probs, axis=1))))
