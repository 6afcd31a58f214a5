"""Validated probability arrays, labeled sample sets, and confusion matrices.

Everything downstream works on a ``SampleSet``: an immutable bundle of a
row-stochastic prediction matrix and integer labels.  Confusion matrices are
plain ``(m, m)`` float arrays normalized to sum to one, row = true class,
column = predicted class.
"""

from dataclasses import dataclass

import numpy as np

# Rows whose sum deviates from 1 by more than this are rejected; closer rows
# are silently renormalized so text round-trips cannot drift off the simplex.
SIMPLEX_ATOL = 1e-6

# Rows already this close to the simplex are left untouched (divided by exactly
# 1.0), so revalidating a validated array — subsets, shuffles, file round-trips
# — is a bitwise no-op instead of a fresh 1-ulp renormalization.
_NOOP_BAND = 1e-9


def check_probability_vector(p, *, atol=SIMPLEX_ATOL):
    """Validate a single probability vector and return it renormalized."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError(f"expected a 1-d probability vector, got shape {p.shape}")
    if p.shape[0] < 2:
        raise ValueError("probability vectors need at least 2 classes")
    if not np.all(np.isfinite(p)):
        raise ValueError("probability vector contains non-finite entries")
    if np.any(p < 0):
        raise ValueError("probability vector contains negative entries")
    total = float(p.sum())
    if abs(total - 1.0) > atol:
        raise ValueError(f"probabilities sum to {total:.8g}, outside tolerance {atol:g} of 1")
    return p / (total if abs(total - 1.0) > _NOOP_BAND else 1.0)


def check_probability_matrix(P, *, atol=SIMPLEX_ATOL):
    """Validate an (n, m) prediction matrix; rows are renormalized copies."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2:
        raise ValueError(f"expected an (n, m) prediction matrix, got shape {P.shape}")
    if P.shape[1] < 2:
        raise ValueError("prediction matrices need at least 2 classes")
    if not np.all(np.isfinite(P)):
        raise ValueError("prediction matrix contains non-finite entries")
    if np.any(P < 0):
        raise ValueError("prediction matrix contains negative entries")
    sums = P.sum(axis=1)
    bad = np.abs(sums - 1.0) > atol
    if np.any(bad):
        row = int(np.argmax(bad))
        raise ValueError(
            f"row {row}: probabilities sum to {sums[row]:.8g}, outside tolerance {atol:g} of 1"
        )
    scale = np.where(np.abs(sums - 1.0) > _NOOP_BAND, sums, 1.0)
    return P / scale[:, None]


def check_labels(labels, num_classes):
    """Validate integer labels against a class count."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError(f"expected 1-d labels, got shape {labels.shape}")
    if labels.size and not np.issubdtype(labels.dtype, np.integer):
        as_int = labels.astype(np.int64)
        if np.any(as_int != labels):
            raise ValueError("labels must be integers")
        labels = as_int
    labels = labels.astype(np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes})")
    return labels


@dataclass(frozen=True)
class SampleSet:
    """Immutable pairing of black-box predictions with true labels.

    ``probs`` is (n, m) with rows on the m-simplex (renormalized on
    construction), ``labels`` is (n,) int64.  An empty set (n = 0) is a legal
    value — pairwise restrictions can be empty — but ingestion boundaries
    (file readers, estimator ``fit``) reject it.
    """

    probs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.probs, dtype=np.float64)
        if P.ndim != 2 or P.shape[1] < 2:
            raise ValueError(f"expected an (n, m) prediction matrix with m >= 2, got shape {P.shape}")
        if P.shape[0] > 0:
            P = check_probability_matrix(P)
        y = check_labels(self.labels, P.shape[1])
        if y.shape[0] != P.shape[0]:
            raise ValueError(f"{P.shape[0]} prediction rows but {y.shape[0]} labels")
        P.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "probs", P)
        object.__setattr__(self, "labels", y)

    @property
    def n(self):
        return self.probs.shape[0]

    @property
    def num_classes(self):
        return self.probs.shape[1]

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, indices):
        """Row subset (e.g. a validation resample); order of ``indices`` is kept."""
        idx = np.asarray(indices, dtype=np.int64)
        return SampleSet(self.probs[idx], self.labels[idx])


@dataclass(frozen=True)
class AssumptionReport:
    """Per-class flags for 'some sample puts positive mass on this class'."""

    per_class: np.ndarray
    all_satisfied: bool


def validate_assumption(sample_set):
    """Check that every class receives positive prediction mass somewhere.

    Classes failing the check cannot be separated from the reference class by
    any weighting, so fitters emit a warning for them.
    """
    flags = np.asarray((sample_set.probs > 0).any(axis=0))
    flags.setflags(write=False)
    return AssumptionReport(per_class=flags, all_satisfied=bool(flags.all()))


def weighted_argmax(probs, weights):
    """Predict argmax_k probs[..., k] * weights[k]; ties go to the smallest index."""
    probs = np.asarray(probs, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 1 or weights.shape[0] != probs.shape[-1]:
        raise ValueError("weights length must match the number of classes")
    return np.argmax(probs * weights, axis=-1)


def confusion_from_labels(sample_set, predicted):
    """Confusion matrix of ``predicted`` against true labels, normalized by n."""
    predicted = check_labels(predicted, sample_set.num_classes)
    if predicted.shape[0] != sample_set.n:
        raise ValueError("predicted labels must match the sample count")
    if sample_set.n == 0:
        raise ValueError("cannot build a confusion matrix from an empty sample set")
    m = sample_set.num_classes
    counts = np.zeros((m, m), dtype=np.int64)
    np.add.at(counts, (sample_set.labels, predicted), 1)
    return counts / sample_set.n


def confusion_from_weights(sample_set, weights):
    """Confusion matrix of the weighted-argmax rule on ``sample_set``."""
    return confusion_from_labels(sample_set, weighted_argmax(sample_set.probs, weights))
