"""Confusion-matrix metrics: built-ins, parametric families, and a registry.

A metric maps a normalized (m, m) confusion matrix (rows = true, columns =
predicted, entries summing to 1) to a scalar reward in which larger is better.
Metrics carry a ``quasi_concave_pairwise`` hint: set only for the families
whose pairwise restricted curves are known to be unimodal, which is what the
logarithmic search path requires.
"""

import threading
from dataclasses import dataclass

import numpy as np


def _as_confusion(C):
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"expected a square confusion matrix, got shape {C.shape}")
    return C


def accuracy(C):
    """Trace of the normalized confusion matrix."""
    return float(np.trace(_as_confusion(C)))


def f_measure_binary(C):
    """2 C11 / (2 C11 + C01 + C10) for 2x2 matrices; 0 when the denominator is 0."""
    C = _as_confusion(C)
    if C.shape[0] != 2:
        raise ValueError("binary F-measure needs a 2x2 confusion matrix")
    denom = 2.0 * C[1, 1] + C[0, 1] + C[1, 0]
    if denom == 0.0:
        return 0.0
    return float(2.0 * C[1, 1] / denom)


def f_measure_macro(C):
    """Unweighted mean of one-vs-rest F1; classes with empty precision+recall score 0."""
    C = _as_confusion(C)
    diag = np.diag(C)
    denom = C.sum(axis=0) + C.sum(axis=1)  # 2*Ckk + false positives + false negatives
    scores = np.zeros(C.shape[0])
    np.divide(2.0 * diag, denom, out=scores, where=denom > 0)
    return float(scores.mean())


def g_mean_macro(C):
    """Geometric mean of per-class recalls; 0 as soon as any recall is 0."""
    C = _as_confusion(C)
    row = C.sum(axis=1)
    recalls = np.zeros(C.shape[0])
    np.divide(np.diag(C), row, out=recalls, where=row > 0)
    if np.any(recalls == 0.0):
        return 0.0
    return float(np.prod(recalls) ** (1.0 / C.shape[0]))


def mcc_raw(C):
    """Multiclass correlation coefficient in [-1, 1]; 0 when either variance term vanishes."""
    C = _as_confusion(C)
    c = np.trace(C)
    t = C.sum(axis=1)  # true-class mass
    p = C.sum(axis=0)  # predicted-class mass
    s = C.sum()
    cov = c * s - float(p @ t)
    var_t = s * s - float(t @ t)
    var_p = s * s - float(p @ p)
    if var_t <= 0.0 or var_p <= 0.0:
        return 0.0
    return float(cov / np.sqrt(var_t * var_p))


def mcc(C):
    """Correlation coefficient shifted to [0, 1] so it can be maximized directly."""
    return 0.5 * (mcc_raw(C) + 1.0)


def fowlkes_mallows_macro(C):
    """Mean over classes of sqrt(precision * recall), with 0 for empty rows/columns."""
    C = _as_confusion(C)
    row = C.sum(axis=1)
    col = C.sum(axis=0)
    diag = np.diag(C)
    recalls = np.zeros(C.shape[0])
    np.divide(diag, row, out=recalls, where=row > 0)
    precisions = np.zeros(C.shape[0])
    np.divide(diag, col, out=precisions, where=col > 0)
    return float(np.sqrt(precisions * recalls).mean())


class Metric:
    """Named scalar reward over normalized confusion matrices."""

    name = "metric"
    quasi_concave_pairwise = False

    def evaluate(self, C):
        raise NotImplementedError

    def __call__(self, C):
        return self.evaluate(C)

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r})"


class FunctionMetric(Metric):
    """Wrap a plain ``matrix -> float`` function."""

    def __init__(self, name, fn, quasi_concave_pairwise=False):
        self.name = name
        self.fn = fn
        self.quasi_concave_pairwise = quasi_concave_pairwise

    def evaluate(self, C):
        return float(self.fn(C))


class LinearDiagonalMetric(Metric):
    """sum_k beta_k * C_kk with beta on the simplex (so the score stays in [0, 1])."""

    quasi_concave_pairwise = True

    def __init__(self, beta, name="linear_diag"):
        beta = np.asarray(beta, dtype=np.float64)
        if beta.ndim != 1 or beta.shape[0] < 2:
            raise ValueError("beta must be a 1-d vector with at least 2 entries")
        if np.any(beta < 0) or not np.all(np.isfinite(beta)):
            raise ValueError("beta entries must be finite and non-negative")
        if abs(beta.sum() - 1.0) > 1e-9:
            raise ValueError(f"beta must sum to 1, got {beta.sum():.8g}")
        beta.setflags(write=False)
        self.beta = beta
        self.name = name

    def evaluate(self, C):
        C = _as_confusion(C)
        if C.shape[0] != self.beta.shape[0]:
            raise ValueError(f"metric is for {self.beta.shape[0]} classes, matrix has {C.shape[0]}")
        return float(self.beta @ np.diag(C))


class LinearFractionalMetric(Metric):
    """(<a, diag(C)> + b) / (<c, diag(C)> + d).

    The denominator is linear in the diagonal, so its minimum over the
    simplex of feasible diagonals is attained at a vertex (the origin or a
    coordinate vector): construction rejects coefficients that go negative
    there, and evaluation guards the residual boundary case where the
    denominator hits zero exactly.
    """

    quasi_concave_pairwise = True

    def __init__(self, a, b, c, d, name="linear_frac"):
        a = np.asarray(a, dtype=np.float64)
        c = np.asarray(c, dtype=np.float64)
        if a.ndim != 1 or a.shape != c.shape or a.shape[0] < 2:
            raise ValueError("a and c must be 1-d vectors of equal length >= 2")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c)) and np.isfinite(b) and np.isfinite(d)):
            raise ValueError("coefficients must be finite")
        vertex_values = np.concatenate(([d], c + d))  # denominator at the simplex vertices
        if np.any(vertex_values < -1e-12):
            raise ValueError(
                f"denominator is negative on the diagonal simplex (vertex minimum {vertex_values.min():.8g})"
            )
        a.setflags(write=False)
        c.setflags(write=False)
        self.a = a
        self.b = float(b)
        self.c = c
        self.d = float(d)
        self.name = name

    def evaluate(self, C):
        C = _as_confusion(C)
        if C.shape[0] != self.a.shape[0]:
            raise ValueError(f"metric is for {self.a.shape[0]} classes, matrix has {C.shape[0]}")
        diag = np.diag(C)
        denom = float(self.c @ diag) + self.d
        if denom <= 0.0:
            raise ValueError(f"linear-fractional denominator is {denom:.8g}, not positive")
        return (float(self.a @ diag) + self.b) / denom


class CountingMetric(Metric):
    """Transparent wrapper that counts evaluations (thread-safe)."""

    def __init__(self, inner):
        self.inner = inner
        self.name = inner.name
        self.quasi_concave_pairwise = inner.quasi_concave_pairwise
        self._lock = threading.Lock()
        self._count = 0

    @property
    def count(self):
        return self._count

    def reset(self):
        with self._lock:
            self._count = 0

    def evaluate(self, C):
        with self._lock:
            self._count += 1
        return self.inner.evaluate(C)


_BUILTINS = {
    "accuracy": (accuracy, True),
    "f1_macro": (f_measure_macro, False),
    "gmean_macro": (g_mean_macro, False),
    "mcc": (mcc, False),
    "fowlkes_mallows_macro": (fowlkes_mallows_macro, False),
}


def available_metrics():
    return sorted(_BUILTINS) + ["linear_diag:<c1,...,cm>", "linear_frac:<a1,...,am;b;c1,...,cm;d>"]


def _parse_floats(text):
    try:
        return [float(tok) for tok in text.split(",") if tok != ""]
    except ValueError as exc:
        raise ValueError(f"could not parse numbers from {text!r}") from exc


def get_metric(spec):
    """Resolve a metric name or parametrized spec string to a Metric.

    Plain names come from the registry; the parametric families are spelled
    ``linear_diag:<c1,...,cm>`` and ``linear_frac:<a1,...,am;b;c1,...,cm;d>``.
    """
    if isinstance(spec, Metric):
        return spec
    name, _, params = spec.partition(":")
    if name in _BUILTINS:
        if params:
            raise ValueError(f"metric {name!r} takes no parameters")
        fn, hint = _BUILTINS[name]
        return FunctionMetric(name, fn, quasi_concave_pairwise=hint)
    if name == "linear_diag":
        if not params:
            raise ValueError("linear_diag needs coefficients, e.g. linear_diag:0.5,0.3,0.2")
        return LinearDiagonalMetric(_parse_floats(params))
    if name == "linear_frac":
        parts = params.split(";")
        if len(parts) != 4:
            raise ValueError("linear_frac needs 'a1,...,am;b;c1,...,cm;d'")
        a = _parse_floats(parts[0])
        b = float(parts[1])
        c = _parse_floats(parts[2])
        d = float(parts[3])
        return LinearFractionalMetric(a, b, c, d)
    raise ValueError(f"unknown metric {name!r}; available: {', '.join(available_metrics())}")
