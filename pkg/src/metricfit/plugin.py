"""Coordinate-wise threshold search for post-hoc class weights.

The fitter holds one reference class fixed and, for every other class k,
restricts the sample to true labels {k, reference}.  On that restriction it
searches a shared threshold grid for the mixing coefficient alpha whose
two-class decision rule maximizes the metric, then converts alpha to a class
weight via the odds alpha / (1 - alpha).  Inference is a weighted argmax over
the black box's probability vector; ties always resolve to the smallest class
index.

Two search paths are provided: an exhaustive line search (with an incremental
confusion sweep that is bit-for-bit identical to the naive per-grid-point
rebuild) and a logarithmic peak search for metrics whose pairwise restricted
curves are unimodal.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .metrics import CountingMetric, get_metric
from .samples import (
    SampleSet,
    check_probability_matrix,
    check_probability_vector,
    validate_assumption,
    weighted_argmax,
)

SEARCH_MODES = ("line", "unimodal", "auto")


@dataclass(frozen=True)
class WeightVector:
    """Normalized per-class weights plus the configuration that produced them."""

    weights: np.ndarray
    reference_class: int
    metric_name: str
    epsilon: float
    rho: float
    search_mode: str

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] < 2:
            raise ValueError("weights must be a 1-d vector with at least 2 entries")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {w.sum():.12g}")
        if not 0 <= self.reference_class < w.shape[0]:
            raise ValueError("reference_class out of range")
        if w[self.reference_class] <= 0:
            raise ValueError("the reference class must keep strictly positive weight")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def num_classes(self):
        return self.weights.shape[0]


@dataclass(frozen=True)
class FitReport:
    """Everything a fit produced: weights, per-pair search results, diagnostics."""

    weights: WeightVector
    searched_classes: np.ndarray  # classes other than the reference, ascending
    alphas: np.ndarray            # chosen threshold per searched class
    pair_values: np.ndarray       # best restricted metric value per searched class
    pair_sizes: np.ndarray        # restriction size per searched class
    metric_evaluations: int
    warnings: tuple


def _check_epsilon_rho(epsilon, rho):
    epsilon = float(epsilon)
    rho = epsilon if rho is None else float(rho)
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    return epsilon, rho


def alpha_grid(epsilon, rho):
    """Threshold grid {0, epsilon, 2*epsilon, ...} intersected with [0, 1 - rho]."""
    epsilon, rho = _check_epsilon_rho(epsilon, rho)
    # floor with an absolute fuzz so decimal inputs like 0.9/0.1 hit the intended count
    last = int(math.floor((1.0 - rho) / epsilon + 1e-9))
    grid = np.minimum(np.arange(last + 1, dtype=np.float64) * epsilon, 1.0 - rho)
    grid.setflags(write=False)
    return grid


def unimodal_budget(epsilon):
    """Evaluation allowance per pair for the logarithmic search path."""
    return 2 * max(1, math.ceil(math.log2(1.0 / float(epsilon)) - 1e-12)) + 2


def restricted_predict(alpha, k, ref, p):
    """Two-class rule: k when alpha * p[k] strictly beats (1 - alpha) * p[ref], else ref."""
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    p = check_probability_vector(p)
    m = p.shape[0]
    if not (0 <= k < m and 0 <= ref < m):
        raise ValueError("class indices out of range")
    if k == ref:
        raise ValueError("k and ref must differ")
    return k if alpha * p[k] > (1.0 - alpha) * p[ref] else ref


def restrict_sample(sample_set, k, ref):
    """Sub-sample with true label in {k, ref}, order preserved, labels kept as-is."""
    m = sample_set.num_classes
    if not (0 <= k < m and 0 <= ref < m):
        raise ValueError("class indices out of range")
    if k == ref:
        raise ValueError("k and ref must differ")
    mask = (sample_set.labels == k) | (sample_set.labels == ref)
    return SampleSet(sample_set.probs[mask], sample_set.labels[mask])


def _pair_arrays(S_km, k, ref):
    labels = S_km.labels
    if not np.all((labels == k) | (labels == ref)):
        raise ValueError(f"restricted sample contains labels outside {{{k}, {ref}}}")
    return S_km.probs[:, k], S_km.probs[:, ref], labels == k


def _first_flip_indices(pk, pr, grid):
    """Smallest grid index where alpha * pk > (1 - alpha) * pr, len(grid) if never.

    Uses the exact float predicate at grid points (monotone in alpha), so the
    result characterizes the naive per-grid-point decision bit for bit.
    """
    G = grid.shape[0]
    lo = np.zeros(pk.shape[0], dtype=np.int64)
    hi = np.full(pk.shape[0], G, dtype=np.int64)
    active = lo < hi
    while active.any():
        mid = (lo + hi) // 2
        a = grid[np.where(active, mid, 0)]
        hit = (a * pk) > ((1.0 - a) * pr)
        lo = np.where(active & ~hit, mid + 1, lo)
        hi = np.where(active & hit, mid, hi)
        active = lo < hi
    return lo


def _pair_confusion(m, k, ref, n_kk, n_k_ref, n_ref_k, n_ref_ref, n_total):
    C = np.zeros((m, m))
    C[k, k] = n_kk / n_total
    C[k, ref] = n_k_ref / n_total
    C[ref, k] = n_ref_k / n_total
    C[ref, ref] = n_ref_ref / n_total
    return C


def _flip_counts(S_km, k, ref, grid):
    """Per-grid-point contingency counts for the restricted rule, via flip indices."""
    pk, pr, is_k = _pair_arrays(S_km, k, ref)
    G = grid.shape[0]
    flip = _first_flip_indices(pk, pr, grid)
    K = np.cumsum(np.bincount(flip[is_k], minlength=G + 1))[:G]
    R = np.cumsum(np.bincount(flip[~is_k], minlength=G + 1))[:G]
    return K, R, int(is_k.sum()), int((~is_k).sum())


def alpha_line_search(S_km, metric, k, ref, epsilon, rho=None, *, incremental=True):
    """Evaluate the metric at every grid alpha on a restricted sample.

    Returns ``(alpha, best_value)`` with ties resolved to the smallest alpha.
    The incremental path sorts samples by flip threshold and updates the
    two-class contingency counts across the sweep; the naive path rebuilds
    them per grid point.  Both produce identical floats.
    """
    grid = alpha_grid(epsilon, rho)
    if S_km.n == 0:
        raise ValueError("cannot search an empty restricted sample")
    m = S_km.num_classes
    best_g, best_v = -1, -math.inf
    if incremental:
        K, R, n_k, n_r = _flip_counts(S_km, k, ref, grid)
        for g in range(grid.shape[0]):
            C = _pair_confusion(m, k, ref, int(K[g]), n_k - int(K[g]), int(R[g]), n_r - int(R[g]), S_km.n)
            v = metric(C)
            if v > best_v:
                best_g, best_v = g, v
    else:
        pk, pr, is_k = _pair_arrays(S_km, k, ref)
        n_k = int(is_k.sum())
        n_r = S_km.n - n_k
        for g in range(grid.shape[0]):
            hit = (grid[g] * pk) > ((1.0 - grid[g]) * pr)
            kk = int(np.sum(hit & is_k))
            rk = int(np.sum(hit & ~is_k))
            C = _pair_confusion(m, k, ref, kk, n_k - kk, rk, n_r - rk, S_km.n)
            v = metric(C)
            if v > best_v:
                best_g, best_v = g, v
    return float(grid[best_g]), float(best_v)


def alpha_unimodal_search(S_km, metric, k, ref, epsilon, rho=None):
    """Logarithmic peak search over the same grid as :func:`alpha_line_search`.

    Requires ``metric.quasi_concave_pairwise``.  The grid is first compressed
    to segments of constant contingency counts (no metric calls needed), then
    either scanned outright when that fits the per-pair evaluation budget of
    ``2 * ceil(log2(1/epsilon)) + 2``, or bisected on the slope sign.  The
    result matches the line search's value whenever the segment values rise
    strictly, plateau at most once at the peak, and fall strictly — which
    holds for threshold-separable restrictions of the hinted metric families.
    Plateau ties resolve to the smallest surviving alpha.
    """
    if not metric.quasi_concave_pairwise:
        raise ValueError(
            f"metric {metric.name!r} is not flagged quasi-concave on pairwise "
            "restrictions; fall back to line search"
        )
    grid = alpha_grid(epsilon, rho)
    if S_km.n == 0:
        raise ValueError("cannot search an empty restricted sample")
    m = S_km.num_classes
    G = grid.shape[0]
    pk, pr, is_k = _pair_arrays(S_km, k, ref)
    flip = _first_flip_indices(pk, pr, grid)
    K = np.cumsum(np.bincount(flip[is_k], minlength=G + 1))[:G]
    R = np.cumsum(np.bincount(flip[~is_k], minlength=G + 1))[:G]
    n_k = int(is_k.sum())
    n_r = S_km.n - n_k
    # segment starts = grid indices where some sample flips (plus the origin)
    reps = np.unique(np.concatenate(([0], flip[flip < G])))

    memo = {}

    def value_at(s):
        if s not in memo:
            g = int(reps[s])
            C = _pair_confusion(m, k, ref, int(K[g]), n_k - int(K[g]), int(R[g]), n_r - int(R[g]), S_km.n)
            memo[s] = metric(C)
        return memo[s]

    n_seg = reps.shape[0]
    budget = unimodal_budget(epsilon)
    if n_seg <= budget:
        candidates = range(n_seg)
    else:
        lo, hi = 0, n_seg - 1
        while hi - lo >= 2:
            mid = (lo + hi) // 2
            left, right = value_at(mid), value_at(mid + 1)
            if left < right:
                lo = mid + 1
            elif left > right:
                hi = mid
            else:
                # adjacent plateau: the peak itself for strictly-one-sided curves
                lo = hi = mid
        candidates = range(lo, hi + 1)
    best_s = min(candidates, key=lambda s: (-value_at(s), s))
    return float(grid[reps[best_s]]), float(value_at(best_s))


def _resolve_search_mode(search_mode, metric):
    if search_mode not in SEARCH_MODES:
        raise ValueError(f"search_mode must be one of {SEARCH_MODES}, got {search_mode!r}")
    if search_mode == "auto":
        return "unimodal" if metric.quasi_concave_pairwise else "line"
    return search_mode


def fit_weights(
    sample_set,
    metric,
    epsilon=0.01,
    rho=None,
    reference_class=None,
    search_mode="line",
    parallel=False,
    class_order=None,
):
    """Fit per-class weights on a validation sample.

    Parameters
    ----------
    sample_set : SampleSet
        Black-box predictions with true labels.
    metric : Metric or str
        Confusion-matrix metric (or registry spec string) to maximize.
    epsilon : float
        Grid step for the threshold search.
    rho : float, optional
        Upper margin; the grid stops at 1 - rho.  Defaults to epsilon.
    reference_class : int, optional
        Class whose weight is pinned before normalization.  Defaults to the
        last class.
    search_mode : {"line", "unimodal", "auto"}
        "auto" picks the unimodal path when the metric is flagged for it.
    parallel : bool
        Run the per-class searches in a thread pool.  Results are written to
        per-class slots, so the output is bit-identical to the serial path.
    class_order : sequence of int, optional
        Scheduling order for the searched classes (testing hook; the output
        never depends on it).

    Returns
    -------
    FitReport
    """
    metric = get_metric(metric)
    epsilon, rho = _check_epsilon_rho(epsilon, rho)
    if sample_set.n == 0:
        raise ValueError("cannot fit on an empty sample set")
    m = sample_set.num_classes
    ref = m - 1 if reference_class is None else int(reference_class)
    if not 0 <= ref < m:
        raise ValueError(f"reference_class must lie in [0, {m}), got {ref}")
    mode = _resolve_search_mode(search_mode, metric)
    if mode == "unimodal" and not metric.quasi_concave_pairwise:
        raise ValueError(
            f"metric {metric.name!r} is not flagged quasi-concave on pairwise "
            "restrictions; use search_mode='line'"
        )

    searched = [c for c in range(m) if c != ref]
    if class_order is None:
        order = searched
    else:
        order = [int(c) for c in class_order]
        if sorted(order) != searched:
            raise ValueError("class_order must be a permutation of the non-reference classes")

    warnings = []
    assumption = validate_assumption(sample_set)
    for c in np.flatnonzero(~assumption.per_class):
        warnings.append(f"class {int(c)} never receives positive prediction mass")

    counter = CountingMetric(metric)

    def solve(c):
        S_km = restrict_sample(sample_set, c, ref)
        if S_km.n == 0:
            return c, None
        zero_both = int(np.sum((S_km.probs[:, c] == 0) & (S_km.probs[:, ref] == 0)))
        if mode == "line":
            alpha, value = alpha_line_search(S_km, counter, c, ref, epsilon, rho)
        else:
            alpha, value = alpha_unimodal_search(S_km, counter, c, ref, epsilon, rho)
        return c, (alpha, value, S_km.n, zero_both)

    if parallel and len(order) > 1:
        with ThreadPoolExecutor(max_workers=min(8, len(order))) as pool:
            results = dict(pool.map(solve, order))
    else:
        results = dict(solve(c) for c in order)

    pre_norm = np.ones(m)
    alphas = np.full(len(searched), 0.5)  # odds 1 <=> the defaulted weight
    values = np.full(len(searched), np.nan)
    sizes = np.zeros(len(searched), dtype=np.int64)
    for i, c in enumerate(searched):
        outcome = results[c]
        if outcome is None:
            warnings.append(
                f"no samples with label {c} or {ref}; weight for class {c} left at its default"
            )
            continue
        alpha, value, size, zero_both = outcome
        pre_norm[c] = alpha / (1.0 - alpha)
        alphas[i] = alpha
        values[i] = value
        sizes[i] = size
        if zero_both:
            warnings.append(
                f"{zero_both} samples in the ({c}, {ref}) restriction put zero mass "
                "on both classes; they always predict the reference"
            )

    weights = WeightVector(
        weights=pre_norm / pre_norm.sum(),
        reference_class=ref,
        metric_name=metric.name,
        epsilon=epsilon,
        rho=rho,
        search_mode=mode,
    )
    for arr in (alphas, values, sizes):
        arr.setflags(write=False)
    searched_arr = np.asarray(searched, dtype=np.int64)
    searched_arr.setflags(write=False)
    return FitReport(
        weights=weights,
        searched_classes=searched_arr,
        alphas=alphas,
        pair_values=values,
        pair_sizes=sizes,
        metric_evaluations=counter.count,
        warnings=tuple(warnings),
    )


def apply_weights(probs, weights):
    """Weighted-argmax prediction for a single vector or a matrix of vectors."""
    w = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim == 1:
        return int(weighted_argmax(check_probability_vector(probs), w))
    return weighted_argmax(check_probability_matrix(probs), w)


class ClassWeightPlugin(BaseEstimator):
    """Post-hoc weighting layer over a black-box probabilistic classifier.

    The estimator consumes the black box's probability outputs as its feature
    matrix: ``fit(P, y)`` learns one weight per class by coordinate-wise
    threshold search, ``predict(P)`` applies the weighted argmax.

    Parameters
    ----------
    metric : str or Metric, default="accuracy"
        Confusion-matrix metric to maximize on the validation sample.
    epsilon : float, default=0.01
        Threshold grid step.
    rho : float or None
        Upper search margin (grid stops at 1 - rho); None means epsilon.
    reference_class : int or None
        Fixed-weight class; None means the last one.
    search : {"auto", "line", "unimodal"}, default="auto"
    parallel : bool, default=False
    """

    def __init__(self, metric="accuracy", epsilon=0.01, rho=None, reference_class=None,
                 search="auto", parallel=False):
        self.metric = metric
        self.epsilon = epsilon
        self.rho = rho
        self.reference_class = reference_class
        self.search = search
        self.parallel = parallel

    def fit(self, X, y):
        sample_set = SampleSet(np.asarray(X, dtype=np.float64), np.asarray(y))
        self.report_ = fit_weights(
            sample_set,
            self.metric,
            epsilon=self.epsilon,
            rho=self.rho,
            reference_class=self.reference_class,
            search_mode=self.search,
            parallel=self.parallel,
        )
        self.weight_vector_ = self.report_.weights
        self.weights_ = self.report_.weights.weights
        self.n_classes_ = sample_set.num_classes
        return self

    def predict(self, X):
        if not hasattr(self, "weights_"):
            raise NotFittedError("this ClassWeightPlugin instance is not fitted yet")
        P = check_probability_matrix(np.asarray(X, dtype=np.float64))
        if P.shape[1] != self.n_classes_:
            raise ValueError(f"expected {self.n_classes_} classes, got {P.shape[1]}")
        return weighted_argmax(P, self.weights_)
