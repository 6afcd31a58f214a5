"""Brute-force weight grid search: the slow reference the fast fitter is judged against."""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .metrics import get_metric
from .plugin import fit_weights
from .samples import confusion_from_weights


class ResourceLimitError(RuntimeError):
    """A requested grid exceeds its configured point budget."""


def _ceil_inverse(epsilon):
    # exact-integer-aware ceil(1/epsilon) for decimal inputs
    axis = 1.0 / float(epsilon)
    k = int(math.floor(axis + 1e-9))
    return k if axis - k <= 1e-9 else k + 1


@dataclass(frozen=True)
class GridSpec:
    """Full weight grid: one axis per non-reference class, last coordinate pinned to 1."""

    epsilon: float
    num_classes: int
    max_points: int = 200_000

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.max_points < 1:
            raise ValueError("max_points must be positive")

    @property
    def points_per_axis(self):
        return _ceil_inverse(self.epsilon) + 1

    @property
    def total_points(self):
        return self.points_per_axis ** (self.num_classes - 1)

    def axis_values(self):
        return np.minimum(np.arange(self.points_per_axis, dtype=np.float64) * self.epsilon, 1.0)


def brute_force_fit(sample_set, metric, grid):
    """Exhaustively search the weight grid; returns (normalized weights, value).

    Enumerates free coordinates lexicographically and keeps strict improvements
    only, so ties resolve to the smallest weight tuple.  Raises
    :class:`ResourceLimitError` before touching data when the grid is over
    budget.
    """
    metric = get_metric(metric)
    if grid.num_classes != sample_set.num_classes:
        raise ValueError("grid and sample disagree on the number of classes")
    if grid.total_points > grid.max_points:
        raise ResourceLimitError(
            f"weight grid has {grid.total_points} points, over the max_points cap "
            f"of {grid.max_points}; raise the cap or coarsen epsilon"
        )
    if sample_set.n == 0:
        raise ValueError("cannot fit on an empty sample set")
    axis = grid.axis_values()
    m = grid.num_classes
    best_w, best_v = None, -math.inf
    w = np.ones(m)
    for combo in itertools.product(axis, repeat=m - 1):
        w[: m - 1] = combo
        v = metric(confusion_from_weights(sample_set, w))
        if v > best_v:
            best_v = v
            best_w = w.copy()
    return best_w / best_w.sum(), float(best_v)


def compare_to_oracle(sample_set, metric, epsilon, rho=None, max_points=200_000):
    """Fit both ways on one sample and report achieved full-sample metric values.

    The gap is brute-force minus plugin; it can be negative, since the plugin's
    odds can leave the oracle's [0, 1] ratio grid.
    """
    metric = get_metric(metric)
    report = fit_weights(sample_set, metric, epsilon=epsilon, rho=rho, search_mode="line")
    plugin_w = report.weights.weights
    plugin_v = metric(confusion_from_weights(sample_set, plugin_w))
    brute_w, brute_v = brute_force_fit(
        sample_set, metric, GridSpec(epsilon, sample_set.num_classes, max_points=max_points)
    )
    return {
        "plugin_weights": plugin_w,
        "plugin_value": float(plugin_v),
        "brute_weights": brute_w,
        "brute_value": float(brute_v),
        "gap": float(brute_v - plugin_v),
    }
