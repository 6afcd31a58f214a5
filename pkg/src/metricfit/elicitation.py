"""Recovery harness: can the fitter reconstruct a hidden linear-diagonal metric?

A linear-diagonal metric with coefficients beta is hidden behind a counting
query interface; the fitter only ever evaluates it on confusion matrices.  If
recovery works, the fitted weights approximate beta itself, with an explicit
finite-sample bound (reported with leading constant 1, as an advisory rather
than a hard guarantee).
"""

import math
from dataclasses import dataclass

import numpy as np

from .generators import SoftmaxGroundTruth
from .metrics import CountingMetric, LinearDiagonalMetric
from .plugin import fit_weights


@dataclass(frozen=True)
class ElicitationReport:
    beta_true: np.ndarray
    weights: np.ndarray          # recovered, normalized like beta
    l1_error: float
    n: int
    epsilon: float
    delta: float
    rho: float                   # search margin implied by beta
    gamma: float                 # sqrt(log(1/delta)/n) + epsilon/2
    bound_rhs: float             # 2 m gamma / (1 - rho)^2
    within_bound: bool           # advisory only
    metric_queries: int
    warnings: tuple


def required_search_margin(beta):
    """Margin rho = min_k beta_ref / (beta_ref + beta_k) over non-reference classes.

    The reference is the last class; its coefficient must be strictly positive
    for any finite odds to reproduce the target thresholds.
    """
    beta = np.asarray(beta, dtype=np.float64)
    ref = beta.shape[0] - 1
    if beta[ref] <= 0:
        raise ValueError("the reference (last) coefficient must be strictly positive")
    ratios = beta[ref] / (beta[ref] + beta[:ref])
    return float(ratios.min())


def elicit(beta, n, epsilon, delta=0.05, seed=0, latent_dim=6, scale=1.25):
    """Hide a linear-diagonal metric, fit on synthetic data, report recovery error.

    Parameters
    ----------
    beta : array-like
        Hidden simplex coefficients; the last entry is the reference and must
        be positive.
    n : int
        Synthetic validation sample size.
    epsilon : float
        Threshold grid step for the fit.
    delta : float
        Confidence level entering gamma.
    seed : int
        Drives both the random ground-truth layer and the sample draw.
    """
    target = LinearDiagonalMetric(beta, name="hidden_linear_diag")
    beta = target.beta
    m = beta.shape[0]
    rho = required_search_margin(beta)
    if rho >= 1.0:
        raise ValueError("beta leaves no searchable interval (all non-reference coefficients are 0)")
    truth = SoftmaxGroundTruth(m, latent_dim=latent_dim, scale=scale, seed=seed)
    sample = truth.sample(n, seed=1)
    hidden = CountingMetric(target)
    report = fit_weights(
        sample, hidden, epsilon=epsilon, rho=rho, reference_class=m - 1, search_mode="line"
    )
    w = report.weights.weights
    l1 = float(np.abs(beta - w).sum())
    gamma = math.sqrt(math.log(1.0 / delta) / n) + epsilon / 2.0
    bound_rhs = 2.0 * m * gamma / (1.0 - rho) ** 2
    return ElicitationReport(
        beta_true=beta,
        weights=w,
        l1_error=l1,
        n=int(n),
        epsilon=float(epsilon),
        delta=float(delta),
        rho=rho,
        gamma=gamma,
        bound_rhs=bound_rhs,
        within_bound=bool(l1 <= bound_rhs),
        metric_queries=hidden.count,
        warnings=report.warnings,
    )
