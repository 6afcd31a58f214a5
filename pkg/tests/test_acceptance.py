"""End-to-end acceptance gate.

Ten properties, one test each, covering: oracle equivalence of the
coordinate-wise fitter, hidden-metric recovery and its sample-size trend, the
evaluation-count laws of both search paths, determinism under scheduling
changes, bitwise agreement of the two line-search implementations, metric
formula spot values, corruption-generator statistics, end-to-end improvement
under label shift, the calibration baseline's gradient, and the brute-force
grid guard.  Each test prints a single pass/fail line with the observed
numbers (visible with ``pytest -s``, and in the failure report otherwise).
"""

import math
import time

import numpy as np
import pytest

import metricfit as mf
from metricfit.baselines import VectorScaler, clean_eval, nll_and_grad
from metricfit.metrics import CountingMetric, get_metric, mcc_raw
from metricfit.oracle import GridSpec, ResourceLimitError, brute_force_fit, compare_to_oracle
from metricfit.plugin import (
    alpha_line_search,
    alpha_unimodal_search,
    fit_weights,
    unimodal_budget,
)
from metricfit.samples import SampleSet, confusion_from_labels


def _report(num, name, ok, detail):
    print(f"[criterion {num:>2}] {'PASS' if ok else 'FAIL'} — {name}: {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


def _separable_pair(rng, n_lo=20, n_hi=201):
    """Restricted two-class sample whose labels split at an odds threshold.

    This is the population shape for which the pairwise objective is actually
    unimodal; labels that ignore the odds ordering produce noisy, multi-peaked
    empirical curves on which no sublinear search can match the full sweep.
    """
    n = int(rng.integers(n_lo, n_hi))
    odds = rng.lognormal(0.0, 1.5, size=n)
    n_zero = int(rng.integers(0, 4))
    if n_zero:
        odds[:n_zero] = np.inf  # rows with zero reference mass
    order = np.argsort(-odds)
    cut = int(rng.integers(max(1, n_zero), n))
    labels = np.ones(n, dtype=int)
    labels[order[:cut]] = 0
    finite = np.isfinite(odds)
    p0 = np.ones(n)
    p0[finite] = odds[finite] / (1.0 + odds[finite])
    return SampleSet(np.column_stack([p0, 1.0 - p0]), labels)


def test_criterion_01_oracle_equivalence():
    """Plugin value within eps*m of the exhaustive grid on 20 random instances."""
    start = time.perf_counter()
    eps, m, n = 0.05, 3, 100
    gaps = []
    for seed in range(20):
        truth = mf.SoftmaxGroundTruth(m, seed=seed)
        sample = truth.sample(n, seed=seed + 100)
        res = compare_to_oracle(sample, "linear_diag:0.5,0.3,0.2", eps)
        gaps.append(res["gap"])
    elapsed = time.perf_counter() - start
    ok = all(g <= eps * m + 1e-12 for g in gaps) and elapsed < 10.0
    _report(1, "oracle equivalence", ok,
            f"max gap {max(gaps):.4f} (allowed {eps * m:.2f}), {elapsed:.2f}s")


def test_criterion_02_elicitation_consistency():
    """Hidden linear-diagonal coefficients recovered to L1 <= 0.05 at n=1e5,
    with strictly decreasing median error over n in {1e2, 1e3, 1e4}."""
    start = time.perf_counter()
    betas = ([0.5, 0.3, 0.2], [0.7, 0.2, 0.1], [0.25, 0.25, 0.25, 0.25])
    l1s, trends = [], []
    for beta in betas:
        rep = mf.elicit(beta, n=100_000, epsilon=1e-3, seed=0)
        l1s.append(rep.l1_error)
        medians = []
        for n in (100, 1_000, 10_000):
            errs = [mf.elicit(beta, n=n, epsilon=1e-3, seed=s).l1_error for s in range(10)]
            medians.append(float(np.median(errs)))
        trends.append(medians[0] > medians[1] > medians[2])
    elapsed = time.perf_counter() - start
    ok = all(v <= 0.05 for v in l1s) and all(trends) and elapsed < 60.0
    _report(2, "metric elicitation", ok,
            "l1@1e5 = " + "/".join(f"{v:.4f}" for v in l1s)
            + f" (<=0.05), medians decreasing for all betas: {all(trends)}, {elapsed:.1f}s")


def test_criterion_03_evaluation_count_law():
    """Line search evaluates (m-1)*ceil((1-rho)/eps + 1) points exactly, the
    peak search stays within (m-1)*(2*ceil(log2(1/eps)) + 2), and on flagged
    metrics both return the same best value on separable restrictions."""
    count_ok = True
    details = []
    for m in (3, 5, 8):
        truth = mf.SoftmaxGroundTruth(m, seed=7)
        sample = truth.sample(300, seed=2)
        for eps in (0.1, 0.01):
            grid_points = int(math.floor((1.0 - eps) / eps + 1e-9)) + 1
            counter = CountingMetric(get_metric("accuracy"))
            rep = fit_weights(sample, counter, epsilon=eps, search_mode="line")
            if rep.metric_evaluations != (m - 1) * grid_points:
                count_ok = False
                details.append(f"line m={m} eps={eps}: {rep.metric_evaluations}")
            counter = CountingMetric(get_metric("accuracy"))
            rep = fit_weights(sample, counter, epsilon=eps, search_mode="unimodal")
            if rep.metric_evaluations > (m - 1) * unimodal_budget(eps):
                count_ok = False
                details.append(f"unimodal m={m} eps={eps}: {rep.metric_evaluations}")

    rng = np.random.default_rng(20240817)
    metrics = [get_metric(s) for s in
               ("accuracy", "linear_diag:0.3,0.7", "linear_frac:2,0;0;1,-1;1")]
    eps = 0.01
    worst = 0.0
    over_budget = 0
    for _ in range(50):
        sample = _separable_pair(rng)
        for metric in metrics:
            _, v_line = alpha_line_search(sample, metric, 0, 1, eps)
            counter = CountingMetric(metric)
            _, v_uni = alpha_unimodal_search(sample, counter, 0, 1, eps)
            worst = max(worst, abs(v_uni - v_line))
            if counter.count > unimodal_budget(eps):
                over_budget += 1
    ok = count_ok and worst <= 1e-12 and over_budget == 0
    _report(3, "evaluation-count law", ok,
            f"line counts exact and peak-search within budget on (m,eps) grid: {count_ok}; "
            f"max |line - unimodal| value gap {worst:.1e} over 150 separable searches "
            f"(over-budget: {over_budget})" + ("; " + "; ".join(details) if details else ""))


def test_criterion_04_scheduling_determinism():
    """Reversed class order and threaded execution leave every bit unchanged."""
    rng = np.random.default_rng(777)
    mismatches = 0
    for trial in range(20):
        m = int(rng.integers(2, 7))
        n = int(rng.integers(30, 501))
        truth = mf.SoftmaxGroundTruth(m, seed=int(rng.integers(0, 10_000)))
        sample = truth.sample(n, seed=int(rng.integers(0, 10_000)))
        metric = ("accuracy", "f1_macro", "gmean_macro")[trial % 3]
        base = fit_weights(sample, metric, epsilon=0.05)
        rev = fit_weights(sample, metric, epsilon=0.05,
                          class_order=list(range(m - 1))[::-1])
        par = fit_weights(sample, metric, epsilon=0.05, parallel=True)
        if not (np.array_equal(base.weights.weights, rev.weights.weights)
                and np.array_equal(base.weights.weights, par.weights.weights)
                and np.array_equal(base.alphas, rev.alphas)
                and np.array_equal(base.alphas, par.alphas)):
            mismatches += 1
    _report(4, "order/parallel determinism", mismatches == 0,
            f"{20 - mismatches}/20 instances bit-identical under reversal and threading")


def test_criterion_05_incremental_vs_naive():
    """The cumulative flip sweep and the per-point confusion rebuild agree
    exactly, including exact ties and zero reference mass."""
    rng = np.random.default_rng(31337)
    disagreements = 0
    for trial in range(50):
        n = int(rng.integers(5, 120))
        style = trial % 3
        if style == 0:
            p0 = rng.random(n)
        elif style == 1:
            p0 = rng.integers(0, 5, size=n) / 4.0  # dyadic: exact ties occur
        else:
            p0 = rng.random(n)
            p0[: max(1, n // 10)] = 1.0            # p_ref = 0 rows
        sample = SampleSet(np.column_stack([p0, 1.0 - p0]), rng.integers(0, 2, n))
        for mname in ("accuracy", "f1_macro", "linear_diag:0.3,0.7"):
            metric = get_metric(mname)
            eps = (0.1, 0.01)[trial % 2]
            inc = alpha_line_search(sample, metric, 0, 1, eps, incremental=True)
            nai = alpha_line_search(sample, metric, 0, 1, eps, incremental=False)
            if inc != nai:
                disagreements += 1
    _report(5, "incremental sweep agreement", disagreements == 0,
            f"identical (alpha, value) pairs on 50 samples x 3 metrics "
            f"({disagreements} disagreements)")


def test_criterion_06_metric_spot_checks():
    """Hand-derived metric values, trace identity, and degenerate conventions."""
    C = np.array([[0.4, 0.1], [0.1, 0.4]])
    collapse = np.array([[0.5, 0.0], [0.5, 0.0]])  # constant predictor
    checks = [abs(mf.f_measure_binary(C) - 0.8) <= 1e-12]
    rng = np.random.default_rng(4242)
    acc = get_metric("accuracy")
    for _ in range(100):
        m = int(rng.integers(2, 6))
        M = rng.random((m, m))
        M /= M.sum()
        checks.append(abs(acc(M) - np.trace(M)) <= 1e-12)
    checks.append(abs(mcc_raw(collapse) - 0.0) <= 1e-12)
    checks.append(abs(mf.g_mean_macro(collapse) - 0.0) <= 1e-12)
    ok = all(checks)
    _report(6, "metric spot checks", ok,
            "binary F 0.8, trace identity on 100 random matrices, "
            "constant-predictor MCC raw 0, zero-recall G-mean 0 (all to 1e-12)")


def test_criterion_07_corruption_statistics():
    """Knock-out shift (80% on classes 0,1) and label noise (p=0.6) both land
    within 3 sigma of their binomial expectations on 10^4 samples."""
    truth = mf.SoftmaxGroundTruth(3, seed=11)
    sample = truth.sample(10_000, seed=5)
    counts = sample.class_counts()
    checks = []
    kept = mf.apply_label_shift(sample, mf.ShiftSpec((0, 1), 0.8, seed=3))
    shift_obs = []
    for c in (0, 1):
        survivors = int((kept.labels == c).sum())
        mean = 0.2 * counts[c]
        sd = math.sqrt(counts[c] * 0.8 * 0.2)
        checks.append(abs(survivors - mean) <= 3 * sd)
        shift_obs.append(survivors)
    checks.append(int((kept.labels == 2).sum()) == counts[2])
    noisy = mf.apply_label_noise(sample, mf.NoiseSpec((0,), 0.6, seed=4))
    flipped = int(((sample.labels == 0) & (noisy.labels != 0)).sum())
    mean = 0.6 * counts[0]
    sd = math.sqrt(counts[0] * 0.6 * 0.4)
    checks.append(abs(flipped - mean) <= 3 * sd)
    untouched = sample.labels != 0
    checks.append(bool((noisy.labels[untouched] == sample.labels[untouched]).all()))
    ok = all(checks)
    _report(7, "corruption statistics", ok,
            f"shift survivors {shift_obs} vs means [{0.2 * counts[0]:.0f}, {0.2 * counts[1]:.0f}], "
            f"noise flips {flipped} vs mean {mean:.0f}, all within 3 sigma")


def test_criterion_08_end_to_end_improvement():
    """Fitting on 100 shifted validation samples beats the clean argmax on the
    fixed test set for macro F-measure in at least 4 of 5 resamples."""
    bench = mf.make_shift_benchmark(
        seed=0, num_classes=3, n_proxy_train=5000, n_val=2000, n_test=4000,
        shift=mf.ShiftSpec((0, 1), 0.8, seed=0),
    )
    metric = get_metric("f1_macro")
    clean = clean_eval(bench.test, metric)
    wins, values = 0, []
    for repeat in range(5):
        order = np.random.default_rng([0, repeat]).permutation(bench.val.n)
        fitted = fit_weights(bench.val.subset(order[:100]), metric, epsilon=0.01)
        predicted = mf.apply_weights(bench.test.probs, fitted.weights.weights)
        value = metric(confusion_from_labels(bench.test, predicted))
        values.append(value)
        wins += value > clean
    mean_improvement = float(np.mean(values) - clean)
    ok = wins >= 4 and mean_improvement > 0
    _report(8, "end-to-end improvement under shift", ok,
            f"clean {clean:.4f}, weighted mean {np.mean(values):.4f}, "
            f"wins {wins}/5, mean improvement {mean_improvement:+.4f}")


def test_criterion_09_scaler_gradient():
    """Analytic calibration gradient matches central differences to 1e-4, and
    gradient descent never ends above its starting loss."""
    rng = np.random.default_rng(99)
    m, n = 4, 60
    probs = rng.dirichlet(np.ones(m), size=n)
    labels = rng.integers(0, m, size=n)
    h = 1e-5
    worst = 0.0
    for _ in range(10):
        w = rng.normal(1.0, 0.3, size=m)
        c = rng.normal(0.0, 0.3, size=m)
        _, gw, gc = nll_and_grad(probs, labels, w, c)
        for j in range(m):
            for vec, grad in ((w, gw), (c, gc)):
                plus, minus = vec.copy(), vec.copy()
                plus[j] += h
                minus[j] -= h
                if vec is w:
                    f_plus = nll_and_grad(probs, labels, plus, c)[0]
                    f_minus = nll_and_grad(probs, labels, minus, c)[0]
                else:
                    f_plus = nll_and_grad(probs, labels, w, plus)[0]
                    f_minus = nll_and_grad(probs, labels, w, minus)[0]
                fd = (f_plus - f_minus) / (2 * h)
                worst = max(worst, abs(fd - grad[j]) / max(1e-12, abs(grad[j])))
    descended = []
    for seed in range(5):
        truth = mf.SoftmaxGroundTruth(3, seed=seed)
        raw = truth.sample(200, seed=1)
        s = SampleSet(mf.distort_predictions(raw.probs, temperature=3.0), raw.labels)
        vs = VectorScaler(max_iter=300).fit(s.probs, s.labels)
        descended.append(vs.final_nll_ <= vs.initial_nll_)
    ok = worst <= 1e-4 and all(descended)
    _report(9, "vector-scaler gradient", ok,
            f"max relative gradient error {worst:.2e} (<=1e-4), "
            f"NLL non-increasing on {sum(descended)}/5 fits")


def test_criterion_10_grid_guard():
    """A 5-class eps=0.1 grid (14641 points) must be refused under a 1e4 cap."""
    grid = GridSpec(epsilon=0.1, num_classes=5, max_points=10_000)
    truth = mf.SoftmaxGroundTruth(5, seed=1)
    sample = truth.sample(50, seed=1)
    with pytest.raises(ResourceLimitError):
        brute_force_fit(sample, "accuracy", grid)
    _report(10, "brute-force grid guard", True,
            f"grid of {grid.total_points} points rejected under cap {grid.max_points}")
