"""Command-line interface.

Subcommands: fit (learn plugin weights), apply (predict with saved weights),
eval (score predictions, optionally with fit-and-score resampling), elicit
(hidden-metric recovery harness), bench (evaluation-count benchmarks), synth
(generate benchmark datasets).  Exit codes: 0 success, 2 usage, 3 data or
configuration errors, 4 resource limits.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io, metrics
from ._version import __version__
from .baselines import clean_eval
from .elicitation import elicit
from .generators import NoiseSpec, ShiftSpec, SoftmaxGroundTruth, make_shift_benchmark
from .metrics import CountingMetric, get_metric
from .oracle import ResourceLimitError
from .plugin import alpha_grid, apply_weights, fit_weights, unimodal_budget
from .samples import SampleSet, confusion_from_labels, confusion_from_weights

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RESOURCE = 4

_EVAL_DEFAULT_METRICS = ("accuracy", "f1_macro", "gmean_macro", "mcc", "fowlkes_mallows_macro")


def _parse_int_list(text):
    return [int(tok) for tok in text.split(",") if tok != ""]


def _parse_float_list(text):
    return [float(tok) for tok in text.split(",") if tok != ""]


def _emit(payload, as_json):
    if as_json:
        print(json.dumps(payload, indent=2))
    else:
        for line in payload.get("lines", []):
            print(line)


def cmd_fit(args):
    sample = io.read_predictions(args.input)
    report = fit_weights(
        sample,
        args.metric,
        epsilon=args.epsilon,
        rho=args.rho,
        reference_class=args.reference_class,
        search_mode=args.search,
        parallel=args.parallel,
    )
    env = io.envelope_from_fit(report, sample.n)
    if args.out:
        io.write_weights(env, args.out)
    fit_value = float(get_metric(args.metric)(confusion_from_weights(sample, report.weights.weights)))
    payload = dict(env)
    payload["alphas"] = [float(a) for a in report.alphas]
    payload["pair_sizes"] = [int(s) for s in report.pair_sizes]
    payload["fit_metric_value"] = fit_value
    payload["warnings"] = list(report.warnings)
    payload["lines"] = [
        f"fitted {sample.num_classes}-class weights on {sample.n} samples "
        f"(metric={env['metric']}, search={env['search_mode']})",
        "weights: " + " ".join(f"{w:.6f}" for w in env["weights"]),
        "alphas:  " + " ".join(f"{a:.6f}" for a in report.alphas),
        f"value on fitting set: {fit_value:.6f}",
        f"metric evaluations: {report.metric_evaluations}",
    ] + [f"warning: {w}" for w in report.warnings]
    _emit(payload, args.json)
    return EXIT_OK


def cmd_apply(args):
    sample = io.read_predictions(args.input)
    env = io.read_weights(args.weights)
    if env["kind"] == io.KIND_PLUGIN:
        labels = apply_weights(sample.probs, io.weight_vector_from_envelope(env))
    else:
        labels = io.scaler_from_envelope(env).predict(sample.probs)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("label\n")
            fh.writelines(f"{int(v)}\n" for v in labels)
    payload = {
        "n": int(sample.n),
        "labels": [int(v) for v in labels],
        "lines": [" ".join(str(int(v)) for v in labels)] if not args.out else [f"wrote {sample.n} labels to {args.out}"],
    }
    _emit(payload, args.json)
    return EXIT_OK


def _metric_table(confusions, requested):
    """Rows of metric values for each named rule; mcc gets its raw companion."""
    names = list(requested) if requested else list(_EVAL_DEFAULT_METRICS)
    rows = []
    for name in names:
        metric = get_metric(name)
        rows.append((metric.name if ":" not in name else name, {rule: metric(C) for rule, C in confusions.items()}))
        if name == "mcc":
            rows.append(("mcc_raw", {rule: metrics.mcc_raw(C) for rule, C in confusions.items()}))
    return rows


def cmd_eval(args):
    sample = io.read_predictions(args.input)
    if args.test is not None:
        return _eval_resampled(args, sample)
    confusions = {"clean": confusion_from_labels(sample, np.argmax(sample.probs, axis=1))}
    if args.weights:
        env = io.read_weights(args.weights)
        if env["kind"] == io.KIND_PLUGIN:
            predicted = apply_weights(sample.probs, io.weight_vector_from_envelope(env))
        else:
            predicted = io.scaler_from_envelope(env).predict(sample.probs)
        confusions["weighted"] = confusion_from_labels(sample, predicted)
    rows = _metric_table(confusions, [args.metric] if args.metric else None)
    rules = list(confusions)
    lines = ["metric" + "".join(f"  {r:>12}" for r in rules)]
    for name, values in rows:
        lines.append(f"{name:<24}" + "".join(f"  {values[r]:12.6f}" for r in rules))
    payload = {
        "n": int(sample.n),
        "rules": rules,
        "values": {name: {r: float(v) for r, v in values.items()} for name, values in rows},
        "lines": lines,
    }
    _emit(payload, args.json)
    return EXIT_OK


def _eval_resampled(args, pool):
    if args.metric is None:
        raise ValueError("resampled evaluation needs --metric")
    if args.val_size > pool.n:
        raise ValueError(f"--val-size {args.val_size} exceeds the pool size {pool.n}")
    test = io.read_predictions(args.test)
    metric = get_metric(args.metric)
    clean_value = clean_eval(test, metric)
    weighted_values = []
    for repeat in range(args.repeats):
        order = np.random.default_rng([args.seed, repeat]).permutation(pool.n)
        subset = pool.subset(order[: args.val_size])
        report = fit_weights(
            subset,
            metric,
            epsilon=args.epsilon,
            rho=args.rho,
            reference_class=args.reference_class,
            search_mode=args.search,
            parallel=args.parallel,
        )
        weighted_values.append(float(metric(confusion_from_weights(test, report.weights.weights))))
    mean = float(np.mean(weighted_values))
    std = float(np.std(weighted_values, ddof=1)) if len(weighted_values) > 1 else 0.0
    payload = {
        "metric": metric.name,
        "repeats": int(args.repeats),
        "val_size": int(args.val_size),
        "clean": clean_value,
        "weighted": weighted_values,
        "weighted_mean": mean,
        "weighted_std": std,
        "mean_improvement": mean - clean_value,
        "lines": [
            f"{metric.name} on test, {args.repeats} validation resamples of size {args.val_size}:",
            f"  clean argmax: {clean_value:.6f}",
            f"  weighted:     {mean:.6f} +/- {std:.6f}  "
            + "[" + " ".join(f"{v:.6f}" for v in weighted_values) + "]",
            f"  mean improvement: {mean - clean_value:+.6f}",
        ],
    }
    _emit(payload, args.json)
    return EXIT_OK


def cmd_elicit(args):
    beta = _parse_float_list(args.beta)
    report = elicit(beta, n=args.n, epsilon=args.epsilon, delta=args.delta, seed=args.seed)
    payload = {
        "beta": [float(b) for b in report.beta_true],
        "weights": [float(w) for w in report.weights],
        "l1_error": report.l1_error,
        "n": report.n,
        "epsilon": report.epsilon,
        "delta": report.delta,
        "rho": report.rho,
        "gamma": report.gamma,
        "bound_rhs": report.bound_rhs,
        "within_bound": report.within_bound,
        "metric_queries": report.metric_queries,
        "lines": [
            f"hidden beta:  {' '.join(f'{b:.6f}' for b in report.beta_true)}",
            f"recovered w:  {' '.join(f'{w:.6f}' for w in report.weights)}",
            f"l1 error: {report.l1_error:.6f}  (advisory bound {report.bound_rhs:.6f}, "
            f"within={report.within_bound})",
            f"rho={report.rho:.6f} gamma={report.gamma:.6f} queries={report.metric_queries}",
        ],
    }
    _emit(payload, args.json)
    return EXIT_OK


def _balanced_sample(truth, n):
    """Deterministic class-balanced draw: first n/m stream hits per class."""
    m = truth.num_classes
    quota = max(1, n // m)
    stream = truth.sample(max(50 * n, 200), seed=7)
    picks = []
    for c in range(m):
        rows = np.flatnonzero(stream.labels == c)[:quota]
        if rows.size < quota:
            raise ValueError(f"could not draw {quota} samples of class {c} for the balanced benchmark")
        picks.append(rows)
    return stream.subset(np.sort(np.concatenate(picks)))


def _skewed_sample(balanced, ref):
    """Worst-case restriction mass: most labels moved to the reference class."""
    labels = balanced.labels.copy()
    cut = int(0.9 * balanced.n)
    labels[:cut] = ref
    return SampleSet(balanced.probs, labels)


def cmd_bench(args):
    rows = []
    for m in _parse_int_list(args.m_grid):
        truth = SoftmaxGroundTruth(m, seed=args.seed)
        balanced = _balanced_sample(truth, args.n)
        skewed = _skewed_sample(balanced, m - 1)
        for eps in _parse_float_list(args.eps_grid):
            grid_points = alpha_grid(eps, eps).shape[0]
            for mode in ("line", "unimodal"):
                for kind, sample in (("balanced", balanced), ("skewed", skewed)):
                    counter = CountingMetric(get_metric("accuracy"))
                    start = time.perf_counter()
                    report = fit_weights(sample, counter, epsilon=eps, rho=eps, search_mode=mode)
                    elapsed_ms = 1000.0 * (time.perf_counter() - start)
                    if mode == "line":
                        expected = (m - 1) * grid_points
                        ok = report.metric_evaluations == expected
                    else:
                        expected = (m - 1) * unimodal_budget(eps)
                        ok = report.metric_evaluations <= expected
                    rows.append({
                        "m": m,
                        "epsilon": eps,
                        "search": mode,
                        "sample": kind,
                        "evaluations": report.metric_evaluations,
                        "expected" if mode == "line" else "bound": expected,
                        "ok": bool(ok),
                        "restriction_work": int(report.pair_sizes.sum()),
                        "ms": round(elapsed_ms, 3),
                    })
    lines = [
        f"{'m':>3} {'eps':>6} {'search':>8} {'sample':>9} {'evals':>7} {'limit':>7} {'ok':>3} "
        f"{'work':>7} {'ms':>9}"
    ]
    for r in rows:
        limit = r.get("expected", r.get("bound"))
        lines.append(
            f"{r['m']:>3} {r['epsilon']:>6} {r['search']:>8} {r['sample']:>9} "
            f"{r['evaluations']:>7} {limit:>7} {str(r['ok']):>3} {r['restriction_work']:>7} {r['ms']:>9}"
        )
    _emit({"rows": rows, "lines": lines}, args.json)
    return EXIT_OK


def cmd_synth(args):
    shift = None
    if args.shift_classes:
        shift = ShiftSpec(tuple(_parse_int_list(args.shift_classes)), args.shift_fraction, seed=args.seed)
    noise = None
    if args.noise_classes:
        noise = NoiseSpec(tuple(_parse_int_list(args.noise_classes)), args.noise_prob, seed=args.seed)
    bench = make_shift_benchmark(
        seed=args.seed,
        num_classes=args.num_classes,
        n_proxy_train=args.n_proxy,
        n_val=args.n_val,
        n_test=args.n_test,
        shift=shift,
        noise=noise,
        shift_targets=tuple(args.shift_on.split(",")) if args.shift_on else (),
        noise_targets=tuple(args.noise_on.split(",")) if args.noise_on else (),
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_predictions(bench.val, out / "val.csv")
    io.write_predictions(bench.test, out / "test.csv")
    meta = {"version": __version__, **bench.config,
            "n_val_written": bench.val.n, "n_test_written": bench.test.n}
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    payload = dict(meta)
    payload["lines"] = [
        f"wrote {bench.val.n} validation and {bench.test.n} test rows to {out}",
    ]
    _emit(payload, args.json)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="metricfit",
        description="Post-hoc class weighting of black-box classifier outputs "
                    "to maximize confusion-matrix metrics.",
    )
    parser.add_argument("--version", action="version", version=f"metricfit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_fit_options(p):
        p.add_argument("--metric", default="accuracy",
                       help="metric name or spec (see 'linear_diag:...' / 'linear_frac:...')")
        p.add_argument("--epsilon", type=float, default=0.01, help="threshold grid step")
        p.add_argument("--rho", type=float, default=None, help="upper search margin (default: epsilon)")
        p.add_argument("--reference-class", type=int, default=None,
                       help="fixed-weight class (default: the last one)")
        p.add_argument("--search", choices=("auto", "line", "unimodal"), default="auto")
        p.add_argument("--parallel", action="store_true", help="search class pairs in threads")

    p = sub.add_parser("fit", help="fit plugin weights on a validation CSV")
    p.add_argument("--in", dest="input", required=True, help="validation predictions CSV")
    add_fit_options(p)
    p.add_argument("--out", default=None, help="where to write the weights envelope (JSON)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("apply", help="predict labels with a saved weights envelope")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", default=None, help="write predicted labels as CSV")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("eval", help="score predictions; with --test, resample-fit-and-score")
    p.add_argument("--in", dest="input", required=True,
                   help="predictions CSV (the fit pool when --test is given)")
    p.add_argument("--weights", default=None, help="weights envelope to score alongside clean argmax")
    p.add_argument("--test", default=None, help="test CSV enabling the resampling protocol")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--val-size", dest="val_size", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    add_fit_options(p)
    p.set_defaults(metric=None)  # eval defaults to the whole builtin table
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("elicit", help="hidden linear-diagonal metric recovery harness")
    p.add_argument("--beta", required=True, help="hidden coefficients, e.g. 0.5,0.3,0.2")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--epsilon", type=float, default=0.005)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_elicit)

    p = sub.add_parser("bench", help="evaluation-count and runtime table over (m, epsilon)")
    p.add_argument("--m-grid", dest="m_grid", default="3,5,8")
    p.add_argument("--eps-grid", dest="eps_grid", default="0.1,0.01")
    p.add_argument("--n", type=int, default=240, help="benchmark sample size per m")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate benchmark CSVs with optional shift/noise")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--num-classes", dest="num_classes", type=int, default=3)
    p.add_argument("--n-val", dest="n_val", type=int, default=2000)
    p.add_argument("--n-test", dest="n_test", type=int, default=4000)
    p.add_argument("--n-proxy", dest="n_proxy", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shift-classes", dest="shift_classes", default="",
                   help="classes hit by knock-out shift, e.g. 0,1 (empty: no shift)")
    p.add_argument("--shift-fraction", dest="shift_fraction", type=float, default=0.8)
    p.add_argument("--shift-on", dest="shift_on", default="val,test")
    p.add_argument("--noise-classes", dest="noise_classes", default="",
                   help="classes hit by label noise (empty: no noise)")
    p.add_argument("--noise-prob", dest="noise_prob", type=float, default=0.6)
    p.add_argument("--noise-on", dest="noise_on", default="val")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed its message
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
