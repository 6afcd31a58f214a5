"""File formats: prediction CSVs and the JSON weights envelope.

Predictions travel as CSV with header ``p_0,...,p_{m-1},label``.  Fitted
parameters travel as a JSON envelope whose ``kind`` field discriminates the
payload (``cwplugin`` for plugin weights, ``vector_scaler`` for the
calibration baseline).  Floats are written with full round-trip precision via
their shortest exact decimal form, and readers tolerate unknown fields.
"""

import csv
import json

import numpy as np

from ._version import __version__
from .baselines import VectorScaler
from .plugin import WeightVector
from .samples import SampleSet

KIND_PLUGIN = "cwplugin"
KIND_SCALER = "vector_scaler"
LABEL_COLUMN = "label"


def write_predictions(sample_set, path):
    """Write a SampleSet as CSV; formatting is canonical, so rewrites are byte-stable."""
    m = sample_set.num_classes
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"p_{j}" for j in range(m)] + [LABEL_COLUMN])
        for row, label in zip(sample_set.probs, sample_set.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def read_predictions(path):
    """Read a prediction CSV into a SampleSet; malformed content raises with a line number."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        m = len(header) - 1
        expected = [f"p_{j}" for j in range(m)] + [LABEL_COLUMN]
        if m < 2 or header != expected:
            raise ValueError(
                f"{path}: bad header {header!r}; expected p_0,...,p_{{m-1}},{LABEL_COLUMN} with m >= 2"
            )
        probs, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != m + 1:
                raise ValueError(f"{path}:{lineno}: expected {m + 1} fields, got {len(row)}")
            try:
                probs.append([float(v) for v in row[:m]])
                labels.append(int(row[m]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not probs:
        raise ValueError(f"{path}: no data rows")
    try:
        return SampleSet(np.asarray(probs), np.asarray(labels))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def envelope_from_fit(report, n_samples):
    """JSON-ready envelope for a plugin fit."""
    wv = report.weights
    return {
        "kind": KIND_PLUGIN,
        "version": __version__,
        "num_classes": wv.num_classes,
        "weights": [float(v) for v in wv.weights],
        "reference_class": int(wv.reference_class),
        "metric": wv.metric_name,
        "epsilon": float(wv.epsilon),
        "rho": float(wv.rho),
        "search_mode": wv.search_mode,
        "n_samples": int(n_samples),
        "metric_evaluations": int(report.metric_evaluations),
    }


def envelope_from_scaler(scaler, n_samples):
    """JSON-ready envelope for a fitted VectorScaler."""
    return {
        "kind": KIND_SCALER,
        "version": __version__,
        "num_classes": int(scaler.n_classes_),
        "diag_weights": [float(v) for v in scaler.diag_weights_],
        "bias": [float(v) for v in scaler.bias_],
        "learning_rate": float(scaler.learning_rate),
        "max_iter": int(scaler.max_iter),
        "grad_tol": float(scaler.grad_tol),
        "prob_floor": float(scaler.prob_floor),
        "final_nll": float(scaler.final_nll_),
        "n_samples": int(n_samples),
    }


_REQUIRED = {
    KIND_PLUGIN: ("num_classes", "weights", "reference_class", "metric", "epsilon", "rho", "search_mode"),
    KIND_SCALER: ("num_classes", "diag_weights", "bias"),
}
_CANONICAL_ORDER = (
    "kind", "version", "num_classes",
    "weights", "reference_class", "metric", "epsilon", "rho", "search_mode",
    "diag_weights", "bias", "learning_rate", "max_iter", "grad_tol", "prob_floor", "final_nll",
    "n_samples", "metric_evaluations",
)


def _validate_envelope(env, path="envelope"):
    if not isinstance(env, dict):
        raise ValueError(f"{path}: envelope must be a JSON object")
    kind = env.get("kind")
    if kind not in _REQUIRED:
        raise ValueError(f"{path}: unknown envelope kind {kind!r}; expected one of {sorted(_REQUIRED)}")
    missing = [key for key in _REQUIRED[kind] if key not in env]
    if missing:
        raise ValueError(f"{path}: envelope is missing fields {missing}")
    m = env["num_classes"]
    for key in ("weights", "diag_weights", "bias"):
        if key in env and env[key] is not None and len(env[key]) != m:
            raise ValueError(f"{path}: field {key!r} should have {m} entries")
    return env


def write_weights(env, path):
    """Serialize an envelope with fixed field order (unknown fields last, sorted)."""
    _validate_envelope(env, path=str(path))
    ordered = {key: env[key] for key in _CANONICAL_ORDER if key in env}
    for key in sorted(env):
        if key not in ordered:
            ordered[key] = env[key]
    with open(path, "w") as fh:
        json.dump(ordered, fh, indent=2)
        fh.write("\n")


def read_weights(path):
    with open(path) as fh:
        try:
            env = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
    return _validate_envelope(env, path=str(path))


def weight_vector_from_envelope(env):
    """Rebuild the plugin WeightVector from an envelope of kind 'cwplugin'."""
    if env["kind"] != KIND_PLUGIN:
        raise ValueError(f"envelope kind {env['kind']!r} does not carry plugin weights")
    return WeightVector(
        weights=np.asarray(env["weights"], dtype=np.float64),
        reference_class=int(env["reference_class"]),
        metric_name=str(env["metric"]),
        epsilon=float(env["epsilon"]),
        rho=float(env["rho"]),
        search_mode=str(env["search_mode"]),
    )


def scaler_from_envelope(env):
    """Rebuild a fitted VectorScaler from an envelope of kind 'vector_scaler'."""
    if env["kind"] != KIND_SCALER:
        raise ValueError(f"envelope kind {env['kind']!r} does not carry scaler parameters")
    scaler = VectorScaler(
        learning_rate=env.get("learning_rate", 0.1),
        max_iter=env.get("max_iter", 2000),
        grad_tol=env.get("grad_tol", 1e-7),
        prob_floor=env.get("prob_floor", 1e-12),
    )
    scaler.diag_weights_ = np.asarray(env["diag_weights"], dtype=np.float64)
    scaler.bias_ = np.asarray(env["bias"], dtype=np.float64)
    scaler.n_classes_ = int(env["num_classes"])
    if "final_nll" in env:
        scaler.final_nll_ = float(env["final_nll"])
    return scaler
