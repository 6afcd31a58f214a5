"""Synthetic ground truth, a miscalibrated proxy black box, and label corruption.

The ground truth draws latent standard-normal features, maps them through a
fixed random linear layer and a softmax, and labels each point by sampling
from that conditional — so the emitted prediction is the true conditional
itself.  Corruption transforms key their per-sample randomness by a stable
sample id (not the row position), which makes them commute with shuffling and
keeps subsampling coherent.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from .samples import SampleSet


def softmax_rows(Z):
    """Row-wise softmax with max-subtraction for stability."""
    Z = np.asarray(Z, dtype=np.float64)
    E = np.exp(Z - Z.max(axis=1, keepdims=True))
    return E / E.sum(axis=1, keepdims=True)


class SoftmaxGroundTruth:
    """Population with known conditionals eta(x) = softmax(W x).

    ``scale`` controls how peaked the conditionals are (layer columns are
    scaled to give logits of roughly that standard deviation).
    """

    def __init__(self, num_classes, latent_dim=6, scale=2.0, seed=0):
        if num_classes < 2:
            raise ValueError("need at least 2 classes")
        if latent_dim < 1:
            raise ValueError("latent_dim must be positive")
        self.num_classes = int(num_classes)
        self.latent_dim = int(latent_dim)
        self.scale = float(scale)
        self.seed = int(seed)
        rng = np.random.default_rng([self.seed, 0])
        self.layer = rng.normal(size=(self.latent_dim, self.num_classes)) * (
            self.scale / np.sqrt(self.latent_dim)
        )
        self.layer.setflags(write=False)

    def conditionals(self, Z):
        """True class conditionals for latent rows ``Z``."""
        return softmax_rows(np.asarray(Z, dtype=np.float64) @ self.layer)

    def sample(self, n, seed=1):
        """Draw n points: predictions are the exact conditionals, labels sampled from them."""
        if n < 1:
            raise ValueError("n must be positive")
        rng = np.random.default_rng([self.seed, int(seed)])
        Z = rng.normal(size=(int(n), self.latent_dim))
        eta = self.conditionals(Z)
        u = rng.random(int(n))
        labels = np.minimum((u[:, None] > np.cumsum(eta, axis=1)).sum(axis=1), self.num_classes - 1)
        return SampleSet(eta, labels)


@dataclass(frozen=True)
class ShiftSpec:
    """Knock-out label shift: delete affected-class samples with this probability."""

    affected_classes: tuple
    deletion_fraction: float
    seed: int = 0

    def __post_init__(self):
        classes = tuple(sorted({int(c) for c in self.affected_classes}))
        object.__setattr__(self, "affected_classes", classes)
        if not 0.0 <= self.deletion_fraction <= 1.0:
            raise ValueError("deletion_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class NoiseSpec:
    """Symmetric label noise: flip affected-class labels to a uniform other class."""

    affected_classes: tuple
    flip_probability: float
    seed: int = 0

    def __post_init__(self):
        classes = tuple(sorted({int(c) for c in self.affected_classes}))
        object.__setattr__(self, "affected_classes", classes)
        if not 0.0 <= self.flip_probability <= 1.0:
            raise ValueError("flip_probability must lie in [0, 1]")


def _resolve_ids(sample_set, sample_ids):
    if sample_ids is None:
        return np.arange(sample_set.n, dtype=np.int64)
    ids = np.asarray(sample_ids, dtype=np.int64)
    if ids.shape != (sample_set.n,):
        raise ValueError("sample_ids must have one entry per sample")
    if ids.size and ids.min() < 0:
        raise ValueError("sample_ids must be non-negative")
    return ids


def apply_label_shift(sample_set, spec, sample_ids=None):
    """Drop affected-class samples with probability ``deletion_fraction``.

    Deletion decisions are keyed by sample id, so shuffled inputs with
    matching ids produce the same surviving population.
    """
    ids = _resolve_ids(sample_set, sample_ids)
    pool = np.random.default_rng([spec.seed, 17]).random(int(ids.max()) + 1 if ids.size else 1)
    affected = np.isin(sample_set.labels, spec.affected_classes)
    drop = affected & (pool[ids] < spec.deletion_fraction)
    if drop.all():
        raise ValueError("label shift removed every sample")
    return sample_set.subset(np.flatnonzero(~drop))


def apply_label_noise(sample_set, spec, sample_ids=None):
    """Flip affected-class labels to a uniformly random other class.

    Predictions are untouched; flip decisions and targets are keyed by sample
    id like :func:`apply_label_shift`.
    """
    ids = _resolve_ids(sample_set, sample_ids)
    m = sample_set.num_classes
    size = int(ids.max()) + 1 if ids.size else 1
    u_pool = np.random.default_rng([spec.seed, 23]).random(size)
    offset_pool = np.random.default_rng([spec.seed, 29]).integers(1, m, size=size)
    affected = np.isin(sample_set.labels, spec.affected_classes)
    flip = affected & (u_pool[ids] < spec.flip_probability)
    labels = np.where(flip, (sample_set.labels + offset_pool[ids]) % m, sample_set.labels)
    return SampleSet(sample_set.probs, labels)


def distort_predictions(probs, temperature=2.0, tilt=None, floor=1e-12):
    """Miscalibrated view of a prediction matrix: tempered, prior-tilted softmax."""
    P = np.clip(np.asarray(probs, dtype=np.float64), floor, None)
    logits = np.log(P) / float(temperature)
    if tilt is not None:
        tilt = np.asarray(tilt, dtype=np.float64)
        if np.any(tilt <= 0):
            raise ValueError("tilt entries must be positive")
        logits = logits + np.log(tilt)
    return softmax_rows(logits)


@dataclass(frozen=True)
class Benchmark:
    """Validation/test splits seen through the proxy black box, plus provenance."""

    val: SampleSet
    test: SampleSet
    config: dict


def _derive_seed(seed, salt):
    return (int(seed) * 1000003 + salt) % (2**31 - 1)


def make_shift_benchmark(
    seed,
    num_classes,
    n_proxy_train,
    n_val,
    n_test,
    shift=None,
    noise=None,
    shift_targets=("val", "test"),
    noise_targets=("val",),
    latent_dim=6,
    scale=2.0,
    temperature=2.0,
    tilt_strength=0.7,
):
    """Build a synthetic benchmark around a deliberately miscalibrated black box.

    The proxy box reports the true conditionals pushed through temperature
    ``temperature`` and a fixed class-prior tilt estimated from a training
    draw of ``n_proxy_train`` points, so its argmax is genuinely suboptimal.
    ``shift`` / ``noise`` specs are applied to the splits named in the target
    tuples, with per-split derived seeds.
    """
    truth = SoftmaxGroundTruth(num_classes, latent_dim=latent_dim, scale=scale, seed=seed)
    proxy = truth.sample(n_proxy_train, seed=1)
    priors = proxy.class_counts() / proxy.n
    tilt = (priors + 1.0 / (num_classes * proxy.n)) ** float(tilt_strength)
    tilt = tilt / tilt.sum()

    splits = {}
    for name, n, draw_seed in (("val", n_val, 2), ("test", n_test, 3)):
        raw = truth.sample(n, seed=draw_seed)
        split = SampleSet(distort_predictions(raw.probs, temperature=temperature, tilt=tilt), raw.labels)
        if shift is not None and name in shift_targets:
            split = apply_label_shift(split, dataclasses.replace(shift, seed=_derive_seed(shift.seed, 2 if name == "val" else 3)))
        if noise is not None and name in noise_targets:
            split = apply_label_noise(split, dataclasses.replace(noise, seed=_derive_seed(noise.seed, 2 if name == "val" else 3)))
        splits[name] = split

    config = {
        "seed": int(seed),
        "num_classes": int(num_classes),
        "n_proxy_train": int(n_proxy_train),
        "n_val": int(n_val),
        "n_test": int(n_test),
        "latent_dim": int(latent_dim),
        "scale": float(scale),
        "temperature": float(temperature),
        "tilt_strength": float(tilt_strength),
        "tilt": [float(t) for t in tilt],
        "shift": None if shift is None else {
            "affected_classes": list(shift.affected_classes),
            "deletion_fraction": shift.deletion_fraction,
            "seed": shift.seed,
            "targets": list(shift_targets),
        },
        "noise": None if noise is None else {
            "affected_classes": list(noise.affected_classes),
            "flip_probability": noise.flip_probability,
            "seed": noise.seed,
            "targets": list(noise_targets),
        },
    }
    return Benchmark(val=splits["val"], test=splits["test"], config=config)
