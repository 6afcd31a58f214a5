import math

import numpy as np
import pytest

from metricfit.generators import (
    Benchmark,
    NoiseSpec,
    ShiftSpec,
    SoftmaxGroundTruth,
    apply_label_noise,
    apply_label_shift,
    distort_predictions,
    make_shift_benchmark,
    softmax_rows,
)


class TestSoftmaxRows:
    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        S = softmax_rows(rng.normal(size=(30, 4)))
        np.testing.assert_allclose(S.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(S > 0)

    def test_shift_invariance(self):
        Z = np.array([[1.0, 2.0, 3.0]])
        np.testing.assert_allclose(softmax_rows(Z), softmax_rows(Z + 100.0))

    def test_large_logits_stable(self):
        S = softmax_rows(np.array([[1000.0, 0.0]]))
        assert np.isfinite(S).all()
        assert S[0, 0] == pytest.approx(1.0)


class TestSoftmaxGroundTruth:
    def test_sampling_is_deterministic(self):
        t = SoftmaxGroundTruth(3, seed=5)
        a = t.sample(100, seed=2)
        b = t.sample(100, seed=2)
        np.testing.assert_array_equal(a.probs, b.probs)
        np.testing.assert_array_equal(a.labels, b.labels)
        c = t.sample(100, seed=3)
        assert not np.array_equal(a.labels, c.labels)

    def test_predictions_are_the_conditionals(self):
        t = SoftmaxGroundTruth(4, seed=1)
        s = t.sample(50, seed=1)
        np.testing.assert_allclose(s.probs.sum(axis=1), 1.0, atol=1e-9)
        assert s.num_classes == 4

    def test_label_frequencies_track_conditionals(self):
        t = SoftmaxGroundTruth(3, seed=9)
        s = t.sample(20000, seed=4)
        expect = s.probs.mean(axis=0)
        freq = s.class_counts() / s.n
        for j in range(3):
            sd = math.sqrt(expect[j] * (1 - expect[j]) / s.n)
            assert abs(freq[j] - expect[j]) <= 4 * sd

    def test_validation(self):
        with pytest.raises(ValueError):
            SoftmaxGroundTruth(1)
        with pytest.raises(ValueError):
            SoftmaxGroundTruth(3, latent_dim=0)
        with pytest.raises(ValueError):
            SoftmaxGroundTruth(3).sample(0)


class TestSpecs:
    def test_shift_spec_sorts_and_dedups(self):
        spec = ShiftSpec(affected_classes=(2, 0, 2), deletion_fraction=0.5)
        assert spec.affected_classes == (0, 2)

    def test_shift_spec_fraction_range(self):
        with pytest.raises(ValueError):
            ShiftSpec((0,), 1.5)

    def test_noise_spec_probability_range(self):
        with pytest.raises(ValueError):
            NoiseSpec((0,), -0.1)


class TestLabelShift:
    def setup_method(self):
        self.truth = SoftmaxGroundTruth(3, seed=11)
        self.sample = self.truth.sample(2000, seed=5)

    def test_deletion_statistics(self):
        spec = ShiftSpec((0,), 0.7, seed=1)
        kept = apply_label_shift(self.sample, spec)
        n0 = int((self.sample.labels == 0).sum())
        survivors = int((kept.labels == 0).sum())
        sd = math.sqrt(n0 * 0.7 * 0.3)
        assert abs(survivors - 0.3 * n0) <= 3 * sd
        # unaffected classes untouched
        for c in (1, 2):
            assert int((kept.labels == c).sum()) == int((self.sample.labels == c).sum())

    def test_commutes_with_shuffling(self):
        spec = ShiftSpec((0, 1), 0.5, seed=2)
        kept = apply_label_shift(self.sample, spec)
        perm = np.random.default_rng(3).permutation(self.sample.n)
        kept_shuf = apply_label_shift(self.sample.subset(perm), spec, sample_ids=perm)

        def canon(ss):
            order = np.lexsort((ss.labels, ss.probs[:, 0]))
            return ss.probs[order], ss.labels[order]

        pa, la = canon(kept)
        pb, lb = canon(kept_shuf)
        np.testing.assert_array_equal(pa, pb)
        np.testing.assert_array_equal(la, lb)

    def test_refuses_to_empty_the_sample(self):
        tiny = self.sample.subset(np.flatnonzero(self.sample.labels == 0)[:5])
        with pytest.raises(ValueError, match="removed every sample"):
            apply_label_shift(tiny, ShiftSpec((0,), 1.0, seed=0))

    def test_bad_sample_ids(self):
        with pytest.raises(ValueError, match="one entry per sample"):
            apply_label_shift(self.sample, ShiftSpec((0,), 0.5), sample_ids=[1, 2, 3])


class TestLabelNoise:
    def setup_method(self):
        self.truth = SoftmaxGroundTruth(3, seed=12)
        self.sample = self.truth.sample(3000, seed=6)

    def test_flip_statistics_and_targets(self):
        spec = NoiseSpec((0,), 0.4, seed=1)
        noisy = apply_label_noise(self.sample, spec)
        was0 = self.sample.labels == 0
        flipped = int((noisy.labels[was0] != 0).sum())
        n0 = int(was0.sum())
        sd = math.sqrt(n0 * 0.4 * 0.6)
        assert abs(flipped - 0.4 * n0) <= 3 * sd
        # flips land on real other classes, predictions untouched
        assert set(np.unique(noisy.labels[was0])) <= {0, 1, 2}
        np.testing.assert_array_equal(noisy.probs, self.sample.probs)
        np.testing.assert_array_equal(noisy.labels[~was0], self.sample.labels[~was0])

    def test_keyed_by_sample_id(self):
        spec = NoiseSpec((0, 1, 2), 0.5, seed=7)
        noisy = apply_label_noise(self.sample, spec)
        perm = np.random.default_rng(8).permutation(self.sample.n)
        noisy_shuf = apply_label_noise(self.sample.subset(perm), spec, sample_ids=perm)
        np.testing.assert_array_equal(noisy_shuf.labels, noisy.labels[perm])


class TestDistortPredictions:
    def test_unit_temperature_no_tilt_is_identity(self):
        rng = np.random.default_rng(4)
        P = rng.dirichlet(np.ones(3), size=20)
        np.testing.assert_allclose(distort_predictions(P, temperature=1.0), P, atol=1e-12)

    def test_temperature_flattens(self):
        P = np.array([[0.9, 0.05, 0.05]])
        flat = distort_predictions(P, temperature=4.0)
        assert flat[0, 0] < 0.9
        assert flat[0].max() > 1.0 / 3.0  # order preserved
        assert np.argmax(flat[0]) == 0

    def test_tilt_shifts_mass(self):
        P = np.full((10, 2), 0.5)
        tilted = distort_predictions(P, temperature=1.0, tilt=np.array([0.8, 0.2]))
        assert np.all(tilted[:, 0] > 0.5)

    def test_rows_remain_stochastic(self):
        rng = np.random.default_rng(5)
        P = rng.dirichlet(np.ones(4), size=50)
        out = distort_predictions(P, temperature=2.0, tilt=np.array([0.4, 0.3, 0.2, 0.1]))
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)


class TestMakeShiftBenchmark:
    def test_shapes_and_config(self):
        bench = make_shift_benchmark(
            seed=0, num_classes=3, n_proxy_train=500, n_val=300, n_test=400,
            shift=ShiftSpec((0,), 0.5, seed=0),
        )
        assert isinstance(bench, Benchmark)
        assert bench.val.n < 300  # shift removed something
        assert bench.test.n < 400
        assert bench.config["num_classes"] == 3
        assert bench.config["shift"]["deletion_fraction"] == 0.5
        assert bench.config["noise"] is None
        assert len(bench.config["tilt"]) == 3

    def test_deterministic(self):
        kw = dict(seed=3, num_classes=3, n_proxy_train=400, n_val=200, n_test=200)
        a = make_shift_benchmark(**kw)
        b = make_shift_benchmark(**kw)
        np.testing.assert_array_equal(a.val.probs, b.val.probs)
        np.testing.assert_array_equal(a.test.labels, b.test.labels)

    def test_noise_applies_to_named_targets_only(self):
        kw = dict(seed=4, num_classes=3, n_proxy_train=400, n_val=300, n_test=300)
        plain = make_shift_benchmark(**kw)
        noised = make_shift_benchmark(noise=NoiseSpec((0, 1, 2), 0.5, seed=1), **kw)
        # default noise target is the validation split
        np.testing.assert_array_equal(plain.test.labels, noised.test.labels)
        assert not np.array_equal(plain.val.labels, noised.val.labels)

    def test_predictions_are_miscalibrated(self):
        bench = make_shift_benchmark(seed=5, num_classes=3, n_proxy_train=400, n_val=200, n_test=200)
        raw = SoftmaxGroundTruth(3, seed=5).sample(200, seed=2)
        assert not np.allclose(bench.val.probs, raw.probs)
