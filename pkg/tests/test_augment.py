"""Augmentation contracts: cut-out geometry, noise statistics, determinism."""

import numpy as np
import pytest
from scipy.stats import chisquare

from stridenet.augment import (
    CUTOUT_LEN,
    AugmentedPair,
    add_noise,
    add_noise_normalized,
    augment_labeled,
    cutout,
    make_pretext_set,
    random_segments,
)
from stridenet.data import SEGMENT_LEN, StrideLabel, StrideSegment
from stridenet.util import derived_rng


def random_streams(n, seed=0):
    return derived_rng(seed, "test-streams").uniform(-0.5, 0.5, size=(6, n)).astype(np.float32)


def random_segment(seed=0):
    return derived_rng(seed, "test-segment").uniform(-0.5, 0.5, size=(1, 6, SEGMENT_LEN)).astype(np.float32)


class TestRandomSegments:
    def test_exact_length_recording_yields_identical_windows(self):
        streams = random_streams(SEGMENT_LEN)
        for window in random_segments(streams, seed=1):
            np.testing.assert_array_equal(window, streams)

    def test_default_count_gives_three_fold_coverage(self):
        n = 10 * SEGMENT_LEN
        windows = random_segments(random_streams(n), seed=2)
        emitted = len(windows) * SEGMENT_LEN
        assert emitted == pytest.approx(3 * n, rel=0.05)

    def test_same_seed_same_windows(self):
        streams = random_streams(5000)
        a = random_segments(streams, seed=3)
        b = random_segments(streams, seed=3)
        assert len(a) == len(b)
        for wa, wb in zip(a, b):
            np.testing.assert_array_equal(wa, wb)

    def test_short_recording_rejected(self):
        with pytest.raises(ValueError, match="need at least"):
            random_segments(random_streams(599), seed=4)


class TestCutout:
    def test_cut_window_is_exactly_120_zero_columns(self):
        segment = random_segment(5)
        assert not np.any(np.all(segment == 0.0, axis=1))
        out = cutout(segment, seed=5)
        zero_cols = np.where(np.all(out[0] == 0.0, axis=0))[0]
        assert len(zero_cols) == CUTOUT_LEN == 120
        assert np.all(np.diff(zero_cols) == 1)

    def test_outside_cut_window_untouched(self):
        segment = random_segment(6)
        out = cutout(segment, seed=6)
        zero_cols = np.where(np.all(out[0] == 0.0, axis=0))[0]
        keep = np.setdiff1d(np.arange(SEGMENT_LEN), zero_cols)
        np.testing.assert_array_equal(out[0][:, keep], segment[0][:, keep])

    def test_cut_starts_uniform_chi_square(self):
        # 481 possible starts bucketed into 37 bins of 13 each.
        segment = random_segment(7)
        starts = []
        for seed in range(10000):
            out = cutout(segment, seed=seed)
            starts.append(int(np.where(np.all(out[0] == 0.0, axis=0))[0][0]))
        starts = np.asarray(starts)
        assert starts.min() >= 0 and starts.max() <= SEGMENT_LEN - CUTOUT_LEN
        counts, _ = np.histogram(starts, bins=37, range=(0, 481))
        assert chisquare(counts).pvalue > 0.01


class TestAddNoise:
    def test_deterministic_for_fixed_seed(self):
        segment = random_segment(8)
        np.testing.assert_array_equal(add_noise(segment, seed=9), add_noise(segment, seed=9))

    def test_raw_unit_sigmas_match_sensor_families(self):
        segment = np.zeros((1, 6, SEGMENT_LEN), dtype=np.float32)
        out = add_noise(segment, seed=10)
        acc_std = float(np.std(out[0, 0:3, :]))
        gyr_std = float(np.std(out[0, 3:6, :]))
        assert 0.15 <= acc_std <= 0.17
        assert 0.9 * 20.0 <= gyr_std <= 1.1 * 20.0

    def test_noise_mean_within_standard_error(self):
        segment = random_segment(11)
        out = add_noise(segment, seed=12)
        diff_acc = (out - segment)[0, 0:3, :]
        n = diff_acc.size
        assert abs(float(diff_acc.mean())) <= 3.0 * 0.16 / np.sqrt(n)

    def test_normalized_variant_sigma(self):
        segment = np.zeros((1, 6, SEGMENT_LEN), dtype=np.float32)
        out = add_noise_normalized(segment, seed=13)
        for row in range(6):
            std = float(np.std(out[0, row, :]))
            assert 0.009 <= std <= 0.011


class TestMakePretextSet:
    def test_three_pairs_per_segment(self):
        segments = [random_segment(s) for s in range(4)]
        pairs = make_pretext_set(segments, seed=14)
        assert len(pairs) == 12
        tags = [p.tag for p in pairs[:3]]
        assert tags == ["cutout", "noise", "cutout+noise"]

    def test_targets_equal_sources_bit_exactly(self):
        segments = [random_segment(s) for s in range(3)]
        pairs = make_pretext_set(segments, seed=15)
        for i, pair in enumerate(pairs):
            np.testing.assert_array_equal(pair.target, segments[i // 3])

    def test_combined_view_is_noisy_outside_and_zero_inside_cut(self):
        segment = random_segment(16)
        combined = make_pretext_set([segment], seed=17)[2]
        assert combined.tag == "cutout+noise"
        zero_cols = np.where(np.all(combined.input[0] == 0.0, axis=0))[0]
        assert len(zero_cols) == CUTOUT_LEN
        keep = np.setdiff1d(np.arange(SEGMENT_LEN), zero_cols)
        diff = combined.input[0][:, keep] - combined.target[0][:, keep]
        assert np.all(diff != 0.0)

    def test_unknown_tag_rejected(self):
        with pytest.raises(ValueError):
            AugmentedPair(random_segment(0), random_segment(0), tag="flip")


class TestAugmentLabeled:
    def _segments(self, n=10):
        out = []
        for i in range(n):
            tensor = random_segment(100 + i)
            tensor[:, :, 500:] = 0.0
            out.append(
                StrideSegment(
                    tensor=tensor,
                    valid_len=500,
                    label=StrideLabel(length_cm=100.0 + i, gait_class="walk"),
                    subject_id=f"s{i % 3}",
                )
            )
        return out

    def test_zero_copies_is_identity(self):
        segments = self._segments()
        assert augment_labeled(segments, copies=0, seed=18) == segments

    def test_two_copies_on_ten_segments_gives_thirty(self):
        assert len(augment_labeled(self._segments(10), copies=2, seed=19)) == 30

    def test_replica_labels_equal_source_labels(self):
        segments = self._segments(5)
        out = augment_labeled(segments, copies=2, seed=20)
        for c in range(2):
            for i, seg in enumerate(segments):
                replica = out[5 + c * 5 + i]
                assert replica.label == seg.label
                assert replica.subject_id == seg.subject_id
                assert replica.valid_len == seg.valid_len
                assert np.all(replica.tensor[:, :, seg.valid_len:] == 0.0)
