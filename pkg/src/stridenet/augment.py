"""Self-supervised training pairs and labeled-set noise expansion.

The corruption menu is deliberately small: a 120-sample cut-out window
zeroed across all six sensor rows, and i.i.d. Gaussian sensor noise whose
sigma is 1% of each family's dynamic range (0.16 g, 20 deg/s; 0.01 in
normalized units). Every derived sample gets its own seed, so augmentation
is deterministic and independent across samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ACC_RANGE_G, GYR_RANGE_DPS, SEGMENT_LEN, StrideSegment
from .util import derived_rng

CUTOUT_LEN = SEGMENT_LEN // 5          # 120 samples, one fifth of a segment
NOISE_SIGMA_ACC_G = 0.16               # 1% of 16 g
NOISE_SIGMA_GYR_DPS = 20.0             # 1% of 2000 deg/s
NOISE_SIGMA_NORMALIZED = 0.01          # both families after normalization

AUGMENT_TAGS = ("cutout", "noise", "cutout+noise", "none")


@dataclass
class AugmentedPair:
    """A (corrupted input, clean target) pair for the reconstruction task."""

    input: np.ndarray          # (1, 6, 600) float32
    target: np.ndarray         # (1, 6, 600) float32, the unmodified segment
    tag: str = "none"

    def __post_init__(self):
        if self.tag not in AUGMENT_TAGS:
            raise ValueError(f"unknown augmentation tag {self.tag!r}")


def _as_segment_array(segment) -> np.ndarray:
    arr = np.asarray(segment, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.shape != (1, 6, SEGMENT_LEN):
        raise ValueError(f"segment must be (1, 6, {SEGMENT_LEN}) or (6, {SEGMENT_LEN}), got {arr.shape}")
    return arr


def random_segments(streams: np.ndarray, seed: int, count: int | None = None) -> list[np.ndarray]:
    """Cut ``count`` random 600-sample windows out of continuous streams.

    Overlap is allowed; the default count triples the source duration, so
    the emitted windows cover about 3x the recording.
    """
    streams = np.asarray(streams, dtype=np.float32)
    if streams.ndim != 2 or streams.shape[0] != 6:
        raise ValueError(f"streams must be (6, N), got {streams.shape}")
    n = streams.shape[1]
    if n < SEGMENT_LEN:
        raise ValueError(f"recording has {n} samples, need at least {SEGMENT_LEN}")
    if count is None:
        count = max(int(round(3.0 * n / SEGMENT_LEN)), 1)
    rng = derived_rng(seed, "random_segments")
    starts = rng.integers(0, n - SEGMENT_LEN + 1, size=count)
    return [streams[:, s : s + SEGMENT_LEN].copy() for s in starts]


def cutout(segment, seed: int) -> np.ndarray:
    """Zero one contiguous 120-sample time window across all six rows."""
    arr = _as_segment_array(segment).copy()
    rng = derived_rng(seed, "cutout")
    start = int(rng.integers(0, SEGMENT_LEN - CUTOUT_LEN + 1))
    arr[:, :, start : start + CUTOUT_LEN] = 0.0
    return arr


def add_noise(segment_raw_units, seed: int) -> np.ndarray:
    """Add Gaussian sensor noise to a segment in raw physical units.

    Accelerometer rows get sigma 0.16 g, gyroscope rows sigma 20 deg/s,
    which is 1% of the respective dynamic range.
    """
    arr = _as_segment_array(segment_raw_units).copy()
    rng = derived_rng(seed, "noise_raw")
    arr[0, 0:3, :] += rng.normal(0.0, NOISE_SIGMA_ACC_G, size=(3, SEGMENT_LEN)).astype(np.float32)
    arr[0, 3:6, :] += rng.normal(0.0, NOISE_SIGMA_GYR_DPS, size=(3, SEGMENT_LEN)).astype(np.float32)
    return arr


def add_noise_normalized(segment, seed: int) -> np.ndarray:
    """Same corruption as :func:`add_noise` but on normalized segments.

    Because both sigmas are 1% of their dynamic range, the normalized
    equivalent is a single sigma of 0.01 on every row.
    """
    arr = _as_segment_array(segment).copy()
    rng = derived_rng(seed, "noise_raw")
    arr[0, 0:3, :] += (
        rng.normal(0.0, NOISE_SIGMA_ACC_G, size=(3, SEGMENT_LEN)).astype(np.float32)
        / np.float32(ACC_RANGE_G)
    )
    arr[0, 3:6, :] += (
        rng.normal(0.0, NOISE_SIGMA_GYR_DPS, size=(3, SEGMENT_LEN)).astype(np.float32)
        / np.float32(GYR_RANGE_DPS)
    )
    return arr


def make_pretext_set(segments, seed: int) -> list[AugmentedPair]:
    """Three corrupted views per clean normalized segment.

    Emits cutout-only, noise-only, and cutout+noise inputs, each paired
    with the untouched segment as its reconstruction target.
    """
    pairs: list[AugmentedPair] = []
    for i, segment in enumerate(segments):
        clean = _as_segment_array(segment)
        cut_seed = (seed, i, "cut")
        noise_seed = (seed, i, "noise")
        both_cut_seed = (seed, i, "both-cut")
        both_noise_seed = (seed, i, "both-noise")
        pairs.append(AugmentedPair(cutout(clean, _fold(cut_seed)), clean.copy(), "cutout"))
        pairs.append(AugmentedPair(add_noise_normalized(clean, _fold(noise_seed)), clean.copy(), "noise"))
        both = add_noise_normalized(cutout(clean, _fold(both_cut_seed)), _fold(both_noise_seed))
        both = _rezero_cut_window(both, _fold(both_cut_seed))
        pairs.append(AugmentedPair(both, clean.copy(), "cutout+noise"))
    return pairs


def _fold(key_tuple) -> int:
    seed, index, tag = key_tuple
    return int(derived_rng(seed, "pretext", index, tag).integers(0, 2**31 - 1))


def _rezero_cut_window(arr: np.ndarray, cut_seed: int) -> np.ndarray:
    # The combined view keeps the cut window exactly zero; noise applies
    # only outside it.
    rng = derived_rng(cut_seed, "cutout")
    start = int(rng.integers(0, SEGMENT_LEN - CUTOUT_LEN + 1))
    arr[:, :, start : start + CUTOUT_LEN] = 0.0
    return arr


def augment_labeled(segments: list[StrideSegment], copies: int, seed: int) -> list[StrideSegment]:
    """Originals plus ``copies`` noise-corrupted replicas, labels unchanged."""
    if copies < 0:
        raise ValueError("copies must be >= 0")
    out = list(segments)
    for c in range(copies):
        for i, seg in enumerate(segments):
            replica_seed = int(derived_rng(seed, "labeled", c, i).integers(0, 2**31 - 1))
            noisy = add_noise_normalized(seg.tensor, replica_seed)
            # Keep the zero padding exact: corruption applies to the valid
            # span only.
            noisy[:, :, seg.valid_len :] = 0.0
            out.append(
                StrideSegment(
                    tensor=noisy,
                    valid_len=seg.valid_len,
                    label=seg.label,
                    subject_id=seg.subject_id,
                )
            )
    return out
