"""Rule-based stride segmentation plus an import path for external boundaries.

Detection finds swing peaks in the smoothed gyro magnitude, then places
stride boundaries at the quiet minima between consecutive peaks. The two
terminal boundaries are extrapolated from the median peak-to-valley
spacing, so a recording of n strides yields n windows, not n-2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .data import BoundaryRow, RawRecording, read_boundary_file

SMOOTH_WINDOW_S = 0.102      # 51 samples at 500 Hz, centered moving average
THRESHOLD_RATIO = 0.30       # of the 95th percentile of smoothed magnitude
MIN_PEAK_SPACING_S = 0.35
STRIDE_DURATION_S = (0.4, 2.0)
SNAP_WINDOW_S = 0.045        # impact-transient search radius around a valley
SNAP_MIN_TRANSIENT_G = 0.25  # below this no impact is assumed and the valley stands


class BoundaryImportError(ValueError):
    """Boundary file entries are out of range, unordered, or overlapping."""


@dataclass(frozen=True)
class StrideBoundary:
    start: int
    end: int                  # exclusive
    confidence: float = 1.0

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"boundary must satisfy start < end, got ({self.start}, {self.end})")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


def _moving_average(values: np.ndarray, window: int) -> np.ndarray:
    window = max(window | 1, 3)  # odd so the average stays centered
    kernel = np.ones(window) / window
    padded = np.pad(values, window // 2, mode="edge")
    return np.convolve(padded, kernel, mode="valid")


def smoothed_gyro_magnitude(rec: RawRecording) -> np.ndarray:
    """Centered moving average of the gyro L2 norm."""
    magnitude = np.linalg.norm(rec.gyr.astype(np.float64), axis=1)
    return _moving_average(magnitude, int(round(SMOOTH_WINDOW_S * rec.sample_rate)))


def _accel_transient(rec: RawRecording) -> np.ndarray:
    """Accelerometer magnitude with its slow trend removed, in g."""
    magnitude = np.linalg.norm(rec.acc.astype(np.float64), axis=1)
    return np.abs(magnitude - _moving_average(magnitude, int(round(SMOOTH_WINDOW_S * rec.sample_rate))))


def _snap_to_impact(valley: int, transient: np.ndarray, fs: float) -> int:
    """Refine a quiet-zone minimum to the heel-strike transient, if any.

    The gyro valley localizes the quiet zone straddling ground contact but
    is flat at its bottom; the impact spike in the accelerometer pins the
    contact instant. Without a clear spike the valley minimum stands.
    """
    radius = max(int(SNAP_WINDOW_S * fs), 1)
    lo, hi = max(0, valley - radius), min(len(transient), valley + radius + 1)
    window = transient[lo:hi]
    peak = int(np.argmax(window))
    floor = max(8.0 * float(np.median(transient)), SNAP_MIN_TRANSIENT_G)
    if window[peak] >= floor:
        return lo + peak
    return valley


def detect_strides(rec: RawRecording) -> list[StrideBoundary]:
    """Detect stride windows; an empty list means no strides, not an error."""
    if rec.duration_s < 2.0:
        raise ValueError(f"need at least 2 s of data, got {rec.duration_s:.2f} s")

    fs = rec.sample_rate
    smooth = smoothed_gyro_magnitude(rec)
    scale = float(np.percentile(smooth, 95))
    if scale <= 0.0:
        return []
    threshold = THRESHOLD_RATIO * scale

    peaks, _ = find_peaks(smooth, height=threshold, distance=max(int(MIN_PEAK_SPACING_S * fs), 1))
    if len(peaks) < 2:
        return []

    valleys = [int(peaks[i] + np.argmin(smooth[peaks[i] : peaks[i + 1]])) for i in range(len(peaks) - 1)]
    # Terminal boundaries from the median peak/valley offsets seen inside
    # the recording; this recovers the first and last stride windows.
    to_valley = int(np.median([v - p for v, p in zip(valleys, peaks[:-1])]))
    from_valley = int(np.median([p - v for v, p in zip(valleys, peaks[1:])]))
    first = peaks[0] - from_valley
    last = peaks[-1] + to_valley
    if first >= 0:
        valleys.insert(0, int(first))
    if last < len(smooth):
        valleys.append(int(last))

    transient = _accel_transient(rec)
    valleys = sorted({_snap_to_impact(v, transient, fs) for v in valleys})

    lo, hi = (int(STRIDE_DURATION_S[0] * fs), int(STRIDE_DURATION_S[1] * fs))
    boundaries = []
    for start, end in zip(valleys[:-1], valleys[1:]):
        if not lo <= end - start <= hi:
            continue
        depth = max(float(smooth[start]), float(smooth[end]))
        confidence = float(np.clip(1.0 - depth / threshold, 0.0, 1.0))
        boundaries.append(StrideBoundary(start=start, end=end, confidence=confidence))
    return boundaries


def validate_boundary_rows(rec: RawRecording, rows: list[BoundaryRow]) -> list[StrideBoundary]:
    """Check imported rows for range, order and overlap against a recording."""
    n = len(rec)
    boundaries = []
    for i, row in enumerate(rows, start=1):
        if row.start < 0 or row.end > n:
            raise BoundaryImportError(
                f"row {i}: ({row.start}, {row.end}) outside recording of {n} samples"
            )
        if row.start >= row.end:
            raise BoundaryImportError(f"row {i}: start {row.start} not before end {row.end}")
        if boundaries and row.start < boundaries[-1].end:
            raise BoundaryImportError(
                f"rows {i - 1} and {i} overlap: "
                f"({boundaries[-1].start}, {boundaries[-1].end}) then ({row.start}, {row.end})"
            )
        boundaries.append(StrideBoundary(start=row.start, end=row.end, confidence=1.0))
    return boundaries


def import_boundaries(rec: RawRecording, boundary_file) -> list[StrideBoundary]:
    """Load externally produced stride boundaries and validate them."""
    return validate_boundary_rows(rec, read_boundary_file(boundary_file))
