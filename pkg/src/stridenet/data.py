"""IMU data model: recordings, normalization, stride tensors, file formats.

Units are physical: accelerometer in g, gyroscope in degrees/second.
Normalization divides each sensor family by its dynamic range (16 g,
2000 deg/s) so every axis lands in [-1, 1]. Stride tensors use the
spatial-first layout (1, 6, 600) with sensor rows ordered
[ax, ay, az, gx, gy, gz] and trailing zero padding along time.

CSV schema (one sample per row, UTF-8, decimal point):
    t_us,ax_g,ay_g,az_g,gx_dps,gy_dps,gz_dps

Boundary file (one stride per line, 0-based, end exclusive):
    start_index,end_index[,length_cm,class]
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACC_RANGE_G = 16.0
GYR_RANGE_DPS = 2000.0
SEGMENT_LEN = 600
SENSOR_ROWS = ("ax", "ay", "az", "gx", "gy", "gz")
CSV_HEADER = ["t_us", "ax_g", "ay_g", "az_g", "gx_dps", "gy_dps", "gz_dps"]

WALK, RUN = "walk", "run"
GAIT_CLASSES = (WALK, RUN)
WALK_LENGTH_RANGE_CM = (80.0, 140.0)
RUN_LENGTH_RANGE_CM = (140.0, 300.0)
SURFACES = ("treadmill", "playground", "asphalt", "synthetic")


class DataFormatError(ValueError):
    """Malformed input file; the message names the offending line."""


class DataRangeError(ValueError):
    """A sample exceeds the sensor dynamic range."""


class SegmentTooLongError(ValueError):
    """A stride does not fit the 600-sample tensor."""


@dataclass
class RawRecording:
    """A timestamped 6-axis IMU stream in physical units."""

    sample_rate: float
    t_us: np.ndarray          # (N,) int64 microseconds, strictly increasing
    acc: np.ndarray           # (N, 3) float32, g
    gyr: np.ndarray           # (N, 3) float32, deg/s
    subject_id: str = ""
    surface: str = "synthetic"

    def __post_init__(self):
        self.t_us = np.ascontiguousarray(self.t_us, dtype=np.int64)
        self.acc = np.ascontiguousarray(self.acc, dtype=np.float32)
        self.gyr = np.ascontiguousarray(self.gyr, dtype=np.float32)
        if self.surface not in SURFACES:
            raise ValueError(f"unknown surface {self.surface!r}")

    def __len__(self) -> int:
        return len(self.t_us)

    @property
    def duration_s(self) -> float:
        if len(self.t_us) < 2:
            return 0.0
        return float(self.t_us[-1] - self.t_us[0]) / 1e6

    def validate(self) -> None:
        if self.acc.shape != (len(self.t_us), 3) or self.gyr.shape != (len(self.t_us), 3):
            raise ValueError("acc/gyr must both be (N, 3) matching the timestamps")
        if len(self.t_us) > 1 and not np.all(np.diff(self.t_us) > 0):
            bad = int(np.argmax(np.diff(self.t_us) <= 0))
            raise DataFormatError(f"timestamps not strictly increasing at sample {bad + 1}")
        _check_range(self.acc, ACC_RANGE_G, "acc")
        _check_range(self.gyr, GYR_RANGE_DPS, "gyr")


def _check_range(values: np.ndarray, limit: float, what: str) -> None:
    over = np.abs(values) > limit
    if over.any():
        idx = int(np.argwhere(over)[0][0])
        raise DataRangeError(f"{what} sample {idx} exceeds +/-{limit:g}")


@dataclass
class StrideLabel:
    length_cm: float
    gait_class: str

    def __post_init__(self):
        if self.length_cm <= 0:
            raise ValueError(f"stride length must be positive, got {self.length_cm}")
        if self.gait_class not in GAIT_CLASSES:
            raise ValueError(f"gait class must be one of {GAIT_CLASSES}, got {self.gait_class!r}")


@dataclass
class StrideSegment:
    """One normalized, zero-padded stride tensor in spatial-first order."""

    tensor: np.ndarray        # (1, 6, 600) float32 in [-1, 1]
    valid_len: int
    label: StrideLabel | None = None
    subject_id: str = ""

    def __post_init__(self):
        self.tensor = np.ascontiguousarray(self.tensor, dtype=np.float32)
        if self.tensor.shape != (1, len(SENSOR_ROWS), SEGMENT_LEN):
            raise ValueError(f"segment tensor must be (1, 6, {SEGMENT_LEN}), got {self.tensor.shape}")
        if not 0 < self.valid_len <= SEGMENT_LEN:
            raise ValueError(f"valid_len must be in (0, {SEGMENT_LEN}], got {self.valid_len}")


def normalize(rec: RawRecording) -> np.ndarray:
    """Six per-axis streams scaled into [-1, 1], rows [ax,ay,az,gx,gy,gz]."""
    _check_range(rec.acc, ACC_RANGE_G, "acc")
    _check_range(rec.gyr, GYR_RANGE_DPS, "gyr")
    streams = np.empty((6, len(rec)), dtype=np.float32)
    streams[0:3] = rec.acc.T / np.float32(ACC_RANGE_G)
    streams[3:6] = rec.gyr.T / np.float32(GYR_RANGE_DPS)
    return streams


def denormalize(streams: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`normalize`; returns (acc, gyr) in physical units."""
    streams = np.asarray(streams, dtype=np.float32)
    acc = (streams[0:3] * np.float32(ACC_RANGE_G)).T
    gyr = (streams[3:6] * np.float32(GYR_RANGE_DPS)).T
    return acc, gyr


def to_spatial_first(
    streams: np.ndarray,
    boundaries,
    labels=None,
    subject_id: str = "",
) -> list[StrideSegment]:
    """Cut normalized streams into (1, 6, 600) stride tensors.

    ``boundaries`` is a sequence of (start, end) index pairs, end exclusive.
    Strides shorter than 600 samples are zero padded on the right; longer
    ones are an error.
    """
    streams = np.asarray(streams, dtype=np.float32)
    if streams.ndim != 2 or streams.shape[0] != 6:
        raise ValueError(f"streams must be (6, N), got {streams.shape}")
    if labels is not None and len(labels) != len(boundaries):
        raise ValueError("labels must align one-to-one with boundaries")

    segments = []
    for i, (start, end) in enumerate(boundaries):
        width = end - start
        if width <= 0:
            raise ValueError(f"boundary {i} is empty: ({start}, {end})")
        if width > SEGMENT_LEN:
            raise SegmentTooLongError(
                f"stride {i} spans {width} samples, budget is {SEGMENT_LEN}"
            )
        tensor = np.zeros((1, 6, SEGMENT_LEN), dtype=np.float32)
        tensor[0, :, :width] = streams[:, start:end]
        segments.append(
            StrideSegment(
                tensor=tensor,
                valid_len=width,
                label=labels[i] if labels is not None else None,
                subject_id=subject_id,
            )
        )
    return segments


def downsample(rec: RawRecording, factor: int) -> RawRecording:
    """Keep every ``factor``-th sample; the rate divides accordingly."""
    if factor < 1 or int(factor) != factor:
        raise ValueError(f"downsample factor must be a positive integer, got {factor}")
    factor = int(factor)
    if factor == 1:
        return rec
    return RawRecording(
        sample_rate=rec.sample_rate / factor,
        t_us=rec.t_us[::factor].copy(),
        acc=rec.acc[::factor].copy(),
        gyr=rec.gyr[::factor].copy(),
        subject_id=rec.subject_id,
        surface=rec.surface,
    )


def scale_boundaries(boundaries, factor: int) -> list[tuple[int, int]]:
    """Map boundary indices onto the grid kept by :func:`downsample`.

    Sample k of the downsampled stream is sample k*factor of the original,
    so [s, e) maps to [ceil(s/f), ceil(e/f)).
    """
    factor = int(factor)
    return [(-(-s // factor), -(-e // factor)) for s, e in boundaries]


def infer_sample_rate(t_us: np.ndarray) -> float:
    """Sample rate from the median inter-sample gap, in Hz."""
    gaps = np.diff(np.asarray(t_us, dtype=np.int64))
    if len(gaps) == 0:
        return 1000.0
    return float(round(1e6 / float(np.median(gaps))))


def ingest_csv(path, subject_id: str = "", surface: str = "synthetic") -> RawRecording:
    """Parse a recording CSV, validating schema, ranges and timestamps."""
    path = Path(path)
    rows = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path.name}: empty file") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise DataFormatError(
                f"{path.name}: header must be {','.join(CSV_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 7:
                raise DataFormatError(f"{path.name}: line {lineno}: expected 7 columns, got {len(row)}")
            try:
                t = int(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise DataFormatError(f"{path.name}: line {lineno}: {exc}") from None
            for j, v in enumerate(values[:3]):
                if abs(v) > ACC_RANGE_G:
                    raise DataRangeError(
                        f"{path.name}: line {lineno}: {CSV_HEADER[1 + j]}={v:g} exceeds +/-{ACC_RANGE_G:g}"
                    )
            for j, v in enumerate(values[3:]):
                if abs(v) > GYR_RANGE_DPS:
                    raise DataRangeError(
                        f"{path.name}: line {lineno}: {CSV_HEADER[4 + j]}={v:g} exceeds +/-{GYR_RANGE_DPS:g}"
                    )
            rows.append((t, values))

    t_us = np.array([r[0] for r in rows], dtype=np.int64)
    if len(t_us) > 1:
        increasing = np.diff(t_us) > 0
        if not increasing.all():
            bad = int(np.argmax(~increasing)) + 3  # +1 header, +1 diff offset, 1-based
            raise DataFormatError(f"{path.name}: line {bad}: timestamp not increasing")
    values = np.array([r[1] for r in rows], dtype=np.float32).reshape(-1, 6)
    rec = RawRecording(
        sample_rate=infer_sample_rate(t_us),
        t_us=t_us,
        acc=values[:, 0:3],
        gyr=values[:, 3:6],
        subject_id=subject_id,
        surface=surface,
    )
    rec.validate()
    return rec


def write_csv(rec: RawRecording, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for i in range(len(rec)):
            writer.writerow(
                [int(rec.t_us[i])]
                + [f"{v:.6f}" for v in rec.acc[i]]
                + [f"{v:.4f}" for v in rec.gyr[i]]
            )


@dataclass
class BoundaryRow:
    start: int
    end: int
    label: StrideLabel | None = None


def read_boundary_file(path) -> list[BoundaryRow]:
    """Parse a boundary file; format errors name the offending line."""
    path = Path(path)
    rows: list[BoundaryRow] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) not in (2, 4):
            raise DataFormatError(f"{path.name}: line {lineno}: expected 2 or 4 fields, got {len(parts)}")
        try:
            start, end = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataFormatError(f"{path.name}: line {lineno}: indices must be integers") from None
        label = None
        if len(parts) == 4:
            try:
                label = StrideLabel(length_cm=float(parts[2]), gait_class=parts[3])
            except ValueError as exc:
                raise DataFormatError(f"{path.name}: line {lineno}: {exc}") from None
        rows.append(BoundaryRow(start=start, end=end, label=label))
    return rows


def write_boundary_file(path, boundaries, labels=None) -> None:
    lines = []
    for i, (start, end) in enumerate(boundaries):
        if labels is not None:
            lab = labels[i]
            lines.append(f"{start},{end},{lab.length_cm:.2f},{lab.gait_class}")
        else:
            lines.append(f"{start},{end}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
