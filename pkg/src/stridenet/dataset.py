"""Synthetic dataset generation and loading.

Mirrors the shape of a treadmill study: a small labeled cohort recorded at
eight speeds with per-stride ground truth, a larger unlabeled cohort over
mixed surfaces, and standalone distance-validation tracks of known total
length. Everything is written through the documented CSV and boundary
formats at the acquisition rate (1000 Hz); loaders downsample to the
working rate before normalization and segmentation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    RawRecording,
    StrideLabel,
    downsample,
    ingest_csv,
    normalize,
    read_boundary_file,
    scale_boundaries,
    to_spatial_first,
    write_boundary_file,
    write_csv,
)
from .segmenter import detect_strides
from .synth import LABELED_SPEEDS_KMH, GaitScenario, synth_gait
from .util import derived_rng, derived_seed, write_kv

DEFAULT_SAMPLE_RATE = 1000.0
DEFAULT_DOWNSAMPLE = 2
UNLABELED_SURFACES = ("treadmill", "playground", "asphalt")


@dataclass
class DatasetSpec:
    """Knobs for one generated dataset."""

    seed: int = 0
    labeled_subjects: int = 3
    strides_per_speed: int = 25
    unlabeled_subjects: int = 11
    unlabeled_strides: int = 60
    distance_tracks: int = 1
    distance_track_m: float = 400.0
    noise_level: float = 1.0
    sample_rate: float = DEFAULT_SAMPLE_RATE


@dataclass
class DatasetSummary:
    labeled_files: list[str] = field(default_factory=list)
    unlabeled_files: list[str] = field(default_factory=list)
    distance_files: list[str] = field(default_factory=list)
    labeled_strides: dict[str, int] = field(default_factory=dict)   # per speed tag
    unlabeled_strides: dict[str, int] = field(default_factory=dict)  # per surface
    labeled_seconds: float = 0.0
    unlabeled_seconds: float = 0.0

    def table(self) -> str:
        lines = ["Labeled dataset", f"  subjects: {len({f.split('_')[0] for f in self.labeled_files})}"]
        lines.append(f"  {'type':<12}{'strides':>8}{'seconds':>10}")
        for tag in sorted(self.labeled_strides, key=lambda t: float(t.split()[1])):
            lines.append(f"  {tag:<12}{self.labeled_strides[tag]:>8}")
        lines.append(f"  total seconds: {self.labeled_seconds:.1f}")
        lines.append("")
        lines.append("Unlabeled dataset")
        lines.append(f"  subjects: {len({f.split('_')[0] for f in self.unlabeled_files})}")
        lines.append(f"  {'surface':<12}{'strides':>8}")
        for surface in sorted(self.unlabeled_strides):
            lines.append(f"  {surface:<12}{self.unlabeled_strides[surface]:>8}")
        lines.append(f"  total seconds: {self.unlabeled_seconds:.1f}")
        if self.distance_files:
            lines.append("")
            lines.append(f"Distance tracks: {len(self.distance_files)}")
        return "\n".join(lines) + "\n"


def _subject_amp(seed: int, subject: str) -> float:
    return float(derived_rng(seed, "subject-amp", subject).uniform(0.9, 1.1))


def generate_dataset(out_dir, spec: DatasetSpec) -> DatasetSummary:
    """Write the full synthetic dataset; byte-identical for a fixed spec."""
    out = Path(out_dir)
    (out / "labeled").mkdir(parents=True, exist_ok=True)
    (out / "unlabeled").mkdir(parents=True, exist_ok=True)
    if spec.distance_tracks > 0:
        (out / "distance").mkdir(parents=True, exist_ok=True)
    summary = DatasetSummary()

    for s in range(1, spec.labeled_subjects + 1):
        subject = f"s{s:02d}"
        amp = _subject_amp(spec.seed, subject)
        for speed in LABELED_SPEEDS_KMH:
            scenario = GaitScenario(
                speed_kmh=speed, noise_level=spec.noise_level, amp_scale=amp
            )
            result = synth_gait(
                scenario,
                spec.strides_per_speed,
                seed=derived_seed(spec.seed, "labeled", subject, speed),
                sample_rate=spec.sample_rate,
                subject_id=subject,
                surface="treadmill",
            )
            stem = f"{subject}_v{int(speed):02d}"
            write_csv(result.recording, out / "labeled" / f"{stem}.csv")
            write_boundary_file(out / "labeled" / f"{stem}.bounds", result.boundaries, result.labels)
            summary.labeled_files.append(stem)
            tag = f"{scenario.gait_class} {speed:g}"
            summary.labeled_strides[tag] = summary.labeled_strides.get(tag, 0) + len(result.boundaries)
            summary.labeled_seconds += result.recording.duration_s

    speeds = np.linspace(4.5, 19.5, max(spec.unlabeled_subjects, 1))
    for u in range(1, spec.unlabeled_subjects + 1):
        subject = f"u{u:02d}"
        surface = UNLABELED_SURFACES[(u - 1) % len(UNLABELED_SURFACES)]
        rng = derived_rng(spec.seed, "unlabeled-speed", subject)
        speed = float(np.clip(speeds[u - 1] + rng.uniform(-0.4, 0.4), 4.0, 20.0))
        scenario = GaitScenario(
            speed_kmh=speed,
            noise_level=spec.noise_level,
            amp_scale=_subject_amp(spec.seed, subject),
        )
        result = synth_gait(
            scenario,
            spec.unlabeled_strides,
            seed=derived_seed(spec.seed, "unlabeled", subject),
            sample_rate=spec.sample_rate,
            subject_id=subject,
            surface=surface,
        )
        stem = f"{subject}_{surface}"
        write_csv(result.recording, out / "unlabeled" / f"{stem}.csv")
        summary.unlabeled_files.append(stem)
        summary.unlabeled_strides[surface] = (
            summary.unlabeled_strides.get(surface, 0) + len(result.boundaries)
        )
        summary.unlabeled_seconds += result.recording.duration_s

    for t in range(1, spec.distance_tracks + 1):
        rng = derived_rng(spec.seed, "track-speed", t)
        speed = float(rng.uniform(9.0, 15.0))
        scenario = GaitScenario(speed_kmh=speed, noise_level=spec.noise_level)
        # Pick the stride count whose expected total length matches the track.
        n_strides = max(int(round(spec.distance_track_m * 100.0 / scenario.base_length_cm)), 1)
        result = synth_gait(
            scenario,
            n_strides,
            seed=derived_seed(spec.seed, "track", t),
            sample_rate=spec.sample_rate,
            subject_id=f"t{t:02d}",
        )
        truth_m = sum(l.length_cm for l in result.labels) / 100.0
        stem = f"track{t:02d}"
        write_csv(result.recording, out / "distance" / f"{stem}.csv")
        write_boundary_file(out / "distance" / f"{stem}.bounds", result.boundaries, result.labels)
        write_kv(
            out / "distance" / f"{stem}.meta",
            {"truth_m": f"{truth_m:.4f}", "speed_kmh": f"{speed:.3f}", "strides": len(result.boundaries)},
        )
        summary.distance_files.append(stem)

    (out / "summary.txt").write_text(summary.table(), encoding="utf-8")
    return summary


def segments_from_recording(
    rec: RawRecording,
    factor: int = DEFAULT_DOWNSAMPLE,
    boundaries=None,
    labels=None,
    subject_id: str | None = None,
):
    """Downsample, normalize and segment a recording.

    ``boundaries`` are indices at the recording's own rate; when omitted,
    the stride detector runs on the downsampled recording instead. Returns
    (segments, boundaries at the working rate).
    """
    work = downsample(rec, factor)
    if boundaries is None:
        detected = detect_strides(work)
        work_bounds = [(b.start, b.end) for b in detected]
    else:
        work_bounds = scale_boundaries(boundaries, factor)
    streams = normalize(work)
    segments = to_spatial_first(
        streams,
        work_bounds,
        labels=labels,
        subject_id=rec.subject_id if subject_id is None else subject_id,
    )
    return segments, work_bounds


def load_labeled_segments(data_dir, factor: int = DEFAULT_DOWNSAMPLE):
    """All labeled stride segments under ``data_dir``, boundaries from files."""
    labeled_dir = Path(data_dir) / "labeled"
    segments = []
    for csv_path in sorted(labeled_dir.glob("*.csv")):
        subject = csv_path.stem.split("_")[0]
        rec = ingest_csv(csv_path, subject_id=subject, surface="treadmill")
        rows = read_boundary_file(csv_path.with_suffix(".bounds"))
        bounds = [(r.start, r.end) for r in rows]
        labels = [r.label for r in rows]
        if any(l is None for l in labels):
            raise ValueError(f"{csv_path.name}: labeled dataset rows need length and class")
        segs, _ = segments_from_recording(rec, factor, boundaries=bounds, labels=labels)
        segments.extend(segs)
    return segments


def load_unlabeled_streams(data_dir, factor: int = DEFAULT_DOWNSAMPLE):
    """Normalized (6, N) streams of every unlabeled recording."""
    unlabeled_dir = Path(data_dir) / "unlabeled"
    streams = []
    for csv_path in sorted(unlabeled_dir.glob("*.csv")):
        subject, surface = csv_path.stem.split("_", 1)
        rec = ingest_csv(csv_path, subject_id=subject, surface=surface)
        streams.append(normalize(downsample(rec, factor)))
    return streams


def labels_from_rows(rows) -> list[StrideLabel]:
    return [r.label for r in rows]
