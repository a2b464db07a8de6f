"""Synthetic gait generator with exact ground truth.

Each stride is a stylized cycle on the sagittal gyro axis: a quiet dwell
around ground contact, a small negative stance lobe, then a dominant
positive swing lobe whose amplitude grows with speed. The accelerometer
carries gravity, a speed-scaled bounce, and a heel-strike impulse at every
stride boundary. Stride lengths follow a deterministic speed law plus a
seeded jitter of at most 2%, so generated recordings double as an oracle
for segmentation and regression.

Stride length law (cm), clamped to the class range:
    walk (speed < 8 km/h):  14.0 * speed + 30
    run  (speed >= 8 km/h): 11.5 * speed + 50
which puts 5 km/h near 100 cm and 19 km/h near 270 cm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import (
    RUN,
    RUN_LENGTH_RANGE_CM,
    WALK,
    WALK_LENGTH_RANGE_CM,
    RawRecording,
    StrideLabel,
)
from .util import derived_rng

RUN_SPEED_THRESHOLD_KMH = 8.0
SPEED_RANGE_KMH = (4.0, 20.0)
MIN_CADENCE_HZ = 1.0 / 1.2   # slowest supported stride: 1.2 s

# Cycle layout as fractions of the stride period. The dwell is the quiet
# window straddling each boundary; its smoothed gyro magnitude is the
# detector's landing zone, so it must stay narrower than the smoothing
# window at all supported speeds.
DWELL_FRAC = 0.04
STANCE_END_FRAC = 0.50
STANCE_AMP_RATIO = 0.18

JITTER_FRAC = 0.02
LEAD_S = 0.6                 # quiet standing before the first and after the last stride

# Labeled datasets mirror an eight-speed treadmill protocol.
LABELED_SPEEDS_KMH = (5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0, 19.0)


def gait_class_for_speed(speed_kmh: float) -> str:
    return RUN if speed_kmh >= RUN_SPEED_THRESHOLD_KMH else WALK


def base_stride_length_cm(speed_kmh: float) -> float:
    """Deterministic stride length before jitter, clamped to the class range."""
    if gait_class_for_speed(speed_kmh) == WALK:
        lo, hi = WALK_LENGTH_RANGE_CM
        raw = 14.0 * speed_kmh + 30.0
    else:
        lo, hi = RUN_LENGTH_RANGE_CM
        raw = 11.5 * speed_kmh + 50.0
    return float(min(max(raw, lo), hi))


@dataclass
class GaitScenario:
    """Parameters for one synthetic bout of walking or running.

    ``cadence_hz`` fixes the stride period exactly when given; otherwise the
    period follows from the jittered stride length and the speed. ``amp_scale``
    models per-subject signal intensity without touching the length law.
    """

    speed_kmh: float
    cadence_hz: float | None = None
    noise_level: float = 1.0
    amp_scale: float = 1.0

    def __post_init__(self):
        lo, hi = SPEED_RANGE_KMH
        if not lo <= self.speed_kmh <= hi:
            raise ValueError(f"speed must be within [{lo}, {hi}] km/h, got {self.speed_kmh}")
        if self.cadence_hz is not None and self.cadence_hz < MIN_CADENCE_HZ:
            raise ValueError(f"cadence must be >= {MIN_CADENCE_HZ:.3f} Hz, got {self.cadence_hz}")
        if self.noise_level < 0:
            raise ValueError("noise_level must be non-negative")
        if not 0.5 <= self.amp_scale <= 1.5:
            raise ValueError("amp_scale must be within [0.5, 1.5]")

    @property
    def gait_class(self) -> str:
        return gait_class_for_speed(self.speed_kmh)

    @property
    def base_length_cm(self) -> float:
        return base_stride_length_cm(self.speed_kmh)

    @property
    def swing_amplitude_dps(self) -> float:
        return (150.0 + 20.0 * self.speed_kmh) * self.amp_scale


@dataclass
class SynthResult:
    """A generated recording plus its ground truth."""

    recording: RawRecording
    boundaries: list[tuple[int, int]]
    labels: list[StrideLabel]
    scenario: GaitScenario


def _stride_lengths_cm(scenario: GaitScenario, n_strides: int, rng: np.random.Generator) -> np.ndarray:
    base = scenario.base_length_cm
    jitter = rng.uniform(-JITTER_FRAC, JITTER_FRAC, size=n_strides)
    lo, hi = WALK_LENGTH_RANGE_CM if scenario.gait_class == WALK else RUN_LENGTH_RANGE_CM
    return np.clip(base * (1.0 + jitter), lo, hi)


def _gyro_cycle(n: int, amp: float) -> np.ndarray:
    """Sagittal gyro waveform for one stride of ``n`` samples."""
    u = np.arange(n) / n
    gy = np.zeros(n)
    stance = (u >= DWELL_FRAC) & (u < STANCE_END_FRAC)
    gy[stance] = -STANCE_AMP_RATIO * amp * np.sin(
        np.pi * (u[stance] - DWELL_FRAC) / (STANCE_END_FRAC - DWELL_FRAC)
    )
    swing = (u >= STANCE_END_FRAC) & (u < 1.0 - DWELL_FRAC)
    gy[swing] = amp * np.sin(
        np.pi * (u[swing] - STANCE_END_FRAC) / (1.0 - DWELL_FRAC - STANCE_END_FRAC)
    )
    return gy


def synth_gait(
    scenario: GaitScenario,
    n_strides: int,
    seed: int,
    sample_rate: float = 1000.0,
    subject_id: str = "synthetic",
    surface: str = "synthetic",
) -> SynthResult:
    """Generate a recording of ``n_strides`` consecutive strides.

    Returns the raw recording at ``sample_rate`` together with ground-truth
    stride boundaries (contiguous, end exclusive) and per-stride labels.
    Identical arguments always produce identical output.
    """
    if n_strides < 1:
        raise ValueError("n_strides must be >= 1")
    rng = derived_rng(seed, "synth", subject_id, surface, f"{scenario.speed_kmh:.3f}")
    fs = float(sample_rate)
    speed_ms = scenario.speed_kmh / 3.6

    lengths_cm = _stride_lengths_cm(scenario, n_strides, rng)
    if scenario.cadence_hz is not None:
        durations = np.full(n_strides, 1.0 / scenario.cadence_hz)
    else:
        durations = lengths_cm / 100.0 / speed_ms
    stride_samples = np.maximum(np.round(durations * fs).astype(int), 8)

    lead = int(round(LEAD_S * fs))
    total = lead + int(stride_samples.sum()) + lead
    gy = np.zeros(total)
    ax = np.zeros(total)
    ay = np.zeros(total)
    az = np.ones(total)

    amp = scenario.swing_amplitude_dps
    impulse_amp = (1.5 + 0.2 * scenario.speed_kmh) * scenario.amp_scale
    impulse_w = max(int(round(0.024 * fs)), 4)
    impulse = impulse_amp * np.sin(np.pi * np.arange(impulse_w) / impulse_w)

    boundaries: list[tuple[int, int]] = []
    cursor = lead
    for n in stride_samples:
        n = int(n)
        u = np.arange(n) / n
        gy[cursor : cursor + n] = _gyro_cycle(n, amp)
        bounce = 0.02 * scenario.speed_kmh * scenario.amp_scale
        az[cursor : cursor + n] += bounce * np.sin(2 * np.pi * u)
        ax[cursor : cursor + n] += 1.5 * bounce * np.sin(4 * np.pi * u)
        ay[cursor : cursor + n] += 0.1 * np.sin(2 * np.pi * u)
        boundaries.append((cursor, cursor + n))
        cursor += n

    # Ground contact happens at every boundary point, including the end of
    # the final stride, and the impact transient is centered on it.
    for site in [b[0] for b in boundaries] + [boundaries[-1][1]]:
        lo = site - impulse_w // 2
        src0, src1 = max(0, -lo), min(impulse_w, total - lo)
        az[lo + src0 : lo + src1] += impulse[src0:src1]
        ax[lo + src0 : lo + src1] += 0.5 * impulse[src0:src1]

    # Rigid mounting cross-talk keeps the off-sagittal gyro axes correlated
    # and quiet exactly where gy is quiet.
    gx = 0.08 * gy
    gz = -0.05 * gy

    sigma_acc = 0.02 * scenario.noise_level
    sigma_gyr = 2.0 * scenario.noise_level
    if scenario.noise_level > 0:
        # Clipped at 6 sigma so the dynamic-range invariant holds by construction.
        def noise(sigma, size):
            return np.clip(rng.normal(0.0, sigma, size), -6 * sigma, 6 * sigma)

        ax += noise(sigma_acc, total)
        ay += noise(sigma_acc, total)
        az += noise(sigma_acc, total)
        gx += noise(sigma_gyr, total)
        gy += noise(sigma_gyr, total)
        gz += noise(sigma_gyr, total)

    rec = RawRecording(
        sample_rate=fs,
        t_us=(np.arange(total) * round(1e6 / fs)).astype(np.int64),
        acc=np.stack([ax, ay, az], axis=1).astype(np.float32),
        gyr=np.stack([gx, gy, gz], axis=1).astype(np.float32),
        subject_id=subject_id,
        surface=surface,
    )
    rec.validate()
    labels = [
        StrideLabel(length_cm=float(c), gait_class=scenario.gait_class) for c in lengths_cm
    ]
    return SynthResult(recording=rec, boundaries=boundaries, labels=labels, scenario=scenario)
