"""Metrics, subject-independent cross-validation, and distance summation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .augment import make_pretext_set
from .data import GAIT_CLASSES, RawRecording, StrideSegment
from .dataset import DEFAULT_DOWNSAMPLE, segments_from_recording
from .model import ModelConfig, ModelParams
from .training import (
    CLASS_INDEX,
    DownstreamResult,
    PretextResult,
    TrainConfig,
    TrainSetupError,
    predict,
    train_downstream,
    train_pretext,
)
from .util import derived_seed, format_mean_std

HIST_BIN_PCT = 1.0
HIST_MAX_PCT = 30.0


@dataclass
class MetricBundle:
    """MAE, percentage error and accuracy, per class and pooled."""

    n: int
    n_per_class: dict[str, int]
    mae_cm: dict[str, float]       # keys: walk, run, avg
    pe_pct: dict[str, float]
    accuracy_pct: float
    hist_counts: np.ndarray        # 1% bins over [0, 30)
    hist_overflow: int


def metrics(pred_cm, truth_cm, pred_class, truth_class) -> MetricBundle:
    """Compute the metric bundle; inputs are aligned per-stride vectors."""
    pred_cm = np.asarray(pred_cm, dtype=np.float64)
    truth_cm = np.asarray(truth_cm, dtype=np.float64)
    pred_class = np.asarray(pred_class, dtype=np.int64)
    truth_class = np.asarray(truth_class, dtype=np.int64)
    if not (len(pred_cm) == len(truth_cm) == len(pred_class) == len(truth_class)):
        raise ValueError("prediction and truth vectors must have equal length")
    if len(pred_cm) == 0:
        raise ValueError("metrics need at least one stride")

    abs_err = np.abs(pred_cm - truth_cm)
    pe = 100.0 * abs_err / truth_cm
    mae = {"avg": float(abs_err.mean())}
    pe_out = {"avg": float(pe.mean())}
    n_per_class = {}
    for cls, idx in CLASS_INDEX.items():
        mask = truth_class == idx
        n_per_class[cls] = int(mask.sum())
        mae[cls] = float(abs_err[mask].mean()) if mask.any() else float("nan")
        pe_out[cls] = float(pe[mask].mean()) if mask.any() else float("nan")

    edges = np.arange(0.0, HIST_MAX_PCT + HIST_BIN_PCT, HIST_BIN_PCT)
    counts, _ = np.histogram(pe, bins=edges)
    return MetricBundle(
        n=len(pred_cm),
        n_per_class=n_per_class,
        mae_cm=mae,
        pe_pct=pe_out,
        accuracy_pct=float(100.0 * np.mean(pred_class == truth_class)),
        hist_counts=counts,
        hist_overflow=int(np.sum(pe >= HIST_MAX_PCT)),
    )


def evaluate_segments(params: ModelParams, segments: list[StrideSegment]) -> MetricBundle:
    lengths, classes = predict(params, segments)
    truth_cm = np.array([s.label.length_cm for s in segments])
    truth_cls = np.array([CLASS_INDEX[s.label.gait_class] for s in segments])
    return metrics(lengths, truth_cm, classes, truth_cls)


@dataclass
class FoldReport:
    """Per-fold metrics plus mean +/- std aggregates."""

    folds: list[MetricBundle]
    fold_test_subjects: list[list[str]]
    seed: int
    regression_loss: str
    pretrained: bool

    def _values(self, metric: str, key: str) -> np.ndarray:
        return np.array([getattr(f, metric)[key] for f in self.folds], dtype=np.float64)

    def mean_std(self, metric: str, key: str) -> tuple[float, float]:
        values = self._values(metric, key)
        return float(values.mean()), float(values.std())

    def accuracy_mean_std(self) -> tuple[float, float]:
        values = np.array([f.accuracy_pct for f in self.folds])
        return float(values.mean()), float(values.std())

    @property
    def hist_counts(self) -> np.ndarray:
        return np.sum([f.hist_counts for f in self.folds], axis=0)

    @property
    def hist_overflow(self) -> int:
        return int(sum(f.hist_overflow for f in self.folds))

    def to_text(self) -> str:
        lines = [
            f"Subject-independent {len(self.folds)}-fold evaluation "
            f"(loss: {self.regression_loss}, encoder: "
            f"{'pretrained' if self.pretrained else 'fresh'}, seed: {self.seed})",
            "",
            f"{'Metric':<22}{'Running':>16}{'Walking':>16}{'Avg':>16}",
        ]
        rows = [("MAE (cm)", "mae_cm"), ("Percentage error (%)", "pe_pct")]
        for title, metric in rows:
            cells = [format_mean_std(*self.mean_std(metric, key)) for key in ("run", "walk", "avg")]
            lines.append(f"{title:<22}{cells[0]:>16}{cells[1]:>16}{cells[2]:>16}")
        acc = format_mean_std(*self.accuracy_mean_std())
        lines.append(f"{'Run/walk accuracy (%)':<22}{'':>16}{'':>16}{acc:>16}")
        lines.append("")
        for i, (bundle, subjects) in enumerate(zip(self.folds, self.fold_test_subjects)):
            lines.append(
                f"fold {i}: test subjects {','.join(subjects)}  n={bundle.n}  "
                f"PE {bundle.pe_pct['avg']:.2f}%  MAE {bundle.mae_cm['avg']:.2f} cm  "
                f"acc {bundle.accuracy_pct:.2f}%"
            )
        return "\n".join(lines) + "\n"

    def to_kv(self) -> dict:
        pairs = {
            "folds": len(self.folds),
            "seed": self.seed,
            "regression_loss": self.regression_loss,
            "pretrained": int(self.pretrained),
        }
        for metric, name in (("mae_cm", "mae_cm"), ("pe_pct", "pe_pct")):
            for key in ("run", "walk", "avg"):
                mean, std = self.mean_std(metric, key)
                pairs[f"{name}.{key}.mean"] = f"{mean:.6f}"
                pairs[f"{name}.{key}.std"] = f"{std:.6f}"
        acc_mean, acc_std = self.accuracy_mean_std()
        pairs["accuracy_pct.mean"] = f"{acc_mean:.6f}"
        pairs["accuracy_pct.std"] = f"{acc_std:.6f}"
        for i, bundle in enumerate(self.folds):
            pairs[f"fold{i}.pe_pct.avg"] = f"{bundle.pe_pct['avg']:.6f}"
            pairs[f"fold{i}.mae_cm.avg"] = f"{bundle.mae_cm['avg']:.6f}"
            pairs[f"fold{i}.accuracy_pct"] = f"{bundle.accuracy_pct:.6f}"
            pairs[f"fold{i}.n"] = bundle.n
        return pairs


def subject_folds(subjects: list[str], k: int) -> list[list[str]]:
    """Round-robin partition of subjects into k disjoint test groups."""
    ordered = sorted(set(subjects))
    if len(ordered) < k:
        raise TrainSetupError(f"need at least {k} subjects, got {len(ordered)}")
    return [ordered[i::k] for i in range(k)]


@dataclass
class KFoldResult:
    report: FoldReport
    fold_results: list[DownstreamResult]
    pretext: PretextResult | None = None
    fold_curves: list = field(default_factory=list)


def kfold_evaluate(
    labeled: list[StrideSegment],
    unlabeled_segments,
    config: TrainConfig,
    model_config: ModelConfig = ModelConfig(),
) -> KFoldResult:
    """Subject-independent k-fold evaluation of the full pipeline.

    Folds partition subjects; the pretext model is trained once on the
    unlabeled segments and shared across folds. With ``config.pretrain``
    false the unlabeled set is ignored and every fold starts fresh.
    """
    test_groups = subject_folds([s.subject_id for s in labeled], config.folds)

    pretext = None
    if config.pretrain:
        pairs = make_pretext_set(list(unlabeled_segments), seed=derived_seed(config.seed, "pretext-aug"))
        pretext = train_pretext(pairs, config, model_config)

    fold_results = []
    bundles = []
    for f, test_subjects in enumerate(test_groups):
        test_set = [s for s in labeled if s.subject_id in test_subjects]
        train_set = [s for s in labeled if s.subject_id not in test_subjects]
        assert not {s.subject_id for s in train_set} & {s.subject_id for s in test_set}
        fold_config = config.with_seed(derived_seed(config.seed, "fold", f))
        result = train_downstream(
            train_set,
            fold_config,
            model_config,
            pretrained=pretext.params if pretext is not None else None,
        )
        fold_results.append(result)
        bundles.append(evaluate_segments(result.params, test_set))

    report = FoldReport(
        folds=bundles,
        fold_test_subjects=test_groups,
        seed=config.seed,
        regression_loss=config.regression_loss,
        pretrained=config.pretrain,
    )
    return KFoldResult(
        report=report,
        fold_results=fold_results,
        pretext=pretext,
        fold_curves=[r.curve for r in fold_results],
    )


@dataclass
class DistanceResult:
    predicted_m: float
    n_strides: int
    lengths_cm: np.ndarray
    classes: np.ndarray
    truth_m: float | None = None

    @property
    def pe_pct(self) -> float | None:
        if self.truth_m is None:
            return None
        return float(100.0 * abs(self.predicted_m - self.truth_m) / self.truth_m)


def total_distance(
    rec: RawRecording,
    params: ModelParams,
    factor: int = DEFAULT_DOWNSAMPLE,
    boundaries=None,
    truth_m: float | None = None,
) -> DistanceResult:
    """Segment a recording, predict each stride, and sum the lengths."""
    segments, _ = segments_from_recording(rec, factor, boundaries=boundaries)
    if not segments:
        raise ValueError("zero strides detected in recording")
    lengths, classes = predict(params, segments)
    return DistanceResult(
        predicted_m=float(lengths.sum() / 100.0),
        n_strides=len(segments),
        lengths_cm=lengths,
        classes=classes,
        truth_m=truth_m,
    )
