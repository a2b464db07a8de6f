"""Report rendering: delimited files plus matplotlib figures.

Every report directory gets the same trio: a human-readable text table, a
machine-readable key-value file, and CSV/PNG pairs so each delimited
artifact has a rendered figure next to it.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .evaluation import HIST_BIN_PCT, HIST_MAX_PCT, DistanceResult, FoldReport
from .training import EpochRecord
from .util import write_kv

FIG_DPI = 120


def write_curve_csv(path, curve: list[EpochRecord]) -> None:
    """Loss curve as ``epoch,train_loss,val_loss,lr`` (val blank when absent)."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "lr"])
        for row in curve:
            val = "" if row.val_loss is None else f"{row.val_loss:.8f}"
            writer.writerow([row.epoch, f"{row.train_loss:.8f}", val, f"{row.lr:.8f}"])


def read_curve_csv(path) -> list[EpochRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(
                EpochRecord(
                    epoch=int(row["epoch"]),
                    train_loss=float(row["train_loss"]),
                    val_loss=float(row["val_loss"]) if row["val_loss"] else None,
                    lr=float(row["lr"]),
                )
            )
    return records


def plot_curves(path, curves: dict[str, list[EpochRecord]], title: str) -> None:
    """Training and validation losses for one or more runs, log-scale y."""
    fig, ax = plt.subplots(figsize=(7, 4.2))
    for label, curve in curves.items():
        epochs = [r.epoch for r in curve]
        ax.plot(epochs, [r.train_loss for r in curve], label=f"{label} train")
        if any(r.val_loss is not None for r in curve):
            ax.plot(
                epochs,
                [r.val_loss for r in curve],
                linestyle="--",
                label=f"{label} val",
            )
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)


def write_histogram_csv(path, counts: np.ndarray, overflow: int) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo_pct", "bin_hi_pct", "count"])
        for i, count in enumerate(counts):
            writer.writerow([f"{i * HIST_BIN_PCT:.0f}", f"{(i + 1) * HIST_BIN_PCT:.0f}", int(count)])
        writer.writerow([f"{HIST_MAX_PCT:.0f}", "inf", int(overflow)])


def plot_histogram(path, counts: np.ndarray, overflow: int, title: str) -> None:
    """Per-stride percentage-error histogram, 1% bins."""
    fig, ax = plt.subplots(figsize=(7, 4.2))
    edges = np.arange(len(counts))
    ax.bar(edges + 0.5, counts, width=0.92, color="#3467a8")
    if overflow:
        ax.bar([len(counts) + 0.5], [overflow], width=0.92, color="#a83434",
               label=f">= {HIST_MAX_PCT:.0f}%: {overflow}")
        ax.legend(fontsize=8)
    ax.set_xlabel("per-stride percentage error (%)")
    ax.set_ylabel("strides")
    ax.set_title(title)
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)


def write_fold_report(report_dir, report: FoldReport, fold_curves=None, pretext_curve=None) -> list[Path]:
    """Emit the full evaluation report bundle; returns written paths."""
    out = Path(report_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    text_path = out / "report.txt"
    text_path.write_text(report.to_text(), encoding="utf-8")
    written.append(text_path)

    kv_path = out / "report.kv"
    write_kv(kv_path, report.to_kv())
    written.append(kv_path)

    hist_csv = out / "pe_histogram.csv"
    write_histogram_csv(hist_csv, report.hist_counts, report.hist_overflow)
    written.append(hist_csv)
    hist_png = out / "pe_histogram.png"
    plot_histogram(hist_png, report.hist_counts, report.hist_overflow,
                   "Percentage error distribution (all folds)")
    written.append(hist_png)

    if fold_curves:
        for i, curve in enumerate(fold_curves):
            curve_path = out / f"curve_fold{i}.csv"
            write_curve_csv(curve_path, curve)
            written.append(curve_path)
        curves_png = out / "loss_curves.png"
        plot_curves(curves_png, {f"fold {i}": c for i, c in enumerate(fold_curves)},
                    "Downstream training")
        written.append(curves_png)
    if pretext_curve:
        pre_csv = out / "curve_pretext.csv"
        write_curve_csv(pre_csv, pretext_curve)
        written.append(pre_csv)
        pre_png = out / "pretext_curve.png"
        plot_curves(pre_png, {"pretext": pretext_curve}, "Reconstruction pretraining")
        written.append(pre_png)
    return written


def write_distance_report(report_dir, result: DistanceResult, name: str = "distance") -> list[Path]:
    """Distance summary (kv), per-stride lengths (csv) and a figure."""
    out = Path(report_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    pairs = {
        "predicted_m": f"{result.predicted_m:.4f}",
        "n_strides": result.n_strides,
    }
    if result.truth_m is not None:
        pairs["truth_m"] = f"{result.truth_m:.4f}"
        pairs["percentage_error"] = f"{result.pe_pct:.4f}"
    kv_path = out / f"{name}.kv"
    write_kv(kv_path, pairs)
    written.append(kv_path)

    csv_path = out / f"{name}_strides.csv"
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stride", "length_cm", "class_index"])
        for i, (length, cls) in enumerate(zip(result.lengths_cm, result.classes)):
            writer.writerow([i, f"{length:.3f}", int(cls)])
    written.append(csv_path)

    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(result.lengths_cm, marker=".", linestyle="-", linewidth=0.8)
    ax.set_xlabel("stride index")
    ax.set_ylabel("predicted length (cm)")
    title = f"total {result.predicted_m:.1f} m over {result.n_strides} strides"
    if result.truth_m is not None:
        title += f" (truth {result.truth_m:.1f} m, error {result.pe_pct:.2f}%)"
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    png_path = out / f"{name}_strides.png"
    fig.savefig(png_path, dpi=FIG_DPI)
    plt.close(fig)
    written.append(png_path)
    return written
