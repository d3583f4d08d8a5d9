"""Figure rendering for experiment outputs.

Consumes the delimited trial output and writes matplotlib figures next to
it.  Kept separate from the experiment drivers so headless runs never pull
in a plotting backend.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .evalkit import TrialResult, improvement_table, summarize
from .imaging import image_mse, image_ssim

METHOD_COLORS = {"cpn": "#1f77b4", "maml": "#ff7f0e", "pts": "#2ca02c", "rnd": "#7f7f7f"}


def _color(method: str) -> str:
    return METHOD_COLORS.get(method, "#9467bd")


def _gm_grouped_bars(ax, groups: dict[str, dict[str, float | None]], title: str):
    methods = sorted({m for row in groups.values() for m in row})
    xs = np.arange(len(groups))
    width = 0.8 / max(len(methods), 1)
    for i, method in enumerate(methods):
        vals = [groups[g].get(method) or math.nan for g in groups]
        ax.bar(xs + i * width, vals, width, label=method, color=_color(method))
    ax.axhline(1.0, color="black", linewidth=0.8, linestyle="--")
    ax.set_xticks(xs + 0.4 - width / 2)
    ax.set_xticklabels(list(groups), rotation=30, ha="right", fontsize=8)
    ax.set_yscale("log")
    ax.set_ylabel("loss ratio vs random init (geomean)")
    ax.set_title(title)
    ax.legend(fontsize=8)


def render_data_efficiency_report(results: list[TrialResult], out_dir,
                                  prefix: str = "data_efficiency") -> list[Path]:
    """Improvement bar charts (by size, by program) and the ratio distribution."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = improvement_table(results)
    summary = summarize(cells)
    paths = []

    fig, axes = plt.subplots(1, 2, figsize=(11, 4.2))
    _gm_grouped_bars(axes[0], summary["by_size"], "grouped by dataset size")
    by_program = summary["by_program"]
    if len(by_program) > 12:  # keep program charts readable on large sweeps
        by_program = dict(list(by_program.items())[:12])
    _gm_grouped_bars(axes[1], by_program, "grouped by program")
    fig.tight_layout()
    p = out_dir / f"{prefix}_improvements.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(6, 4.2))
    for method in sorted({c.method for c in cells}):
        ratios = sorted(c.ratio for c in cells
                        if c.method == method and math.isfinite(c.ratio) and c.ratio > 0)
        if not ratios:
            continue
        pct = np.linspace(0, 100, len(ratios))
        ax.plot(pct, ratios, label=method, color=_color(method))
    ax.axhline(1.0, color="black", linewidth=0.8, linestyle="--")
    ax.set_yscale("log")
    ax.set_xlabel("percentile of configurations")
    ax.set_ylabel("loss ratio vs random init")
    ax.set_title("improvement distribution")
    ax.legend(fontsize=8)
    fig.tight_layout()
    p = out_dir / f"{prefix}_percentiles.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    paths.append(p)
    return paths


def render_training_time_report(results: list[TrialResult], out_dir,
                                prefix: str = "training_time",
                                cap: int = 15_000) -> list[Path]:
    """Cumulative finished-programs curve per initialization method."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    methods = sorted({r.method for r in results})
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for method in methods:
        per_program: dict[str, list[int]] = {}
        for r in results:
            if r.method == method and r.finish_epoch is not None:
                per_program.setdefault(r.program, []).append(r.finish_epoch)
        finishes = sorted(float(np.mean(v)) for v in per_program.values())
        if not finishes:
            continue
        ys = np.arange(1, len(finishes) + 1) / len(finishes) * 100.0
        ax.step([0] + finishes, np.concatenate([[0.0], ys]), where="post",
                label=method, color=_color(method))
    ax.set_xlim(0, cap)
    ax.set_xlabel("epoch")
    ax.set_ylabel("% programs finished")
    ax.set_title("epochs to reach the random-init target loss")
    ax.legend(fontsize=8)
    fig.tight_layout()
    p = Path(out_dir) / f"{prefix}_finish_curve.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    return [p]


def render_quantize_report(original: np.ndarray, variants: dict[str, np.ndarray],
                           out_path) -> Path:
    """Side-by-side panel: original image plus each quantized variant with
    MSE/SSIM against the first variant as the reference."""
    labels = list(variants)
    ref = variants[labels[0]]
    n = 1 + len(labels)
    fig, axes = plt.subplots(1, n, figsize=(3 * n, 3.4))
    axes = np.atleast_1d(axes)
    axes[0].imshow(original)
    axes[0].set_title("original", fontsize=9)
    for ax, label in zip(axes[1:], labels):
        img = variants[label]
        ax.imshow(img)
        if label == labels[0]:
            ax.set_title(f"{label} (reference)", fontsize=9)
        else:
            ax.set_title(f"{label}\nMSE {image_mse(ref, img):.1f}  "
                         f"SSIM {image_ssim(ref, img):.3f}", fontsize=9)
    for ax in axes:
        ax.set_axis_off()
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
