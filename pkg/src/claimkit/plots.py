"""Report figures: one PNG per view, written next to the delimited output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .report import ReportBundle


def _bar_group(ax, methods, series: dict[str, list], ylabel: str):
    x = np.arange(len(methods))
    width = 0.8 / max(1, len(series))
    for i, (name, values) in enumerate(series.items()):
        vals = [v if v is not None else 0.0 for v in values]
        ax.bar(x + i * width, vals, width, label=name)
    ax.set_xticks(x + width * (len(series) - 1) / 2)
    ax.set_xticklabels(methods, rotation=20, ha="right")
    ax.set_ylabel(ylabel)
    ax.legend()


def render_report_figures(bundle: ReportBundle, outdir: str | Path) -> list[Path]:
    """Write metric, accuracy, and correlation charts; returns created paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []
    methods = [r.method for r in bundle.reports]
    if not methods:
        return created

    fig, ax = plt.subplots(figsize=(7, 4))
    _bar_group(
        ax,
        methods,
        {
            "SARI": [r.sari_mean for r in bundle.reports],
            "GPT": [r.gpt_accuracy for r in bundle.reports],
            "Diff": [r.diff_mean for r in bundle.reports],
        },
        "score (percent)",
    )
    ax.set_title("Automatic metrics by method")
    fig.tight_layout()
    path = outdir / "metrics_by_method.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    created.append(path)

    with_human = [r for r in bundle.reports if r.correction_accuracy_mean is not None]
    if with_human:
        fig, ax = plt.subplots(figsize=(7, 4))
        names = [r.method for r in with_human]
        means = [r.correction_accuracy_mean for r in with_human]
        stds = [r.correction_accuracy_std or 0.0 for r in with_human]
        ax.bar(names, means, yerr=stds, capsize=4, color="#4878d0")
        ax.set_ylabel("correction accuracy (percent)")
        ax.set_ylim(0, 105)
        ax.set_title("Human correction accuracy by method")
        fig.tight_layout()
        path = outdir / "accuracy_by_method.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        created.append(path)

    with_corr = [r for r in bundle.reports if r.correlations]
    if with_corr:
        fig, ax = plt.subplots(figsize=(7, 4))
        metric_names = sorted({m for r in with_corr for m in r.correlations})
        _bar_group(
            ax,
            [r.method for r in with_corr],
            {
                m: [r.correlations.get(m) for r in with_corr]
                for m in metric_names
            },
            "Pearson r vs human accuracy",
        )
        ax.set_ylim(-1, 1)
        ax.axhline(0, color="black", linewidth=0.8)
        ax.set_title("Metric correlation with human accuracy")
        fig.tight_layout()
        path = outdir / "correlations.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        created.append(path)
    return created
