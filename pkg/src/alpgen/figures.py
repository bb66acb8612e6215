"""Matplotlib renderings saved next to the delimited report output."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .corpus import CorpusManifest
from .metrics import AggregateScore

_METRICS = ("em", "bleu", "leven")
_METRIC_LABELS = ("EM", "BLEU", "Leven")


def render_metric_bars(
    aggregates: Mapping[str, AggregateScore], path: str | Path
) -> Path:
    """Grouped bar chart of EM/BLEU/Leven per strategy, saved as PNG."""
    path = Path(path)
    labels = list(aggregates)
    width = 0.8 / len(_METRICS)
    fig, ax = plt.subplots(figsize=(max(6.0, 1.6 * len(labels)), 4.0))
    for m, (metric, metric_label) in enumerate(zip(_METRICS, _METRIC_LABELS)):
        xs = [i + (m - 1) * width for i in range(len(labels))]
        ys = [getattr(aggregates[label], metric) for label in labels]
        ax.bar(xs, ys, width=width, label=metric_label)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("Strategy comparison")
    ax.legend()
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_difficulty_histogram(manifest: CorpusManifest, path: str | Path) -> Path:
    """Histogram of mean difficulty scores, colored by band."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    by_band: dict[str, list[float]] = {}
    for ex in manifest:
        if ex.mean_score is None:
            continue
        key = ex.band.value if ex.band is not None else "unbanded"
        by_band.setdefault(key, []).append(ex.mean_score)
    if by_band:
        ax.hist(
            list(by_band.values()),
            bins=10,
            stacked=True,
            label=list(by_band),
        )
        ax.legend()
    ax.set_xlabel("mean difficulty score")
    ax.set_ylabel("examples")
    ax.set_title("Difficulty distribution")
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
