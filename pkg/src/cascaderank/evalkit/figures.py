"""Figure rendering for reports: metric bars, comparison deltas, and the
latency bucket histogram. Files only, no interactive backends."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from ..cascade.latency import BUCKET_LABELS
from ..errors import DataError


def _save(fig, path) -> None:
    fig.tight_layout()
    # drop the Software text chunk so identical runs give identical bytes
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def metric_bars(report, path) -> None:
    """Horizontal bars of every defined metric in one report."""
    metrics = {k: v for k, v in report.flat_metrics().items() if v is not None}
    if not metrics:
        raise DataError("report has no defined metrics to plot")
    names = list(metrics)
    values = [metrics[n] for n in names]
    fig, ax = plt.subplots(figsize=(7, 0.35 * len(names) + 1.2))
    ax.barh(np.arange(len(names)), values, color="#4878d0")
    ax.set_yticks(np.arange(len(names)), names, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("value")
    ax.set_title(report.name)
    _save(fig, path)


def comparison_bars(table: dict, title: str, path) -> None:
    """Relative deltas vs the baseline; undefined entries are skipped."""
    defined = {k: v for k, v in table.items() if not isinstance(v, str)}
    if not defined:
        raise DataError("comparison has no defined deltas to plot")
    names = list(defined)
    values = [100.0 * defined[n] for n in names]
    colors = ["#2e7d32" if v >= 0 else "#c62828" for v in values]
    fig, ax = plt.subplots(figsize=(7, 0.35 * len(names) + 1.2))
    ax.barh(np.arange(len(names)), values, color=colors)
    ax.axvline(0.0, color="black", linewidth=0.8)
    ax.set_yticks(np.arange(len(names)), names, fontsize=8)
    ax.invert_yaxis()
    ax.set_xlabel("relative change vs baseline (%)")
    ax.set_title(title)
    _save(fig, path)


def latency_buckets(shares_by_name: dict, path, title: str = "simulated latency buckets") -> None:
    """Grouped bars: percent of queries per latency bucket, one group of bars
    per configuration (e.g. rule stage vs trained stage, plus references)."""
    if not shares_by_name:
        raise DataError("no latency shares to plot")
    width = 0.8 / len(shares_by_name)
    x = np.arange(len(BUCKET_LABELS))
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, (name, shares) in enumerate(shares_by_name.items()):
        vals = [shares.get(label, 0.0) for label in BUCKET_LABELS]
        ax.bar(x + i * width, vals, width=width, label=name)
    ax.set_xticks(x + 0.4 - width / 2, BUCKET_LABELS)
    ax.set_ylabel("% of queries")
    ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, path)


def loss_curves(curves_by_name: dict, path, title: str = "training loss") -> None:
    if not curves_by_name:
        raise DataError("no curves to plot")
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, curve in curves_by_name.items():
        ax.plot(np.arange(1, len(curve) + 1), curve, label=name)
    ax.set_xlabel("round")
    ax.set_ylabel("loss")
    ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, path)
