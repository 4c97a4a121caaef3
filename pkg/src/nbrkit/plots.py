"""Matplotlib renderings of the delimited report outputs.

Each report command can drop a PNG next to its CSV/JSON output: fairness
bins as recall bars with a user-count line on a twin axis, the metric
table as grouped bars, and the tuning log as a trial scatter with its
running best.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .fairness import FairnessBins
from .metrics import MetricsReport
from .tuning import TrialResult

_AXIS_TITLES = {
    "basket_size": "average basket size",
    "popular_share": "popular items in past baskets (%)",
    "novelty_share": "unseen items in test basket (%)",
}


def plot_fairness_bins(bins: FairnessBins, path: str | Path) -> Path:
    """Recall@10 bars (left axis) and user counts (right axis) per bin."""
    labels = [label for label, _, _ in bins.bins]
    recalls = [recall if recall is not None else 0.0 for _, recall, _ in bins.bins]
    counts = [count for _, _, count in bins.bins]

    fig, ax = plt.subplots(figsize=(max(6.0, 0.22 * len(labels)), 4.0))
    x = range(len(labels))
    ax.bar(x, recalls, color="gold", edgecolor="goldenrod", label="Recall@10")
    ax.set_ylabel("Recall@10")
    ax.set_xlabel(_AXIS_TITLES.get(bins.axis, bins.axis))
    step = max(1, len(labels) // 25)
    ax.set_xticks(list(x)[::step])
    ax.set_xticklabels(labels[::step], rotation=60, ha="right", fontsize=7)

    twin = ax.twinx()
    twin.plot(x, counts, color="tab:blue", marker=".", linewidth=1.2, label="users")
    twin.set_ylabel("users")

    ax.set_title(f"Recall@10 by {_AXIS_TITLES.get(bins.axis, bins.axis)}")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_metrics_report(report: MetricsReport, path: str | Path) -> Path:
    """Grouped bars, one group per metric, one bar per K."""
    names = ["recall", "ndcg", "phr"]
    width = 0.8 / len(report.ks)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for j, k in enumerate(report.ks):
        values = [report.means[f"{name}@{k}"] for name in names]
        offsets = [i + j * width for i in range(len(names))]
        ax.bar(offsets, values, width=width, label=f"@{k}")
    ax.bar(
        [len(names) + 0.4 * (len(report.ks) - 1) * width],
        [report.means[f"mrr@{report.mrr_k}"]],
        width=width,
        color="gray",
        label=f"mrr@{report.mrr_k}",
    )
    ax.set_xticks([i + width * (len(report.ks) - 1) / 2 for i in range(len(names))] + [len(names)])
    ax.set_xticklabels(names + ["mrr"])
    ax.set_ylabel("mean over users")
    ax.set_title(f"{report.model or 'predictions'} ({report.n_users} users)")
    ax.legend()
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_trial_log(trials: list[TrialResult], path: str | Path) -> Path:
    """Validation recall per trial plus the running best."""
    xs = [t.trial for t in trials]
    ys = [t.recall_at_10 for t in trials]
    best = []
    top = float("-inf")
    for y in ys:
        top = max(top, y)
        best.append(top)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.scatter(xs, ys, s=12, color="tab:blue", alpha=0.6, label="trial")
    ax.plot(xs, best, color="tab:orange", linewidth=1.5, label="running best")
    ax.set_xlabel("trial")
    ax.set_ylabel("validation Recall@10")
    ax.set_title("hyperparameter search")
    ax.legend()
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
