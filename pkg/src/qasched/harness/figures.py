"""Matplotlib rendering of report data to PNG files.

Figures are a convenience layer on top of the delimited outputs: every
quantity plotted here is also emitted as CSV/JSON by the report path.
Savefig strips the writer metadata so reruns stay byte-identical.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_SAVE_KW = {"dpi": 110, "metadata": {"Software": None}}


def histogram_figure(hist, path, xlabel: str, title: str | None = None) -> None:
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    widths = hist.bin_edges[1:] - hist.bin_edges[:-1]
    ax.bar(hist.bin_edges[:-1], hist.counts, width=widths, align="edge",
           color="#4878a8", edgecolor="white", linewidth=0.4)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("instances")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def overlay_histogram_figure(hists: dict, path, xlabel: str,
                             title: str | None = None) -> None:
    """Step-outline overlay of several histograms sharing an x quantity."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for label in sorted(hists):
        hist = hists[label]
        ax.stairs(hist.counts, hist.bin_edges, label=label, linewidth=1.4)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("instances")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def schedule_overlay_figure(schedules: dict, path, title: str | None = None) -> None:
    """s(t) curves for competing schedules of one instance."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for label in sorted(schedules):
        sched = schedules[label]
        ax.plot(sched.times, sched.samples, label=label, linewidth=1.2)
    ax.set_xlabel("t  [1/J0]")
    ax.set_ylabel("s")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def trace_figure(traces: dict, path, title: str | None = None) -> None:
    """Ground-manifold population along the anneal, one curve per schedule.

    traces maps label -> (times, ground_prob_trace, gap_trace); the first
    entry's gap trace is drawn on a twin axis (all schedules of one instance
    share the spectrum as a function of s, not of t, so only a reference
    curve is shown).
    """
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for label in sorted(traces):
        times, probs, _ = traces[label]
        ax.plot(times, probs, label=label, linewidth=1.2)
    ax.set_xlabel("t  [1/J0]")
    ax.set_ylabel("ground-manifold population")
    ax.set_ylim(-0.02, 1.05)
    ax.legend(fontsize=8, loc="lower left")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def history_figure(history, path, title: str | None = None) -> None:
    """Training and validation MSE per epoch on a log scale."""
    epochs = [row.epoch for row in history]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.semilogy(epochs, [row.train_mse for row in history], label="train MSE")
    ax.semilogy(epochs, [row.val_mse for row in history], label="validation MSE")
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
