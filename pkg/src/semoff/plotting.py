"""Figure rendering for the report paths (run, compare, sweep).

Figures are written next to the delimited output; callers can switch them
off with the CLI --no-plots flag.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_run_figure(lts_records, sts_records, path: str) -> str:
    fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=False)
    idx = [r.lts_index for r in lts_records]
    axes[0].plot(idx, [r.utility for r in lts_records], "o-", label="utility G")
    axes[0].plot(idx, [r.avg_utility for r in lts_records], "s--", label="running mean")
    axes[0].set_xlabel("long slot")
    axes[0].set_ylabel("utility")
    axes[0].legend()
    axes[0].grid(alpha=0.3)

    t = np.arange(len(sts_records))
    axes[1].semilogy(t, [max(r.offloading_bits, 1e-3) for r in sts_records], label="offloading [bits]")
    axes[1].semilogy(t, [max(r.bus_bits, 1e-3) for r in sts_records], label="bus [bits]")
    axes[1].semilogy(t, [max(r.processing_gc, 1e-6) for r in sts_records], label="processing [Gc]")
    axes[1].set_xlabel("short slot")
    axes[1].set_ylabel("backlog")
    axes[1].legend()
    axes[1].grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_compare_figure(variants: dict[str, list[float]], path: str) -> str:
    """Mean final utility per strategy with per-seed scatter."""
    fig, ax = plt.subplots(figsize=(6, 4))
    names = list(variants)
    means = [float(np.mean(variants[n])) for n in names]
    ax.bar(names, means, alpha=0.6)
    for i, n in enumerate(names):
        vals = variants[n]
        ax.plot([i] * len(vals), vals, "k.", alpha=0.6)
    ax.set_ylabel("mean utility over long slots")
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_sweep_figure(values, series: dict[float, list[float]], axis_name: str,
                      path: str) -> str:
    """Mean and spread of the final average utility against the swept axis."""
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = list(values)
    means = [float(np.mean(series[v])) for v in xs]
    stds = [float(np.std(series[v])) for v in xs]
    ax.errorbar(range(len(xs)), means, yerr=stds, fmt="o-", capsize=4)
    ax.set_xticks(range(len(xs)))
    ax.set_xticklabels([f"{v:g}" for v in xs])
    ax.set_xlabel(axis_name)
    ax.set_ylabel("mean utility")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
