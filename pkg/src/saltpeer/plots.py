"""Figure rendering for the report paths; PNGs land next to the CSVs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .simulator import MetricsSeries


def save_convergence_plot(metrics: MetricsSeries, path, title: str | None = None) -> None:
    """Neighbor counts over time: saturated-node count and average degree."""
    fig, ax_avg = plt.subplots(figsize=(8, 4.5))
    ax_cnt = ax_avg.twinx()
    ax_cnt.plot(metrics.ticks, metrics.nodes_with_2k, color="tab:blue", lw=0.8,
                label=f"nodes with {2 * metrics.k} neighbors")
    ax_avg.plot(metrics.ticks, metrics.avg_neighbors, color="tab:red", lw=1.2,
                label="average neighbors")
    ax_avg.set_xlabel("tick")
    ax_avg.set_ylabel("average neighbors", color="tab:red")
    ax_cnt.set_ylabel("saturated nodes", color="tab:blue")
    ax_avg.set_ylim(0, 2 * metrics.k * 1.05)
    ax_cnt.set_ylim(0, metrics.n_nodes * 1.05)
    if title:
        ax_avg.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_cdf_plot(rows, path, xlabel: str, title: str | None = None) -> None:
    """Empirical CDF with its two analytic reference curves.

    ``rows`` are (score, empirical, analytic_L_eq_k, analytic_L_eq_4k).
    """
    data = np.asarray(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(data[:, 0], data[:, 1], color="black", lw=1.5, label="empirical")
    ax.plot(data[:, 0], data[:, 2], color="tab:orange", ls="--", label="analytic, L = k")
    ax.plot(data[:, 0], data[:, 3], color="tab:green", ls="--", label="analytic, L = 4k")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower right")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_takeover_plot(rows, path, title: str | None = None) -> None:
    """Monte-Carlo estimates with error bars against the closed forms.

    ``rows`` are dicts with n_attackers, honest_requests, mc_estimate,
    std_err, closed_form.
    """
    fig, ax = plt.subplots(figsize=(7, 4.5))
    by_requests: dict[int, list] = {}
    for row in rows:
        by_requests.setdefault(row["honest_requests"], []).append(row)
    for requests, group in sorted(by_requests.items()):
        group.sort(key=lambda r: r["n_attackers"])
        xs = [r["n_attackers"] for r in group]
        ax.errorbar(
            xs,
            [r["mc_estimate"] for r in group],
            yerr=[3 * r["std_err"] for r in group],
            fmt="o",
            ms=4,
            capsize=3,
            label=f"MC, L = {requests}",
        )
        ax.plot(xs, [r["closed_form"] for r in group], lw=1, ls="--", color="gray")
    ax.set_xlabel("attacker identities")
    ax.set_ylabel("takeover probability")
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_curve_plot(xs, ys, path, xlabel: str, ylabel: str, title: str | None = None) -> None:
    """Plain one-dimensional curve for tabulated closed forms."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(xs, ys, lw=1.5)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
