"""PNG renderings of a finished run (headless backend)."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .geometry import subdomain_grid


def _scatter_field(path, pts, values, title, cmap):
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    order = np.argsort(values) if np.all(np.isfinite(values)) else slice(None)
    sc = ax.scatter(pts[order, 0], pts[order, 1], c=values[order], s=4.0,
                    cmap=cmap, linewidths=0)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(title)
    fig.colorbar(sc, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_all(out_dir, partition, problem, trainers, history, resolution=101):
    """Solution/error heatmaps plus Robin-weight and convergence traces.

    Returns the list of written paths.  History-based figures are skipped
    when the history is empty (e.g. a run that diverged immediately).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    pts_list, pred_list, err_list = [], [], []
    for sub in partition.subdomains:
        pts = subdomain_grid(sub, resolution)
        pred = trainers[sub.id].predict(pts)
        err = np.abs(pred - problem.exact(pts))
        pts_list.append(pts)
        pred_list.append(pred)
        err_list.append(err)
    pts = np.concatenate(pts_list)
    written.append(_scatter_field(out / "solution.png", pts, np.concatenate(pred_list),
                                  "predicted solution", "viridis"))
    written.append(_scatter_field(out / "error.png", pts, np.concatenate(err_list),
                                  "absolute error", "magma"))

    if history:
        iters = [rec.iteration for rec in history]
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for sid in sorted(history[0].alpha):
            series = [rec.alpha[sid] for rec in history]
            if np.all(np.isnan(series)):
                continue
            ax.plot(iters, series, marker="o", markersize=3, label=f"subdomain {sid}")
        ax.set_xlabel("outer iteration")
        ax.set_ylabel("Robin weight")
        ax.set_ylim(0.0, 1.0)
        ax.set_title("interface weighting per subdomain")
        if ax.get_legend_handles_labels()[0]:
            ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(out / "alpha_history.png", dpi=120)
        plt.close(fig)
        written.append(out / "alpha_history.png")

        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        worst = [max(rec.rel_l2.values()) for rec in history]
        ax.semilogy(iters, worst, marker="o", markersize=3, label="max rel L2 error")
        if history[0].mismatch:
            gap = [float(np.mean(list(rec.mismatch.values()))) for rec in history]
            ax.semilogy(iters, gap, marker="s", markersize=3, label="mean interface gap")
        ax.set_xlabel("outer iteration")
        ax.set_title("convergence")
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(out / "convergence.png", dpi=120)
        plt.close(fig)
        written.append(out / "convergence.png")

    return written
