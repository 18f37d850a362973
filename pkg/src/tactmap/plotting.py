"""Matplotlib figures for metric curves and map rasters.

Figures are built on the object API with an Agg canvas, so nothing here
touches pyplot's global state and no display is needed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

POLICY_COLORS = {"proposed": "tab:blue", "random": "tab:orange"}
METRIC_LABELS = {
    "ce": "cross-entropy loss",
    "mse": "height MSE (mm$^2$)",
    "max_var": "max predictive variance",
    "mean_var": "mean predictive variance",
}


def _new_figure(ncols: int = 1, width: float = 5.0, height: float = 3.4):
    fig = Figure(figsize=(width * ncols, height), layout="constrained")
    FigureCanvasAgg(fig)
    axes = fig.subplots(1, ncols, squeeze=False)[0]
    return fig, axes


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    return path


def _band(ax, x, mean, std, color, label, linestyle="-"):
    ax.plot(x, mean, color=color, linestyle=linestyle, label=label)
    ax.fill_between(x, mean - std, mean + std, color=color, alpha=0.2, linewidth=0)


def plot_metric(summary, metric: str, path, x_offset: int = 0, title: str | None = None) -> Path:
    """Mean of ``metric`` per policy with a one-std band, against samples after the prior."""
    fig, (ax,) = _new_figure()
    x = summary.sample_index - x_offset
    for policy in sorted(summary.n_runs):
        color = POLICY_COLORS.get(policy)
        _band(ax, x, summary.mean[(policy, metric)], summary.std[(policy, metric)], color,
              f"{policy} (n={summary.n_runs[policy]})")
    ax.set_xlabel("samples after prior" if not x_offset else "mapping samples")
    ax.set_ylabel(METRIC_LABELS.get(metric, metric))
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def plot_uncertainty(summary, path, title: str | None = None) -> Path:
    """Max variance dashed, mean variance solid, one color per policy."""
    fig, (ax,) = _new_figure()
    x = summary.sample_index
    for policy in sorted(summary.n_runs):
        color = POLICY_COLORS.get(policy)
        _band(ax, x, summary.mean[(policy, "max_var")], summary.std[(policy, "max_var")], color,
              f"{policy} max", linestyle="--")
        _band(ax, x, summary.mean[(policy, "mean_var")], summary.std[(policy, "mean_var")], color,
              f"{policy} mean")
    ax.set_xlabel("samples after prior")
    ax.set_ylabel("predictive variance of f")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(ncols=2, fontsize="small")
    return _save(fig, path)


def render_raster(values, raster, path, title: str = "", cmap: str = "viridis", vmin=None, vmax=None,
                  samples=None, label: str = "") -> Path:
    """Heat map of a workspace raster in millimetres, optionally with press locations overlaid."""
    values = np.asarray(values, dtype=float)
    ws = raster.workspace
    fig, (ax,) = _new_figure(width=9.0, height=3.6)
    im = ax.imshow(values, origin="lower", extent=(0.0, ws.width_mm, 0.0, ws.height_mm),
                   cmap=cmap, vmin=vmin, vmax=vmax, interpolation="nearest")
    if samples is not None and len(samples):
        pts = np.asarray(samples, dtype=float).reshape(-1, 2)
        ax.plot(pts[:, 0], pts[:, 1], "r.", markersize=4)
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm)")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, label=label, shrink=0.8)
    return _save(fig, path)


def render_run(result, outdir, stem: str | None = None) -> list[Path]:
    """Probability, variance, height and ground-truth maps of one finished run."""
    outdir = Path(outdir)
    stem = stem or f"{result.policy}_seed{result.seed}"
    raster = result.truth.raster
    locs = result.locations
    return [
        render_raster(result.field.prob, raster, outdir / f"{stem}_prob.png", "presence probability",
                      cmap="Greys", vmin=0.0, vmax=1.0, samples=locs, label="p(y=1)"),
        render_raster(result.field.sigma2, raster, outdir / f"{stem}_var.png", "latent variance",
                      cmap="magma", samples=locs, label="variance"),
        render_raster(result.height.cells, raster, outdir / f"{stem}_height.png", "reconstructed height",
                      cmap="viridis", label="mm"),
        render_raster(result.truth.height, raster, outdir / f"{stem}_truth.png", "ground-truth height",
                      cmap="viridis", label="mm"),
    ]
