"""Height-grid fusion and evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tactmap.domain import GroundTruth, Raster

PROB_CLAMP = 1e-12


@dataclass
class HeightGrid:
    """Reconstructed topography; mutated in place by :func:`fuse`."""

    cells: np.ndarray
    observed: np.ndarray
    raster: Raster

    @classmethod
    def empty(cls, raster: Raster) -> HeightGrid:
        shape = raster.shape
        return cls(np.zeros(shape), np.zeros(shape, dtype=bool), raster)


@dataclass(frozen=True)
class MetricsRow:
    samples_after_prior: int
    ce_loss: float
    mse_loss: float
    max_sigma2: float
    mean_sigma2: float


def _footprint_slices(raster: Raster, center, side_mm: float):
    half = side_mm / 2.0
    xs, ys = raster.xs, raster.ys
    c0, c1 = np.searchsorted(xs, center[0] - half, "left"), np.searchsorted(xs, center[0] + half, "right")
    r0, r1 = np.searchsorted(ys, center[1] - half, "left"), np.searchsorted(ys, center[1] + half, "right")
    return slice(r0, r1), slice(c0, c1)


def fuse(grid: HeightGrid, cloud, center=None, footprint_mm: float | None = None) -> HeightGrid:
    """Max-combine a press's point cloud into ``grid``.

    When the press ``center`` and ``footprint_mm`` are given, every cell
    under the footprint is marked observed, deformed or not.
    """
    cloud = np.asarray(cloud, dtype=float).reshape(-1, 3)
    if center is not None and footprint_mm is not None:
        grid.observed[_footprint_slices(grid.raster, center, footprint_mm)] = True
    if len(cloud):
        row, col = grid.raster.cell_index(cloud[:, :2])
        keep = row >= 0
        np.maximum.at(grid.cells, (row[keep], col[keep]), cloud[keep, 2])
        grid.observed[row[keep], col[keep]] = True
    return grid


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"raster mismatch: {a.shape} vs {b.shape}")


def cross_entropy(field, truth: GroundTruth) -> float:
    """Mean binary cross-entropy of a presence-probability raster against the occupancy raster."""
    prob = np.asarray(getattr(field, "prob", field), dtype=float)
    occ = np.asarray(truth.occupancy, dtype=bool)
    _same_shape(prob, occ)
    if prob.size == 0:
        return 0.0
    p = np.clip(prob, PROB_CLAMP, 1.0 - PROB_CLAMP)
    losses = np.where(occ, -np.log(p), -np.log1p(-p))
    lo, hi = losses.min(), losses.max()
    if lo == hi:
        # summation round-off would otherwise perturb the mean of a constant
        return float(lo)
    return float(losses.mean())


def mse(grid, truth: GroundTruth) -> float:
    z_hat = np.asarray(getattr(grid, "cells", grid), dtype=float)
    z = np.asarray(truth.height, dtype=float)
    _same_shape(z_hat, z)
    if z.size == 0:
        return 0.0
    return float(np.mean((z - z_hat) ** 2))


def uncertainty_stats(field) -> tuple[float, float]:
    sigma2 = np.asarray(getattr(field, "sigma2", field), dtype=float)
    return float(sigma2.max()), float(sigma2.mean())
