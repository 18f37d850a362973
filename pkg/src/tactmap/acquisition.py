"""Next-press selection: exploration, mapping and uniform-random policies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from tactmap.domain import Workspace
from tactmap.sampling import augmented_discrepancy, to_unit

PHASES = ("exploration", "mapping", "random")


@dataclass(frozen=True)
class CandidateGrid:
    """Press candidates every ``pitch_mm`` including both workspace edges.

    Points are ordered by y, then x, so the first minimum of any score
    array is the lexicographic tie-break.
    """

    workspace: Workspace = field(default_factory=Workspace)
    pitch_mm: float = 2.5

    def __post_init__(self):
        if not self.pitch_mm > 0:
            raise ValueError("candidate pitch must be positive")
        xs = np.arange(0.0, self.workspace.width_mm + 1e-9, self.pitch_mm)
        ys = np.arange(0.0, self.workspace.height_mm + 1e-9, self.pitch_mm)
        gx, gy = np.meshgrid(xs, ys)
        object.__setattr__(self, "points", np.column_stack([gx.ravel(), gy.ravel()]))

    def __len__(self) -> int:
        return len(self.points)

    def index_of(self, points, atol: float = 1e-9) -> np.ndarray:
        """Grid index of each point, or -1 for points off the grid."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        col = np.rint(points[:, 0] / self.pitch_mm).astype(int)
        row = np.rint(points[:, 1] / self.pitch_mm).astype(int)
        nx = int(round(self.workspace.width_mm // self.pitch_mm)) + 1
        idx = row * nx + col
        ok = (idx >= 0) & (idx < len(self.points)) & (col >= 0) & (col < nx)
        idx = np.where(ok, idx, -1)
        match = np.zeros(len(points), dtype=bool)
        match[ok] = np.all(np.abs(self.points[idx[ok]] - points[ok]) <= atol, axis=1)
        return np.where(match, idx, -1)


@dataclass(frozen=True)
class AcquisitionConfig:
    lambda_weight: float = 0.5
    phase: str = "exploration"
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.lambda_weight <= 1.0:
            raise ValueError("lambda_weight must lie in [0, 1]")
        if self.phase not in PHASES:
            raise ValueError(f"phase must be one of {PHASES}")


def _span01(v: np.ndarray) -> np.ndarray:
    lo, hi = v.min(), v.max()
    return (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)


def _discrepancy_term(history, grid: CandidateGrid) -> np.ndarray:
    """Augmented-set discrepancy rescaled to [0, 1] across the candidates.

    Raw discrepancies of neighbouring candidates differ by ~1e-3, far too
    little to compete with the [0, 1] variance or probability term, so the
    most space-filling candidate maps to 0 and the most clumping one to 1.
    """
    return _span01(augmented_discrepancy(to_unit(history, grid.workspace), to_unit(grid.points, grid.workspace)))


def _pick(grid: CandidateGrid, scores: np.ndarray) -> np.ndarray:
    # grid order is (y, x) ascending, so argmin's first hit is the tie-break
    return grid.points[int(np.argmin(scores))].copy()


def exploration_scores(sigma2, history, grid: CandidateGrid, cfg: AcquisitionConfig) -> np.ndarray:
    sigma2 = np.asarray(sigma2, dtype=float).ravel()
    top = sigma2.max()
    unc = 1.0 - sigma2 / top if top > 0 else np.zeros_like(sigma2)
    lam = cfg.lambda_weight
    disc = _discrepancy_term(history, grid) if lam < 1.0 else 0.0
    return lam * unc + (1.0 - lam) * disc


def mapping_scores(prob, history, grid: CandidateGrid, cfg: AcquisitionConfig) -> np.ndarray:
    # the probit correction keeps prob inside a narrow band around 0.5, so it is
    # stretched to [0, 1] like the other two terms; argmax prob is unchanged
    prob = np.asarray(prob, dtype=float).ravel()
    lam = cfg.lambda_weight
    disc = _discrepancy_term(history, grid) if lam < 1.0 else 0.0
    return lam * (1.0 - _span01(prob)) + (1.0 - lam) * disc


def next_sample_exploration(sigma2, history, grid: CandidateGrid, cfg: AcquisitionConfig) -> np.ndarray:
    """Trade normalized predictive variance against the discrepancy of the augmented sample set."""
    return _pick(grid, exploration_scores(sigma2, history, grid, cfg))


def next_sample_mapping(prob, history, grid: CandidateGrid, cfg: AcquisitionConfig) -> np.ndarray:
    """Prefer likely-occupied candidates, tempered by the discrepancy of the augmented sample set."""
    return _pick(grid, mapping_scores(prob, history, grid, cfg))


def next_sample_random(grid: CandidateGrid, history, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw over candidates that have not been pressed yet."""
    taken = grid.index_of(history) if len(history) else np.zeros(0, dtype=int)
    free = np.setdiff1d(np.arange(len(grid)), taken[taken >= 0])
    if len(free) == 0:
        raise RuntimeError("every candidate location has already been sampled")
    return grid.points[free[rng.integers(len(free))]].copy()
