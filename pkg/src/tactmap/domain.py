"""Workspace geometry, bead layouts and ground-truth rasters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_HOLE_SHAPE = (34, 10)  # columns (x) x rows (y) of the perforated sheet


@dataclass(frozen=True)
class Workspace:
    width_mm: float = 300.0
    height_mm: float = 90.4

    def __post_init__(self):
        if not (self.width_mm > 0 and self.height_mm > 0):
            raise ValueError(f"workspace extents must be positive, got {self.width_mm} x {self.height_mm}")

    def contains(self, point, margin: float = 0.0) -> bool:
        x, y = float(point[0]), float(point[1])
        return (margin <= x <= self.width_mm - margin) and (margin <= y <= self.height_mm - margin)


@dataclass(frozen=True)
class Raster:
    """Regular evaluation raster over a workspace, sampled at cell centers.

    Arrays defined on the raster are indexed ``[row, col]`` with rows along y
    and columns along x, origin at the workspace corner (0, 0).
    """

    workspace: Workspace = field(default_factory=Workspace)
    pitch_mm: float = 0.5

    def __post_init__(self):
        if not self.pitch_mm > 0:
            raise ValueError("raster pitch must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        nx = math.ceil(self.workspace.width_mm / self.pitch_mm - 1e-9)
        ny = math.ceil(self.workspace.height_mm / self.pitch_mm - 1e-9)
        return ny, nx

    @property
    def xs(self) -> np.ndarray:
        return (np.arange(self.shape[1]) + 0.5) * self.pitch_mm

    @property
    def ys(self) -> np.ndarray:
        return (np.arange(self.shape[0]) + 0.5) * self.pitch_mm

    def points(self) -> np.ndarray:
        """All cell centers as an ``(ny * nx, 2)`` array in row-major order."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel()])

    def cell_index(self, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Row/column of the cell containing each point; points off the raster get -1."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        ny, nx = self.shape
        col = np.floor(xy[:, 0] / self.pitch_mm).astype(int)
        row = np.floor(xy[:, 1] / self.pitch_mm).astype(int)
        bad = (col < 0) | (col >= nx) | (row < 0) | (row >= ny)
        col[bad] = -1
        row[bad] = -1
        return row, col


@dataclass(frozen=True)
class BeadLayout:
    bead_centers: np.ndarray
    bead_radius_mm: float = 3.0
    grid_pitch_mm: float = 8.5

    def __post_init__(self):
        centers = np.asarray(self.bead_centers, dtype=float).reshape(-1, 2)
        centers.setflags(write=False)
        object.__setattr__(self, "bead_centers", centers)
        if self.bead_radius_mm <= 0:
            raise ValueError("bead radius must be positive")

    def __len__(self) -> int:
        return len(self.bead_centers)


@dataclass(frozen=True)
class TrainingSet:
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).reshape(-1, 2)
        Y = np.asarray(self.Y, dtype=float).ravel()
        if len(X) != len(Y):
            raise ValueError(f"X has {len(X)} rows but Y has {len(Y)} labels")
        if not np.all((Y == 0) | (Y == 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    def __len__(self) -> int:
        return len(self.Y)

    @classmethod
    def empty(cls) -> TrainingSet:
        return cls(np.zeros((0, 2)), np.zeros(0))

    def extended(self, points, labels) -> TrainingSet:
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        return TrainingSet(np.vstack([self.X, points]), np.concatenate([self.Y, np.asarray(labels, float)]))

    def flipped(self) -> TrainingSet:
        return TrainingSet(self.X, 1.0 - self.Y)

    @property
    def has_both_classes(self) -> bool:
        return bool(np.any(self.Y == 1) and np.any(self.Y == 0))


@dataclass(frozen=True)
class GroundTruth:
    occupancy: np.ndarray
    height: np.ndarray
    raster: Raster


@dataclass(frozen=True)
class SampleRecord:
    location: tuple[float, float]
    depth_image: object  # sensor.DepthImage; typed loosely to avoid an import cycle
    extracted_labels: list


def hole_grid(workspace: Workspace, pitch_mm: float = 8.5, shape=DEFAULT_HOLE_SHAPE) -> np.ndarray:
    """Centers of the perforated-sheet holes, centered in the workspace.

    Returns an array of shape ``(rows, cols, 2)``.
    """
    cols, rows = shape
    span_x = (cols - 1) * pitch_mm
    span_y = (rows - 1) * pitch_mm
    x0 = (workspace.width_mm - span_x) / 2.0
    y0 = (workspace.height_mm - span_y) / 2.0
    gx, gy = np.meshgrid(x0 + pitch_mm * np.arange(cols), y0 + pitch_mm * np.arange(rows))
    return np.stack([gx, gy], axis=-1)


_NEIGH4 = ((1, 0), (-1, 0), (0, 1), (0, -1))
_NEIGH8 = tuple((dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0))


def generate_layout(
    seed: int,
    n_clusters: int = 3,
    beads_per_cluster: int = 34,
    workspace: Workspace | None = None,
    bead_radius_mm: float = 3.0,
    grid_pitch_mm: float = 8.5,
    hole_shape=DEFAULT_HOLE_SHAPE,
    max_attempts: int = 200,
) -> BeadLayout:
    """Grow ``n_clusters`` random 4-connected blobs of beads on the hole grid.

    Clusters never touch each other (not even diagonally), so each one is a
    separate connected component of the occupied holes.
    """
    workspace = workspace or Workspace()
    if n_clusters < 1 or beads_per_cluster < 1:
        raise ValueError("need at least one cluster with at least one bead")
    holes = hole_grid(workspace, grid_pitch_mm, hole_shape)
    rows, cols = holes.shape[:2]
    inner = workspace.contains(holes[0, 0], bead_radius_mm) and workspace.contains(holes[-1, -1], bead_radius_mm)
    if not inner:
        raise ValueError("hole grid does not fit inside the workspace for this bead radius")
    if n_clusters * beads_per_cluster > rows * cols:
        raise ValueError(
            f"cannot place {n_clusters * beads_per_cluster} beads on a {cols}x{rows} hole grid"
        )

    rng = np.random.default_rng(seed)
    owner = -np.ones((rows, cols), dtype=int)

    def free(r, c, k):
        # a hole is usable by cluster k when empty and not adjacent to another cluster
        if not (0 <= r < rows and 0 <= c < cols) or owner[r, c] != -1:
            return False
        for dr, dc in _NEIGH8:
            rr, cc = r + dr, c + dc
            if 0 <= rr < rows and 0 <= cc < cols and owner[rr, cc] not in (-1, k):
                return False
        return True

    for k in range(n_clusters):
        for _ in range(max_attempts):
            starts = [(r, c) for r in range(rows) for c in range(cols) if free(r, c, k)]
            if not starts:
                break
            blob = [starts[rng.integers(len(starts))]]
            owner[blob[0]] = k
            while len(blob) < beads_per_cluster:
                frontier = sorted(
                    {(r + dr, c + dc) for r, c in blob for dr, dc in _NEIGH4 if free(r + dr, c + dc, k)}
                )
                if not frontier:
                    break
                cell = frontier[rng.integers(len(frontier))]
                owner[cell] = k
                blob.append(cell)
            if len(blob) == beads_per_cluster:
                break
            for cell in blob:
                owner[cell] = -1
        else:
            raise ValueError(f"could not place cluster {k} after {max_attempts} attempts")
        if np.count_nonzero(owner == k) != beads_per_cluster:
            raise ValueError(f"could not place cluster {k}: hole grid too crowded")

    centers = holes[owner >= 0]
    return BeadLayout(centers, bead_radius_mm, grid_pitch_mm)


def bead_height(points, layout: BeadLayout) -> np.ndarray:
    """Noise-free height of the bead upper surfaces (hemisphere model) at ``points``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    best = np.full(len(points), -np.inf)
    r2 = layout.bead_radius_mm**2
    for c in layout.bead_centers:
        d2 = (points[:, 0] - c[0]) ** 2 + (points[:, 1] - c[1]) ** 2
        np.maximum(best, r2 - d2, out=best)
    return np.sqrt(np.clip(best, 0.0, None))


def ground_truth(layout: BeadLayout, workspace: Workspace | None = None, pitch_mm: float = 0.5) -> GroundTruth:
    raster = Raster(workspace or Workspace(), pitch_mm)
    ny, nx = raster.shape
    xs, ys = raster.xs, raster.ys
    best = np.full((ny, nx), -np.inf)
    r = layout.bead_radius_mm
    for cx, cy in layout.bead_centers:
        # only touch the bounding box of each disc
        c0, c1 = np.searchsorted(xs, cx - r, side="left"), np.searchsorted(xs, cx + r, side="right")
        r0, r1 = np.searchsorted(ys, cy - r, side="left"), np.searchsorted(ys, cy + r, side="right")
        if c1 <= c0 or r1 <= r0:
            continue
        dx2 = (xs[c0:c1] - cx) ** 2
        dy2 = (ys[r0:r1] - cy) ** 2
        sub = best[r0:r1, c0:c1]
        np.maximum(sub, r * r - (dy2[:, None] + dx2[None, :]), out=sub)
    occupancy = best >= 0.0
    height = np.sqrt(np.clip(best, 0.0, None))
    return GroundTruth(occupancy, height, raster)


def save_layout(layout: BeadLayout, path) -> None:
    lines = [
        "# bead layout: one 'x_mm y_mm' pair per line",
        f"radius_mm {float(layout.bead_radius_mm)!r}",
    ]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in layout.bead_centers]
    Path(path).write_text("\n".join(lines) + "\n")


def load_layout(path, grid_pitch_mm: float = 8.5) -> BeadLayout:
    radius = None
    centers = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "radius_mm":
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: malformed radius header")
            radius = float(parts[1])
            continue
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'x_mm y_mm', got {raw!r}")
        centers.append((float(parts[0]), float(parts[1])))
    if radius is None:
        raise ValueError(f"{path}: missing 'radius_mm <v>' header")
    return BeadLayout(np.array(centers).reshape(-1, 2), radius, grid_pitch_mm)
