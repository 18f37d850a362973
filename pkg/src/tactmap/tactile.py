"""Turn depth images into training labels and point clouds."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from tactmap.sensor import DepthImage

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class ProcConfig:
    epsilon_mm: float = 1.55
    min_cluster_px: int = 8

    def __post_init__(self):
        if not self.epsilon_mm > 0:
            raise ValueError("epsilon_mm must be positive")
        if self.min_cluster_px < 1:
            raise ValueError("min_cluster_px must be at least 1")


@dataclass(frozen=True)
class ContourCluster:
    hull_vertices: np.ndarray  # (k, 2) pixel (col, row), counter-clockwise
    centroid: np.ndarray  # mean of the hull vertices, pixel units
    pixel_count: int


@dataclass(frozen=True)
class LabeledPoints:
    points: np.ndarray
    labels: np.ndarray
    support_px: np.ndarray  # cluster size behind each point, 0 for label-0 points

    def __len__(self) -> int:
        return len(self.labels)


def threshold(image: DepthImage, config: ProcConfig) -> DepthImage:
    px = image.pixels
    return replace(image, pixels=np.where(np.abs(px) > config.epsilon_mm, px, 0.0))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> np.ndarray:
    """Andrew's monotone chain; collinear points are dropped.

    Returns the hull vertices counter-clockwise starting from the
    lexicographically smallest point.
    """
    pts = sorted({(float(x), float(y)) for x, y in np.asarray(points).reshape(-1, 2)})
    if len(pts) <= 2:
        return np.array(pts, dtype=float).reshape(-1, 2)
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=float)


def hull_centroid(vertices) -> np.ndarray:
    """Vertex mean of a hull, used as a cheap stand-in for the area centroid."""
    return np.asarray(vertices, dtype=float).reshape(-1, 2).mean(axis=0)


def _boundary_pixels(mask: np.ndarray) -> np.ndarray:
    # interior pixels can never be hull vertices; skipping them keeps hulls cheap
    edge = mask & ~ndimage.binary_erosion(mask, structure=_EIGHT, border_value=0)
    rows, cols = np.nonzero(edge)
    return np.column_stack([cols, rows])


def extract_clusters(image: DepthImage, config: ProcConfig) -> list[ContourCluster]:
    """8-connected deformation blobs of a thresholded image, in raster-scan order."""
    mask = image.pixels != 0
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        return []
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    clusters = []
    for k, slc in enumerate(ndimage.find_objects(labels), start=1):
        if counts[k] < config.min_cluster_px:
            continue
        sub = labels[slc] == k
        pix = _boundary_pixels(sub) + np.array([slc[1].start, slc[0].start])
        hull = convex_hull(pix)
        clusters.append(ContourCluster(hull, hull_centroid(hull), int(counts[k])))
    return clusters


def labels_from_sample(image: DepthImage, config: ProcConfig, thresholded: bool = False) -> LabeledPoints:
    """One label-1 point per deformation cluster, or a single label-0 point at the press center."""
    if not thresholded:
        image = threshold(image, config)
    clusters = extract_clusters(image, config)
    if not clusters:
        return LabeledPoints(np.array([image.center], dtype=float), np.zeros(1), np.zeros(1, dtype=int))
    points = np.array([image.pixel_to_world(c.centroid) for c in clusters])
    support = np.array([c.pixel_count for c in clusters])
    return LabeledPoints(points, np.ones(len(clusters)), support)


def to_point_cloud(image: DepthImage) -> np.ndarray:
    """World-frame ``(x, y, z)`` rows for every nonzero pixel."""
    rows, cols = np.nonzero(image.pixels)
    xs, ys = image.pixel_axes()
    return np.column_stack([xs[cols], ys[rows], image.pixels[rows, cols]])
