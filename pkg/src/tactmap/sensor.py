"""Virtual optical tactile sensor pressing into foam over buried beads."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from tactmap.domain import BeadLayout, Workspace


@dataclass(frozen=True)
class SensorConfig:
    footprint_mm: float = 25.6
    resolution_px: int = 128
    plunge_depth_mm: float = 12.0
    foam_thickness_mm: float = 12.7
    attenuation: float = 0.8
    noise_sigma_mm: float = 0.05
    noise_seed: int = 0
    workspace: Workspace = field(default_factory=Workspace)

    def __post_init__(self):
        if self.resolution_px < 2:
            raise ValueError("resolution_px must be at least 2")
        if not self.footprint_mm > 0:
            raise ValueError("footprint_mm must be positive")
        if not 0 < self.attenuation <= 1:
            raise ValueError("attenuation must lie in (0, 1]")
        if self.noise_sigma_mm < 0:
            raise ValueError("noise_sigma_mm must be non-negative")
        if self.noise_seed < 0:
            raise ValueError("noise_seed must be non-negative")

    @property
    def mm_per_px(self) -> float:
        return self.footprint_mm / self.resolution_px

    @property
    def plunge_ratio(self) -> float:
        return min(1.0, self.plunge_depth_mm / self.foam_thickness_mm)

    @classmethod
    def full_resolution(cls, **kwargs) -> SensorConfig:
        return cls(resolution_px=640, **kwargs)


@dataclass(frozen=True)
class DepthImage:
    """Per-pixel deformation in mm.

    Pixel ``[row, col]`` sits at world point
    ``center + ((col, row) - resolution / 2) * mm_per_px``.
    """

    pixels: np.ndarray
    center: tuple[float, float]
    mm_per_px: float

    @property
    def resolution(self) -> int:
        return self.pixels.shape[0]

    def pixel_axes(self) -> tuple[np.ndarray, np.ndarray]:
        """World x of each column and world y of each row."""
        offsets = (np.arange(self.resolution) - self.resolution / 2.0) * self.mm_per_px
        return self.center[0] + offsets, self.center[1] + offsets

    def pixel_to_world(self, px) -> np.ndarray:
        px = np.asarray(px, dtype=float)
        return np.asarray(self.center) + (px - self.resolution / 2.0) * self.mm_per_px


def _noise_rng(seed: int, location) -> np.random.Generator:
    # keyed on micrometre-rounded location so press order never matters
    key = [int(seed)] + [int(round(float(v) * 1000.0)) for v in location]
    return np.random.default_rng(np.random.SeedSequence(key))


def press(layout: BeadLayout, config: SensorConfig, location) -> DepthImage:
    """Render the deformation image for one press centered at ``location``."""
    location = (float(location[0]), float(location[1]))
    ws = config.workspace
    if not ws.contains(location):
        raise ValueError(f"press location {location} lies outside the {ws.width_mm} x {ws.height_mm} mm workspace")

    res = config.resolution_px
    offsets = (np.arange(res) - res / 2.0) * config.mm_per_px
    xs = location[0] + offsets
    ys = location[1] + offsets

    r = layout.bead_radius_mm
    best = np.full((res, res), -np.inf)
    half = config.footprint_mm / 2.0 + r
    for cx, cy in layout.bead_centers:
        if abs(cx - location[0]) > half or abs(cy - location[1]) > half:
            continue
        d2 = (ys[:, None] - cy) ** 2 + (xs[None, :] - cx) ** 2
        np.maximum(best, r * r - d2, out=best)
    height = 2.0 * np.sqrt(np.clip(best, 0.0, None)) * config.plunge_ratio

    outside = (xs < 0) | (xs > ws.width_mm)
    height[:, outside] = 0.0
    height[(ys < 0) | (ys > ws.height_mm), :] = 0.0

    delta = config.attenuation * height
    if config.noise_sigma_mm > 0:
        delta = delta + _noise_rng(config.noise_seed, location).normal(0.0, config.noise_sigma_mm, delta.shape)
    np.clip(delta, 0.0, None, out=delta)
    return DepthImage(delta, location, config.mm_per_px)


def undeformed_reference(config: SensorConfig) -> DepthImage:
    res = config.resolution_px
    return DepthImage(np.zeros((res, res)), (0.0, 0.0), config.mm_per_px)
