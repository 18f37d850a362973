"""Plain-text and PGM exports for rasters, depth images and point clouds."""

from __future__ import annotations

import io
import re
from pathlib import Path

import numpy as np

MAXVAL = 65535
_SCALE_RE = re.compile(r"#\s*value\s*=\s*(\S+)\s*\+\s*count\s*\*\s*(\S+)")


def write_pgm(raster, path, scale: float, offset: float = 0.0) -> None:
    """Write a 16-bit binary PGM where ``value = offset + count * scale``.

    The mapping is recorded in a header comment so :func:`read_pgm` can undo
    it. A negative ``scale`` flips the gray ramp.
    """
    raster = np.asarray(raster, dtype=float)
    if raster.ndim != 2:
        raise ValueError("PGM export needs a 2-D raster")
    if scale == 0:
        raise ValueError("scale must be nonzero")
    counts = np.rint((raster - offset) / scale)
    counts = np.clip(np.nan_to_num(counts), 0, MAXVAL).astype(">u2")
    h, w = raster.shape
    header = f"P5\n# value = {offset!r} + count * {scale!r}\n{w} {h}\n{MAXVAL}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(counts.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a PGM written by :func:`write_pgm` back into physical units."""
    data = Path(path).read_bytes()
    tokens = []
    scale, offset = 1.0, 0.0
    pos = 0
    while len(tokens) < 4:
        end = data.index(b"\n", pos)
        line = data[pos:end].decode("ascii")
        pos = end + 1
        if line.startswith("#"):
            m = _SCALE_RE.match(line)
            if m:
                offset, scale = float(m.group(1)), float(m.group(2))
            continue
        tokens += line.split()
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    dtype = ">u2" if maxval > 255 else "u1"
    counts = np.frombuffer(data[pos:], dtype=dtype, count=w * h).reshape(h, w)
    return offset + counts.astype(float) * scale


def write_heatmap_pgm(raster, path, lo=None, hi=None, dark_is_high: bool = True) -> None:
    """Linear gray heat map; by default darker pixels mean larger values."""
    raster = np.asarray(raster, dtype=float)
    lo = float(np.min(raster)) if lo is None else float(lo)
    hi = float(np.max(raster)) if hi is None else float(hi)
    span = hi - lo
    if span <= 0:
        # constant field: mid-gray, still exactly invertible
        write_pgm(raster, path, scale=1.0 / MAXVAL, offset=lo - 0.5)
        return
    if dark_is_high:
        write_pgm(raster, path, scale=-span / MAXVAL, offset=hi)
    else:
        write_pgm(raster, path, scale=span / MAXVAL, offset=lo)


def write_depth_pgm(raster, path) -> None:
    """Depth or height raster at 0.01 mm per count."""
    write_pgm(raster, path, scale=0.01)


def write_raster_csv(raster, path) -> None:
    np.savetxt(path, np.asarray(raster, dtype=float), delimiter=",", fmt="%.10g")


def read_raster_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=","))


def write_point_cloud(cloud, path) -> None:
    cloud = np.asarray(cloud, dtype=float).reshape(-1, 3)
    np.savetxt(path, cloud, fmt="%.6f")


def read_point_cloud(path) -> np.ndarray:
    text = Path(path).read_text()
    if not text.strip():
        return np.zeros((0, 3))
    return np.loadtxt(io.StringIO(text), ndmin=2).reshape(-1, 3)
