"""Space-filling point sets: 2-D Sobol sequence and centered L2 discrepancy."""

from __future__ import annotations

import numpy as np

from tactmap.domain import Workspace

_BITS = 30


def _direction_numbers(bits: int = _BITS) -> np.ndarray:
    """Integer direction numbers (scaled by 2**bits) for the first two Sobol dimensions.

    Dimension 1 is van der Corput in base 2.  Dimension 2 uses the primitive
    polynomial x + 1 (degree 1, a = 0) with initial m_1 = 1, the first entry
    of the Joe-Kuo table.
    """
    v = np.zeros((2, bits), dtype=np.int64)
    m = 1
    for k in range(bits):
        v[0, k] = 1 << (bits - 1 - k)
        if k > 0:
            m = (m << 1) ^ m
        v[1, k] = m << (bits - 1 - k)
    return v


def sobol_2d(n: int, skip_origin: bool = True) -> np.ndarray:
    """First ``n`` points of the unscrambled 2-D Sobol sequence in Gray-code order."""
    if n < 1:
        raise ValueError("n must be at least 1")
    total = n + (1 if skip_origin else 0)
    if total > 1 << _BITS:
        raise ValueError("too many points requested")
    v = _direction_numbers()
    out = np.zeros((total, 2), dtype=np.int64)
    x = np.zeros(2, dtype=np.int64)
    for i in range(1, total):
        # flip the direction number of the lowest zero bit of i - 1
        x = x ^ v[:, _lowest_zero_bit(i - 1)]
        out[i] = x
    pts = out.astype(float) / float(1 << _BITS)
    return pts[1:] if skip_origin else pts


def _lowest_zero_bit(i: int) -> int:
    c = 0
    while i & 1:
        i >>= 1
        c += 1
    return c


def to_workspace(points, workspace: Workspace) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return pts * np.array([workspace.width_mm, workspace.height_mm])


def to_unit(points, workspace: Workspace) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return pts / np.array([workspace.width_mm, workspace.height_mm])


def _single_terms(u: np.ndarray) -> np.ndarray:
    a = np.abs(u - 0.5)
    return np.prod(1.0 + 0.5 * a - 0.5 * a * a, axis=-1)


def _pair_terms(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Matrix of centered-discrepancy kernel values between rows of ``u`` and ``w``."""
    au = np.abs(u - 0.5)[:, None, :]
    aw = np.abs(w - 0.5)[None, :, :]
    diff = np.abs(u[:, None, :] - w[None, :, :])
    return np.prod(1.0 + 0.5 * au + 0.5 * aw - 0.5 * diff, axis=-1)


def centered_discrepancy(points) -> float:
    """Centered L2 discrepancy (Hickernell's closed form) of points in the unit hypercube."""
    u = np.asarray(points, dtype=float)
    if u.ndim == 1:
        u = u[None, :]
    n, d = u.shape
    if n == 0:
        raise ValueError("discrepancy of an empty point set is undefined")
    cd2 = (13.0 / 12.0) ** d - 2.0 / n * _single_terms(u).sum() + _pair_terms(u, u).sum() / n**2
    return float(np.sqrt(max(cd2, 0.0)))


class DiscrepancyCache:
    """2-D centered discrepancy of ``history + [candidate]`` for many candidates at once.

    The single and pairwise sums over the history are kept so that scoring
    ``m`` candidates costs ``O(n m)`` instead of ``O(n^2 m)``.
    """

    def __init__(self, candidates):
        self.candidates = np.asarray(candidates, dtype=float).reshape(-1, 2)
        self._cand_single = _single_terms(self.candidates)
        self._cand_self = _pair_terms_diag(self.candidates)
        self.history = np.zeros((0, 2))
        self._single_sum = 0.0
        self._pair_sum = 0.0
        self._cross = np.zeros(len(self.candidates))

    def add(self, point) -> None:
        p = np.asarray(point, dtype=float).reshape(1, 2)
        if len(self.history):
            self._pair_sum += 2.0 * _pair_terms(self.history, p).sum()
        self._pair_sum += _pair_terms_diag(p)[0]
        self._single_sum += _single_terms(p)[0]
        self._cross += _pair_terms(self.candidates, p)[:, 0]
        self.history = np.vstack([self.history, p])

    def extend(self, points) -> None:
        for p in np.asarray(points, dtype=float).reshape(-1, 2):
            self.add(p)

    def scores(self) -> np.ndarray:
        n = len(self.history) + 1
        single = self._single_sum + self._cand_single
        pair = self._pair_sum + 2.0 * self._cross + self._cand_self
        cd2 = (13.0 / 12.0) ** 2 - 2.0 / n * single + pair / n**2
        return np.sqrt(np.clip(cd2, 0.0, None))


def _pair_terms_diag(u: np.ndarray) -> np.ndarray:
    a = np.abs(u - 0.5)
    return np.prod(1.0 + a, axis=-1)


def augmented_discrepancy(history, candidates) -> np.ndarray:
    """CD of ``history`` plus each candidate in turn (all in unit coordinates)."""
    cache = DiscrepancyCache(candidates)
    cache.extend(history)
    return cache.scores()
