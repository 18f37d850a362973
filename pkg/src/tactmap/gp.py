"""Binary Gaussian-process classification with the Laplace approximation.

Latent function ``f`` with a squared-exponential prior, logistic link,
Newton iterations for the posterior mode and the probit-style correction
for the predictive probability.  All linear algebra goes through the
symmetric matrix ``B = I + W^1/2 K W^1/2`` and its Cholesky factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist
from scipy.special import expit, log_expit

from tactmap.domain import Raster, TrainingSet

JITTER = 1e-5
MAX_ITER = 20
TOL = 1e-9

THETA1_GRID = np.geomspace(5.0, 100.0, 13)
THETA2_GRID = np.geomspace(1.0, 50.0, 13)


class GPNumericalError(ArithmeticError):
    """A factorization inside the classifier failed."""


@dataclass(frozen=True)
class KernelParams:
    theta1: float = 30.0  # length scale, mm
    theta2: float = 15.0  # amplitude, latent units

    def __post_init__(self):
        if not (self.theta1 > 0 and self.theta2 > 0):
            raise ValueError(f"kernel parameters must be positive, got {self.theta1}, {self.theta2}")


@dataclass(frozen=True)
class LaplaceState:
    f_hat: np.ndarray
    K_f: np.ndarray
    W: np.ndarray
    converged: bool
    iterations: int
    steps: tuple = ()  # max |f_new - f| of every Newton step
    # factor of B at f_hat and the final Newton vector a with f_hat = K_f a
    L: np.ndarray = field(default=None, repr=False)
    a: np.ndarray = field(default=None, repr=False)


@dataclass(frozen=True)
class Prediction:
    mu: np.ndarray
    sigma2: np.ndarray
    prob: np.ndarray


@dataclass(frozen=True)
class ProbabilityField:
    prob: np.ndarray
    sigma2: np.ndarray
    raster: Raster


def kernel(x_i, x_j, params: KernelParams) -> float:
    d = np.asarray(x_i, dtype=float) - np.asarray(x_j, dtype=float)
    return float(params.theta2**2 * np.exp(-(d @ d) / (2.0 * params.theta1**2)))


def kernel_matrix(A, B, params: KernelParams) -> np.ndarray:
    A = np.asarray(A, dtype=float).reshape(-1, 2)
    B = np.asarray(B, dtype=float).reshape(-1, 2)
    d2 = cdist(A, B, "sqeuclidean")
    return params.theta2**2 * np.exp(-d2 / (2.0 * params.theta1**2))


def _w(f: np.ndarray) -> np.ndarray:
    # sigma(f) * sigma(-f) stays strictly positive where 1 - sigma(f) would round to 0
    return expit(f) * expit(-f)


def _factor_b(K: np.ndarray, sqrt_w: np.ndarray) -> np.ndarray:
    B = np.eye(len(K)) + sqrt_w[:, None] * K * sqrt_w[None, :]
    try:
        return cholesky(B, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise GPNumericalError(f"Cholesky of I + W^1/2 K W^1/2 failed: {exc}") from exc


def fit_laplace(
    train: TrainingSet, params: KernelParams, max_iter: int = MAX_ITER, tol: float = TOL, f0=None
) -> LaplaceState:
    """Newton iterations for the posterior mode of the latent function.

    Each step computes ``K (I + W K)^-1 (Y - sigma(f) + W f)`` via
    ``(I + W K)^-1 b = b - W^1/2 B^-1 W^1/2 K b`` and stops once the largest
    change falls below ``tol``.  Iteration starts from ``f = 0`` unless a
    warm start ``f0`` is given; the mode itself does not depend on it.
    """
    if len(train) < 1:
        raise ValueError("need at least one training point")
    y = train.Y
    K = kernel_matrix(train.X, train.X, params) + JITTER * np.eye(len(y))
    f = np.zeros(len(y)) if f0 is None else np.array(f0, dtype=float)
    steps = []
    converged = False
    for _ in range(max_iter):
        W = _w(f)
        sw = np.sqrt(W)
        L = _factor_b(K, sw)
        b = W * f + (y - expit(f))
        a = b - sw * cho_solve((L, True), sw * (K @ b), check_finite=False)
        f_new = K @ a
        step = float(np.max(np.abs(f_new - f)))
        steps.append(step)
        if step < tol:
            converged = True
            break
        f = f_new
    W = _w(f_new)
    L = _factor_b(K, np.sqrt(W))
    return LaplaceState(f_new, K, W, converged, len(steps), tuple(steps), L, a)


def log_marginal_likelihood(state: LaplaceState, train: TrainingSet) -> float:
    """Laplace estimate of log p(Y | theta)."""
    f = state.f_hat
    fit = -0.5 * float(state.a @ f)
    lik = float(np.sum(log_expit((2.0 * train.Y - 1.0) * f)))
    return fit + lik - float(np.sum(np.log(np.diag(state.L))))


def _predict_from_cross(state: LaplaceState, train: TrainingSet, k_star: np.ndarray, k_ss: float) -> Prediction:
    mu = k_star.T @ (train.Y - expit(state.f_hat))
    v = solve_triangular(state.L, np.sqrt(state.W)[:, None] * k_star, lower=True, check_finite=False)
    sigma2 = np.clip(k_ss - np.einsum("ij,ij->j", v, v), 0.0, None)
    prob = expit(mu / np.sqrt(1.0 + np.pi * sigma2 / 8.0))
    return Prediction(mu, sigma2, prob)


def predict(state: LaplaceState, train: TrainingSet, queries, params: KernelParams) -> Prediction:
    queries = np.asarray(queries, dtype=float).reshape(-1, 2)
    k_star = kernel_matrix(train.X, queries, params)
    return _predict_from_cross(state, train, k_star, params.theta2**2)


def _low_rank(g: np.ndarray, rtol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Factor ``g ~ A @ Phi`` keeping singular values above ``rtol`` times the largest."""
    U, s, Vt = np.linalg.svd(g, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((g.shape[0], 0)), np.zeros((0, g.shape[1]))
    p = int(np.count_nonzero(s > rtol * s[0]))
    return U[:, :p] * s[:p], Vt[:p]


def probability_field(
    state: LaplaceState, train: TrainingSet, params: KernelParams, raster: Raster, chunk_cells: int = 1 << 16
) -> ProbabilityField:
    """Batched prediction over every cell of ``raster``.

    The isotropic kernel factors into x and y parts, ``k*(x, y) = gx(x) gy(y)``.
    The x table is a set of smooth Gaussians with low numerical rank, so
    ``gx = A Phi`` and the variance reduction ``k*^T M k*`` of a raster row
    becomes a quadratic form in the small rank-p basis instead of a
    triangular solve per cell.
    """
    ny, nx = raster.shape
    X = train.X
    s = 2.0 * params.theta1**2
    gx = np.exp(-((X[:, 0:1] - raster.xs[None, :]) ** 2) / s)
    gy = params.theta2**2 * np.exp(-((X[:, 1:2] - raster.ys[None, :]) ** 2) / s)

    sw = np.sqrt(state.W)
    # M = W^1/2 B^-1 W^1/2 = (W^-1 + K)^-1, formed from the Cholesky factor of B
    M = sw[:, None] * cho_solve((state.L, True), np.diag(sw), check_finite=False)
    M = 0.5 * (M + M.T)
    alpha = train.Y - expit(state.f_hat)
    A, phi = _low_rank(gx)

    rows_per_chunk = max(1, chunk_cells // nx)
    prob = np.empty((ny, nx))
    sigma2 = np.empty((ny, nx))
    k_ss = params.theta2**2
    for r0 in range(0, ny, rows_per_chunk):
        r1 = min(ny, r0 + rows_per_chunk)
        g = gy[:, r0:r1].T  # (rows, n)
        mu = (g * alpha) @ gx
        E = g[:, :, None] * A[None, :, :]  # rows of D(gy_r) A
        F = np.matmul(E.transpose(0, 2, 1), np.matmul(M, E))  # (rows, p, p)
        quad = np.einsum("rpc,pc->rc", np.matmul(F, phi), phi)
        var = np.clip(k_ss - quad, 0.0, None)
        prob[r0:r1] = expit(mu / np.sqrt(1.0 + np.pi * var / 8.0))
        sigma2[r0:r1] = var
    return ProbabilityField(prob, sigma2, raster)


def lml_surface(train: TrainingSet, theta1_grid=THETA1_GRID, theta2_grid=THETA2_GRID) -> np.ndarray:
    """Log marginal likelihood on the ``theta1 x theta2`` grid (rows follow ``theta1_grid``)."""
    out = np.empty((len(theta1_grid), len(theta2_grid)))
    for i, t1 in enumerate(theta1_grid):
        f0 = None
        for j, t2 in enumerate(theta2_grid):
            # neighbouring cells have nearby modes, so warm starts save most Newton steps
            state = fit_laplace(train, KernelParams(float(t1), float(t2)), f0=f0)
            out[i, j] = log_marginal_likelihood(state, train)
            f0 = state.f_hat
    return out


def optimize_hyperparams(
    train: TrainingSet, init: KernelParams, theta1_grid=THETA1_GRID, theta2_grid=THETA2_GRID
) -> KernelParams:
    """Grid-search maximizer of the Laplace log marginal likelihood.

    Training sets with fewer than two points or a single class carry no
    information about the length scale, so ``init`` comes back unchanged.
    """
    if len(train) < 2 or not train.has_both_classes:
        return init
    surface = lml_surface(train, theta1_grid, theta2_grid)
    i, j = np.unravel_index(np.argmax(surface), surface.shape)
    return KernelParams(float(theta1_grid[i]), float(theta2_grid[j]))


@dataclass(frozen=True)
class FittedModel:
    """Snapshot of a fitted classifier; safe to query from several threads."""

    train: TrainingSet
    params: KernelParams
    state: LaplaceState

    @classmethod
    def fit(cls, train: TrainingSet, params: KernelParams) -> FittedModel:
        return cls(train, params, fit_laplace(train, params))

    def predict(self, queries) -> Prediction:
        return predict(self.state, self.train, queries, self.params)

    def field(self, raster: Raster) -> ProbabilityField:
        return probability_field(self.state, self.train, self.params, raster)
