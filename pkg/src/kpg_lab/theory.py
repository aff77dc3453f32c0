"""Game constants, Hessian block assembly, contraction ratios and distance bounds."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .core import InputError, NumericError, as_flat, fd_hessian_blocks, slices
from .trace import LearningRates

STATIONARY_TOL = 1e-6


@dataclass(frozen=True)
class GameConstants:
    L_i: tuple
    grad_max: float
    samples: int
    seed: int

    @property
    def L(self) -> float:
        return max(self.L_i)

    def eta_limit(self, n: int) -> float:
        """Largest learning rate allowed by the Cauchy condition eta < 1/(L (n-1))."""
        return np.inf if self.L == 0 else 1.0 / (self.L * (n - 1))


def estimate_constants(game, region=None, samples: int = 10_000, seed: int = 0) -> GameConstants:
    """Sample-based lower estimates of the cross-Lipschitz constants and the max gradient norm.

    For each sample a base point is drawn uniformly from the region, and a
    second complement is drawn at a log-uniform distance from the first, so
    both local slopes and long secants are represented. Points that leave
    the region are clipped back into it.
    """
    if samples < 2:
        raise InputError(f"need at least 2 samples, got {samples}")
    lo, hi = game.region if region is None else (np.asarray(region[0], float), np.asarray(region[1], float))
    rng = np.random.default_rng(seed)
    width = float(np.max(hi - lo))
    L_i = []
    grad_max = 0.0
    for i, own in enumerate(slices(game.dims)):
        mask = np.ones(game.total_dim, dtype=bool)
        mask[own] = False
        best, used = 0.0, 0
        for _ in range(samples):
            base = rng.uniform(lo, hi)
            direction = rng.standard_normal(int(mask.sum()))
            direction /= np.linalg.norm(direction)
            radius = width * 10.0 ** rng.uniform(-4.0, 0.0)
            other = base.copy()
            other[mask] = np.clip(base[mask] + radius * direction, lo[mask], hi[mask])
            gap = np.linalg.norm(other[mask] - base[mask])
            g1 = np.asarray(game.gradient(i, base), dtype=float)
            grad_max = max(grad_max, float(np.linalg.norm(g1)))
            if gap == 0.0:
                continue
            g2 = np.asarray(game.gradient(i, other), dtype=float)
            best = max(best, float(np.linalg.norm(g1 - g2)) / gap)
            used += 1
        if used == 0:
            raise NumericError(f"all sampled pairs for agent {i} were degenerate")
        L_i.append(best)
    return GameConstants(tuple(L_i), grad_max, samples, seed)


def complement_selection(dims) -> np.ndarray:
    """0/1 matrix D with D theta = [theta_{-1}, ..., theta_{-n}]."""
    total = sum(dims)
    rows = []
    for own in slices(dims):
        for j in range(total):
            if own.start <= j < own.stop:
                continue
            row = np.zeros(total)
            row[j] = 1.0
            rows.append(row)
    return np.array(rows)


@dataclass
class HessianBlocks:
    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    eta_block: np.ndarray
    C_i: list = field(default_factory=list)

    @property
    def growth(self) -> np.ndarray:
        """I + eta A"""
        return np.eye(self.A.shape[0]) + self.eta_block @ self.A

    @property
    def coupling(self) -> np.ndarray:
        """eta B D"""
        return self.eta_block @ self.B @ self.D

    def fixed_point_map(self) -> np.ndarray:
        """Linearized GSPPM update (I - eta B D)^{-1} (I + eta A)."""
        return np.linalg.solve(np.eye(self.A.shape[0]) - self.coupling, self.growth)


def assemble_blocks(game, theta_star, rates, h=None) -> HessianBlocks:
    theta_star = as_flat(theta_star, game.dims)
    rates = LearningRates.of(rates, game.n)
    worst = max(float(np.linalg.norm(game.gradient(i, theta_star))) for i in range(game.n))
    if worst >= STATIONARY_TOL:
        raise InputError(f"theta* is not stationary: max gradient norm {worst:.3e}")
    A_i, B_i, C_i = [], [], []
    for i in range(game.n):
        a, b, c = fd_hessian_blocks(game, i, theta_star, h)
        exact = game.hessian_blocks(i, theta_star)
        if exact is not None:
            a, b = (np.asarray(m, dtype=float) for m in exact)
        A_i.append(a)
        B_i.append(b)
        C_i.append(c)
    return HessianBlocks(
        A=block_diag(*A_i),
        B=block_diag(*B_i),
        D=complement_selection(game.dims),
        eta_block=np.diag(rates.per_coordinate(game.dims)),
        C_i=C_i,
    )


def spectral_extremes(Z) -> tuple:
    """Largest and smallest singular values of a square matrix.

    Computed from the eigenvalues of Z^T Z, then refined by one Rayleigh
    quotient on the corresponding right singular vectors.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise InputError(f"expected a square matrix, got shape {Z.shape}")
    if not np.all(np.isfinite(Z)):
        raise NumericError("matrix has non-finite entries")
    gram = Z.T @ Z
    vals, vecs = np.linalg.eigh(gram)
    out = []
    for col in (-1, 0):
        v = vecs[:, col]
        out.append(float(np.linalg.norm(Z @ v)) if vals[col] > 0 else 0.0)
    return max(out[0], out[1]), min(out[0], out[1])


def theorem1_bound(k: int, eta_max: float, L: float, n: int, grad_max: float) -> float:
    """Upper bound on ||theta^(k) - theta^(k-1)|| after k reasoning levels."""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    with np.errstate(over="ignore"):
        return float(eta_max * (eta_max * L) ** (k - 1) * n * (n - 1) ** (k - 1) * grad_max)


def gsppm_ratio(blocks: HessianBlocks) -> float:
    """sigma_max(I + eta A)^2 / sigma_min(I - eta B D)^2; below one certifies local convergence."""
    top, _ = spectral_extremes(blocks.growth)
    _, bottom = spectral_extremes(np.eye(blocks.A.shape[0]) - blocks.coupling)
    if bottom == 0.0:
        raise NumericError("I - eta B D is singular; the implicit update is undefined")
    return top ** 2 / bottom ** 2


@dataclass(frozen=True)
class Theorem3Bound:
    value: float
    converges: bool  # sigma_max(eta B D)^2 < 1
    cross_term: float
    dominated_by_cross: bool


def theorem3_bound(blocks: HessianBlocks, r0: float, r_prev: float, grad_max: float) -> Theorem3Bound:
    """Squared-distance bound on ||theta^(k) - theta*||^2 given r0 = ||theta - theta*|| and r_prev = ||theta^(k-1) - theta*||."""
    if r0 < 0 or r_prev < 0:
        raise InputError("distances must be non-negative")
    g, _ = spectral_extremes(blocks.growth)
    c, _ = spectral_extremes(blocks.coupling)
    first = (g ** 2 + 2 * g * c) * r0 ** 2
    cross = 2 * g * c * r0 * grad_max
    last = c ** 2 * r_prev ** 2
    value = first + cross + last
    return Theorem3Bound(value, c ** 2 < 1.0, cross, cross > first + last)
