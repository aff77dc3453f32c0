"""Joint parameter handling, the differentiable-game contract and finite-difference oracles."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

EPS = np.finfo(float).eps


class InputError(ValueError):
    """Rejected input: bad shapes, violated preconditions, malformed config."""


class NumericError(ArithmeticError):
    """Non-finite or singular numerics encountered during a computation."""


def slices(dims: Sequence[int]) -> list[slice]:
    out, start = [], 0
    for d in dims:
        out.append(slice(start, start + d))
        start += d
    return out


def pack(segments, dims: Sequence[int] | None = None) -> np.ndarray:
    """Concatenate per-agent parameter vectors in agent order.

    If ``dims`` is given every segment must match its declared size.
    """
    segs = [np.atleast_1d(np.asarray(s, dtype=float)) for s in segments]
    if len(segs) < 2:
        raise InputError(f"need at least 2 agent segments, got {len(segs)}")
    for i, s in enumerate(segs):
        if s.ndim != 1 or s.size < 1:
            raise InputError(f"segment {i} must be a non-empty vector, got shape {s.shape}")
    if dims is not None:
        if len(dims) != len(segs):
            raise InputError(f"expected {len(dims)} segments, got {len(segs)}")
        for i, (s, d) in enumerate(zip(segs, dims)):
            if s.size != d:
                raise InputError(f"segment {i} has dimension {s.size}, expected {d}")
    return np.concatenate(segs)


def unpack(flat, dims: Sequence[int]) -> list[np.ndarray]:
    flat = np.asarray(flat, dtype=float)
    if flat.ndim != 1 or flat.size != sum(dims):
        raise InputError(f"flat vector of size {flat.size} does not match dims {list(dims)}")
    return [flat[s].copy() for s in slices(dims)]


@dataclass(frozen=True)
class JointParams:
    """Ordered per-agent segments of the joint parameter vector."""

    segments: tuple

    def __post_init__(self):
        segs = tuple(np.atleast_1d(np.asarray(s, dtype=float)) for s in self.segments)
        pack(segs)  # validation only
        object.__setattr__(self, "segments", segs)

    @classmethod
    def from_flat(cls, flat, dims) -> "JointParams":
        return cls(tuple(unpack(flat, dims)))

    @property
    def dims(self) -> list[int]:
        return [s.size for s in self.segments]

    @property
    def n(self) -> int:
        return len(self.segments)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def flat(self) -> np.ndarray:
        return pack(self.segments)


def as_flat(theta, dims: Sequence[int]) -> np.ndarray:
    if isinstance(theta, JointParams):
        theta = theta.flat
    theta = np.array(theta, dtype=float).reshape(-1)
    if theta.size != sum(dims):
        raise InputError(f"parameter vector has size {theta.size}, expected {sum(dims)}")
    return theta


def complement(theta: np.ndarray, dims: Sequence[int], i: int) -> np.ndarray:
    """theta with agent i's segment removed."""
    mask = np.ones(theta.size, dtype=bool)
    mask[slices(dims)[i]] = False
    return theta[mask]


class DifferentiableGame:
    """N-player game with per-agent objectives J_i over the joint parameters.

    Subclasses implement ``objective`` and may override ``gradient`` (defaults
    to the central finite-difference oracle) and ``hessian_blocks`` (defaults
    to None, meaning "no analytic Hessian").
    """

    name = "game"

    def __init__(self, dims: Sequence[int], region=None):
        dims = [int(d) for d in dims]
        if len(dims) < 2:
            raise InputError(f"a game needs n >= 2 agents, got {len(dims)}")
        if any(d < 1 for d in dims):
            raise InputError(f"agent dimensions must be >= 1, got {dims}")
        self.dims = dims
        total = sum(dims)
        if region is None:
            region = (-5.0 * np.ones(total), 5.0 * np.ones(total))
        lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (total,)).copy() for b in region)
        if np.any(lo >= hi):
            raise InputError("region lower bounds must be below upper bounds")
        self.region = (lo, hi)

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    @property
    def has_analytic_gradient(self) -> bool:
        return type(self).gradient is not DifferentiableGame.gradient

    def objective(self, i: int, theta: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, i: int, theta: np.ndarray) -> np.ndarray:
        return fd_gradient(self, i, theta)

    def hessian_blocks(self, i: int, theta: np.ndarray):
        return None

    def displacement(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """a - b in parameter space; periodic games override this."""
        return np.asarray(a, dtype=float) - np.asarray(b, dtype=float)

    def distance(self, a, b) -> float:
        return float(np.linalg.norm(self.displacement(a, b)))

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        lo, hi = self.region
        shape = (lo.size,) if size is None else (size, lo.size)
        return rng.uniform(lo, hi, size=shape)

    def describe(self) -> dict:
        return {"kind": self.name, "dims": list(self.dims)}


class FunctionGame(DifferentiableGame):
    """Game defined by plain callables ``objective(i, theta)`` and optionally ``gradient(i, theta)``."""

    name = "function"

    def __init__(self, dims, objective: Callable, gradient: Callable | None = None, region=None):
        super().__init__(dims, region)
        self._objective = objective
        self._gradient = gradient

    @property
    def has_analytic_gradient(self) -> bool:
        return self._gradient is not None

    def objective(self, i, theta):
        return float(self._objective(i, theta))

    def gradient(self, i, theta):
        if self._gradient is None:
            return fd_gradient(self, i, theta)
        return np.asarray(self._gradient(i, theta), dtype=float)


def _steps(theta: np.ndarray, idx, root: float, h) -> np.ndarray:
    if h is not None:
        if h <= 0:
            raise InputError(f"finite-difference step must be positive, got {h}")
        return np.full(len(idx), float(h))
    return EPS ** (1.0 / root) * np.maximum(1.0, np.abs(theta[idx]))


def _checked(value, what: str, coord: int):
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite {what} while perturbing coordinate {coord}")
    return value


def fd_gradient(game: DifferentiableGame, i: int, theta, h: float | None = None) -> np.ndarray:
    """Central-difference gradient of J_i over agent i's own coordinates."""
    theta = as_flat(theta, game.dims)
    idx = np.arange(theta.size)[slices(game.dims)[i]]
    steps = _steps(theta, idx, 3.0, h)
    grad = np.empty(idx.size)
    for m, (j, hj) in enumerate(zip(idx, steps)):
        up, down = theta.copy(), theta.copy()
        up[j] += hj
        down[j] -= hj
        fp = _checked(game.objective(i, up), "objective", j)
        fm = _checked(game.objective(i, down), "objective", j)
        grad[m] = (fp - fm) / (up[j] - down[j])
    return grad


def fd_jacobian(fn: Callable, theta: np.ndarray, h: float | None = None, root: float = 4.0) -> np.ndarray:
    """Central-difference Jacobian of a vector function, columns over coordinates of theta."""
    theta = np.asarray(theta, dtype=float)
    idx = np.arange(theta.size)
    steps = _steps(theta, idx, root, h)
    cols = []
    for j, hj in zip(idx, steps):
        up, down = theta.copy(), theta.copy()
        up[j] += hj
        down[j] -= hj
        cols.append((_checked(fn(up), "gradient", j) - _checked(fn(down), "gradient", j)) / (up[j] - down[j]))
    return np.column_stack(cols)


def fd_hessian(fn: Callable, theta: np.ndarray, h: float | None = None) -> np.ndarray:
    """Full Hessian of a scalar function from nested central differences of values only."""
    theta = np.asarray(theta, dtype=float)
    dim = theta.size
    steps = _steps(theta, np.arange(dim), 4.0, h)
    hess = np.empty((dim, dim))

    def f(x, coord):
        return float(_checked(fn(x), "objective", coord))

    f0 = f(theta, -1)
    for a in range(dim):
        for b in range(a, dim):
            ea = np.zeros(dim)
            eb = np.zeros(dim)
            ea[a] = steps[a]
            eb[b] = steps[b]
            if a == b:
                val = (f(theta + ea, a) - 2.0 * f0 + f(theta - ea, a)) / steps[a] ** 2
            else:
                val = (f(theta + ea + eb, a) - f(theta + ea - eb, a)
                       - f(theta - ea + eb, a) + f(theta - ea - eb, a)) / (4.0 * steps[a] * steps[b])
            hess[a, b] = hess[b, a] = val
    return hess


def fd_hessian_blocks(game: DifferentiableGame, i: int, theta, h: float | None = None,
                      use_objective: bool = False):
    """(A_i, B_i, C_i) blocks of the Hessian of J_i at theta.

    A_i and B_i come from central differences of ``game.gradient(i, .)`` over
    all coordinates. With ``use_objective=True`` they are instead read off a
    Hessian built from objective values only, which gives an oracle that does
    not trust the game's gradient. C_i always needs objective values since
    the gradient only covers agent i's coordinates.
    """
    theta = as_flat(theta, game.dims)
    own = slices(game.dims)[i]
    mask = np.ones(theta.size, dtype=bool)
    mask[own] = False
    full = fd_hessian(lambda x: game.objective(i, x), theta, h)
    if use_objective:
        rows = full[own]
    else:
        rows = fd_jacobian(lambda x: game.gradient(i, x), theta, h)
    return rows[:, own].copy(), rows[:, mask].copy(), full[np.ix_(mask, mask)].copy()
