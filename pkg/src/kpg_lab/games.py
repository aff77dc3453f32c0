"""Concrete games: Meet-up, quadratic testbeds and finite matrix games."""
from __future__ import annotations

import math

import numpy as np

from .core import DifferentiableGame, InputError, NumericError, complement, slices
from .tabular import TabularMarkovGame

MEETUP_START = ((0.0, 0.0), (3.0, 2.0))


class DegenerateGeometryError(NumericError):
    pass


def _unit(v):
    norm = math.hypot(v[0], v[1])
    if norm < 1e-12:
        raise DegenerateGeometryError("agents coincide after the step; direction is undefined")
    return v / norm


def _heading(angle):
    return np.array([math.cos(angle), math.sin(angle)])


def _normal(angle):
    return np.array([-math.sin(angle), math.cos(angle)])


class MeetupGame(DifferentiableGame):
    """Two point agents choose a heading for one unit step from fixed start positions.

    After the first step both agents head straight for each other, so the
    return equals the first-step reward: the cosine between the agent's
    heading and the direction to where the other agent ends up, minus one.
    Parameters are the two heading angles; distances wrap modulo 2*pi.
    """

    name = "meetup"

    def __init__(self, iota1=MEETUP_START[0], iota2=MEETUP_START[1], region=None):
        super().__init__([1, 1], region)
        self.iota = (np.asarray(iota1, dtype=float), np.asarray(iota2, dtype=float))
        if np.allclose(self.iota[0], self.iota[1]):
            raise InputError("meet-up start positions must differ")
        self.step_length = 1.0

    @property
    def optimum(self) -> np.ndarray:
        d = self.iota[1] - self.iota[0]
        ang = math.atan2(d[1], d[0])
        return np.array([ang, ang - math.pi])

    def _target(self, i, theta):
        other = 1 - i
        dest = self.iota[other] + self.step_length * _heading(theta[other])
        delta = dest - self.iota[i]
        return _unit(delta), math.hypot(delta[0], delta[1])

    def objective(self, i, theta):
        u, _ = self._target(i, theta)
        return float(_heading(theta[i]) @ u - 1.0)

    def objectives(self, theta):
        return tuple(self.objective(i, theta) for i in range(2))

    def gradient(self, i, theta):
        u, _ = self._target(i, theta)
        return np.array([_normal(theta[i]) @ u])

    def hessian_blocks(self, i, theta):
        other = 1 - i
        u, dist = self._target(i, theta)
        own = -_heading(theta[i]) @ u
        # d u / d theta_other = (I - u u^T) n_other / |dest - iota_i|
        du = (np.eye(2) - np.outer(u, u)) @ _normal(theta[other]) / dist
        cross = _normal(theta[i]) @ du
        return np.array([[own]]), np.array([[cross]])

    def displacement(self, a, b):
        diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        return (diff + math.pi) % (2.0 * math.pi) - math.pi

    def describe(self):
        return {"kind": self.name, "iota1": self.iota[0].tolist(), "iota2": self.iota[1].tolist()}


def meetup_objective(theta1, theta2, game: MeetupGame | None = None):
    game = game or MeetupGame()
    return game.objectives(np.array([theta1, theta2], dtype=float))


def meetup_gradient(theta1, theta2, game: MeetupGame | None = None):
    game = game or MeetupGame()
    theta = np.array([theta1, theta2], dtype=float)
    return float(game.gradient(0, theta)[0]), float(game.gradient(1, theta)[0])


class QuadraticGame(DifferentiableGame):
    """J_i = 0.5 th_i^T P_i th_i + th_i^T M_i th_{-i}; the origin is stationary for every agent."""

    name = "quadratic"

    def __init__(self, P, M, region=None):
        P = [np.atleast_2d(np.asarray(p, dtype=float)) for p in P]
        dims = [p.shape[0] for p in P]
        if len(M) != len(P):
            raise InputError(f"got {len(P)} P blocks but {len(M)} M blocks")
        super().__init__(dims, region)
        total = sum(dims)
        M = [np.asarray(m, dtype=float).reshape(d, total - d) for m, d in zip(M, dims)]
        for i, p in enumerate(P):
            if p.shape != (dims[i], dims[i]) or not np.allclose(p, p.T):
                raise InputError(f"P[{i}] must be a symmetric square matrix")
            if np.max(np.linalg.eigvalsh(p)) >= 0:
                raise InputError(f"P[{i}] must be negative definite")
            if not np.all(np.isfinite(M[i])):
                raise InputError(f"M[{i}] has non-finite entries")
        self.P, self.M = P, M

    def objective(self, i, theta):
        theta = np.asarray(theta, dtype=float)
        own = theta[slices(self.dims)[i]]
        rest = complement(theta, self.dims, i)
        return float(0.5 * own @ self.P[i] @ own + own @ self.M[i] @ rest)

    def gradient(self, i, theta):
        theta = np.asarray(theta, dtype=float)
        own = theta[slices(self.dims)[i]]
        return self.P[i] @ own + self.M[i] @ complement(theta, self.dims, i)

    def hessian_blocks(self, i, theta):
        return self.P[i].copy(), self.M[i].copy()

    @property
    def optimum(self) -> np.ndarray:
        return np.zeros(self.total_dim)

    def describe(self):
        return {"kind": self.name, "P": [p.tolist() for p in self.P], "M": [m.tolist() for m in self.M]}


def quadratic_make(n: int, P, M, region=None) -> QuadraticGame:
    if len(P) != n:
        raise InputError(f"n={n} but {len(P)} P blocks given")
    return QuadraticGame(P, M, region)


def two_player_quadratic(c: float, p: float = -1.0) -> QuadraticGame:
    """Scalar two-agent testbed with P_i = [p] and coupling M_i = [c]."""
    return QuadraticGame([[[p]], [[p]]], [[[c]], [[c]]])


def matrix_game_make(payoffs, shared: bool = True, action_counts=None) -> TabularMarkovGame:
    """One-state, gamma = 0 Markov game from payoff tensors over joint actions.

    With ``shared`` the single tensor is every agent's reward; otherwise
    ``payoffs`` holds one tensor per agent stacked on the leading axis.
    """
    payoffs = np.asarray(payoffs, dtype=float)
    if shared:
        shape = payoffs.shape
        rewards = [payoffs.copy() for _ in shape]
    else:
        shape = payoffs.shape[1:]
        if payoffs.shape[0] != len(shape):
            raise InputError(f"{payoffs.shape[0]} payoff tensors for {len(shape)} agents")
        rewards = [payoffs[i].copy() for i in range(len(shape))]
    if len(shape) < 2:
        raise InputError("a matrix game needs at least 2 agents")
    if action_counts is not None and tuple(action_counts) != tuple(shape):
        raise InputError(f"payoff shape {shape} does not match action counts {tuple(action_counts)}")
    transitions = np.ones((1,) + shape + (1,))
    return TabularMarkovGame(
        transitions=transitions,
        rewards=[r[None] for r in rewards],
        gamma=0.0,
        initial=np.ones(1),
    )
