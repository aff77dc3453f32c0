"""Exact (enumeration-based) K-MAPPO and K-MADDPG estimators on small games.

Joint-action tensors are laid out as ``(S, A_1, ..., A_n)``; per-agent policy
tables are logits of shape ``(S, A_i)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import InputError, NumericError, as_flat, slices
from .trace import ConvergenceTrace, LearningRates, Row


@dataclass
class TabularMarkovGame:
    transitions: np.ndarray  # (S, A_1, ..., A_n, S')
    rewards: list            # per agent, (S, A_1, ..., A_n)
    gamma: float
    initial: np.ndarray      # (S,)

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=float)
        self.rewards = [np.asarray(r, dtype=float) for r in self.rewards]
        self.initial = np.asarray(self.initial, dtype=float)
        shape = self.transitions.shape
        if len(shape) < 4:
            raise InputError(f"transition tensor needs shape (S, A_1..A_n, S) with n >= 2, got {shape}")
        if shape[0] != shape[-1]:
            raise InputError("transition tensor must map S states to S states")
        if len(self.rewards) != self.n:
            raise InputError(f"{len(self.rewards)} reward tensors for {self.n} agents")
        for i, r in enumerate(self.rewards):
            if r.shape != shape[:-1]:
                raise InputError(f"reward tensor {i} has shape {r.shape}, expected {shape[:-1]}")
            if not np.all(np.isfinite(r)):
                raise InputError(f"reward tensor {i} has non-finite entries")
        if np.any(self.transitions < 0) or not np.allclose(self.transitions.sum(-1), 1.0, atol=1e-12, rtol=0):
            raise InputError("each P(.|s, a) must be a probability distribution")
        if self.initial.shape != (shape[0],) or np.any(self.initial < 0) or abs(self.initial.sum() - 1) > 1e-12:
            raise InputError("initial state distribution must be a distribution over S")
        if not 0.0 <= self.gamma < 1.0:
            raise InputError(f"gamma must lie in [0, 1), got {self.gamma}")

    @property
    def n(self) -> int:
        return self.transitions.ndim - 2

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def action_counts(self) -> tuple:
        return self.transitions.shape[1:-1]

    def zero_logits(self) -> list:
        return [np.zeros((self.n_states, a)) for a in self.action_counts]

    def describe(self) -> dict:
        return {"kind": "tabular", "states": self.n_states, "actions": list(self.action_counts),
                "gamma": self.gamma}


def softmax(logits) -> np.ndarray:
    logits = np.asarray(logits, dtype=float)
    z = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def _broadcast(table, i, n):
    shape = [table.shape[0]] + [1] * n
    shape[1 + i] = table.shape[1]
    return table.reshape(shape)


def joint_policy(tables) -> np.ndarray:
    """pi(a|s) as an (S, A_1, ..., A_n) tensor from per-agent probability tables."""
    n = len(tables)
    out = _broadcast(tables[0], 0, n)
    for i in range(1, n):
        out = out * _broadcast(tables[i], i, n)
    return out


@dataclass
class PolicyEvaluation:
    V: list   # per agent (S,)
    Q: list   # per agent (S, A_1..A_n)
    A: list   # per agent (S, A_1..A_n)
    d: np.ndarray  # normalized discounted occupancy (S,)
    J: np.ndarray  # per-agent return under the initial distribution
    joint: np.ndarray = field(repr=False)


def exact_policy_eval(game: TabularMarkovGame, logits) -> PolicyEvaluation:
    tables = [softmax(l) for l in logits]
    if [t.shape for t in tables] != [(game.n_states, a) for a in game.action_counts]:
        raise InputError("policy tables do not match the game's state and action counts")
    pi = joint_policy(tables)
    axes = tuple(range(1, game.n + 1))
    S = game.n_states
    p_pol = np.einsum("sa,sat->st", pi.reshape(S, -1), game.transitions.reshape(S, -1, S))
    system = np.eye(game.n_states) - game.gamma * p_pol
    if np.linalg.cond(system) > 1e12:
        raise NumericError("policy evaluation system is singular")
    V, Q, A = [], [], []
    for r in game.rewards:
        v = np.linalg.solve(system, (pi * r).sum(axis=axes))
        q = r + game.gamma * game.transitions @ v
        V.append(v)
        Q.append(q)
        A.append(q - v.reshape((-1,) + (1,) * game.n))
    d = (1.0 - game.gamma) * np.linalg.solve(system.T, game.initial)
    J = np.array([game.initial @ v for v in V])
    return PolicyEvaluation(V, Q, A, d, J, pi)


def joint_return(game, logits) -> float:
    """Mean over agents of the exact return; equals the team return in shared-payoff games."""
    return float(exact_policy_eval(game, logits).J.mean())


def kmappo_gradient(game: TabularMarkovGame, logits0, i: int, logits_i=None, logits_others=None,
                    eps_clip: float = 0.2, mode: str = "standard", evaluation=None) -> np.ndarray:
    """Exact expectation of the clipped k-level surrogate gradient for agent i.

    ``logits_others`` is a full list of tables whose entry i is ignored; it
    holds the other agents' level-k policies. The expectation runs over the
    level-0 occupancy and joint policy, and carries the 1/(1 - gamma) factor
    so that with all ratios equal to one it is the exact policy gradient.
    ``mode='standard'`` uses min(r*A, clip(r)*A); ``mode='literal'`` uses
    min(r, clip(r))*A.
    """
    if eps_clip < 0:
        raise InputError(f"eps_clip must be non-negative, got {eps_clip}")
    if mode not in ("standard", "literal"):
        raise InputError(f"unknown surrogate mode {mode!r}")
    ev = evaluation or exact_policy_eval(game, logits0)
    n = game.n
    p0 = [softmax(l) for l in logits0]
    pi_i = p0[i] if logits_i is None else softmax(logits_i)
    others = logits0 if logits_others is None else logits_others
    if any(np.any(p <= 0) for p in p0):
        raise NumericError("level-0 policy assigns zero probability to some action")

    ratio = _broadcast(pi_i / p0[i], i, n)
    for j in range(n):
        if j != i:
            ratio = ratio * _broadcast(softmax(others[j]) / p0[j], j, n)
    ratio = np.broadcast_to(ratio, ev.joint.shape)
    adv = ev.A[i]
    clipped = np.clip(ratio, 1.0 - eps_clip, 1.0 + eps_clip)
    if mode == "standard":
        active = ratio * adv <= clipped * adv
    else:
        active = ratio <= clipped
    # d/dlogits of r = r * (e_{a_i} - pi_i)
    weight = ev.d.reshape((-1,) + (1,) * n) * ev.joint * np.where(active, ratio * adv, 0.0)
    other_axes = tuple(1 + j for j in range(n) if j != i)
    w = weight.sum(axis=other_axes)
    grad = w - pi_i * w.sum(axis=1, keepdims=True)
    return grad / (1.0 - game.gamma)


def ratio_weighted_advantage(game: TabularMarkovGame, logits0, logits_new, i: int, occupancy: str = "new") -> float:
    """1/(1-gamma) * E_{s~d, a~pi0}[r(s,a) A_i^{pi0}(s,a)] with r = pi_new(a|s)/pi0(a|s).

    With the occupancy of the new policy this is exactly J_i(new) - J_i(pi0);
    with ``occupancy='old'`` it is the first-order estimate used in practice.
    """
    ev0 = exact_policy_eval(game, logits0)
    d = ev0.d if occupancy == "old" else exact_policy_eval(game, logits_new).d
    pi_new = joint_policy([softmax(l) for l in logits_new])
    per_state = (pi_new * ev0.A[i]).reshape(game.n_states, -1).sum(axis=1)
    return float(d @ per_state) / (1.0 - game.gamma)


def random_markov_game(states: int, actions, gamma: float, seed: int = 0) -> TabularMarkovGame:
    """Dense random game for tests and examples: Dirichlet transitions, normal rewards."""
    rng = np.random.default_rng(seed)
    shape = (states,) + tuple(actions)
    transitions = rng.dirichlet(np.ones(states), size=shape)
    rewards = [rng.standard_normal(shape) for _ in actions]
    return TabularMarkovGame(transitions, rewards, gamma, rng.dirichlet(np.ones(states)))


def kmaddpg_gradient(game, theta, i: int, theta_others) -> np.ndarray:
    """Deterministic policy gradient of Q_i = J_i with the other agents at their level-k parameters.

    On one-shot differentiable games the exact action value is the reward, so
    this is the game gradient at (theta_i, theta_others_{-i}).
    """
    theta = as_flat(theta, game.dims)
    mixed = as_flat(theta_others, game.dims).copy()
    own = slices(game.dims)[i]
    mixed[own] = theta[own]
    return np.asarray(game.gradient(i, mixed), dtype=float)


@dataclass
class TabularRun:
    curve: np.ndarray   # committed exact return after each update, index 0 = initial policy
    logits: list
    trace: ConvergenceTrace


def kpg_tabular_train(game: TabularMarkovGame, K: int, rates, steps: int, eps_clip: float = 0.2,
                      seed: int = 0, mode: str = "standard", init_scale: float = 0.0,
                      logits=None) -> TabularRun:
    """K-level training of softmax tables with exact K-MAPPO gradients.

    Each update freezes the level-0 tables, runs K levels in which every agent
    steps once from its level-0 logits against the others' level-(k-1)
    tables, and commits level K. Initial logits are zero unless ``logits``
    is given or ``init_scale > 0`` (seeded normal noise).
    """
    if K < 1:
        raise InputError(f"K must be >= 1, got {K}")
    if steps < 1:
        raise InputError(f"steps must be >= 1, got {steps}")
    rates = rates if isinstance(rates, LearningRates) else LearningRates.of(rates, game.n)
    if logits is None:
        rng = np.random.default_rng(seed)
        logits = [init_scale * rng.standard_normal((game.n_states, a)) for a in game.action_counts]
    current = [np.array(l, dtype=float) for l in logits]
    trace = ConvergenceTrace()
    ev = exact_policy_eval(game, current)
    curve = [float(ev.J.mean())]
    trace.append(Row(0, 0, None, 0.0, None, None, curve[0]))
    for t in range(1, steps + 1):
        level0 = current
        ev0 = exact_policy_eval(game, level0)
        prev = level0
        for k in range(1, K + 1):
            nxt = [level0[j] + rates.eta[j] * kmappo_gradient(game, level0, j, None, prev, eps_clip, mode, ev0)
                   for j in range(game.n)]
            step = float(np.sqrt(sum(np.sum((a - b) ** 2) for a, b in zip(nxt, prev))))
            ret = joint_return(game, nxt)
            trace.append(Row(t, k, None, step, None, None, ret))
            prev = nxt
        current = prev
        curve.append(trace.rows[-1].ret)
    return TabularRun(np.array(curve), current, trace)
