"""K-level policy gradient updates, the GSPPM fixed-point solver and training loops."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .core import InputError, NumericError, as_flat, slices
from .theory import GameConstants, theorem1_bound
from .trace import ConvergenceTrace, LearningRates, Row

OPTIMIZER_KINDS = ("plain", "momentum", "rmsprop")


@dataclass
class OptimizerState:
    """Per-agent ascent optimizer whose statistics can be snapshotted and restored.

    ``plain`` steps eta*g; ``momentum`` keeps v <- mu*v + g and steps eta*v;
    ``rmsprop`` keeps s <- rho*s + (1-rho)*g^2 and steps eta*g/(sqrt(s)+eps).
    """

    kind: str = "plain"
    dims: list = field(default_factory=list)
    momentum: float = 0.9
    decay: float = 0.99
    eps: float = 1e-8
    accum: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise InputError(f"unknown optimizer kind {self.kind!r}; expected one of {OPTIMIZER_KINDS}")
        if not 0.0 <= self.momentum < 1.0 or not 0.0 <= self.decay < 1.0 or self.eps <= 0:
            raise InputError("optimizer hyperparameters out of range")
        if not self.accum and self.kind != "plain":
            self.accum = [np.zeros(d) for d in self.dims]

    def snapshot(self) -> list:
        return copy.deepcopy(self.accum)

    def restore(self, snap: list):
        self.accum = copy.deepcopy(snap)

    def step(self, i: int, grad: np.ndarray, eta: float) -> np.ndarray:
        if self.kind == "plain":
            return eta * grad
        if self.kind == "momentum":
            self.accum[i] = self.momentum * self.accum[i] + grad
            return eta * self.accum[i]
        self.accum[i] = self.decay * self.accum[i] + (1.0 - self.decay) * grad ** 2
        return eta * grad / (np.sqrt(self.accum[i]) + self.eps)

    def hyperparameters(self) -> dict:
        return {"kind": self.kind, "momentum": self.momentum, "decay": self.decay, "eps": self.eps}


def _plain(game):
    return OptimizerState("plain", list(game.dims))


def _level(game, theta, anchor_others, rates, opt, k):
    """One Jacobi level: every agent steps from theta against anchor_others."""
    out = theta.copy()
    grads = []
    for i, own in enumerate(slices(game.dims)):
        mixed = anchor_others.copy()
        mixed[own] = theta[own]
        g = np.asarray(game.gradient(i, mixed), dtype=float)
        if g.shape != (own.stop - own.start,) or not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient at level k={k} for agent {i}")
        grads.append(g)
    with np.errstate(over="ignore", invalid="ignore"):
        for i, own in enumerate(slices(game.dims)):
            out[own] = theta[own] + opt.step(i, grads[i], rates.eta[i])
    if not np.all(np.isfinite(out)):
        raise NumericError(f"parameters overflowed at level k={k}")
    return out


def _rows(game, update, k, level, prev, theta_star, bound, with_returns):
    dist = None if theta_star is None else game.distance(level, theta_star)
    rets = None
    if with_returns:
        with np.errstate(over="ignore", invalid="ignore"):
            rets = [game.objective(i, level) for i in range(game.n)]
        if not np.all(np.isfinite(rets)):
            raise NumericError(f"non-finite objective at level k={k}")
    step = float(np.linalg.norm(level - prev))
    out = [Row(update, k, None, step, dist, bound, None if rets is None else float(np.mean(rets)))]
    for i, own in enumerate(slices(game.dims)):
        out.append(Row(
            update, k, i,
            float(np.linalg.norm(level[own] - prev[own])),
            None if theta_star is None else float(np.linalg.norm(game.displacement(level[own], theta_star[own]))),
            None,
            None if rets is None else rets[i],
        ))
    return out


def kpg_update(game, theta, rates, K: int, opt: OptimizerState | None = None, theta_star=None,
               constants: GameConstants | None = None, update: int = 0, with_returns: bool = True):
    """Run K reasoning levels from theta and return (theta^(K), trace of this update).

    Every level restarts from the same theta; only the other agents' parameters
    advance with k. Optimizer statistics are restored to their pre-update
    snapshot before each level, so only the final level's step advances them.
    """
    if K < 1:
        raise InputError(f"K must be >= 1, got {K}")
    theta = as_flat(theta, game.dims)
    rates = LearningRates.of(rates, game.n)
    opt = opt or _plain(game)
    theta_star = None if theta_star is None else as_flat(theta_star, game.dims)
    trace = ConvergenceTrace()
    trace.rows.extend(_rows(game, update, 0, theta, theta, theta_star, None, with_returns))
    trace.params.append((update, 0, theta.copy()))
    snap = opt.snapshot()
    prev = theta
    for k in range(1, K + 1):
        opt.restore(snap)
        level = _level(game, theta, prev, rates, opt, k)
        bound = None if constants is None else theorem1_bound(k, rates.eta_max, constants.L, game.n, constants.grad_max)
        trace.rows.extend(_rows(game, update, k, level, prev, theta_star, bound, with_returns))
        trace.params.append((update, k, level.copy()))
        prev = level
    return prev, trace


@dataclass
class GSPPMResult:
    theta: np.ndarray
    converged: bool
    k_used: int
    step_dists: list


def gsppm_solve(game, theta, rates, tol: float = 1e-12, k_max: int = 1000) -> GSPPMResult:
    """Iterate reasoning levels until consecutive levels agree to ``tol`` in max-norm.

    Hitting ``k_max`` is reported through ``converged=False``, not raised.
    """
    if tol <= 0:
        raise InputError(f"tol must be positive, got {tol}")
    if k_max < 1:
        raise InputError(f"k_max must be >= 1, got {k_max}")
    theta = as_flat(theta, game.dims)
    rates = LearningRates.of(rates, game.n)
    opt = _plain(game)
    prev = theta
    steps = []
    for k in range(1, k_max + 1):
        level = _level(game, theta, prev, rates, opt, k)
        steps.append(float(np.linalg.norm(level - prev)))
        if k > 1 and np.max(np.abs(level - prev)) < tol:
            return GSPPMResult(level, True, k, steps)
        prev = level
    return GSPPMResult(prev, False, k_max, steps)


def gsppm_residual(game, theta, theta_inf, rates) -> float:
    """Max-norm residual of theta_inf = theta + eta * grad J(theta_i, theta_inf_{-i})."""
    theta = as_flat(theta, game.dims)
    theta_inf = as_flat(theta_inf, game.dims)
    rates = LearningRates.of(rates, game.n)
    implied = _level(game, theta, theta_inf, rates, _plain(game), 0)
    return float(np.max(np.abs(implied - theta_inf)))


def train(game, theta0, rates, K: int, steps: int, opt: OptimizerState | None = None, theta_star=None,
          constants: GameConstants | None = None, algo: str = "kpg", tol: float = 1e-12,
          k_max: int = 1000) -> ConvergenceTrace:
    """Apply ``steps`` updates, committing theta <- theta^(K) (or the GSPPM limit) each time."""
    if steps < 1:
        raise InputError(f"steps must be >= 1, got {steps}")
    if algo not in ("kpg", "gsppm"):
        raise InputError(f"unknown algorithm {algo!r}")
    rates = LearningRates.of(rates, game.n)
    opt = opt or _plain(game)
    theta = as_flat(theta0, game.dims)
    theta_star = None if theta_star is None else as_flat(theta_star, game.dims)
    trace = ConvergenceTrace()
    for t in range(1, steps + 1):
        try:
            if algo == "kpg":
                theta, part = kpg_update(game, theta, rates, K, opt, theta_star, constants, update=t)
                trace.extend(part)
            else:
                start = theta
                res = gsppm_solve(game, theta, rates, tol, k_max)
                theta = res.theta
                part = ConvergenceTrace()
                part.rows.extend(_rows(game, t, res.k_used, theta, start, theta_star, None, True))
                part.params.append((t, res.k_used, theta.copy()))
                trace.extend(part)
        except NumericError as exc:
            raise NumericError(f"update {t}: {exc}") from exc
    return trace


def first_passage(trace: ConvergenceTrace, radius: float, k: int | None = None):
    """First update index whose committed level is within ``radius`` of theta*; None if never."""
    joint = trace.joint()
    last_k = {}
    for r in joint:
        last_k[r.update] = max(last_k.get(r.update, 0), r.k)
    for r in joint:
        if r.k == (last_k[r.update] if k is None else k) and r.dist_star is not None and r.dist_star < radius:
            return r.update
    return None
