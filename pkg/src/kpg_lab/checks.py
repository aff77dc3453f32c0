"""Empirical checks of the step bound, the GSPPM contraction certificate and the finite-k distance bound."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import as_flat
from .engine import gsppm_solve, kpg_update
from .theory import (GameConstants, assemble_blocks, estimate_constants, gsppm_ratio, spectral_extremes,
                     theorem3_bound)
from .trace import ConvergenceTrace, LearningRates, Row


@dataclass
class SuiteResult:
    theorem: int
    status: str  # PASS, FAIL or SKIPPED
    checked: int
    violations: int
    trace: ConvergenceTrace = field(default_factory=ConvergenceTrace)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status != "FAIL"

    def summary_line(self) -> str:
        return f"THEOREM {self.theorem} {self.status} checked={self.checked} violations={self.violations}"


def _ball_starts(game, center, radius, count, rng):
    """Points at distance exactly ``radius`` from center in random directions."""
    out = []
    for _ in range(count):
        d = rng.standard_normal(game.total_dim)
        out.append(center + radius * d / np.linalg.norm(d))
    return out


def theorem1_suite(game, rates, constants: GameConstants | None = None, starts: int = 100, K: int = 10,
                   seed: int = 0, samples: int = 10_000) -> SuiteResult:
    """Every measured ||theta^(k) - theta^(k-1)|| must sit below the step bound; no tolerance."""
    rates = LearningRates.of(rates, game.n)
    constants = constants or estimate_constants(game, samples=samples, seed=seed)
    limit = constants.eta_limit(game.n)
    details = {"L": constants.L, "grad_max": constants.grad_max, "eta_max": rates.eta_max, "eta_limit": limit}
    if not rates.eta_max < limit:
        details["reason"] = "eta_max >= 1/(L (n-1))"
        return SuiteResult(1, "SKIPPED", 0, 0, details=details)
    rng = np.random.default_rng(seed)
    trace = ConvergenceTrace()
    checked = violations = 0
    for s in range(starts):
        _, part = kpg_update(game, game.sample(rng), rates, K, constants=constants, update=s, with_returns=False)
        for row in part.joint():
            if row.k == 0:
                continue
            checked += 1
            violations += row.step_dist > row.bound_t1
        trace.extend(part)
    return SuiteResult(1, "PASS" if violations == 0 else "FAIL", checked, violations, trace, details)


def theorem2_suite(game, theta_star, rates, radius: float = 1e-2, starts: int = 20, max_updates: int = 10_000,
                   target: float = 1e-6, seed: int = 0, tol: float = 1e-14, step_slack: float = 1e-6) -> SuiteResult:
    """GSPPM updates from a ball around theta* must reach ``target``; squared-distance contraction is checked per update.

    The per-update check is r_{t+1}^2 <= ratio * r_t^2 (+ slack), the form the
    linearized argument actually bounds.
    """
    rates = LearningRates.of(rates, game.n)
    theta_star = as_flat(theta_star, game.dims)
    blocks = assemble_blocks(game, theta_star, rates)
    ratio = gsppm_ratio(blocks)
    details = {"ratio": ratio}
    if not ratio < 1.0:
        details["reason"] = "contraction ratio >= 1"
        return SuiteResult(2, "SKIPPED", 0, 0, details=details)
    rng = np.random.default_rng(seed)
    trace = ConvergenceTrace()
    checked = violations = 0
    worst_updates = 0
    for s, theta in enumerate(_ball_starts(game, theta_star, radius, starts, rng)):
        r = game.distance(theta, theta_star)
        reached = False
        for t in range(1, max_updates + 1):
            res = gsppm_solve(game, theta, rates, tol)
            r_next = game.distance(res.theta, theta_star)
            checked += 1
            bad = r_next > math.sqrt(ratio) * r + step_slack or not res.converged
            violations += bad
            trace.append(Row(s, t, None, float(np.linalg.norm(res.theta - theta)), r_next, math.sqrt(ratio) * r))
            theta, r = res.theta, r_next
            if r < target:
                reached = True
                worst_updates = max(worst_updates, t)
                break
        checked += 1
        violations += not reached
    details["max_updates_used"] = worst_updates
    return SuiteResult(2, "PASS" if violations == 0 else "FAIL", checked, violations, trace, details)


def theorem3_suite(game, theta_star, rates, constants: GameConstants | None = None, radius: float = 1e-2,
                   starts: int = 20, K: int = 10, seed: int = 0, samples: int = 10_000) -> SuiteResult:
    """Within one update, dist_star(k)^2 must respect the finite-k bound with r_prev = dist_star(k-1)."""
    rates = LearningRates.of(rates, game.n)
    theta_star = as_flat(theta_star, game.dims)
    constants = constants or estimate_constants(game, samples=samples, seed=seed)
    blocks = assemble_blocks(game, theta_star, rates)
    probe = theorem3_bound(blocks, 1.0, 1.0, constants.grad_max)
    details = {"coupling_norm": spectral_extremes(blocks.coupling)[0], "grad_max": constants.grad_max}
    if not probe.converges:
        details["reason"] = "sigma_max(eta B D)^2 >= 1"
        return SuiteResult(3, "SKIPPED", 0, 0, details=details)
    rng = np.random.default_rng(seed)
    trace = ConvergenceTrace()
    checked = violations = cross_dominated = 0
    for s, theta in enumerate(_ball_starts(game, theta_star, radius, starts, rng)):
        _, part = kpg_update(game, theta, rates, K, theta_star=theta_star, update=s, with_returns=False)
        joint = part.joint()
        r0 = joint[0].dist_star
        for prev, row in zip(joint, joint[1:]):
            b = theorem3_bound(blocks, r0, prev.dist_star, constants.grad_max)
            row.bound_t1 = math.sqrt(b.value)
            checked += 1
            violations += row.dist_star ** 2 > b.value
            cross_dominated += b.dominated_by_cross
        trace.extend(part)
    details["cross_term_dominated"] = cross_dominated
    return SuiteResult(3, "PASS" if violations == 0 else "FAIL", checked, violations, trace, details)


def monotone_levels(game, theta_star, rates, starts, K: int = 10, tol: float = 1e-9):
    """Count starts whose within-update dist_star(k) ever increases by more than ``tol``.

    Returns (violating_starts, per-start dist_star arrays).
    """
    rates = LearningRates.of(rates, game.n)
    theta_star = as_flat(theta_star, game.dims)
    curves = []
    bad = 0
    for theta in starts:
        _, part = kpg_update(game, theta, rates, K, theta_star=theta_star, with_returns=False)
        d = part.column("dist_star")
        curves.append(d)
        bad += bool(np.any(np.diff(d) > tol))
    return bad, curves


def gsppm_distances(game, theta, rates, K: int = 10, tol: float = 1e-14):
    """Within-update distances ||theta^(k) - theta^(inf)|| for k = 0..K."""
    rates = LearningRates.of(rates, game.n)
    theta = as_flat(theta, game.dims)
    limit = gsppm_solve(game, theta, rates, tol).theta
    _, part = kpg_update(game, theta, rates, K, theta_star=limit, with_returns=False)
    return part.column("dist_star")
