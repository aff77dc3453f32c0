"""Learning rates and per-level trace records shared by the training loops."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import InputError, slices

COLUMNS = ("update", "k", "agent", "step_dist", "dist_star", "bound_t1", "return")


@dataclass(frozen=True)
class LearningRates:
    eta: tuple

    def __post_init__(self):
        eta = tuple(float(e) for e in self.eta)
        if not eta or any(not (e > 0) or not np.isfinite(e) for e in eta):
            raise InputError(f"learning rates must be positive and finite, got {list(eta)}")
        object.__setattr__(self, "eta", eta)

    @classmethod
    def of(cls, eta, n: int) -> "LearningRates":
        if isinstance(eta, LearningRates):
            return eta
        if np.isscalar(eta):
            return cls((float(eta),) * n)
        if len(eta) != n:
            raise InputError(f"{len(eta)} learning rates for {n} agents")
        return cls(tuple(eta))

    @property
    def eta_max(self) -> float:
        return max(self.eta)

    def per_coordinate(self, dims: Sequence[int]) -> np.ndarray:
        out = np.empty(sum(dims))
        for e, s in zip(self.eta, slices(dims)):
            out[s] = e
        return out


@dataclass
class Row:
    update: int
    k: int
    agent: Optional[int]
    step_dist: float
    dist_star: Optional[float] = None
    bound_t1: Optional[float] = None
    ret: Optional[float] = None


@dataclass
class ConvergenceTrace:
    rows: list = field(default_factory=list)
    # (update, k, flat parameters) for every level, used by trajectory plots
    params: list = field(default_factory=list)

    def append(self, row: Row):
        if self.rows:
            last = self.rows[-1]
            if (row.update, row.k) < (last.update, last.k):
                raise ValueError("trace rows must be ordered by (update, k)")
        if row.step_dist < 0:
            raise ValueError("step_dist must be non-negative")
        self.rows.append(row)

    def extend(self, other: "ConvergenceTrace"):
        for r in other.rows:
            self.append(r)
        self.params.extend(other.params)

    def joint(self) -> list:
        return [r for r in self.rows if r.agent is None]

    def column(self, name: str, update: int | None = None) -> np.ndarray:
        rows = [r for r in self.joint() if update is None or r.update == update]
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in rows])

    def final_params(self) -> np.ndarray:
        return self.params[-1][2]
