"""Experiment configuration: JSON parsing, validation with line references, defaults and game construction."""
from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import InputError
from .engine import OPTIMIZER_KINDS, OptimizerState
from .games import MeetupGame, QuadraticGame, matrix_game_make, two_player_quadratic
from .trace import LearningRates

ALGOS = ("kpg", "gsppm", "tabular-kmappo")
GAME_KEYS = {
    "meetup": {"kind", "iota1", "iota2"},
    "quadratic": {"kind", "c", "p", "P", "M"},
    "matrix": {"kind", "payoffs", "shared"},
}
TOP_KEYS = {"game", "algo", "K", "eta", "optimizer", "steps", "theta0", "theta_star", "tol", "k_max",
            "eps_clip", "surrogate", "init_scale", "samples", "seed", "out", "verify"}
OPTIMIZER_KEYS = {"kind", "momentum", "decay", "eps"}
VERIFY_KEYS = {"starts", "K", "radius", "max_updates", "target", "samples"}


class ConfigError(InputError):
    pass


@dataclass
class VerifySettings:
    starts: int = 100
    K: int = 10
    radius: float = 1e-2
    max_updates: int = 10_000
    target: float = 1e-6
    samples: int = 10_000


@dataclass
class ExperimentConfig:
    game: dict
    algo: str = "kpg"
    K: int | None = None
    eta: list = field(default_factory=lambda: [0.1])
    optimizer: dict = field(default_factory=lambda: {"kind": "plain", "momentum": 0.9, "decay": 0.99, "eps": 1e-8})
    steps: int = 100
    theta0: list | None = None
    theta_star: list | str | None = "auto"
    tol: float = 1e-12
    k_max: int = 1000
    eps_clip: float = 0.2
    surrogate: str = "standard"
    init_scale: float = 0.0
    samples: int = 10_000
    seed: int = 0
    out: str | None = None
    verify: VerifySettings = field(default_factory=VerifySettings)

    @property
    def tabular(self) -> bool:
        return self.game["kind"] == "matrix"

    def build_game(self):
        return build_game(self.game)

    def rates(self, n: int) -> LearningRates:
        return LearningRates.of(self.eta[0] if len(self.eta) == 1 else self.eta, n)

    def make_optimizer(self, dims) -> OptimizerState:
        o = self.optimizer
        return OptimizerState(o["kind"], list(dims), o["momentum"], o["decay"], o["eps"])

    def initial_theta(self, game) -> np.ndarray:
        if self.theta0 is not None:
            return np.asarray(self.theta0, dtype=float)
        return game.sample(np.random.default_rng(self.seed))

    def reference(self, game):
        if self.theta_star is None:
            return None
        if self.theta_star == "auto":
            return getattr(game, "optimum", None)
        return np.asarray(self.theta_star, dtype=float)

    def to_dict(self) -> dict:
        return asdict(self)


def build_game(spec: dict):
    kind = spec["kind"]
    if kind == "meetup":
        return MeetupGame(spec.get("iota1", (0.0, 0.0)), spec.get("iota2", (3.0, 2.0)))
    if kind == "quadratic":
        if "P" in spec:
            return QuadraticGame(spec["P"], spec["M"])
        return two_player_quadratic(spec.get("c", 0.5), spec.get("p", -1.0))
    return matrix_game_make(spec["payoffs"], spec.get("shared", True))


def _line_of(text: str, key: str) -> int:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return 1 if m is None else text.count("\n", 0, m.start()) + 1


class _Validator:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source

    def fail(self, key: str, message: str):
        raise ConfigError(f"{self.source}:{_line_of(self.text, key)}: {message}")

    def keys(self, obj: dict, allowed: set, where: str):
        for k in obj:
            if k not in allowed:
                self.fail(k, f"unknown key '{k}' in {where}")

    def number(self, obj, key, default, kind=float, positive=False, minimum=None):
        if key not in obj:
            return default
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and not isinstance(v, int)):
            self.fail(key, f"'{key}' must be {'an integer' if kind is int else 'a number'}, got {v!r}")
        if not math.isfinite(v):
            self.fail(key, f"'{key}' must be finite")
        if positive and not v > 0:
            self.fail(key, f"'{key}' must be positive, got {v!r}")
        if minimum is not None and v < minimum:
            self.fail(key, f"'{key}' must be >= {minimum}, got {v!r}")
        return kind(v)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    v = _Validator(text, source)
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}:1: top level must be a JSON object")
    v.keys(raw, TOP_KEYS, "config")
    if "game" not in raw:
        raise ConfigError(f"{source}:1: missing required key 'game'")
    game = raw["game"]
    if not isinstance(game, dict) or game.get("kind") not in GAME_KEYS:
        v.fail("game", f"'game.kind' must be one of {sorted(GAME_KEYS)}")
    v.keys(game, GAME_KEYS[game["kind"]], f"game of kind '{game['kind']}'")
    if game["kind"] == "matrix" and "payoffs" not in game:
        v.fail("game", "matrix game needs 'payoffs'")
    if game["kind"] == "quadratic" and ("P" in game) != ("M" in game):
        v.fail("game", "quadratic game needs both 'P' and 'M' when either is given")

    algo = raw.get("algo", "tabular-kmappo" if game["kind"] == "matrix" else "kpg")
    if algo not in ALGOS:
        v.fail("algo", f"'algo' must be one of {list(ALGOS)}, got {algo!r}")
    if (algo == "tabular-kmappo") != (game["kind"] == "matrix"):
        v.fail("algo", f"algo '{algo}' does not fit game kind '{game['kind']}'")
    if algo != "gsppm" and "K" not in raw:
        raise ConfigError(f"{source}:1: missing required key 'K' (needed by algo '{algo}')")
    K = v.number(raw, "K", None, int, minimum=1)

    eta = raw.get("eta", 0.1)
    eta = eta if isinstance(eta, list) else [eta]
    if not eta or any(isinstance(e, bool) or not isinstance(e, (int, float)) or not e > 0 for e in eta):
        v.fail("eta", f"'eta' must be a positive number or list of positive numbers, got {raw.get('eta')!r}")

    opt = dict(raw.get("optimizer", {}))
    v.keys(opt, OPTIMIZER_KEYS, "optimizer")
    if opt.get("kind", "plain") not in OPTIMIZER_KINDS:
        v.fail("optimizer", f"optimizer kind must be one of {list(OPTIMIZER_KINDS)}")
    optimizer = {
        "kind": opt.get("kind", "plain"),
        "momentum": v.number(opt, "momentum", 0.9, minimum=0.0),
        "decay": v.number(opt, "decay", 0.99, minimum=0.0),
        "eps": v.number(opt, "eps", 1e-8, positive=True),
    }
    if optimizer["momentum"] >= 1 or optimizer["decay"] >= 1:
        v.fail("optimizer", "momentum and decay must be below 1")
    if algo == "tabular-kmappo" and optimizer["kind"] != "plain":
        v.fail("optimizer", "tabular-kmappo supports only the plain optimizer")

    ver = raw.get("verify", {})
    if not isinstance(ver, dict):
        v.fail("verify", "'verify' must be an object")
    v.keys(ver, VERIFY_KEYS, "verify")
    verify = VerifySettings(
        starts=v.number(ver, "starts", 100, int, minimum=1),
        K=v.number(ver, "K", 10, int, minimum=1),
        radius=v.number(ver, "radius", 1e-2, positive=True),
        max_updates=v.number(ver, "max_updates", 10_000, int, minimum=1),
        target=v.number(ver, "target", 1e-6, positive=True),
        samples=v.number(ver, "samples", 10_000, int, minimum=2),
    )

    surrogate = raw.get("surrogate", "standard")
    if surrogate not in ("standard", "literal"):
        v.fail("surrogate", "'surrogate' must be 'standard' or 'literal'")
    theta_star = raw.get("theta_star", "auto")
    if not (theta_star is None or theta_star == "auto" or isinstance(theta_star, list)):
        v.fail("theta_star", "'theta_star' must be a list, \"auto\" or null")
    theta0 = raw.get("theta0")
    if theta0 is not None and not isinstance(theta0, list):
        v.fail("theta0", "'theta0' must be a list")

    cfg = ExperimentConfig(
        game=dict(game),
        algo=algo,
        K=K,
        eta=[float(e) for e in eta],
        optimizer=optimizer,
        steps=v.number(raw, "steps", 100, int, minimum=1),
        theta0=theta0,
        theta_star=theta_star,
        tol=v.number(raw, "tol", 1e-12, positive=True),
        k_max=v.number(raw, "k_max", 1000, int, minimum=1),
        eps_clip=v.number(raw, "eps_clip", 0.2, minimum=0.0),
        surrogate=surrogate,
        init_scale=v.number(raw, "init_scale", 0.0, minimum=0.0),
        samples=v.number(raw, "samples", 10_000, int, minimum=2),
        seed=v.number(raw, "seed", 0, int),
        out=raw.get("out"),
        verify=verify,
    )
    # preconditions of the modules, checked before any computation
    try:
        game_obj = cfg.build_game()
        n = game_obj.n
        cfg.rates(n)
        if not cfg.tabular:
            if theta0 is not None and len(theta0) != game_obj.total_dim:
                v.fail("theta0", f"'theta0' needs {game_obj.total_dim} entries")
            if isinstance(theta_star, list) and len(theta_star) != game_obj.total_dim:
                v.fail("theta_star", f"'theta_star' needs {game_obj.total_dim} entries")
    except ConfigError:
        raise
    except (InputError, ValueError, TypeError) as exc:
        v.fail("game", f"invalid game or rates: {exc}")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    return parse_config(text, str(path))
