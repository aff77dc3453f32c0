"""Meet-up game: K-level training from (0, pi) for several K, with and without momentum.

Writes one trace CSV and trajectory SVG per run plus a first-passage table.
"""
import argparse
import math
from pathlib import Path

from kpg_lab import svg
from kpg_lab.engine import OptimizerState, first_passage, train
from kpg_lab.games import MeetupGame
from kpg_lab.theory import estimate_constants
from kpg_lab.traceio import write_params, write_trace


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out/meetup")
    p.add_argument("--eta", type=float, default=0.3)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--levels", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--optimizer", choices=("plain", "momentum", "rmsprop"), default="momentum")
    args = p.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    game = MeetupGame()
    constants = estimate_constants(game, samples=10_000, seed=0)
    print(f"L_hat={constants.L:.5f} grad_max={constants.grad_max:.5f} eta_limit={constants.eta_limit(2):.3f}")
    print("K  first_passage(1e-3)  final_dist")
    for K in args.levels:
        opt = OptimizerState(args.optimizer, [1, 1])
        trace = train(game, [0.0, math.pi], args.eta, K, args.steps, opt, game.optimum, constants)
        stem = out / f"meetup_K{K}_{args.optimizer}"
        write_trace(trace, stem.with_suffix(".trace.csv"))
        write_params(trace, stem.with_suffix(".params.csv"))
        stem.with_suffix(".trajectory.svg").write_text(svg.trajectory(trace, trace.params))
        final = game.distance(trace.final_params(), game.optimum)
        print(f"{K}  {first_passage(trace, 1e-3)}  {final:.3e}")


if __name__ == "__main__":
    main()
