"""Exact K-MAPPO learning curves on a matrix game or a random Markov game, for several K."""
import argparse
from pathlib import Path

from kpg_lab import svg
from kpg_lab.games import matrix_game_make
from kpg_lab.tabular import kpg_tabular_train, random_markov_game
from kpg_lab.traceio import write_trace


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--game", choices=("coordination", "random"), default="coordination")
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--levels", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--eps-clip", type=float, default=0.2)
    p.add_argument("--surrogate", choices=("standard", "literal"), default="standard")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out/tabular")
    args = p.parse_args()

    if args.game == "coordination":
        game = matrix_game_make([[4.0, 0.0], [0.0, 2.0]])
    else:
        game = random_markov_game(4, (3, 3), 0.9, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    print("K  return[0]  return[-1]")
    for K in args.levels:
        run = kpg_tabular_train(game, K, args.eta, args.steps, args.eps_clip, args.seed, args.surrogate)
        stem = out / f"{args.game}_K{K}"
        write_trace(run.trace, stem.with_suffix(".trace.csv"))
        stem.with_suffix(".svg").write_text(svg.learning_curve(run.trace)[0])
        print(f"{K}  {run.curve[0]:.5f}  {run.curve[-1]:.5f}")


if __name__ == "__main__":
    main()
