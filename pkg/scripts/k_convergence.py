"""Within-update distances over reasoning levels k, near the optimum of either analytic game.

For a few starts at a fixed radius, prints dist_star(k) and the distance to the
update's own k -> infinity limit, and writes a k-convergence SVG per start.
"""
import argparse
from pathlib import Path

import numpy as np

from kpg_lab import svg
from kpg_lab.checks import gsppm_distances
from kpg_lab.engine import kpg_update
from kpg_lab.games import MeetupGame, two_player_quadratic


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--game", choices=("meetup", "quadratic"), default="meetup")
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--radius", type=float, default=1e-2)
    p.add_argument("--starts", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out/k_convergence")
    args = p.parse_args()

    game = MeetupGame() if args.game == "meetup" else two_player_quadratic(0.5)
    eta = args.eta if args.eta is not None else (0.3 if args.game == "meetup" else 0.1)
    star = game.optimum
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    for s in range(args.starts):
        d = rng.standard_normal(2)
        theta = star + args.radius * d / np.linalg.norm(d)
        _, trace = kpg_update(game, theta, eta, args.K, theta_star=star, with_returns=False)
        doc, ks, ds = svg.k_convergence(trace)
        (out / f"{args.game}_start{s}.svg").write_text(doc)
        limit = gsppm_distances(game, theta, eta, args.K)
        print(f"start {s}")
        print("  k  dist_star        dist_to_limit")
        for k, a, b in zip(ks, ds, limit):
            print(f"  {k:<2d} {a:.10e} {b:.10e}")


if __name__ == "__main__":
    main()
