"""Parameter-recovery experiment on a trained VLM.

Simulates the full grid once, then draws synthetic participants from known
cells and checks how often the grid-search fit lands on or next to the
generating cell.

    python3 scripts/recovery.py runs/vlm/weights.txt --participants 10
"""
import argparse
import time

import numpy as np

from pedcross import env as E
from pedcross.evaluate import simulate_grid
from pedcross.fitting import fit_participant
from pedcross.io import TrialRecord, load_weights
from pedcross.learner import ParamGrid, Variant


def main(argv=None):
    ap = argparse.ArgumentParser(description="grid-search parameter recovery")
    ap.add_argument("weights")
    ap.add_argument("--participants", type=int, default=10)
    ap.add_argument("--reps", type=int, default=5, help="trials per scenario and participant")
    ap.add_argument("--grid-reps", type=int, default=30)
    ap.add_argument("--seed", type=int, default=2023)
    args = ap.parse_args(argv)

    net = load_weights(args.weights)
    if net.variant != Variant.VLM.value:
        ap.error(f"recovery needs VLM weights, got {net.variant}")
    world = E.WorldConfig()
    catalog = E.build_catalog(world)
    grid = ParamGrid.full()

    t0 = time.perf_counter()
    samples = simulate_grid(net, catalog, grid, args.grid_reps, world, seed=11,
                            variant=Variant.VLM)
    print(f"grid samples: {time.perf_counter() - t0:.1f}s")

    rng = np.random.default_rng(args.seed)
    cells = grid.cells()
    picks = rng.choice(len(cells), args.participants, replace=False)
    dist = []
    for k, idx in enumerate(picks):
        sv, c = cells[idx]
        own = simulate_grid(net, catalog, ParamGrid((sv,), (c,)), args.reps, world,
                            seed=1000 + k, variant=Variant.VLM)
        trials = [TrialRecord(f"p{k}", r.scenario_id, r.cit) for r in own.trials
                  if r.cit is not None and r.cit > 0]
        fit = fit_participant(samples, trials, grid)
        d = max(abs(grid.sigma_v_values.index(fit.sigma_v) - grid.sigma_v_values.index(sv)),
                abs(grid.c_values.index(fit.c) - grid.c_values.index(c)))
        dist.append(d)
        print(f"p{k}: true ({sv:g}, {c:g}) fit ({fit.sigma_v:g}, {fit.c:g}) "
              f"steps {d} n={len(trials)}")
    dist = np.array(dist)
    print(f"exact {np.mean(dist == 0):.2f}, within one step {np.mean(dist <= 1):.2f}")


if __name__ == "__main__":
    main()
