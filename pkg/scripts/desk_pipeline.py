"""Run train -> simulate -> fit -> report through the CLI for one config.

    python3 scripts/desk_pipeline.py scripts/desk_vlm.cfg --out runs/vlm --seed 0

Synthetic trials from the simulation stand in for human data, so the fit
stage needs ``synthesize_trials = true`` unless the config names a trials CSV.
"""
import argparse
import sys
import time
from pathlib import Path

from pedcross.cli import main


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    cfg_text = Path(args.config).read_text(encoding="utf-8")
    if "trials" not in {line.split("=")[0].strip() for line in cfg_text.splitlines()}:
        fit_cfg = out / "fit.cfg"
        fit_cfg.write_text(cfg_text + f"\ntrials = {out / 'trials.csv'}\n", encoding="utf-8")
    else:
        fit_cfg = Path(args.config)

    stages = [("train", args.config), ("simulate", args.config),
              ("fit", str(fit_cfg)), ("report", str(fit_cfg))]
    for cmd, cfg in stages:
        t0 = time.perf_counter()
        code = main([cmd, "--config", cfg, "--seed", str(args.seed), "--out", str(out), "-v"])
        print(f"{cmd}: exit {code} in {time.perf_counter() - t0:.1f}s", flush=True)
        if code not in (0, 3):  # 3 = trained but below min_final_reward
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
