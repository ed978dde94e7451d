"""Command line: ``pedcross {train,simulate,fit,report} --config C --seed S --out DIR``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import env as E
from . import io as pio
from .evaluate import (CitSampleSet, empirical_cdf, gap_acceptance_rate, ks_statistic, mad,
                       simulate_grid)
from .fitting import aic, fit_all, fit_pooled
from .learner import ParamGrid, TrainConfig, Variant, train_variant
from .perception import PerceptionConfig

log = logging.getLogger("pedcross")

WEIGHTS_FILE = "weights.txt"
REWARD_LOG_FILE = "reward_log.csv"
CIT_FILE = "cit_samples.csv"
METRICS_FILE = "metrics.json"
SYNTH_TRIALS_FILE = "trials.csv"
FITS_FILE = "fits.csv"
AIC_FILE = "aic.json"


def _dump_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def grid_from(cfg: pio.ExperimentConfig, variant: Variant) -> ParamGrid | None:
    """Configured grid restricted to the variant's conditioning inputs; None
    when a conditioned variant has no grid."""
    if variant == Variant.BM:
        return ParamGrid()
    if cfg.grid in ("full", "full10"):
        base = ParamGrid.full(inclusive=cfg.grid == "full")
    elif cfg.grid:
        raise pio.InputError(f"unknown grid {cfg.grid!r}")
    else:
        base = None
    sv = cfg.sigma_v_values or (base.sigma_v_values if base else None)
    cv = cfg.c_values or (base.c_values if base else None)
    if (variant.noisy and not sv) or (variant.looming and not cv):
        return None
    return ParamGrid(tuple(sv or (0.0,)), tuple(cv or (0.0,))).for_variant(variant)


def train_config_from(cfg: pio.ExperimentConfig, variant: Variant, seed: int) -> TrainConfig:
    """The profile fixes the network size (and, for ``paper``, the episode
    count); other ``train.`` keys override the profile defaults."""
    overrides = dict(cfg.train)
    overrides["seed"] = seed
    fixed = ("hidden", "episodes") if cfg.profile == "paper" else ("hidden",)
    for key in fixed:
        if key in overrides:
            log.warning("train.%s is fixed by the %s profile; ignoring it", key, cfg.profile)
            overrides.pop(key)
    if cfg.profile == "paper":
        return TrainConfig.full(variant, **overrides)
    return TrainConfig.desk(variant, **overrides)


def cmd_train(cfg: pio.ExperimentConfig, seed: int, out: Path) -> int:
    variant = Variant(cfg.variant)
    grid = grid_from(cfg, variant)
    if grid is None:
        raise pio.InputError("conditioned variant requires parameter grid")
    world = pio.world_from(cfg)
    tcfg = train_config_from(cfg, variant, seed)
    catalog = E.build_catalog(world)
    net, reward_log = train_variant(variant, catalog, world, tcfg, grid,
                                    np.random.default_rng(seed),
                                    PerceptionConfig(**cfg.perception))
    pio.save_weights(net, out / WEIGHTS_FILE)
    pio.reward_log_to_csv(reward_log, out / REWARD_LOG_FILE)
    if cfg.min_final_reward is not None and reward_log:
        final = reward_log[-1][1]
        if final < cfg.min_final_reward:
            log.error("final mean reward %.3f below threshold %.3f", final, cfg.min_final_reward)
            return 3
    return 0


def _reference_groups(path: Path, catalog) -> tuple[dict, bool]:
    """Reference CITs grouped by (scenario, sigma_v, c) if the file is a CIT
    sample table, else by scenario only."""
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip().split(",")
    if "sigma_v" in header:
        ref = pio.cit_samples_from_csv(path)
        return {k: v for k, v in ref.samples.items()}, True
    groups = defaultdict(list)
    for t in pio.trials_from_csv(path, catalog):
        groups[t.scenario_id].append(t.cit)
    return {k: np.array(v) for k, v in groups.items()}, False


def simulation_metrics(samples: CitSampleSet, catalog, reference: Path | None = None) -> dict:
    by_id = {s.id: s for s in catalog}
    counts = samples.outcome_counts()
    cells = {}
    ref, per_cell = _reference_groups(reference, catalog) if reference else ({}, False)
    for (sid, sv, c), cits in sorted(samples.samples.items()):
        spec = by_id[sid]
        entry = {"n_crossings": int(cits.size),
                 "outcomes": counts.get((sid, sv, c), {}),
                 "mean_cit": float(cits.mean()) if cits.size else None}
        if spec.kind == E.ScenarioKind.CONSTANT:
            entry["gap_acceptance"] = gap_acceptance_rate(cits, spec) if cits.size else None
        r = ref.get((sid, sv, c)) if per_cell else ref.get(sid)
        if r is not None and len(r) and cits.size:
            entry["ks"] = ks_statistic(cits, r)
        cells.setdefault(f"sigma_v={sv!r},c={c!r}", {})[sid] = entry
    out = {"cells": cells}
    if ref:
        mads = {}
        for cell_name, scen in cells.items():
            sv, c = (float(x.split("=")[1]) for x in cell_name.split(","))
            pred, obs = {}, {}
            for sid, e in scen.items():
                r = ref.get((sid, sv, c)) if per_cell else ref.get(sid)
                if r is not None and len(r) and e["mean_cit"] is not None:
                    pred[sid], obs[sid] = e["mean_cit"], float(np.mean(r))
            if pred:
                mads[cell_name] = mad(pred, obs)
        out["mad"] = mads
    return out


def synthesize_trials(samples: CitSampleSet, reps_per_participant: int) -> list[pio.TrialRecord]:
    """Cut each cell's rollouts into synthetic participants of
    ``reps_per_participant`` repetitions per scenario; ids name the cell."""
    by_cell = defaultdict(list)
    for r in samples.trials:
        by_cell[(r.sigma_v, r.c)].append(r)
    out = []
    for (sv, c), results in sorted(by_cell.items()):
        for r in sorted(results, key=lambda r: (r.rep, r.scenario_id)):
            # a clipped-to-zero motor delay can give CIT 0, which no trial record accepts
            if r.cit is None or r.cit <= 0:
                continue
            k = r.rep // reps_per_participant
            out.append(pio.TrialRecord(f"sv{sv:g}_c{c:g}_p{k}", r.scenario_id, r.cit))
    return out


def cmd_simulate(cfg: pio.ExperimentConfig, seed: int, out: Path) -> int:
    weights = Path(cfg.weights) if cfg.weights else out / WEIGHTS_FILE
    net = pio.load_weights(weights)
    variant = Variant(cfg.variant)
    if net.variant != variant.value:
        raise pio.InputError(f"weights are for {net.variant}, config asks for {variant.value}")
    grid = grid_from(cfg, variant)
    if grid is None:
        raise pio.InputError("conditioned variant requires parameter grid")
    world = pio.world_from(cfg)
    catalog = E.build_catalog(world)
    samples = simulate_grid(net, catalog, grid, cfg.n_reps, world, seed, variant=variant,
                            pcfg=PerceptionConfig(**cfg.perception))
    pio.cit_samples_to_csv(samples, out / CIT_FILE)
    ref = Path(cfg.reference) if cfg.reference else None
    _dump_json(simulation_metrics(samples, catalog, ref), out / METRICS_FILE)
    if cfg.synthesize_trials:
        pio.trials_to_csv(synthesize_trials(samples, cfg.synth_reps_per_participant),
                          out / SYNTH_TRIALS_FILE)
    return 0


def cmd_fit(cfg: pio.ExperimentConfig, seed: int, out: Path) -> int:
    world = pio.world_from(cfg)
    catalog = E.build_catalog(world)
    samples = pio.cit_samples_from_csv(Path(cfg.cit_samples) if cfg.cit_samples
                                       else out / CIT_FILE)
    if not cfg.trials:
        raise pio.InputError("fit needs a trials CSV (config key 'trials')")
    trials = pio.trials_from_csv(Path(cfg.trials), catalog)
    if not trials:
        raise pio.InputError("trials CSV is empty")
    cells = samples.cells()
    grid = ParamGrid(tuple(sorted({s for s, _ in cells})), tuple(sorted({c for _, c in cells})))
    fits = fit_all(samples, trials, grid)
    pooled = fit_pooled(samples, trials, grid)
    pio.fits_to_csv(fits + [pooled], out / FITS_FILE)
    k_free = 2 if Variant(cfg.variant) == Variant.VLM else (
        0 if Variant(cfg.variant) == Variant.BM else 1)
    ll_individual = float(sum(f.log_lik for f in fits))
    summary = {
        "individual": {"log_lik": ll_individual, "k": k_free * len(fits),
                       "aic": aic(ll_individual, k_free * len(fits)),
                       "n_participants": len(fits)},
        "pooled": {"sigma_v": pooled.sigma_v, "c": pooled.c, "log_lik": pooled.log_lik,
                   "k": k_free, "aic": aic(pooled.log_lik, k_free),
                   "n_trials": pooled.n_trials},
        "aic_table": [{"log_lik": ll, "k": k, "aic": aic(ll, k)} for ll, k in cfg.aic_pairs],
    }
    _dump_json(summary, out / AIC_FILE)
    return 0


def cmd_report(cfg: pio.ExperimentConfig, seed: int, out: Path) -> int:
    cit_path = out / CIT_FILE
    if not cit_path.is_file():
        raise pio.InputError(f"missing simulation output {cit_path}")
    world = pio.world_from(cfg)
    catalog = E.build_catalog(world)
    by_id = {s.id: s for s in catalog}
    samples = pio.cit_samples_from_csv(cit_path)
    warnings, cdf_rows, gap_rows = [], [], []
    for (sid, sv, c), cits in sorted(samples.samples.items()):
        if cits.size == 0:
            warnings.append(f"no crossings for {sid} at sigma_v={sv:g}, c={c:g}")
            continue
        for x, p in empirical_cdf(cits):
            cdf_rows.append([sid, repr(sv), repr(c), repr(x), repr(p)])
        if by_id[sid].kind == E.ScenarioKind.CONSTANT:
            gap_rows.append([sid, repr(sv), repr(c), repr(by_id[sid].v0), repr(by_id[sid].tau0),
                             repr(gap_acceptance_rate(cits, by_id[sid]))])
    pio._write_csv(out / "cdf_points.csv", ["scenario_id", "sigma_v", "c", "cit_s", "cum_frac"],
                   cdf_rows)
    pio._write_csv(out / "gap_acceptance.csv",
                   ["scenario_id", "sigma_v", "c", "v0_mps", "tau0_s", "acceptance"], gap_rows)
    report = {"warnings": warnings,
              "gap_acceptance": [dict(zip(["scenario_id", "sigma_v", "c", "v0", "tau0",
                                           "acceptance"], r)) for r in gap_rows]}
    trials_path = Path(cfg.trials) if cfg.trials else out / SYNTH_TRIALS_FILE
    if trials_path.is_file():
        trials = pio.trials_from_csv(trials_path, catalog)
        obs = defaultdict(list)
        for t in trials:
            obs[t.scenario_id].append(t.cit)
        mad_rows = []
        for sv, c in samples.cells():
            pred = {sid: float(samples.samples[(sid, sv, c)].mean())
                    for sid in obs if samples.samples.get((sid, sv, c), np.empty(0)).size}
            if pred:
                mad_rows.append([repr(sv), repr(c),
                                 repr(mad(pred, {k: float(np.mean(obs[k])) for k in pred}))])
        pio._write_csv(out / "mad.csv", ["sigma_v", "c", "mad_s"], mad_rows)
        report["mad"] = [dict(zip(["sigma_v", "c", "mad_s"], r)) for r in mad_rows]
    for name in (METRICS_FILE, AIC_FILE):
        if (out / name).is_file():
            report[name.split(".")[0]] = json.loads((out / name).read_text(encoding="utf-8"))
    _dump_json(report, out / "report.json")
    return 0


COMMANDS = {"train": cmd_train, "simulate": cmd_simulate, "fit": cmd_fit, "report": cmd_report}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pedcross", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--seed", type=int, help="random seed (overrides config)")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = pio.load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.seed
        out = Path(args.out or cfg.out)
        return COMMANDS[args.command](cfg, seed, out)
    except (pio.InputError, ValueError, OSError) as e:
        print(f"pedcross {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
