"""Greedy policy rollouts over scenarios and parameter cells, and the
behavioural metrics computed from them."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import env as E
from .env import ScenarioKind, ScenarioSpec, TerminalKind, WorldConfig
from .learner import (Episode, ObsScale, ParamGrid, Variant, _go_outcome,
                      encode_observation, obs_scale_for)
from .perception import PerceptionConfig, belief_init, perceive
from .qnet import QNet

CellKey = tuple[str, float, float]


@dataclass
class TrialResult:
    scenario_id: str
    sigma_v: float
    c: float
    cit: float | None
    outcome: TerminalKind
    rep: int = 0


@dataclass
class CitSampleSet:
    """Model CITs keyed by (scenario id, sigma_v, c), plus every trial."""
    samples: dict[CellKey, np.ndarray] = field(default_factory=dict)
    trials: list[TrialResult] = field(default_factory=list)

    def add_cell(self, key: CellKey, results: list[TrialResult]) -> None:
        cits = [r.cit for r in results if r.cit is not None]
        self.samples[key] = np.sort(np.asarray(cits, dtype=float))
        self.trials.extend(results)

    def cells(self) -> list[tuple[float, float]]:
        return sorted({(k[1], k[2]) for k in self.samples})

    def scenario_ids(self) -> list[str]:
        return sorted({k[0] for k in self.samples})

    def outcome_counts(self) -> dict[CellKey, dict[str, int]]:
        out: dict[CellKey, dict[str, int]] = defaultdict(lambda: defaultdict(int))
        for r in self.trials:
            out[(r.scenario_id, r.sigma_v, r.c)][r.outcome.value] += 1
        return {k: dict(v) for k, v in out.items()}


def _variant_of(net: QNet, variant) -> Variant:
    v = Variant(variant or net.variant)
    if v.obs_dim != net.in_dim:
        raise ValueError(f"net input {net.in_dim} does not fit variant {v.value}")
    return v


def rollout(net: QNet, spec: ScenarioSpec, sigma_v: float, c: float, world_cfg: WorldConfig,
            rng: np.random.Generator, greedy: bool = True, *, catalog=None, variant=None,
            pcfg: PerceptionConfig | None = None, eps: float = 0.0) -> TrialResult:
    """One episode; CIT is the Go step time plus the motor delay."""
    variant = _variant_of(net, variant)
    catalog = catalog or E.build_catalog(world_cfg)
    ep = Episode(variant, spec, catalog, world_cfg, rng, sigma_v, c, pcfg)
    while not ep.done:
        if not greedy and rng.random() < eps:
            a = int(rng.integers(2))
        else:
            q = net.forward(ep.observation())[0]
            a = E.GO if q[E.GO] > q[E.NOT_GO] else E.NOT_GO
        ep.act(a)
    return TrialResult(spec.id, sigma_v, c, ep.cit, ep.outcome)


def rollout_batch(net: QNet, spec: ScenarioSpec, sigma_v: float, c: float, n: int,
                  world_cfg: WorldConfig, rng: np.random.Generator, *, catalog,
                  variant: Variant, pcfg: PerceptionConfig | None = None,
                  scale: ObsScale | None = None) -> list[TrialResult]:
    """``n`` independent greedy episodes advanced in lock-step.

    Draw order matches ``rollout`` for n = 1: the delays first, then one
    normal per replicate per perception cycle.
    """
    pcfg = pcfg or PerceptionConfig()
    scale = scale or obs_scale_for(catalog, world_cfg)
    sigma_v = sigma_v if variant.noisy else 0.0
    c = c if variant.looming else 0.0
    w = world_cfg
    delays = np.maximum(0.0, w.motor_delay_mean + w.motor_delay_std * rng.standard_normal(n))
    n_max = w.max_steps
    xs, vs = E.vehicle_trajectory(spec, w, n_max)
    belief = belief_init(spec, catalog, pcfg, n) if variant.noisy else None
    active = np.ones(n, dtype=bool)
    go_step = np.full(n, -1)
    outcome = [TerminalKind.TIMEOUT] * n

    for t in range(n_max):
        obs = encode_observation(variant, {"x_veh": xs[t], "v_veh": vs[t], "y_ped": 0.0},
                                 belief, sigma_v=sigma_v, c=c, t=t, world=w, scale=scale)
        obs = np.broadcast_to(obs, (n, variant.obs_dim))
        idx = np.flatnonzero(active)
        q = net.forward(obs[idx])
        going = idx[q[:, E.GO] > q[:, E.NOT_GO]]
        for i in going:
            go_step[i] = t
            if w.motor_delay_in_dynamics:
                st = E.SimState(t, xs[t], vs[t])
                outcome[i] = E.finish_after_go(st, spec, w, float(delays[i])).terminal_kind
            else:
                outcome[i] = _go_outcome(spec, w, t)[0]
        active[going] = False
        if not active.any() or t + 1 >= n_max:
            break
        if variant.noisy:
            belief = perceive(belief, xs[t + 1], 0.0, w, sigma_v, pcfg, rng,
                              normal=rng.standard_normal(n))

    out = []
    for i in range(n):
        cit = float(go_step[i] * w.dt + delays[i]) if go_step[i] >= 0 else None
        out.append(TrialResult(spec.id, sigma_v, c, cit, outcome[i], i))
    return out


def cell_rng(seed: int, scenario_index: int, i_sigma: int, i_c: int) -> np.random.Generator:
    return np.random.default_rng([seed, scenario_index, i_sigma, i_c])


def simulate_grid(net: QNet, catalog: list[ScenarioSpec], grid: ParamGrid, n_reps: int,
                  world_cfg: WorldConfig, seed: int, *, variant=None,
                  pcfg: PerceptionConfig | None = None, scenarios=None) -> CitSampleSet:
    """``n_reps`` greedy rollouts per evaluation scenario and grid cell."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    variant = _variant_of(net, variant)
    scale = obs_scale_for(catalog, world_cfg)
    result = CitSampleSet()
    wanted = None if scenarios is None else set(scenarios)
    for si, spec in enumerate(catalog):
        if not spec.is_evaluation or (wanted is not None and spec.id not in wanted):
            continue
        for i_s, sv in enumerate(grid.sigma_v_values):
            for i_c, c in enumerate(grid.c_values):
                rng = cell_rng(seed, si, i_s, i_c)
                res = rollout_batch(net, spec, sv, c, n_reps, world_cfg, rng,
                                    catalog=catalog, variant=variant, pcfg=pcfg, scale=scale)
                for r in res:
                    r.sigma_v, r.c = sv, c
                result.add_cell((spec.id, sv, c), res)
    return result


# ---- metrics ----------------------------------------------------------------

def gap_acceptance_rate(samples, spec: ScenarioSpec) -> float:
    """Share of crossings initiated before the vehicle reaches the line."""
    if spec.kind != ScenarioKind.CONSTANT:
        raise ValueError("gap acceptance is defined for constant-speed scenarios")
    a = np.asarray(samples, dtype=float)
    if a.size == 0:
        return float("nan")
    return float(np.mean(a < spec.tau0))


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov distance between empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("KS statistic needs two nonempty samples")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def mad(pred_means: dict, obs_means: dict) -> float:
    """Mean absolute deviation of predicted vs observed mean CIT."""
    if set(pred_means) != set(obs_means):
        raise ValueError("predicted and observed scenario sets differ")
    if not pred_means:
        raise ValueError("no scenarios")
    return float(np.mean([abs(pred_means[k] - obs_means[k]) for k in sorted(pred_means)]))


def empirical_cdf(samples) -> list[tuple[float, float]]:
    a = np.sort(np.asarray(samples, dtype=float))
    n = a.size
    return [(float(x), (k + 1) / n) for k, x in enumerate(a)]
