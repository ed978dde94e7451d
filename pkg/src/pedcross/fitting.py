"""Likelihood of observed crossing initiation times under simulated model
CITs, grid-search fitting of (sigma_v, c) and AIC."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .evaluate import CitSampleSet
from .io import TrialRecord
from .learner import ParamGrid

BANDWIDTH_FLOOR = 0.05  # s
DENSITY_FLOOR = 1e-9
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class FitResult:
    participant_id: str
    sigma_v: float
    c: float
    log_lik: float
    n_trials: int


def silverman_bandwidth(samples, floor: float = BANDWIDTH_FLOOR) -> float:
    a = np.asarray(samples, dtype=float)
    n = a.size
    if n == 0:
        raise ValueError("bandwidth of an empty sample")
    if n == 1:
        return floor
    std = np.std(a, ddof=1)
    q75, q25 = np.percentile(a, [75, 25])
    iqr = (q75 - q25) / 1.34
    spread = min(std, iqr) if iqr > 0 else std
    return max(0.9 * spread * n ** -0.2, floor)


def kde_pdf(samples, query, bandwidth: float | None = None):
    """Gaussian-kernel density of ``samples`` at ``query`` (scalar or array)."""
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise ValueError("KDE of an empty sample")
    bw = silverman_bandwidth(s) if bandwidth is None else bandwidth
    q = np.asarray(query, dtype=float)
    u = (q[..., None] - s) / bw
    dens = np.exp(-0.5 * u * u).sum(axis=-1) / (s.size * bw * _SQRT_2PI)
    return dens.item() if dens.ndim == 0 else dens


def _log_density(samples, cits, floor: float | None) -> np.ndarray:
    cits = np.asarray(cits, dtype=float)
    if len(samples) == 0:
        # the model never crossed in this cell: every observation sits at the floor
        return np.full(cits.shape, math.log(floor or DENSITY_FLOOR))
    dens = kde_pdf(samples, cits)
    if floor:
        dens = np.maximum(dens, floor)
    with np.errstate(divide="ignore"):
        return np.log(dens)


def scenario_loglik(model_samples, observed, floor: float | None = DENSITY_FLOOR) -> float:
    """Sum of log model densities at the observed CITs of one scenario.

    ``observed`` holds TrialRecords or plain CIT values.
    """
    cits = [o.cit if isinstance(o, TrialRecord) else float(o) for o in observed]
    if not cits:
        return 0.0
    if model_samples is None:
        raise ValueError("no model samples for observed scenario")
    return float(_log_density(model_samples, cits, floor).sum())


def loglik_table(grid_samples: CitSampleSet, trials: list[TrialRecord], grid: ParamGrid,
                 floor: float | None = DENSITY_FLOOR) -> tuple[list[str], np.ndarray]:
    """Per-participant log-likelihood at every cell.

    Returns participant ids (sorted) and an array of shape
    ``(n_participants, n_sigma, n_c)``.
    """
    pids = sorted({t.participant_id for t in trials})
    p_index = {p: i for i, p in enumerate(pids)}
    by_scenario: dict[str, list[TrialRecord]] = defaultdict(list)
    for t in trials:
        by_scenario[t.scenario_id].append(t)
    table = np.zeros((len(pids), len(grid.sigma_v_values), len(grid.c_values)))
    for sid in sorted(by_scenario):
        recs = by_scenario[sid]
        cits = np.array([r.cit for r in recs])
        owner = np.array([p_index[r.participant_id] for r in recs])
        for i_s, sv in enumerate(grid.sigma_v_values):
            for i_c, c in enumerate(grid.c_values):
                key = (sid, sv, c)
                if key not in grid_samples.samples:
                    raise ValueError(f"no model samples for scenario {sid} at cell {(sv, c)}")
                ll = _log_density(grid_samples.samples[key], cits, floor)
                # fixed accumulation order keeps the sums bitwise stable
                for j in range(len(recs)):
                    table[owner[j], i_s, i_c] += ll[j]
    return pids, table


def _argmax_cell(ll: np.ndarray, grid: ParamGrid) -> tuple[int, int]:
    """Maximum with ties going to smaller sigma_v, then smaller c."""
    best = None
    for i_s in range(ll.shape[0]):
        for i_c in range(ll.shape[1]):
            if best is None or ll[i_s, i_c] > ll[best]:
                best = (i_s, i_c)
    return best


def _fit(pid: str, ll: np.ndarray, grid: ParamGrid, n: int) -> FitResult:
    i_s, i_c = _argmax_cell(ll, grid)
    return FitResult(pid, grid.sigma_v_values[i_s], grid.c_values[i_c], float(ll[i_s, i_c]), n)


def fit_participant(grid_samples: CitSampleSet, trials: list[TrialRecord],
                    grid: ParamGrid, floor: float | None = DENSITY_FLOOR) -> FitResult:
    if not trials:
        raise ValueError("no trials to fit")
    pids = {t.participant_id for t in trials}
    pid = pids.pop() if len(pids) == 1 else "pooled"
    pooled = [TrialRecord(pid, t.scenario_id, t.cit) for t in trials]
    _, table = loglik_table(grid_samples, pooled, grid, floor)
    return _fit(pid, table[0], grid, len(trials))


def fit_all(grid_samples: CitSampleSet, trials: list[TrialRecord], grid: ParamGrid,
            floor: float | None = DENSITY_FLOOR) -> list[FitResult]:
    """Independent fits for every participant in ``trials``."""
    if not trials:
        raise ValueError("no trials to fit")
    pids, table = loglik_table(grid_samples, trials, grid, floor)
    counts = defaultdict(int)
    for t in trials:
        counts[t.participant_id] += 1
    return [_fit(p, table[i], grid, counts[p]) for i, p in enumerate(pids)]


def fit_pooled(grid_samples: CitSampleSet, all_trials: list[TrialRecord], grid: ParamGrid,
               floor: float | None = DENSITY_FLOOR) -> FitResult:
    """One (sigma_v, c) for every participant together."""
    if not all_trials:
        raise ValueError("no trials to fit")
    pooled = [TrialRecord("pooled", t.scenario_id, t.cit) for t in all_trials]
    _, table = loglik_table(grid_samples, pooled, grid, floor)
    return _fit("pooled", table[0], grid, len(all_trials))


def aic(log_lik: float, k: int) -> float:
    if k < 0:
        raise ValueError("parameter count must be >= 0")
    return 2 * k - 2 * log_lik
