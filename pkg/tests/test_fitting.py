import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pedcross import env as E
from pedcross.evaluate import CitSampleSet, TrialResult
from pedcross.fitting import (DENSITY_FLOOR, aic, fit_all, fit_participant, fit_pooled, kde_pdf,
                              loglik_table, scenario_loglik, silverman_bandwidth)
from pedcross.io import TrialRecord
from pedcross.learner import ParamGrid

ARR = E.TerminalKind.ARRIVAL


def sample_set(cells: dict) -> CitSampleSet:
    """cells: {(scenario, sigma_v, c): [cit, ...]}"""
    s = CitSampleSet()
    for key, cits in sorted(cells.items()):
        s.add_cell(key, [TrialResult(key[0], key[1], key[2], x, ARR, i)
                         for i, x in enumerate(cits)])
    return s


def test_single_kernel_density():
    assert kde_pdf([5.0], 5.0, bandwidth=1.0) == pytest.approx(1 / math.sqrt(2 * math.pi))


def test_symmetric_pair():
    p4, p5, p6 = kde_pdf([4.0, 6.0], [4.0, 5.0, 6.0], bandwidth=0.7)
    assert p4 == pytest.approx(p6)
    k = lambda u: math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi) / 0.7
    assert p5 == pytest.approx(0.5 * (k(1 / 0.7) + k(1 / 0.7)))


def test_kde_integrates_to_one():
    rng = np.random.default_rng(0)
    s = rng.normal(2.0, 0.4, 50)
    x = np.linspace(-5, 10, 30001)
    assert np.trapezoid(kde_pdf(s, x), x) == pytest.approx(1.0, abs=1e-3)


def test_silverman_rule():
    rng = np.random.default_rng(1)
    s = rng.normal(0, 1, 200)
    q75, q25 = np.percentile(s, [75, 25])
    expect = 0.9 * min(np.std(s, ddof=1), (q75 - q25) / 1.34) * 200 ** -0.2
    assert silverman_bandwidth(s) == pytest.approx(expect)
    assert silverman_bandwidth([3.0, 3.0, 3.0]) == 0.05
    assert silverman_bandwidth([1.0]) == 0.05
    with pytest.raises(ValueError):
        kde_pdf([], 1.0)


def test_scenario_loglik_examples():
    assert scenario_loglik([1.0, 2.0], []) == 0.0
    tight = [1.0, 1.0, 1.0]
    assert scenario_loglik(tight, [1.0]) == pytest.approx(math.log(kde_pdf(tight, 1.0)))
    assert scenario_loglik(tight, [50.0]) == pytest.approx(math.log(DENSITY_FLOOR))
    with pytest.raises(ValueError):
        scenario_loglik(None, [1.0])


def test_empty_model_cell_scores_at_floor():
    assert scenario_loglik(np.empty(0), [1.0, 2.0]) == pytest.approx(2 * math.log(DENSITY_FLOOR))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.1, 10), min_size=1, max_size=10),
       st.lists(st.floats(0.1, 10), max_size=8), st.lists(st.floats(0.1, 10), max_size=8))
def test_loglik_additive(model, a, b):
    assert scenario_loglik(model, a + b) == pytest.approx(
        scenario_loglik(model, a) + scenario_loglik(model, b), rel=1e-12, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.1, 10), min_size=1, max_size=10),
       st.lists(st.floats(0.1, 30), min_size=1, max_size=8), st.floats(1e-12, 1e-3))
def test_floor_only_raises_loglik(model, obs, floor):
    lo = scenario_loglik(model, obs, floor=floor)
    hi = scenario_loglik(model, obs, floor=floor * 10)
    assert hi >= lo
    # in support, the floor does not bite
    assert scenario_loglik(model, model[:1], floor=None) == pytest.approx(
        scenario_loglik(model, model[:1], floor=1e-300))


GRID = ParamGrid((0.0, 0.1, 0.2), (0.0, 10.0))


def three_by_two_samples():
    cells = {}
    for i, sv in enumerate(GRID.sigma_v_values):
        for j, c in enumerate(GRID.c_values):
            centre = 1.0 + i + 3 * j
            cells[("s1", sv, c)] = list(centre + np.linspace(-0.2, 0.2, 9))
            cells[("s2", sv, c)] = list(2 * centre + np.linspace(-0.2, 0.2, 9))
    return sample_set(cells)


def test_fit_recovers_cell_of_generating_samples():
    samples = three_by_two_samples()
    # centre 1 + 1 + 3 = 5 for (0.1, 10)
    trials = [TrialRecord("p", "s1", 5.0), TrialRecord("p", "s2", 10.0),
              TrialRecord("p", "s1", 5.1)]
    fit = fit_participant(samples, trials, GRID)
    assert (fit.sigma_v, fit.c, fit.n_trials, fit.participant_id) == (0.1, 10.0, 3, "p")
    _, table = loglik_table(samples, trials, GRID)
    assert fit.log_lik == pytest.approx(table.max())


def test_single_cell_grid_and_ties():
    one = ParamGrid((0.3,), (40.0,))
    s = sample_set({("s1", 0.3, 40.0): [1.0, 2.0]})
    f = fit_participant(s, [TrialRecord("p", "s1", 1.5)], one)
    assert (f.sigma_v, f.c) == (0.3, 40.0)
    # identical samples everywhere: every cell ties, smallest sigma_v then c wins
    cells = {("s1", sv, c): [1.0, 2.0] for sv in GRID.sigma_v_values for c in GRID.c_values}
    f = fit_participant(sample_set(cells), [TrialRecord("p", "s1", 1.5)], GRID)
    assert (f.sigma_v, f.c) == (0.0, 0.0)


def test_fit_invariant_to_trial_order():
    samples = three_by_two_samples()
    rng = np.random.default_rng(2)
    trials = [TrialRecord("p", s, float(x)) for s, x in
              zip(rng.choice(["s1", "s2"], 12), rng.uniform(1, 12, 12))]
    a = fit_participant(samples, trials, GRID)
    b = fit_participant(samples, trials[::-1], GRID)
    assert (a.sigma_v, a.c) == (b.sigma_v, b.c)
    assert a.log_lik == pytest.approx(b.log_lik, rel=1e-12)


def test_missing_cell_raises():
    s = sample_set({("s1", 0.0, 0.0): [1.0]})
    with pytest.raises(ValueError):
        fit_participant(s, [TrialRecord("p", "s2", 1.0)], ParamGrid())
    with pytest.raises(ValueError):
        fit_participant(s, [], ParamGrid())


def test_pooled_fit():
    samples = three_by_two_samples()
    p1 = [TrialRecord("a", "s1", 1.0), TrialRecord("a", "s2", 2.0)]
    p2 = [TrialRecord("b", "s1", 6.0), TrialRecord("b", "s2", 12.0)]
    single = fit_participant(samples, p1, GRID)
    pooled_one = fit_pooled(samples, p1, GRID)
    assert (pooled_one.sigma_v, pooled_one.c, pooled_one.log_lik) == \
        (single.sigma_v, single.c, pytest.approx(single.log_lik))
    assert pooled_one.participant_id == "pooled"
    fits = fit_all(samples, p1 + p2, GRID)
    assert [f.participant_id for f in fits] == ["a", "b"]
    assert [(f.sigma_v, f.c) for f in fits] == [(0.0, 0.0), (0.2, 10.0)]
    pooled = fit_pooled(samples, p1 + p2, GRID)
    assert pooled.log_lik <= sum(f.log_lik for f in fits) + 1e-9
    assert pooled.n_trials == 4


def test_pooled_homogeneous_population_recovers_cell():
    samples = three_by_two_samples()
    trials = [TrialRecord(f"p{k}", s, x) for k in range(5)
              for s, x in (("s1", 3.0 + 0.05 * k), ("s2", 6.0 - 0.05 * k))]
    f = fit_pooled(samples, trials, GRID)
    assert (f.sigma_v, f.c) == (0.2, 0.0)


def test_aic_values():
    assert aic(-533, 40) == 1146
    assert aic(-547, 2) == 1098
    assert aic(0, 0) == 0
    assert aic(-588, 20) == 1216  # arithmetic value for the VM row
    with pytest.raises(ValueError):
        aic(0, -1)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e4, 0), st.integers(0, 1000))
def test_aic_monotone(ll, k):
    assert aic(ll, k + 1) > aic(ll, k)
    assert aic(ll - 1, k) > aic(ll, k)
