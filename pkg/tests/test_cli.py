import json

import pytest

from pedcross import io as pio
from pedcross.cli import main

TINY = """
train.episodes = 40
train.log_every = 20
train.batch_size = 8
n_reps = 4
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def run(cmd, cfg, out, seed=0):
    return main([cmd, "--config", cfg, "--seed", str(seed), "--out", str(out)])


def test_train_writes_weights_and_reward_log(tmp_path):
    cfg = write_cfg(tmp_path, "variant = BM\n" + TINY)
    assert run("train", cfg, tmp_path / "o") == 0
    log = pio.reward_log_from_csv(tmp_path / "o" / "reward_log.csv")
    assert [e for e, _ in log] == [20, 40]
    head = (tmp_path / "o" / "weights.txt").read_text().splitlines()[0]
    assert head == "BM,6,64,64"


def test_train_and_simulate_are_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, "variant = VLM\nsigma_v_values = 0.0, 0.5\nc_values = 0, 50\n"
                    + TINY)
    for d in ("a", "b"):
        assert run("train", cfg, tmp_path / d, seed=7) == 0
        assert run("simulate", cfg, tmp_path / d, seed=7) == 0
    for name in ("weights.txt", "reward_log.csv", "cit_samples.csv", "metrics.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert run("train", cfg, tmp_path / "c", seed=8) == 0
    assert (tmp_path / "a" / "weights.txt").read_bytes() != \
        (tmp_path / "c" / "weights.txt").read_bytes()


def test_conditioned_variant_without_grid(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "variant = VLM\n" + TINY)
    assert run("train", cfg, tmp_path / "o") == 2
    assert "conditioned variant requires parameter grid" in capsys.readouterr().err


def test_min_final_reward_gate(tmp_path):
    cfg = write_cfg(tmp_path, "variant = BM\nmin_final_reward = 25\n" + TINY)
    assert run("train", cfg, tmp_path / "o") == 3
    assert (tmp_path / "o" / "weights.txt").is_file()


def test_simulate_errors(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "variant = BM\n" + TINY)
    assert run("simulate", cfg, tmp_path / "missing") == 2
    assert "missing" in capsys.readouterr().err
    assert run("train", cfg, tmp_path / "o") == 0
    vm = write_cfg(tmp_path, "variant = VM\ngrid = full\n" + TINY, "vm.cfg")
    assert run("simulate", vm, tmp_path / "o") == 2
    assert "weights are for BM" in capsys.readouterr().err


def test_bm_grid_collapses_and_self_reference_gives_zero_ks(tmp_path):
    cfg = write_cfg(tmp_path, "variant = BM\ngrid = full\nsynthesize_trials = true\n" + TINY)
    assert run("train", cfg, tmp_path / "o") == 0
    assert run("simulate", cfg, tmp_path / "o") == 0
    samples = pio.cit_samples_from_csv(tmp_path / "o" / "cit_samples.csv")
    assert samples.cells() == [(0.0, 0.0)]
    ref_cfg = write_cfg(tmp_path, f"variant = BM\nreference = {tmp_path / 'o' / 'cit_samples.csv'}\n"
                        + TINY, "ref.cfg")
    assert run("simulate", ref_cfg, tmp_path / "o") == 0
    metrics = json.loads((tmp_path / "o" / "metrics.json").read_text())
    ks = [e["ks"] for cell in metrics["cells"].values() for e in cell.values() if "ks" in e]
    assert ks and all(k == 0.0 for k in ks)
    assert all(m == 0.0 for m in metrics["mad"].values())


def test_fit_and_report(tmp_path):
    cfg_text = "variant = BM\nsynthesize_trials = true\naic_pairs = -533:40, -547:2\n" + TINY
    cfg = write_cfg(tmp_path, cfg_text)
    out = tmp_path / "o"
    assert run("train", cfg, out) == 0
    assert run("simulate", cfg, out) == 0
    fit_cfg = write_cfg(tmp_path, cfg_text + f"trials = {out / 'trials.csv'}\n", "fit.cfg")
    assert run("fit", fit_cfg, out) == 0
    fits = pio.fits_from_csv(out / "fits.csv")
    assert fits[-1].participant_id == "pooled"
    summary = json.loads((out / "aic.json").read_text())
    assert [row["aic"] for row in summary["aic_table"]] == [1146.0, 1098.0]
    assert run("report", fit_cfg, out) == 0
    report = json.loads((out / "report.json").read_text())
    assert {"gap_acceptance", "warnings", "metrics", "aic"} <= set(report)
    cdf = (out / "cdf_points.csv").read_text().splitlines()
    assert cdf[0] == "scenario_id,sigma_v,c,cit_s,cum_frac"
    # every crossing scenario contributes n points ending at 1
    samples = pio.cit_samples_from_csv(out / "cit_samples.csv")
    n_points = sum(len(v) for v in samples.samples.values())
    assert len(cdf) - 1 == n_points
    for key, v in samples.samples.items():
        if len(v) == 0:
            assert any(key[0] in w for w in report["warnings"])


def test_fit_unknown_scenario_reports_line(tmp_path, capsys):
    cfg_text = "variant = BM\n" + TINY
    out = tmp_path / "o"
    cfg = write_cfg(tmp_path, cfg_text)
    assert run("train", cfg, out) == 0
    assert run("simulate", cfg, out) == 0
    trials = tmp_path / "t.csv"
    trials.write_text("participant_id,scenario_id,cit_s\np,const_v6.94_tau2.29,1.0\np,zzz,1.0\n")
    bad = write_cfg(tmp_path, cfg_text + f"trials = {trials}\n", "bad.cfg")
    assert run("fit", bad, out) == 2
    assert "t.csv:3" in capsys.readouterr().err
    trials.write_text("participant_id,scenario_id,cit_s\n")
    assert run("fit", bad, out) == 2


def test_report_needs_simulation_output(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "variant = BM\n")
    assert run("report", cfg, tmp_path / "empty") == 2
    assert "missing simulation output" in capsys.readouterr().err


def test_bad_config_is_reported(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "nonsense = 1\n")
    assert run("train", cfg, tmp_path / "o") == 2
    assert "unknown config key" in capsys.readouterr().err


def test_help_exits_cleanly():
    with pytest.raises(SystemExit) as e:
        main(["--help"])
    assert e.value.code == 0


def test_synthesized_trials_skip_zero_and_missing_cits():
    from pedcross import env as E
    from pedcross.cli import synthesize_trials
    from pedcross.evaluate import CitSampleSet, TrialResult
    arr, tout = E.TerminalKind.ARRIVAL, E.TerminalKind.TIMEOUT
    s = CitSampleSet()
    s.add_cell(("x", 0.1, 20.0), [TrialResult("x", 0.1, 20.0, 0.0, arr, 0),
                                  TrialResult("x", 0.1, 20.0, None, tout, 1),
                                  TrialResult("x", 0.1, 20.0, 1.5, arr, 2)])
    out = synthesize_trials(s, 2)
    assert [(t.participant_id, t.cit) for t in out] == [("sv0.1_c20_p1", 1.5)]


@pytest.mark.slow
def test_desk_bm_run_logs_every_500_episodes(tmp_path):
    cfg = write_cfg(tmp_path, "variant = BM\nprofile = desk\n")
    assert run("train", cfg, tmp_path / "o") == 0
    log = pio.reward_log_from_csv(tmp_path / "o" / "reward_log.csv")
    assert [e for e, _ in log] == list(range(500, 5001, 500))
    assert (tmp_path / "o" / "weights.txt").read_text().startswith("BM,6,64,64")
