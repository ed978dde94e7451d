"""File formats: key=value experiment configs, CSV tables and weight files."""
from __future__ import annotations

import configparser
import csv
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path


from .env import ScenarioKind, ScenarioSpec, TerminalKind, WorldConfig


@dataclass(frozen=True)
class TrialRecord:
    participant_id: str
    scenario_id: str
    cit: float

    def __post_init__(self):
        if not self.cit > 0:
            raise ValueError(f"CIT must be positive, got {self.cit}")


class InputError(ValueError):
    """Malformed or inconsistent input file."""


# ---- experiment config --------------------------------------------------------

@dataclass
class ExperimentConfig:
    variant: str = "BM"
    profile: str = "desk"
    world: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    perception: dict = field(default_factory=dict)
    sigma_v_values: tuple | None = None
    c_values: tuple | None = None
    grid: str = ""           # "full" (11 x 11) or "full10" (10 x 10); explicit values win
    n_reps: int = 200
    seed: int = 0
    weights: str = ""
    trials: str = ""
    cit_samples: str = ""
    reference: str = ""
    out: str = "out"
    min_final_reward: float | None = None
    synthesize_trials: bool = False
    synth_reps_per_participant: int = 5
    aic_pairs: tuple = ()

    def __post_init__(self):
        if self.profile not in ("desk", "paper"):
            raise InputError(f"profile must be desk or paper, got {self.profile!r}")


_SECTIONED = ("world", "train", "perception")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _coerce(value: str, like):
    if isinstance(like, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if isinstance(like, tuple):
        return tuple(int(x) for x in value.split(","))
    return value.strip()


def _coerce_into(cls, key: str, value: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    if key not in fields:
        raise InputError(f"unknown {cls.__name__} key {key!r}")
    default = fields[key].default
    if default is None:
        return float(value)
    return _coerce(value, default)


def parse_config(text: str) -> ExperimentConfig:
    """Plain ``key = value`` lines; ``world.``, ``train.`` and ``perception.``
    prefixes override those configs; ``#`` starts a comment."""
    from .learner import TrainConfig
    from .perception import PerceptionConfig

    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string("[config]\n" + text)
    except configparser.Error as e:
        raise InputError(str(e)) from e
    cfg = ExperimentConfig()
    targets = {"world": WorldConfig, "train": TrainConfig, "perception": PerceptionConfig}
    for key, value in cp["config"].items():
        if "." in key:
            section, name = key.split(".", 1)
            if section not in _SECTIONED:
                raise InputError(f"unknown config section in {key!r}")
            getattr(cfg, section)[name] = _coerce_into(targets[section], name, value)
        elif key in ("sigma_v_values", "c_values"):
            setattr(cfg, key, _floats(value))
        elif key == "aic_pairs":
            pairs = []
            for item in value.split(","):
                ll, k = item.split(":")
                pairs.append((float(ll), int(k)))
            cfg.aic_pairs = tuple(pairs)
        elif key == "min_final_reward":
            cfg.min_final_reward = float(value)
        elif key in {f.name for f in dataclasses.fields(ExperimentConfig)}:
            setattr(cfg, key, _coerce(value, getattr(ExperimentConfig(), key)))
        else:
            raise InputError(f"unknown config key {key!r}")
    cfg.__post_init__()
    return cfg


def load_config(path: str | Path | None) -> ExperimentConfig:
    if not path:
        return ExperimentConfig()
    return parse_config(Path(path).read_text(encoding="utf-8"))


def world_from(cfg: ExperimentConfig) -> WorldConfig:
    return WorldConfig(**cfg.world)


# ---- CSV helpers --------------------------------------------------------------

def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _read_rows(path: Path, required: list[str]):
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise InputError(f"{path}: missing columns {missing}")
        # header is line 1
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row


# ---- catalog ------------------------------------------------------------------

CATALOG_COLUMNS = ["id", "kind", "v0_mps", "d0_m", "tau0_s", "dstop_m"]


def catalog_to_csv(catalog: list[ScenarioSpec], path: Path) -> None:
    _write_csv(Path(path), CATALOG_COLUMNS,
               [[s.id, s.kind.value, _fmt(s.v0), _fmt(s.d0), _fmt(s.tau0), _fmt(s.d_stop)]
                for s in catalog])


def catalog_from_csv(path: Path) -> list[ScenarioSpec]:
    out = []
    for lineno, r in _read_rows(Path(path), CATALOG_COLUMNS):
        try:
            out.append(ScenarioSpec(r["id"], ScenarioKind(r["kind"]), float(r["v0_mps"]),
                                    float(r["d0_m"]), float(r["tau0_s"]),
                                    float(r["dstop_m"]) if r["dstop_m"] else None))
        except ValueError as e:
            raise InputError(f"{path}:{lineno}: {e}") from e
    return out


# ---- trials -------------------------------------------------------------------

TRIAL_COLUMNS = ["participant_id", "scenario_id", "cit_s"]


def trials_to_csv(trials: list[TrialRecord], path: Path) -> None:
    _write_csv(Path(path), TRIAL_COLUMNS,
               [[t.participant_id, t.scenario_id, _fmt(t.cit)] for t in trials])


def trials_from_csv(path: Path, catalog: list[ScenarioSpec] | None = None) -> list[TrialRecord]:
    known = None if catalog is None else {s.id for s in catalog}
    out = []
    for lineno, r in _read_rows(Path(path), TRIAL_COLUMNS):
        if known is not None and r["scenario_id"] not in known:
            raise InputError(f"{path}:{lineno}: unknown scenario_id {r['scenario_id']!r}")
        try:
            out.append(TrialRecord(r["participant_id"], r["scenario_id"], float(r["cit_s"])))
        except ValueError as e:
            raise InputError(f"{path}:{lineno}: {e}") from e
    return out


# ---- CIT samples ----------------------------------------------------------------

CIT_COLUMNS = ["scenario_id", "sigma_v", "c", "rep", "cit_s", "outcome"]


def cit_samples_to_csv(samples, path: Path) -> None:
    rows = sorted(samples.trials, key=lambda r: (r.scenario_id, r.sigma_v, r.c, r.rep))
    _write_csv(Path(path), CIT_COLUMNS,
               [[r.scenario_id, _fmt(float(r.sigma_v)), _fmt(float(r.c)), r.rep,
                 _fmt(r.cit), r.outcome.value] for r in rows])


def cit_samples_from_csv(path: Path):
    from .evaluate import CitSampleSet, TrialResult

    groups: dict = {}
    for lineno, r in _read_rows(Path(path), CIT_COLUMNS):
        try:
            res = TrialResult(r["scenario_id"], float(r["sigma_v"]), float(r["c"]),
                              float(r["cit_s"]) if r["cit_s"] else None,
                              TerminalKind(r["outcome"]), int(r["rep"]))
        except ValueError as e:
            raise InputError(f"{path}:{lineno}: {e}") from e
        groups.setdefault((res.scenario_id, res.sigma_v, res.c), []).append(res)
    out = CitSampleSet()
    for key in sorted(groups):
        out.add_cell(key, groups[key])
    return out


# ---- weights, reward log, fits, belief traces ---------------------------------------

def save_weights(net, path: Path) -> None:
    from .qnet import dumps_weights

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_weights(net), encoding="utf-8")


def load_weights(path: Path):
    from .qnet import loads_weights

    path = Path(path)
    if not path.is_file():
        raise InputError(f"weights file not found: {path}")
    return loads_weights(path.read_text(encoding="utf-8"))


def reward_log_to_csv(log, path: Path) -> None:
    _write_csv(Path(path), ["episode", "mean_reward"], [[e, _fmt(float(r))] for e, r in log])


def reward_log_from_csv(path: Path) -> list[tuple[int, float]]:
    return [(int(r["episode"]), float(r["mean_reward"]))
            for _, r in _read_rows(Path(path), ["episode", "mean_reward"])]


FIT_COLUMNS = ["participant_id", "sigma_v", "c", "log_lik", "n_trials"]


def fits_to_csv(fits, path: Path) -> None:
    _write_csv(Path(path), FIT_COLUMNS,
               [[f.participant_id, _fmt(float(f.sigma_v)), _fmt(float(f.c)),
                 _fmt(float(f.log_lik)), f.n_trials] for f in fits])


def fits_from_csv(path: Path):
    from .fitting import FitResult

    return [FitResult(r["participant_id"], float(r["sigma_v"]), float(r["c"]),
                      float(r["log_lik"]), int(r["n_trials"]))
            for _, r in _read_rows(Path(path), FIT_COLUMNS)]


def belief_trace_to_csv(beliefs, path: Path) -> None:
    """Rows of (t, x_hat, v_hat, P_p, P_v) for a sequence of scalar beliefs."""
    _write_csv(Path(path), ["t", "x_hat", "v_hat", "P_p", "P_v"],
               [[t, _fmt(float(b.x_hat)), _fmt(float(b.v_hat)), _fmt(float(b.p_pp)),
                 _fmt(float(b.p_vv))] for t, b in enumerate(beliefs)])
