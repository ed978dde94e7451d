"""Road-crossing environment: scenario catalog, vehicle kinematics, collision
geometry, transitions and terminal reward.

Coordinates: the pedestrian stands at the crossing line (longitudinal 0) and
walks laterally from the curb (y = 0) to the far edge (y = road_width).  The
vehicle's front bumper sits at longitudinal ``x_veh`` and moves toward 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np


class ScenarioKind(str, Enum):
    CONSTANT = "constant"
    YIELDING = "yielding"
    INFEASIBLE_TRAINING = "infeasible_training"


class PedPhase(str, Enum):
    WAITING = "waiting"
    DELAYING = "delaying"
    WALKING = "walking"
    DONE = "done"


class TerminalKind(str, Enum):
    ARRIVAL = "arrival"
    COLLISION = "collision"
    TIMEOUT = "timeout"
    NONE = "none"


GO = 1
NOT_GO = 0


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    kind: ScenarioKind
    v0: float
    d0: float
    tau0: float
    d_stop: float | None = None

    def __post_init__(self):
        if self.v0 <= 0 or self.d0 <= 0:
            raise ValueError(f"{self.id}: v0 and d0 must be positive")
        if abs(self.tau0 - self.d0 / self.v0) > 1e-6 * self.tau0:
            raise ValueError(f"{self.id}: tau0 inconsistent with d0/v0")
        if self.kind == ScenarioKind.YIELDING:
            if self.d_stop is None or not (0 < self.d_stop < self.d0):
                raise ValueError(f"{self.id}: yielding needs 0 < d_stop < d0")

    @property
    def is_evaluation(self) -> bool:
        return self.kind != ScenarioKind.INFEASIBLE_TRAINING


@dataclass(frozen=True)
class WorldConfig:
    road_width: float = 5.85
    walk_speed: float = 1.31
    dt: float = 0.1
    eye_height: float = 1.6
    vehicle_length: float = 4.5
    vehicle_width: float = 2.0
    lane_near_edge: float = 0.4625
    ped_radius: float = 0.25
    max_episode_s: float = 20.0
    motor_delay_mean: float = 0.6
    motor_delay_std: float = 0.2
    # False: the delay only postpones the recorded crossing initiation time;
    # True: the pedestrian also stays at the curb until the delay elapses.
    motor_delay_in_dynamics: bool = False
    reward_success: float = 20.0
    reward_collision: float = -20.0
    time_penalty_rate: float = 0.01

    def __post_init__(self):
        geometric = (self.road_width, self.walk_speed, self.dt, self.eye_height,
                     self.vehicle_length, self.vehicle_width,
                     self.lane_near_edge, self.ped_radius, self.max_episode_s)
        if any(g <= 0 for g in geometric):
            raise ValueError("geometric fields and dt must be positive")
        if self.motor_delay_std < 0:
            raise ValueError("motor_delay_std must be >= 0")

    @property
    def max_steps(self) -> int:
        return math.ceil(self.max_episode_s / self.dt - 1e-9)

    @property
    def lane_center(self) -> float:
        return self.lane_near_edge + 0.5 * self.vehicle_width


@dataclass(frozen=True)
class SimState:
    t: int = 0
    x_veh: float = 0.0
    v_veh: float = 0.0
    y_ped: float = 0.0
    ped_phase: PedPhase = PedPhase.WAITING
    delay_remaining: float = 0.0


@dataclass(frozen=True)
class StepOutcome:
    next_state: SimState
    terminal: bool
    terminal_kind: TerminalKind = TerminalKind.NONE
    inverse_tau_at_go: float | None = None
    motor_delay: float | None = None


# (v0, d0, d_stop) rows of the experiment
_TABLE = [
    (6.94, 15.90, None),
    (13.89, 31.81, None),
    (6.94, 31.81, None),
    (13.89, 63.61, None),
    (6.94, 47.71, None),
    (13.89, 95.42, None),
    (6.94, 15.90, 4.0),
    (13.89, 31.81, 4.0),
    (13.89, 31.81, 8.0),
    (6.94, 31.81, 4.0),
    (13.89, 63.61, 4.0),
    (13.89, 63.61, 8.0),
    (6.94, 47.71, 4.0),
    (13.89, 95.42, 4.0),
]
INFEASIBLE_TAU = 1.0


def _scenario_id(kind: ScenarioKind, v0: float, tau0: float,
                 d_stop: float | None) -> str:
    prefix = {ScenarioKind.CONSTANT: "const",
              ScenarioKind.YIELDING: "yield",
              ScenarioKind.INFEASIBLE_TRAINING: "train"}[kind]
    sid = f"{prefix}_v{v0:.2f}_tau{tau0:.2f}"
    if d_stop is not None:
        sid += f"_stop{d_stop:g}"
    return sid


def build_catalog(cfg: WorldConfig | None = None) -> list[ScenarioSpec]:
    """The 14 evaluation scenarios followed by one infeasible (TTA 1 s)
    training scenario per speed level."""
    out = []
    for v0, d0, d_stop in _TABLE:
        kind = ScenarioKind.CONSTANT if d_stop is None else ScenarioKind.YIELDING
        tau0 = d0 / v0
        out.append(ScenarioSpec(_scenario_id(kind, v0, tau0, d_stop), kind,
                                v0, d0, tau0, d_stop))
    for v0 in sorted({row[0] for row in _TABLE}):
        d0 = v0 * INFEASIBLE_TAU
        kind = ScenarioKind.INFEASIBLE_TRAINING
        out.append(ScenarioSpec(_scenario_id(kind, v0, d0 / v0, None), kind,
                                v0, d0, d0 / v0))
    return out


def evaluation_scenarios(catalog: list[ScenarioSpec]) -> list[ScenarioSpec]:
    return [s for s in catalog if s.is_evaluation]


def vehicle_state(spec: ScenarioSpec, time: float) -> tuple[float, float]:
    if time < 0:
        raise ValueError("time must be >= 0")
    if spec.kind != ScenarioKind.YIELDING:
        return spec.d0 - spec.v0 * time, spec.v0
    gap = spec.d0 - spec.d_stop
    if gap <= 0:
        raise ValueError("yielding scenario needs d_stop < d0")
    decel = spec.v0 ** 2 / (2.0 * gap)
    t_stop = spec.v0 / decel
    if time >= t_stop:
        return spec.d_stop, 0.0
    return spec.d0 - spec.v0 * time + 0.5 * decel * time ** 2, spec.v0 - decel * time


def vehicle_trajectory(spec: ScenarioSpec, cfg: WorldConfig, n_steps: int):
    """Vehicle (x, v) at steps 0..n_steps as two arrays."""
    xs = np.empty(n_steps + 1)
    vs = np.empty(n_steps + 1)
    for k in range(n_steps + 1):
        xs[k], vs[k] = vehicle_state(spec, k * cfg.dt)
    return xs, vs


def check_collision(state: SimState, cfg: WorldConfig) -> bool:
    # closest point of the vehicle rectangle to the pedestrian centre (0, y)
    cx = min(max(0.0, state.x_veh), state.x_veh + cfg.vehicle_length)
    lo, hi = cfg.lane_near_edge, cfg.lane_near_edge + cfg.vehicle_width
    cy = min(max(state.y_ped, lo), hi)
    return cx * cx + (state.y_ped - cy) ** 2 < cfg.ped_radius ** 2


def sample_motor_delay(cfg: WorldConfig, rng: np.random.Generator) -> float:
    return max(0.0, cfg.motor_delay_mean + cfg.motor_delay_std * rng.standard_normal())


def initial_state(spec: ScenarioSpec) -> SimState:
    return SimState(t=0, x_veh=spec.d0, v_veh=spec.v0)


def step(state: SimState, action: int, spec: ScenarioSpec, cfg: WorldConfig,
         rng: np.random.Generator | None = None, *,
         inverse_tau: float = 0.0, motor_delay: float | None = None) -> StepOutcome:
    """Advance one time step.

    ``inverse_tau`` is the looming estimate the caller attaches to a Go
    decision; it is echoed back in the outcome.  ``motor_delay`` may be given
    to use a pre-drawn delay instead of sampling from ``rng``.
    """
    if state.ped_phase == PedPhase.DONE:
        raise ValueError("step called on a terminal state")
    t = state.t + 1
    x_veh, v_veh = vehicle_state(spec, t * cfg.dt)
    phase, y, delay_left = state.ped_phase, state.y_ped, state.delay_remaining
    inv_tau_go = None
    delay = None

    if phase == PedPhase.WAITING and action == GO:
        inv_tau_go = inverse_tau
        delay = motor_delay if motor_delay is not None else sample_motor_delay(cfg, rng)
        if cfg.motor_delay_in_dynamics and delay > 0:
            phase, delay_left = PedPhase.DELAYING, delay
        else:
            phase = PedPhase.WALKING
            y = min(cfg.road_width, y + cfg.walk_speed * cfg.dt)
    elif phase == PedPhase.DELAYING:
        delay_left -= cfg.dt
        if delay_left <= 1e-12:
            # the unused part of the step is spent walking
            y = min(cfg.road_width, y + cfg.walk_speed * (-delay_left))
            phase, delay_left = PedPhase.WALKING, 0.0
    elif phase == PedPhase.WALKING:
        y = min(cfg.road_width, y + cfg.walk_speed * cfg.dt)

    nxt = SimState(t, x_veh, v_veh, y, phase, max(delay_left, 0.0))
    kind = TerminalKind.NONE
    if check_collision(nxt, cfg):
        kind = TerminalKind.COLLISION
    elif y >= cfg.road_width - 1e-9:
        kind = TerminalKind.ARRIVAL
    elif t >= cfg.max_steps and phase == PedPhase.WAITING:
        kind = TerminalKind.TIMEOUT
    if kind != TerminalKind.NONE:
        nxt = replace(nxt, ped_phase=PedPhase.DONE, delay_remaining=0.0)
    return StepOutcome(nxt, kind != TerminalKind.NONE, kind, inv_tau_go, delay)


def finish_after_go(state: SimState, spec: ScenarioSpec, cfg: WorldConfig,
                    delay: float, inverse_tau: float = 0.0) -> StepOutcome:
    """Execute Go from a waiting state and run the episode to its end.

    Actions after the commitment are ignored, so the remainder is a pure
    function of the go step and the motor delay.
    """
    out = step(state, GO, spec, cfg, inverse_tau=inverse_tau, motor_delay=delay)
    while not out.terminal:
        out = replace(step(out.next_state, NOT_GO, spec, cfg),
                      inverse_tau_at_go=inverse_tau, motor_delay=delay)
    return out


def terminal_reward(kind: TerminalKind, t_steps: int, c: float, inv_tau: float,
                    cfg: WorldConfig | None = None) -> float:
    cfg = cfg or WorldConfig()
    if kind in (TerminalKind.COLLISION, TerminalKind.TIMEOUT):
        return cfg.reward_collision
    if kind != TerminalKind.ARRIVAL:
        return 0.0
    r = cfg.reward_success - cfg.time_penalty_rate * t_steps - c * inv_tau
    return float(min(cfg.reward_success, max(cfg.reward_collision, r)))
