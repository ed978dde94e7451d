"""Parameter-conditioned dueling Double-DQN for the Go / Not-Go decision.

The learning problem is the decision process seen by the pedestrian while it
is still waiting.  Once Go is chosen the remaining actions are ignored, so the
rest of the episode is simulated in one macro transition that ends in the
terminal reward.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from . import env as E
from .env import ScenarioSpec, SimState, TerminalKind, WorldConfig
from .perception import (Belief, PerceptionConfig, belief_init, inverse_tau,
                         perceive, prior_stds)
from .qnet import QNet, make_optimizer

log = logging.getLogger(__name__)


class Variant(str, Enum):
    BM = "BM"
    LM = "LM"
    VM = "VM"
    VLM = "VLM"

    @property
    def noisy(self) -> bool:
        return self in (Variant.VM, Variant.VLM)

    @property
    def looming(self) -> bool:
        return self in (Variant.LM, Variant.VLM)

    @property
    def obs_fields(self) -> tuple[str, ...]:
        if self.noisy:
            base = ("x_p", "y_p", "x_veh", "y_veh", "v", "P_p", "P_v", "sigma_v")
        else:
            base = ("x_p", "y_p", "x_veh", "y_veh", "v")
        return base + (("c",) if self.looming else ()) + ("t",)

    @property
    def obs_dim(self) -> int:
        return len(self.obs_fields)


@dataclass(frozen=True)
class ObsScale:
    position: float = 100.0
    speed: float = 15.0
    sigma_v: float = 1.0
    c: float = 100.0
    var_p: float = 1.0   # prior variances; see obs_scale_for
    var_v: float = 1.0
    max_steps: int = 200

    def divisor(self, name: str) -> float:
        return {"x_p": self.position, "y_p": self.position, "x_veh": self.position,
                "y_veh": self.position, "v": self.speed, "P_p": self.var_p,
                "P_v": self.var_v, "sigma_v": self.sigma_v, "c": self.c,
                "t": float(self.max_steps)}[name]


def obs_scale_for(catalog: list[ScenarioSpec], world: WorldConfig) -> ObsScale:
    sd_p, sd_v = prior_stds(catalog)
    return ObsScale(var_p=max(sd_p ** 2, 1e-12), var_v=max(sd_v ** 2, 1e-12),
                    max_steps=world.max_steps)


def encode_observation(variant: Variant, state_or_fields, belief: Belief | None = None,
                       sigma_v=None, c=None, t=None, *, world: WorldConfig | None = None,
                       scale: ObsScale | None = None) -> np.ndarray:
    """Pack and normalise the variant's observation.

    ``state_or_fields`` is a SimState, or a dict with keys ``x_veh``, ``v_veh``
    and ``y_ped`` whose values may be arrays (batched encoding).
    """
    variant = Variant(variant)
    world = world or WorldConfig()
    scale = scale or ObsScale(max_steps=world.max_steps)
    if isinstance(state_or_fields, SimState):
        s = state_or_fields
        x_veh, v_veh, y_ped = s.x_veh, s.v_veh, s.y_ped
        t = s.t if t is None else t
    else:
        x_veh = state_or_fields["x_veh"]
        v_veh = state_or_fields["v_veh"]
        y_ped = state_or_fields.get("y_ped", 0.0)
    if t is None:
        raise ValueError("time step required")
    if variant.looming and c is None:
        raise ValueError(f"{variant.value} observation requires looming weight c")
    if variant.noisy and (belief is None or sigma_v is None):
        raise ValueError(f"{variant.value} observation requires belief and sigma_v")
    vals = {"x_p": 0.0, "y_p": y_ped, "y_veh": world.lane_center, "t": t, "c": c,
            "sigma_v": sigma_v}
    if variant.noisy:
        vals.update(x_veh=belief.x_hat, v=belief.v_hat, P_p=belief.p_pp, P_v=belief.p_vv)
    else:
        vals.update(x_veh=x_veh, v=v_veh)
    cols = np.broadcast_arrays(*(np.asarray(vals[f], dtype=float) / scale.divisor(f)
                                 for f in variant.obs_fields))
    return np.stack(cols, axis=-1)


def decode_observation(variant: Variant, vec, scale: ObsScale | None = None) -> dict:
    variant = Variant(variant)
    scale = scale or ObsScale()
    vec = np.asarray(vec, dtype=float)
    return {f: vec[..., i] * scale.divisor(f) for i, f in enumerate(variant.obs_fields)}


# ---- replay ---------------------------------------------------------------

@dataclass
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    terminal: bool


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        self.action = np.zeros(capacity, dtype=np.int64)
        self.reward = np.zeros(capacity)
        self.terminal = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, action, reward, next_obs, terminal) -> None:
        i = self._pos
        self.obs[i] = obs
        self.action[i] = action
        self.reward[i] = reward
        self.next_obs[i] = next_obs
        self.terminal[i] = terminal
        self._pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, batch_size)
        return (self.obs[idx], self.action[idx], self.reward[idx],
                self.next_obs[idx], self.terminal[idx])


# ---- configuration ----------------------------------------------------------

FULL_EPISODES = {Variant.BM: 25000, Variant.LM: 25000, Variant.VM: 25000, Variant.VLM: 45000}


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    gamma: float = 0.99
    eps_start: float = 1.0
    eps_decay_per_step: float = 5e-5
    eps_min: float = 0.001
    episodes: int = 25000
    replay_capacity: int = 100_000
    batch_size: int = 64
    target_sync_steps: int = 1000
    updates_per_step: int = 1
    # behaviour-policy only: share of episodes whose first k ~ U{0..hold_max_steps}
    # actions are forced to NotGo, so late decision states get visited
    hold_prob: float = 0.0
    hold_max_steps: int = 100
    hidden: tuple[int, int] = (512, 256)
    optimizer: str = "sgd"
    log_every: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.eps_min > self.eps_start:
            raise ValueError("eps_min must not exceed eps_start")

    @classmethod
    def full(cls, variant: Variant, **kw) -> "TrainConfig":
        return cls(episodes=FULL_EPISODES[Variant(variant)], hidden=(512, 256), **kw)

    @classmethod
    def desk(cls, variant: Variant, **kw) -> "TrainConfig":
        """Reduced profile that trains in minutes on one core."""
        kw.setdefault("episodes", 10000 if Variant(variant) == Variant.VLM else 5000)
        kw.setdefault("learning_rate", 5e-4)
        kw.setdefault("optimizer", "adam")
        kw.setdefault("updates_per_step", 4)
        kw.setdefault("hold_prob", 0.3)
        return cls(hidden=(64, 64), **kw)


@dataclass(frozen=True)
class ParamGrid:
    sigma_v_values: tuple[float, ...] = (0.0,)
    c_values: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        for vals in (self.sigma_v_values, self.c_values):
            a = np.asarray(vals, dtype=float)
            if a.size == 0:
                continue
            if np.any(a < 0) or np.any(np.diff(a) <= 0):
                raise ValueError("grid values must be nonnegative and strictly increasing")

    @classmethod
    def full(cls, inclusive: bool = True) -> "ParamGrid":
        n = 11 if inclusive else 10
        return cls(tuple(round(0.1 * i, 10) for i in range(n)),
                   tuple(float(10 * i) for i in range(n)))

    def cells(self) -> list[tuple[float, float]]:
        return [(s, c) for s in self.sigma_v_values for c in self.c_values]

    def for_variant(self, variant: Variant) -> "ParamGrid":
        """Collapse the axes the variant is not conditioned on to zero."""
        variant = Variant(variant)
        return ParamGrid(self.sigma_v_values if variant.noisy else (0.0,),
                         self.c_values if variant.looming else (0.0,))


def epsilon(learn_step: int, cfg: TrainConfig) -> float:
    # rounding strips float residue so the floor is hit exactly at its step
    return max(cfg.eps_min, round(cfg.eps_start - cfg.eps_decay_per_step * learn_step, 12))


def select_action(net: QNet, obs, eps: float, rng: np.random.Generator) -> int:
    if rng.random() < eps:
        return int(rng.integers(2))
    q = net.forward(obs)[0]
    return E.GO if q[E.GO] > q[E.NOT_GO] else E.NOT_GO


def _as_arrays(batch):
    if isinstance(batch, (list, tuple)) and batch and isinstance(batch[0], Transition):
        return (np.array([b.obs for b in batch], dtype=float),
                np.array([b.action for b in batch]),
                np.array([b.reward for b in batch], dtype=float),
                np.array([b.next_obs for b in batch], dtype=float),
                np.array([b.terminal for b in batch]))
    return batch


def double_dqn_targets(net: QNet, target_net: QNet, reward, next_obs, terminal,
                       gamma: float, q_next_online=None) -> np.ndarray:
    """r for terminal transitions, else r + gamma * Q_target(s', argmax Q_online(s'))."""
    if q_next_online is None:
        q_next_online = net.forward(next_obs)
    a_star = np.argmax(q_next_online, axis=1)
    q_next = target_net.forward(next_obs)[np.arange(len(a_star)), a_star]
    return reward + gamma * np.where(terminal, 0.0, q_next)


def dqn_update(net: QNet, target_net: QNet, batch, cfg: TrainConfig, optimizer=None) -> float:
    """One gradient step on the mean squared TD error; returns the pre-step loss."""
    obs, action, reward, next_obs, terminal = _as_arrays(batch)
    n = len(obs)
    if n == 0:
        raise ValueError("empty batch")
    # one online pass over current and next observations
    q_all, cache = net.forward(np.concatenate([obs, next_obs]), cache=True)
    y = double_dqn_targets(net, target_net, reward, next_obs, terminal, cfg.gamma,
                           q_next_online=q_all[n:])
    rows = np.arange(n)
    err = q_all[rows, action] - y
    dq = np.zeros((n, q_all.shape[1]))
    dq[rows, action] = 2.0 * err / n
    grad = net.backward(dq, tuple(a[:n] for a in cache))
    (optimizer or make_optimizer("sgd", cfg.learning_rate)).step(net, grad)
    return float(np.mean(err ** 2))


# ---- episodes ---------------------------------------------------------------

@lru_cache(maxsize=None)
def _go_outcome(spec: ScenarioSpec, world: WorldConfig, t: int) -> tuple[TerminalKind, int]:
    st = SimState(t, *E.vehicle_state(spec, t * world.dt))
    out = E.finish_after_go(st, spec, world, delay=0.0)
    return out.terminal_kind, out.next_state.t


class Episode:
    """One pedestrian trial seen from the agent's side.

    Random draws happen in a fixed order: the motor delay first, then one
    standard normal per perception cycle (noisy variants only).
    """

    def __init__(self, variant: Variant, spec: ScenarioSpec, catalog: list[ScenarioSpec],
                 world: WorldConfig, rng: np.random.Generator, sigma_v: float = 0.0,
                 c: float = 0.0, pcfg: PerceptionConfig | None = None,
                 scale: ObsScale | None = None):
        self.variant = Variant(variant)
        self.spec, self.world, self.rng = spec, world, rng
        self.sigma_v = sigma_v if self.variant.noisy else 0.0
        self.c = c if self.variant.looming else 0.0
        self.pcfg = pcfg or PerceptionConfig()
        self.scale = scale or obs_scale_for(catalog, world)
        self.delay = E.sample_motor_delay(world, rng)
        self.state = E.initial_state(spec)
        self.belief = belief_init(spec, catalog, self.pcfg) if self.variant.noisy else None
        self.done = False
        self.outcome = TerminalKind.NONE
        self.go_step: int | None = None
        self.reward = 0.0

    @property
    def cit(self) -> float | None:
        if self.go_step is None:
            return None
        return self.go_step * self.world.dt + self.delay

    def observation(self) -> np.ndarray:
        return encode_observation(self.variant, self.state, self.belief,
                                  sigma_v=self.sigma_v, c=self.c,
                                  world=self.world, scale=self.scale)

    def looming(self) -> float:
        if self.variant.noisy:
            return inverse_tau(self.belief.x_hat, self.belief.v_hat)
        return inverse_tau(self.state.x_veh, self.state.v_veh)

    def act(self, action: int) -> tuple[float, bool]:
        if self.done:
            raise ValueError("episode finished")
        if action == E.GO:
            inv_tau = self.looming()
            self.go_step = self.state.t
            if self.world.motor_delay_in_dynamics:
                out = E.finish_after_go(self.state, self.spec, self.world, self.delay, inv_tau)
                kind, t_end = out.terminal_kind, out.next_state.t
            else:
                kind, t_end = _go_outcome(self.spec, self.world, self.state.t)
            self.reward = E.terminal_reward(kind, t_end, self.c, inv_tau, self.world)
            self.outcome, self.done = kind, True
            return self.reward, True
        out = E.step(self.state, E.NOT_GO, self.spec, self.world)
        self.state = out.next_state
        if out.terminal:
            self.reward = E.terminal_reward(out.terminal_kind, self.state.t, self.c, 0.0,
                                            self.world)
            self.outcome, self.done = out.terminal_kind, True
            return self.reward, True
        if self.variant.noisy:
            self.belief = perceive(self.belief, self.state.x_veh, self.state.y_ped,
                                   self.world, self.sigma_v, self.pcfg, self.rng)
        return 0.0, False


def train_variant(variant: Variant, catalog: list[ScenarioSpec], world_cfg: WorldConfig,
                  train_cfg: TrainConfig, param_grid: ParamGrid | None = None,
                  rng: np.random.Generator | None = None,
                  pcfg: PerceptionConfig | None = None, progress=None):
    """Train one variant; returns the online net and the reward log
    ``[(episode, mean_reward_over_block), ...]``."""
    variant = Variant(variant)
    if (variant.noisy or variant.looming) and param_grid is None:
        raise ValueError("conditioned variant requires parameter grid")
    grid = (param_grid or ParamGrid()).for_variant(variant)
    rng = rng if rng is not None else np.random.default_rng(train_cfg.seed)
    scale = obs_scale_for(catalog, world_cfg)
    net = QNet.init(variant.obs_dim, train_cfg.hidden, rng, variant.value)
    target = net.copy()
    opt = make_optimizer(train_cfg.optimizer, train_cfg.learning_rate)
    buf = ReplayBuffer(train_cfg.replay_capacity, variant.obs_dim)
    learn_step = 0
    n_updates = 0
    reward_log: list[tuple[int, float]] = []
    block: list[float] = []

    for ep in range(1, train_cfg.episodes + 1):
        spec = catalog[rng.integers(len(catalog))]
        sv = grid.sigma_v_values[rng.integers(len(grid.sigma_v_values))]
        c = grid.c_values[rng.integers(len(grid.c_values))]
        episode = Episode(variant, spec, catalog, world_cfg, rng, sv, c, pcfg, scale)
        obs = episode.observation()
        total = 0.0
        hold = 0
        if train_cfg.hold_prob > 0 and rng.random() < train_cfg.hold_prob:
            hold = int(rng.integers(train_cfg.hold_max_steps + 1))
        while True:
            if episode.state.t < hold:
                a = E.NOT_GO
            else:
                a = select_action(net, obs, epsilon(learn_step, train_cfg), rng)
            r, done = episode.act(a)
            next_obs = obs if done else episode.observation()
            buf.add(obs, a, r, next_obs, done)
            total += r
            if len(buf) >= train_cfg.batch_size:
                for _ in range(train_cfg.updates_per_step):
                    dqn_update(net, target, buf.sample(train_cfg.batch_size, rng),
                               train_cfg, opt)
                    n_updates += 1
                    if n_updates % train_cfg.target_sync_steps == 0:
                        target.load_from(net)
                learn_step += 1
            if done:
                break
            obs = next_obs
        block.append(total)
        if ep % train_cfg.log_every == 0:
            reward_log.append((ep, float(np.mean(block))))
            log.info("%s episode %d mean reward %.3f eps %.3f", variant.value, ep,
                     reward_log[-1][1], epsilon(learn_step, train_cfg))
            if progress:
                progress(ep, reward_log[-1][1])
            block = []
    return net, reward_log
