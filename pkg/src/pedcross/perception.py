"""Noisy visual perception of the approaching vehicle.

Distance along the road is read off the angle below the horizon, so a
constant angular noise turns into a distance-dependent positional noise.  A
constant-velocity Kalman filter integrates the noisy readings into a belief.

All functions are elementwise: they accept floats or equally-shaped numpy
arrays (one entry per simulated replicate).
"""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

import numpy as np

from .env import ScenarioSpec, WorldConfig, evaluation_scenarios


@dataclass(frozen=True)
class NoiseParams:
    sigma_v: float = 0.0  # radians

    def __post_init__(self):
        if self.sigma_v < 0:
            raise ValueError("sigma_v must be >= 0")


@dataclass(frozen=True)
class PerceptionConfig:
    process_accel_std: float = 2.0
    prior_pos_std: float | None = None  # None: derived from the catalog
    prior_vel_std: float | None = None

    def __post_init__(self):
        for v in (self.process_accel_std, self.prior_pos_std, self.prior_vel_std):
            if v is not None and v < 0:
                raise ValueError("perception stds must be >= 0")


@dataclass
class Belief:
    """Estimate of vehicle distance-to-line and speed with covariance
    ``[[p_pp, p_pv], [p_pv, p_vv]]``."""
    x_hat: float | np.ndarray
    v_hat: float | np.ndarray
    p_pp: float | np.ndarray
    p_pv: float | np.ndarray
    p_vv: float | np.ndarray

    @property
    def cov(self) -> np.ndarray:
        return np.array([[self.p_pp, self.p_pv], [self.p_pv, self.p_vv]])

    def copy(self) -> "Belief":
        cp = np.copy if isinstance(self.x_hat, np.ndarray) else (lambda a: a)
        return Belief(cp(self.x_hat), cp(self.v_hat), cp(self.p_pp),
                      cp(self.p_pv), cp(self.p_vv))


def angular_noise_std(d_l, d, h, sigma_v):
    """Std of the perceived longitudinal distance for angular noise ``sigma_v``.

    When the perturbed angle reaches the vertical the reading carries no
    distance information and the full ``|d_l|`` is returned.
    """
    d_l = np.asarray(d_l, dtype=float)
    d = np.asarray(d, dtype=float)
    angle = np.arctan(h / d) + sigma_v
    saturated = angle >= 0.5 * math.pi
    safe_angle = np.where(saturated, 0.25 * math.pi, angle)
    ratio = 1.0 - h / (d * np.tan(safe_angle))
    out = np.abs(d_l) * np.where(saturated, 1.0, np.maximum(ratio, 0.0))
    return out.item() if out.ndim == 0 else out


def viewing_distance(x_veh, y_ped, cfg: WorldConfig):
    """Euclidean distance from the pedestrian to the vehicle front centre."""
    return np.hypot(x_veh, cfg.lane_center - y_ped)


def sample_measurement(true_x_veh, y_ped, cfg: WorldConfig, noise: NoiseParams,
                       rng: np.random.Generator, normal=None):
    """Noisy reading of the vehicle's distance to the crossing line.

    ``normal`` lets the caller pass pre-drawn standard normals; otherwise one
    draw per element is taken from ``rng``.
    """
    sigma_x = angular_noise_std(true_x_veh, viewing_distance(true_x_veh, y_ped, cfg),
                                cfg.eye_height, noise.sigma_v)
    if normal is None:
        shape = np.shape(true_x_veh)
        normal = rng.standard_normal() if shape == () else rng.standard_normal(shape)
    return true_x_veh + sigma_x * normal


def prior_stds(catalog: list[ScenarioSpec]) -> tuple[float, float]:
    """Sample std of initial distance and speed over the evaluation set."""
    ev = evaluation_scenarios(catalog) or list(catalog)
    if not ev:
        raise ValueError("catalog is empty")
    if len(ev) < 2:
        return 0.0, 0.0
    # statistics.stdev is exact for constant data
    return (statistics.stdev(s.d0 for s in ev), statistics.stdev(s.v0 for s in ev))


def belief_init(spec: ScenarioSpec, catalog: list[ScenarioSpec],
                pcfg: PerceptionConfig | None = None, n: int | None = None) -> Belief:
    pcfg = pcfg or PerceptionConfig()
    sd_p, sd_v = prior_stds(catalog)
    if pcfg.prior_pos_std is not None:
        sd_p = pcfg.prior_pos_std
    if pcfg.prior_vel_std is not None:
        sd_v = pcfg.prior_vel_std
    b = Belief(spec.d0, spec.v0, sd_p ** 2, 0.0, sd_v ** 2)
    if n is not None:
        b = Belief(*(np.full(n, float(a)) for a in
                     (b.x_hat, b.v_hat, b.p_pp, b.p_pv, b.p_vv)))
    return b


def predict(belief: Belief, dt: float, accel_std: float) -> Belief:
    """Constant-velocity prediction; distance shrinks at speed ``v_hat``."""
    q = accel_std ** 2
    x = belief.x_hat - belief.v_hat * dt
    p_pp = belief.p_pp - 2 * dt * belief.p_pv + dt * dt * belief.p_vv + q * dt ** 4 / 4
    p_pv = belief.p_pv - dt * belief.p_vv - q * dt ** 3 / 2
    p_vv = belief.p_vv + q * dt * dt
    return Belief(x, belief.v_hat, p_pp, p_pv, p_vv)


def update(prior: Belief, z, R) -> Belief:
    """Position-measurement update with variance ``R``."""
    s = prior.p_pp + R
    degenerate = s <= 0
    s_safe = np.where(degenerate, 1.0, s)
    k_p = np.where(degenerate, 0.0, prior.p_pp / s_safe)
    k_v = np.where(degenerate, 0.0, prior.p_pv / s_safe)
    innov = z - prior.x_hat
    x = prior.x_hat + k_p * innov
    v = prior.v_hat + k_v * innov
    # R == 0: measurement is exact
    exact = (np.asarray(R) == 0) & ~degenerate
    x = np.where(exact, z, x)
    p_pp = (1 - k_p) * prior.p_pp
    p_pv = (1 - k_p) * prior.p_pv
    p_vv = prior.p_vv - k_v * prior.p_pv
    p_pp = np.where(exact, 0.0, p_pp)
    out = Belief(x, v, p_pp, p_pv, np.maximum(p_vv, 0.0))
    if np.ndim(prior.x_hat) == 0 and np.ndim(z) == 0:
        out = Belief(*(float(a) for a in (out.x_hat, out.v_hat, out.p_pp,
                                          out.p_pv, out.p_vv)))
    return out


def belief_step(belief: Belief, z, R, dt: float,
                pcfg: PerceptionConfig | None = None) -> Belief:
    pcfg = pcfg or PerceptionConfig()
    if np.any(np.asarray(R) < 0) or dt <= 0:
        raise ValueError("need R >= 0 and dt > 0")
    return update(predict(belief, dt, pcfg.process_accel_std), z, R)


def measurement_variance(x_pred, y_ped, cfg: WorldConfig, sigma_v: float):
    """Filter-side noise variance, evaluated at the predicted distance."""
    s = angular_noise_std(x_pred, viewing_distance(x_pred, y_ped, cfg),
                          cfg.eye_height, sigma_v)
    return np.square(s)


def perceive(belief: Belief, true_x_veh, y_ped, cfg: WorldConfig, sigma_v: float,
             pcfg: PerceptionConfig, rng: np.random.Generator, normal=None) -> Belief:
    """One perception cycle: predict, draw a reading from the true state,
    update with the variance the agent assigns to its own prediction."""
    prior = predict(belief, cfg.dt, pcfg.process_accel_std)
    z = sample_measurement(true_x_veh, y_ped, cfg, NoiseParams(sigma_v), rng, normal)
    R = measurement_variance(prior.x_hat, y_ped, cfg, sigma_v)
    return update(prior, z, R)


def inverse_tau(x_front, v, y_ped_irrelevant=None):
    """Looming estimate v / distance; zero for stopped, arrived or passed
    vehicles."""
    x_front = np.asarray(x_front, dtype=float)
    v = np.asarray(v, dtype=float)
    ok = (x_front > 0) & (v > 0)
    with np.errstate(over="ignore"):
        out = np.where(ok, v / np.where(ok, x_front, 1.0), 0.0)
    return out.item() if out.ndim == 0 else out
