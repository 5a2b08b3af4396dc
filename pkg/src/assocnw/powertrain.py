"""Synthetic longitudinal powertrain used as the black-box plant.

Internals are SI (m/s, N, kg); everything emitted to callers is km/h for
speeds and [0, 1] for pedals.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

KMH = 3.6  # m/s -> km/h


@dataclass(frozen=True)
class PlantParams:
    mass: float = 1800.0
    drag_area: float = 0.7
    air_density: float = 1.2
    roll_coeff: float = 0.012
    gravity: float = 9.81
    engine_power: Optional[float] = None
    engine_ref_speed: float = 5.0
    idle_force: float = 900.0
    idle_cutoff_speed: float = 4.2
    brake_force_max: float = 14000.0
    dt: float = 0.01

    def __post_init__(self):
        for name in ("mass", "drag_area", "air_density", "roll_coeff", "gravity",
                     "engine_ref_speed", "idle_force", "idle_cutoff_speed",
                     "brake_force_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.engine_power is not None and not self.engine_power > 0:
            raise ValueError("engine_power must be positive")
        if not 1e-4 <= self.dt <= 0.1:
            raise ValueError("dt must lie in [1e-4, 0.1]")

    def with_mass(self, mass: float) -> "PlantParams":
        return replace(self, mass=mass)


@dataclass
class PlantState:
    speed: float = 0.0  # m/s

    def __post_init__(self):
        if not self.speed >= 0:
            raise ValueError("speed must be nonnegative")


def _resistance(params: PlantParams, v: float) -> float:
    return (0.5 * params.air_density * params.drag_area * v * v
            + params.roll_coeff * params.mass * params.gravity)


def acceleration(params: PlantParams, v: float, p: float, b: float) -> float:
    """Net acceleration in m/s^2 at speed ``v`` (m/s) for pedal positions."""
    if params.engine_power is None:
        raise ValueError("plant is not calibrated (engine_power unset)")
    engine = p * params.engine_power / max(v, params.engine_ref_speed)
    engine += params.idle_force * max(0.0, 1.0 - v / params.idle_cutoff_speed) * (1.0 - p)
    drag = 0.5 * params.air_density * params.drag_area * v * v
    roll = params.roll_coeff * params.mass * params.gravity
    if v > 0.0:
        net = engine - b * params.brake_force_max - drag - roll
    else:
        # static friction and brakes hold the car unless the engine overcomes them
        net = max(0.0, engine - roll - b * params.brake_force_max)
    return net / params.mass


def plant_step(params: PlantParams, state: PlantState, p: float, b: float) -> PlantState:
    if not (0.0 <= p <= 1.0 and 0.0 <= b <= 1.0):
        raise ValueError(f"pedal positions must lie in [0, 1], got p={p}, b={b}")
    v = state.speed
    v_next = v + params.dt * acceleration(params, v, p, b)
    return PlantState(max(0.0, v_next))


def top_speed(params: PlantParams, v_hi: float = 200.0) -> float:
    """Full-throttle equilibrium speed in m/s (bisection on the force balance)."""
    lo, hi = params.engine_ref_speed, v_hi
    f = lambda v: params.engine_power / v - _resistance(params, v)
    if f(lo) <= 0:
        return lo
    if f(hi) > 0:
        raise ValueError("no full-throttle equilibrium below v_hi")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def calibrate(params: PlantParams, target_speed: float = 50.0, tol: float = 0.1) -> PlantParams:
    """Set ``engine_power`` so that full throttle settles at ``target_speed`` m/s.

    Bisection on P_max; the equilibrium speed is monotone in P_max.
    """
    lo, hi = 1.0, 1e8
    if _resistance(params, target_speed) * target_speed >= hi:
        raise ValueError("no equilibrium in bracket; check resistance parameters")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        v_eq = top_speed(replace(params, engine_power=mid), v_hi=1e4)
        if abs(v_eq - target_speed) < tol * 1e-3:
            break
        if v_eq < target_speed:
            lo = mid
        else:
            hi = mid
    out = replace(params, engine_power=mid)
    if abs(top_speed(out, v_hi=1e4) - target_speed) > tol:
        raise ValueError("calibration did not converge")
    return out


@dataclass(frozen=True)
class DriverParams:
    walk_sigma: float = 0.35
    regime_switch_prob: float = 0.001
    # braking spells end this many times faster than throttle spells
    brake_switch_factor: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if not self.walk_sigma >= 0:
            raise ValueError("walk_sigma must be nonnegative")
        if not 0.0 <= self.regime_switch_prob <= 1.0:
            raise ValueError("regime_switch_prob must lie in [0, 1]")
        if not 0.0 <= self.regime_switch_prob * self.brake_switch_factor <= 1.0:
            raise ValueError("braking switch probability must lie in [0, 1]")


@dataclass
class DriverState:
    accelerating: bool = True
    pedal: float = 0.0


def driver_step(params: DriverParams, state: DriverState, rng: np.random.Generator,
                dt: float) -> tuple[float, float]:
    """Advance the random-walk driver one tick and return ``(p, b)``."""
    prob = params.regime_switch_prob
    if not state.accelerating:
        prob *= params.brake_switch_factor
    if rng.random() < prob:
        state.accelerating = not state.accelerating
        state.pedal = 0.0
    step = params.walk_sigma * np.sqrt(dt) * rng.standard_normal()
    state.pedal = float(min(1.0, max(0.0, state.pedal + step)))
    if state.accelerating:
        return state.pedal, 0.0
    return 0.0, state.pedal


def simulate_drive(params: PlantParams, driver: DriverParams, duration_s: float,
                   seed: Optional[int] = None, v0: float = 0.0) -> np.ndarray:
    """Excite the plant with the random-walk driver.

    Returns an ``(n, 4)`` array of rows ``(v_prev, v, p, b)`` with speeds in
    km/h, one row per tick.
    """
    if not duration_s > 0:
        raise ValueError("duration must be positive")
    seed = driver.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    n = int(round(duration_s / params.dt))
    out = np.empty((n, 4))
    state = PlantState(v0)
    dstate = DriverState()
    for t in range(n):
        p, b = driver_step(driver, dstate, rng, params.dt)
        nxt = plant_step(params, state, p, b)
        out[t] = (state.speed * KMH, nxt.speed * KMH, p, b)
        state = nxt
    return out
