"""Forward/backward prediction and the self-learning speed controller.

The learned joint density over ``(v_prev, v, p, b)`` is queried in two
directions. Forward: given the current speed and pedals, complete the next
speed. Backward: given the current speed and the *desired* next speed, complete
the pedals. The backward completion, clamped to the pedal range, is the whole
controller; there is no error term and no integral action.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .associate import DEFAULT_MC_SAMPLES, DEFAULT_RIDGE, PlausibilityReference, associate
from .density import MixtureModel
from .powertrain import KMH, PlantParams, PlantState, plant_step

CAR_NAMES = ("v_prev", "v", "p", "b")
FORWARD_MASK = np.array([True, False, True, True])
BACKWARD_MASK = np.array([True, True, False, False])


def new_car_model(budget: int = 500, decay: float = 0.9999, **kwargs) -> MixtureModel:
    """Empty density over the powertrain vector layout ``(v_prev, v, p, b)``."""
    return MixtureModel(4, CAR_NAMES, budget=budget, decay=decay, **kwargs)


@dataclass
class ControllerConfig:
    order: int = 1
    online_learn: bool = False
    clamp_low: float = 0.0
    clamp_high: float = 1.0
    exclusive_pedals: bool = True
    plausibility_floor: float = 0.0
    seed: int = 0
    mc_samples: int = DEFAULT_MC_SAMPLES
    # ticks between rebuilds of the plausibility reference while the model learns
    plausibility_refresh: int = 100
    # std of the random guess added to the signed pedal command (p - b) on ticks
    # whose plausibility is below plausibility_floor
    explore_sigma: float = 0.0
    ridge: float = DEFAULT_RIDGE

    def __post_init__(self):
        if self.order not in (0, 1):
            raise ValueError("order must be 0 or 1")
        if not self.clamp_low < self.clamp_high:
            raise ValueError("clamp bounds must be ordered")
        if not 0.0 <= self.plausibility_floor <= 1.0:
            raise ValueError("plausibility_floor must lie in [0, 1]")
        if self.mc_samples < 1 or self.plausibility_refresh < 1:
            raise ValueError("mc_samples and plausibility_refresh must be positive")
        if self.explore_sigma < 0:
            raise ValueError("explore_sigma must be nonnegative")


class Command(NamedTuple):
    p: float
    b: float
    plausibility: float
    guessed: bool = False


@dataclass
class TargetProfile:
    """Piecewise-constant target speed (km/h) starting at each breakpoint time."""

    times: Sequence[float]
    speeds: Sequence[float]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.speeds = np.asarray(self.speeds, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.speeds.shape or len(self.times) == 0:
            raise ValueError("profile needs matching, nonempty time and speed lists")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("profile times must be strictly increasing")
        if np.any(self.speeds < 0) or not np.all(np.isfinite(self.speeds)):
            raise ValueError("target speeds must be finite and nonnegative")

    @classmethod
    def constant(cls, speed: float) -> "TargetProfile":
        return cls([0.0], [speed])

    @classmethod
    def steps(cls, speeds: Sequence[float], segment_s: float) -> "TargetProfile":
        return cls([i * segment_s for i in range(len(speeds))], speeds)

    def target_at(self, t: float) -> float:
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.speeds[max(k, 0)])

    def segments(self, duration: float) -> List[Tuple[float, float, float]]:
        """``(start, end, target)`` for every segment that starts before ``duration``."""
        out = []
        for k, (t0, v) in enumerate(zip(self.times, self.speeds)):
            if t0 >= duration:
                break
            t1 = self.times[k + 1] if k + 1 < len(self.times) else duration
            out.append((float(t0), float(min(t1, duration)), float(v)))
        return out

    @classmethod
    def read_csv(cls, text: str) -> "TargetProfile":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
        if not rows or [h.strip() for h in rows[0]] != ["time_s", "target_kmh"]:
            raise ValueError("profile CSV must start with header 'time_s,target_kmh'")
        times, speeds = [], []
        for lineno, r in enumerate(rows[1:], start=2):
            try:
                t, v = (float(x) for x in r)
            except ValueError:
                raise ValueError(f"profile row {lineno}: expected two numbers, got {r}") from None
            times.append(t)
            speeds.append(v)
        return cls(times, speeds)

    def to_csv(self) -> str:
        lines = ["time_s,target_kmh"] + [f"{t!r},{v!r}" for t, v in zip(self.times.tolist(),
                                                                        self.speeds.tolist())]
        return "\n".join(lines) + "\n"


TRACE_HEADER = ("time_s", "target_kmh", "actual_kmh", "p", "b", "plausibility", "learned")


@dataclass
class ControlTrace:
    time: np.ndarray
    target: np.ndarray
    actual: np.ndarray
    p: np.ndarray
    b: np.ndarray
    plausibility: np.ndarray
    learned: np.ndarray
    guessed: np.ndarray = field(default=None)

    @property
    def error(self) -> np.ndarray:
        return np.abs(self.actual - self.target)

    def window(self, t0: float, t1: float) -> np.ndarray:
        return (self.time > t0) & (self.time <= t1)

    def mean_abs_error(self, t0: float, t1: float) -> float:
        return float(self.error[self.window(t0, t1)].mean())

    def steady_state_errors(self, profile: TargetProfile, window_s: float = 5.0) -> List[float]:
        """Max |error| over the last ``window_s`` seconds of every segment."""
        end = float(self.time[-1])
        return [float(self.error[self.window(t1 - window_s, t1)].max())
                for _, t1, _ in profile.segments(end + 1e-9)]

    def saturated_ticks(self, high: float = 1.0) -> int:
        return int(np.sum((self.p == high) | (self.b == high)))

    def to_csv(self, header_comment: Optional[str] = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        buf.write(",".join(TRACE_HEADER) + "\n")
        for row in zip(self.time.tolist(), self.target.tolist(), self.actual.tolist(),
                       self.p.tolist(), self.b.tolist(), self.plausibility.tolist(),
                       self.learned.tolist()):
            buf.write(",".join(repr(x) for x in row[:-1]) + f",{int(row[-1])}\n")
        return buf.getvalue()


def forward_predict(model: MixtureModel, v_now: float, p: float, b: float, order: int = 1,
                    reference: Optional[PlausibilityReference] = None) -> float:
    """Next speed (km/h) predicted from the current speed and pedal positions."""
    res = associate(model, [v_now, np.nan, p, b], FORWARD_MASK, order=order,
                    mc_samples=64 if reference is None else reference.mc_samples,
                    reference=reference)
    return float(res.completed[1])


def _shape_command(raw_p: float, raw_b: float, config: ControllerConfig) -> Tuple[float, float]:
    p = min(config.clamp_high, max(config.clamp_low, raw_p))
    b = min(config.clamp_high, max(config.clamp_low, raw_b))
    if config.exclusive_pedals:
        if p >= b:
            b = config.clamp_low
        else:
            p = config.clamp_low
    return p, b


def backward_control(model: MixtureModel, v_now: float, v_target: float,
                     config: Optional[ControllerConfig] = None,
                     reference: Optional[PlausibilityReference] = None) -> Command:
    """Pedal positions that, per the model, move the car from ``v_now`` to ``v_target``.

    Raw completions are clamped to the pedal range; with exclusive pedals the
    smaller command is zeroed. The returned plausibility scores the vector
    ``(v_now, v_target, p, b)`` with the issued pedals. An empty model yields the guess ``p = b = 0``
    flagged as such.
    """
    config = config or ControllerConfig()
    if model.m == 0:
        return Command(config.clamp_low, config.clamp_low, 0.0, True)
    if reference is None:
        reference = PlausibilityReference(model, config.mc_samples, config.seed)
    res = associate(model, [v_now, v_target, np.nan, np.nan], BACKWARD_MASK, order=config.order,
                    ridge=config.ridge, reference=reference)
    p, b = _shape_command(float(res.completed[2]), float(res.completed[3]), config)
    # score the command actually issued, not the unclamped completion
    return Command(p, b, reference.score([v_now, v_target, p, b]), False)


def run_control(model: Optional[MixtureModel], plant_params: PlantParams, profile: TargetProfile,
                duration: float, config: Optional[ControllerConfig] = None,
                v0: float = 0.0) -> ControlTrace:
    """Closed-loop run of the backward-model controller against the plant.

    With ``config.online_learn`` every realized transition ``(v_prev, v, p, b)``
    is added to ``model`` (which is mutated). ``model=None`` starts from an
    empty density. Speeds are km/h.
    """
    config = config or ControllerConfig()
    if model is None:
        model = new_car_model()
    if plant_params.engine_power is None:
        raise ValueError("plant must be calibrated before closed-loop runs")
    dt = plant_params.dt
    n = int(round(duration / dt))
    rng = np.random.default_rng(config.seed)
    cols = {k: np.empty(n) for k in ("time", "target", "actual", "p", "b", "plausibility")}
    learned = np.zeros(n, dtype=bool)
    guessed = np.zeros(n, dtype=bool)
    state = PlantState(v0 / KMH)
    reference = None
    ref_age = 0
    for t in range(n):
        time = (t + 1) * dt
        target = profile.target_at(t * dt)
        v_now = state.speed * KMH
        if model.m and (reference is None or (config.online_learn
                                              and ref_age >= config.plausibility_refresh)):
            reference = PlausibilityReference(model, config.mc_samples, config.seed + t)
            ref_age = 0
        cmd = backward_control(model, v_now, target, config, reference)
        ref_age += 1
        p, b = cmd.p, cmd.b
        guess = cmd.guessed or cmd.plausibility < config.plausibility_floor
        if guess and config.explore_sigma > 0:
            u = p - b + config.explore_sigma * rng.standard_normal()
            p, b = _shape_command(max(u, 0.0), max(-u, 0.0), config)
        state = plant_step(plant_params, state, p, b)
        v_next = state.speed * KMH
        if config.online_learn:
            model.add_sample([v_now, v_next, p, b])
            learned[t] = True
        cols["time"][t] = time
        cols["target"][t] = target
        cols["actual"][t] = v_next
        cols["p"][t] = p
        cols["b"][t] = b
        cols["plausibility"][t] = cmd.plausibility
        guessed[t] = guess
    return ControlTrace(cols["time"], cols["target"], cols["actual"], cols["p"], cols["b"],
                        cols["plausibility"], learned, guessed)


def teach(model: MixtureModel, samples: Iterable[Sequence[float]]) -> MixtureModel:
    """Feed a demonstration stream ``(v_prev, v, p, b)`` into ``model``."""
    for row in samples:
        x = np.asarray(row, dtype=float)
        if x.shape != (model.dim,):
            raise ValueError(f"sample has {x.size} components, model expects {model.dim}")
        model.add_sample(x)
    return model
