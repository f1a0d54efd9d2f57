"""Closed-loop systems under test: a plant, a controller, fixed-step Euler.

Two plants ship with the package: a first-order condenser-pressure loop
(``sc-*``) and a two-vehicle car-following loop (``acc-*``). Each has a PID
variant and a surrogate-policy variant with identical I/O signatures, so the
same input box and requirement apply to both.

Plant and controller constants live in JSON files under ``data/suts``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import GridMismatch, NumericOverflow, SimulationError
from .stl import SignalDeclaration, Trace

BUILTIN_SUTS = ("sc-pid", "sc-policy", "acc-pid", "acc-policy")


@dataclass(frozen=True)
class PidParams:
    kp: float
    ki: float
    kd: float
    u_min: float
    u_max: float

    def __post_init__(self):
        if not self.u_min < self.u_max:
            raise ValueError(f"u_min ({self.u_min}) must be below u_max ({self.u_max})")


class PidController:
    """Discrete PID on ``obs[0]`` with conditional-integration anti-windup."""

    def __init__(self, params: PidParams):
        self.params = params
        self.reset()

    def reset(self):
        self.integral = 0.0
        self.prev_error = None

    def __call__(self, obs: Sequence[float], dt: float) -> float:
        p = self.params
        e = obs[0]
        de = 0.0 if self.prev_error is None else (e - self.prev_error) / dt
        self.prev_error = e
        raw = p.kp * e + p.ki * self.integral + p.kd * de
        u = min(max(raw, p.u_min), p.u_max)
        if raw == u or (raw > p.u_max and e < 0) or (raw < p.u_min and e > 0):
            self.integral += e * dt
        return u


@dataclass(frozen=True)
class SurrogatePolicy:
    """One-hidden-layer tanh network standing in for a trained RL agent.

    Observation is the plant's observation vector with the running integral
    of its first entry appended. ``hidden_w`` is (H, n_obs), ``out_w`` is
    (1, H); biases are single-row matrices so the file stays an array of
    matrices.
    """

    hidden_w: tuple[tuple[float, ...], ...]
    hidden_b: tuple[float, ...]
    out_w: tuple[float, ...]
    out_b: float
    u_min: float
    u_max: float

    @classmethod
    def from_matrices(cls, matrices, u_min: float, u_max: float) -> "SurrogatePolicy":
        if len(matrices) != 4:
            raise ValueError("policy weights must be [W_hidden, b_hidden, W_out, b_out]")
        w1, b1, w2, b2 = (np.atleast_2d(np.asarray(m, dtype=float)) for m in matrices)
        if b1.shape != (1, w1.shape[0]) or w2.shape != (1, w1.shape[0]) or b2.shape != (1, 1):
            raise ValueError("policy weight shapes are inconsistent")
        return cls(
            tuple(tuple(r) for r in w1.tolist()),
            tuple(b1[0].tolist()),
            tuple(w2[0].tolist()),
            float(b2[0, 0]),
            u_min,
            u_max,
        )

    def __call__(self, features: Sequence[float]) -> float:
        acc = self.out_b
        for row, b, v in zip(self.hidden_w, self.hidden_b, self.out_w):
            acc += v * math.tanh(sum(w * x for w, x in zip(row, features)) + b)
        return min(max(acc, self.u_min), self.u_max)


class PolicyController:
    def __init__(self, policy: SurrogatePolicy):
        self.policy = policy
        self.reset()

    def reset(self):
        self.integral = 0.0

    def __call__(self, obs: Sequence[float], dt: float) -> float:
        u = self.policy((*obs, self.integral))
        self.integral += obs[0] * dt
        return u


# --- plants -------------------------------------------------------------


@dataclass(frozen=True)
class CondenserPlant:
    """dp/dt = -leak * (p - p_eq) + gain_u * u + gain_d * d; tracks ``setpoint``."""

    leak: float
    gain_u: float
    gain_d: float
    p_eq: float
    setpoint: float
    p0: float

    def initial(self) -> list[float]:
        return [self.p0]

    def observe(self, x, d) -> list[float]:
        return [self.setpoint - x[0]]

    def outputs(self, x) -> tuple[float, ...]:
        return (x[0],)

    def step(self, x, u, d, dt) -> list[float]:
        p = x[0]
        return [p + dt * (-self.leak * (p - self.p_eq) + self.gain_u * u + self.gain_d * d[0])]


@dataclass(frozen=True)
class CarFollowingPlant:
    """Gap and ego speed; ego acceleration is the control, lead speed the input.

    Observation: spacing error (gap minus time-gap policy distance) and
    closing speed.
    """

    standstill: float
    time_gap: float
    drag: float
    gap0: float
    v0: float

    def initial(self) -> list[float]:
        return [self.gap0, self.v0]

    def observe(self, x, d) -> list[float]:
        gap, v = x
        return [gap - (self.standstill + self.time_gap * v), d[0] - v]

    def outputs(self, x) -> tuple[float, ...]:
        return (x[0], x[1])

    def step(self, x, u, d, dt) -> list[float]:
        gap, v = x
        return [gap + dt * (d[0] - v), v + dt * (u - self.drag * v)]


_PLANTS = {"condenser": CondenserPlant, "car-following": CarFollowingPlant}


@dataclass
class SystemUnderTest:
    """Deterministic plant + controller loop sampled every ``dt`` up to ``horizon``."""

    name: str
    inputs: tuple[SignalDeclaration, ...]
    outputs: tuple[SignalDeclaration, ...]
    dt: float
    horizon: float
    input_ranges: dict[str, tuple[float, float]]
    guards: dict[str, tuple[float, float]]
    plant: object
    make_controller: Callable[[], Callable[[Sequence[float], float], float]] = field(repr=False)

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def grid(self) -> np.ndarray:
        return np.round(np.arange(self.steps + 1) * self.dt, 9)

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.inputs)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.outputs)

    def simulate(self, input_trace: Trace) -> Trace:
        grid = self.grid()
        ts = input_trace.timestamps
        if ts.shape != grid.shape or not np.allclose(ts, grid, rtol=0.0, atol=1e-9):
            raise GridMismatch(f"{self.name}: input trace must be sampled on {grid.size} points every {self.dt} s")
        try:
            series = [input_trace.values[n].tolist() for n in self.input_names]
        except KeyError as exc:
            raise GridMismatch(f"{self.name}: input trace lacks signal {exc.args[0]!r}") from None

        plant = self.plant
        controller = self.make_controller()
        bounds = [self.guards.get(n, (-math.inf, math.inf)) for n in self.output_names]
        out = [[0.0] * grid.size for _ in self.outputs]
        x = plant.initial()
        dt = self.dt
        for k in range(grid.size):
            d = [s[k] for s in series]
            y = plant.outputs(x)
            for j, (v, (lo, hi)) in enumerate(zip(y, bounds)):
                if not (lo <= v <= hi):
                    raise NumericOverflow(
                        f"{self.name}: output {self.output_names[j]!r}={v!r} left guard [{lo}, {hi}] at t={grid[k]:g}"
                    )
                out[j][k] = v
            if k == grid.size - 1:
                break
            obs = plant.observe(x, d)
            u = controller(obs, dt)
            x = plant.step(x, u, d, dt)
        return Trace(grid, {n: np.array(col) for n, col in zip(self.output_names, out)})


# --- config loading -----------------------------------------------------


def _decls(items) -> tuple[SignalDeclaration, ...]:
    return tuple(SignalDeclaration(i["name"], i.get("unit", "")) for i in items)


def _load_weights(ref, base: Path | None):
    if isinstance(ref, list):
        return ref
    if base is not None and (base / ref).exists():
        return json.loads((base / ref).read_text())
    return json.loads(resources.files("cpsarch").joinpath("data/suts", ref).read_text())


def sut_from_config(cfg: dict, base: Path | None = None) -> SystemUnderTest:
    """Build a system from a decoded config document.

    ``base`` is the directory used to resolve a relative policy-weights path.
    """
    try:
        plant_cfg = dict(cfg["plant"])
        kind = plant_cfg.pop("type")
        plant = _PLANTS[kind](**plant_cfg)
        ctl = dict(cfg["controller"])
        ctype = ctl.pop("type")
        if ctype == "pid":
            params = PidParams(**ctl)
            make = lambda: PidController(params)  # noqa: E731
        elif ctype == "policy":
            policy = SurrogatePolicy.from_matrices(_load_weights(ctl["weights"], base), ctl["u_min"], ctl["u_max"])
            make = lambda: PolicyController(policy)  # noqa: E731
        else:
            raise ValueError(f"unknown controller type {ctype!r}")
        inputs = cfg["inputs"]
        return SystemUnderTest(
            name=cfg["name"],
            inputs=_decls(inputs),
            outputs=_decls(cfg["outputs"]),
            dt=float(cfg["dt"]),
            horizon=float(cfg["horizon"]),
            input_ranges={i["name"]: (float(i["range"][0]), float(i["range"][1])) for i in inputs},
            guards={k: (float(v[0]), float(v[1])) for k, v in cfg.get("guards", {}).items()},
            plant=plant,
            make_controller=make,
        )
    except (KeyError, TypeError) as exc:
        raise SimulationError(f"bad system config: {exc}") from exc


def load_sut(path: str | Path) -> SystemUnderTest:
    path = Path(path)
    return sut_from_config(json.loads(path.read_text()), path.parent)


def builtin_config(name: str) -> dict:
    return json.loads(resources.files("cpsarch").joinpath("data/suts", f"{name}.json").read_text())


def builtin_suts() -> dict[str, SystemUnderTest]:
    return {name: sut_from_config(builtin_config(name)) for name in BUILTIN_SUTS}


def resolve_sut(ref: str | dict, base: Path | None = None) -> SystemUnderTest:
    """A builtin name, a path to a config file, or an inline config object."""
    if isinstance(ref, dict):
        return sut_from_config(ref, base)
    if ref in BUILTIN_SUTS:
        return sut_from_config(builtin_config(ref))
    path = Path(ref) if base is None or Path(ref).is_absolute() else base / ref
    return load_sut(path)
