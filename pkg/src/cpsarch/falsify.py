"""Simulated-annealing falsification of STL requirements.

Each execution searches the control-point box of the input channels for a
simulation whose output trace has negative robustness. A campaign repeats
executions with consecutive seeds.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import OutOfRange, UnknownSignal
from .stl import Formula, Trace, robustness, signals_of


class Interpolation(enum.Enum):
    PIECEWISE_CONSTANT = "constant"
    PIECEWISE_LINEAR = "linear"


@dataclass(frozen=True)
class InputChannel:
    name: str
    lo: float
    hi: float
    control_points: int = 4
    interpolation: Interpolation = Interpolation.PIECEWISE_LINEAR

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"channel {self.name!r}: lo must be below hi")
        if self.control_points < 1:
            raise ValueError(f"channel {self.name!r}: needs at least one control point")


@dataclass(frozen=True)
class InputSpec:
    channels: tuple[InputChannel, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.channels)

    @property
    def dimension(self) -> int:
        return sum(c.control_points for c in self.channels)


def default_input_spec(sut, control_points=4, interpolation=Interpolation.PIECEWISE_LINEAR) -> InputSpec:
    return InputSpec(
        tuple(
            InputChannel(name, *sut.input_ranges[name], control_points, interpolation) for name in sut.input_names
        )
    )


@dataclass(frozen=True)
class AnnealingSchedule:
    initial_temperature: float = 1.0
    cooling_factor: float = 0.97
    proposal_scale: float = 0.1
    max_iterations: int = 300
    rng_seed: int = 0

    def __post_init__(self):
        if not self.initial_temperature > 0:
            raise ValueError("initial_temperature must be positive")
        if not 0 < self.cooling_factor < 1:
            raise ValueError("cooling_factor must lie in (0, 1)")
        if not self.proposal_scale > 0:
            raise ValueError("proposal_scale must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must fit in 64 bits")


ControlPoints = tuple[np.ndarray, ...]


def synthesize_input(spec: InputSpec, points: Sequence[Sequence[float]], grid: Sequence[float]) -> Trace:
    """Expand per-channel control points onto ``grid``.

    Control points are equally spaced over the grid span. Piecewise-linear
    channels treat them as knots (first at the start, last at the end);
    piecewise-constant channels hold value ``j`` on the ``j``-th of ``k``
    equal sub-intervals.
    """
    grid = np.asarray(grid, dtype=float)
    if len(points) != len(spec.channels):
        raise ValueError(f"expected control points for {len(spec.channels)} channel(s), got {len(points)}")
    t0, t1 = float(grid[0]), float(grid[-1])
    span = t1 - t0
    values = {}
    for ch, pts in zip(spec.channels, points):
        pts = np.asarray(pts, dtype=float)
        if pts.shape != (ch.control_points,):
            raise ValueError(f"channel {ch.name!r}: expected {ch.control_points} control points")
        if np.any(pts < ch.lo) or np.any(pts > ch.hi):
            raise OutOfRange(f"channel {ch.name!r}: control points outside [{ch.lo}, {ch.hi}]")
        k = ch.control_points
        if k == 1 or span == 0:
            values[ch.name] = np.full(grid.shape, pts[0])
        elif ch.interpolation is Interpolation.PIECEWISE_LINEAR:
            knots = np.linspace(t0, t1, k)
            values[ch.name] = np.interp(grid, knots, pts)
        else:
            seg = np.floor((grid - t0) / span * k).astype(int)
            values[ch.name] = pts[np.clip(seg, 0, k - 1)]
    return Trace(grid, values)


class Verdict(enum.Enum):
    FALSIFIED = "Falsified"
    NOT_FALSIFIED = "NotFalsified"


@dataclass(frozen=True)
class FalsificationResult:
    verdict: Verdict
    best_robustness: float
    best_input: ControlPoints = field(compare=False)
    iterations_used: int
    history: tuple[float, ...] = ()
    seed: int = 0
    wall_time: float = field(default=0.0, compare=False)

    @property
    def falsified(self) -> bool:
        return self.verdict is Verdict.FALSIFIED

    def same_run(self, other: "FalsificationResult") -> bool:
        """Equality including the best input, ignoring wall time."""
        return self == other and all(np.array_equal(a, b) for a, b in zip(self.best_input, other.best_input))


def evaluate(sut, phi: Formula, spec: InputSpec, points: ControlPoints) -> float:
    inputs = synthesize_input(spec, points, sut.grid())
    return robustness(phi, sut.simulate(inputs))


def _check_signals(sut, phi: Formula, spec: InputSpec):
    missing = signals_of(phi) - set(sut.output_names)
    if missing:
        raise UnknownSignal(f"{sut.name} does not output {', '.join(sorted(missing))}")
    if set(spec.names) != set(sut.input_names):
        raise UnknownSignal(f"input spec channels {spec.names} do not match {sut.name} inputs {sut.input_names}")


def falsify_once(sut, phi: Formula, spec: InputSpec, schedule: AnnealingSchedule) -> FalsificationResult:
    """One simulated-annealing run; stops at the first violating trace.

    Robustness differences are normalized by the magnitude of the first
    sample before the Metropolis test, so the temperature scale is
    problem-independent. Iteration 1 is the uniform random start.
    """
    _check_signals(sut, phi, spec)
    rng = np.random.default_rng(schedule.rng_seed)
    lo = [np.full(c.control_points, c.lo) for c in spec.channels]
    hi = [np.full(c.control_points, c.hi) for c in spec.channels]
    width = [h - l for l, h in zip(lo, hi)]

    start = time.perf_counter()
    current = tuple(rng.uniform(l, h) for l, h in zip(lo, hi))
    rho = evaluate(sut, phi, spec, current)
    best, best_rho = current, rho
    history = [rho]
    norm = abs(rho) if rho != 0 else 1.0
    temperature = schedule.initial_temperature
    it = 1
    while best_rho >= 0 and it < schedule.max_iterations:
        it += 1
        sigma = schedule.proposal_scale * temperature / schedule.initial_temperature
        cand = tuple(
            np.clip(x + rng.normal(0.0, sigma * w), l, h) for x, w, l, h in zip(current, width, lo, hi)
        )
        cand_rho = evaluate(sut, phi, spec, cand)
        delta = (cand_rho - rho) / norm
        u = rng.random()
        if delta <= 0 or u < math.exp(-delta / temperature):
            current, rho = cand, cand_rho
        if cand_rho < best_rho:
            best, best_rho = cand, cand_rho
        history.append(best_rho)
        temperature *= schedule.cooling_factor
    elapsed = time.perf_counter() - start
    verdict = Verdict.FALSIFIED if best_rho < 0 else Verdict.NOT_FALSIFIED
    return FalsificationResult(verdict, best_rho, best, it, tuple(history), schedule.rng_seed, elapsed)


@dataclass(frozen=True)
class CampaignResult:
    executions: tuple[FalsificationResult, ...]

    @property
    def violated_executions(self) -> int:
        return sum(r.falsified for r in self.executions)

    @property
    def falsified(self) -> bool:
        return self.violated_executions > 0

    @property
    def avg_time(self) -> float:
        return sum(r.wall_time for r in self.executions) / len(self.executions)

    @property
    def mean_iterations_to_violation(self) -> float | None:
        hits = [r.iterations_used for r in self.executions if r.falsified]
        return sum(hits) / len(hits) if hits else None

    @property
    def mean_iterations(self) -> float:
        return sum(r.iterations_used for r in self.executions) / len(self.executions)


def run_campaign(sut, phi: Formula, spec: InputSpec, schedule: AnnealingSchedule, executions: int) -> CampaignResult:
    """Run ``executions`` independent searches seeded ``rng_seed``, ``rng_seed + 1``, ..."""
    if executions < 1:
        raise ValueError("executions must be at least 1")
    _check_signals(sut, phi, spec)
    results = []
    for i in range(executions):
        sched = AnnealingSchedule(
            schedule.initial_temperature,
            schedule.cooling_factor,
            schedule.proposal_scale,
            schedule.max_iterations,
            (schedule.rng_seed + i) % 2**64,
        )
        results.append(falsify_once(sut, phi, spec, sched))
    return CampaignResult(tuple(results))
