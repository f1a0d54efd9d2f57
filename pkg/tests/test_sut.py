
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpsarch.errors import GridMismatch, NumericOverflow, SimulationError
from cpsarch.falsify import default_input_spec, synthesize_input
from cpsarch.stl import Trace, builtin_requirements, robustness
from cpsarch.sut import (
    BUILTIN_SUTS,
    PidController,
    PidParams,
    SurrogatePolicy,
    builtin_config,
    builtin_suts,
    resolve_sut,
    sut_from_config,
)

SC = builtin_requirements()["SC"].formula


def constant_input(sut, value):
    grid = sut.grid()
    return Trace(grid, {n: np.full(grid.shape, float(value)) for n in sut.input_names})


def test_builtin_names_and_pairing():
    suts = builtin_suts()
    assert set(suts) == set(BUILTIN_SUTS)
    assert "nope" not in suts
    for name in BUILTIN_SUTS:
        if name.endswith("-pid"):
            twin = suts[name.replace("-pid", "-policy")]
            assert twin.inputs == suts[name].inputs and twin.outputs == suts[name].outputs
            assert twin.input_ranges == suts[name].input_ranges


def test_sc_pid_signature():
    sut = builtin_suts()["sc-pid"]
    assert sut.input_names == ("disturbance",) and sut.output_names == ("pressure",)
    assert sut.dt == 0.1 and sut.horizon == 35.0
    assert len(sut.grid()) == 351


def test_horizon_equal_to_dt_gives_two_samples():
    cfg = builtin_config("sc-pid")
    cfg["horizon"] = cfg["dt"]
    sut = sut_from_config(cfg)
    out = sut.simulate(constant_input(sut, 0.0))
    assert out.timestamps.tolist() == [0.0, 0.1]


@pytest.mark.parametrize("name", ["sc-pid", "sc-policy"])
def test_nominal_disturbance_satisfies_sc(name):
    sut = builtin_suts()[name]
    out = sut.simulate(constant_input(sut, 0.0))
    window = (out.timestamps >= 30) & (out.timestamps <= 35)
    assert np.all((out.values["pressure"][window] >= 87) & (out.values["pressure"][window] <= 87.5))
    assert robustness(SC, out) > 0


def test_extreme_ramp_violates_sc_pid():
    sut = builtin_suts()["sc-pid"]
    spec = default_input_spec(sut)
    trace = synthesize_input(spec, [np.array([1.0, 1.0, 1.0, -1.0])], sut.grid())
    assert robustness(SC, sut.simulate(trace)) < 0


@pytest.mark.parametrize("name", BUILTIN_SUTS)
def test_simulation_is_bit_identical(name):
    sut = builtin_suts()[name]
    lo, hi = next(iter(sut.input_ranges.values()))
    tr = constant_input(sut, (lo + hi) / 2)
    assert sut.simulate(tr) == sut.simulate(tr)


def test_grid_mismatch():
    sut = builtin_suts()["sc-pid"]
    with pytest.raises(GridMismatch):
        sut.simulate(Trace([0.0, 1.0], {"disturbance": [0.0, 0.0]}))
    grid = sut.grid()
    with pytest.raises(GridMismatch):
        sut.simulate(Trace(grid, {"other": np.zeros(grid.size)}))


def test_guard_breach_raises():
    cfg = builtin_config("sc-pid")
    cfg["guards"] = {"pressure": [87.0, 87.5]}
    sut = sut_from_config(cfg)
    with pytest.raises(NumericOverflow):
        sut.simulate(constant_input(sut, 1.0))


def test_bad_config():
    with pytest.raises(SimulationError):
        sut_from_config({"name": "x"})
    cfg = builtin_config("sc-pid")
    cfg["controller"]["type"] = "fuzzy"
    with pytest.raises(ValueError):
        sut_from_config(cfg)


def test_resolve_sut_variants(tmp_path):
    cfg = builtin_config("sc-pid")
    (tmp_path / "mine.json").write_text(json.dumps(cfg))
    a = resolve_sut("sc-pid")
    b = resolve_sut("mine.json", tmp_path)
    c = resolve_sut(cfg)
    tr = constant_input(a, 0.3)
    assert a.simulate(tr) == b.simulate(tr) == c.simulate(tr)


def test_pid_params_validation():
    with pytest.raises(ValueError):
        PidParams(1, 0, 0, u_min=1.0, u_max=1.0)


def test_pid_saturates_and_holds_integral():
    pid = PidController(PidParams(kp=10.0, ki=1.0, kd=0.0, u_min=-1.0, u_max=1.0))
    assert pid([5.0], 0.1) == 1.0
    # saturated with error pushing further into the limit: integral is frozen
    assert pid.integral == 0.0
    assert pid([-0.05], 0.1) == pytest.approx(-0.5)


def test_pid_derivative_has_no_first_step_kick():
    pid = PidController(PidParams(kp=0.0, ki=0.0, kd=1.0, u_min=-10, u_max=10))
    assert pid([3.0], 0.1) == 0.0
    assert pid([4.0], 0.1) == pytest.approx(10.0)


def test_policy_clamps_and_validates_shapes():
    pol = SurrogatePolicy.from_matrices([[[1.0]], [[0.0]], [[100.0]], [[0.0]]], -2.0, 2.0)
    assert pol([5.0]) == 2.0 and pol([-5.0]) == -2.0 and pol([0.0]) == 0.0
    with pytest.raises(ValueError):
        SurrogatePolicy.from_matrices([[[1.0]], [[0.0, 1.0]], [[1.0]], [[0.0]]], -1, 1)
    with pytest.raises(ValueError):
        SurrogatePolicy.from_matrices([[[1.0]]], -1, 1)


points = st.lists(st.floats(0, 1), min_size=4, max_size=4)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(BUILTIN_SUTS), points)
def test_outputs_stay_within_guards(name, unit_points):
    sut = builtin_suts()[name]
    spec = default_input_spec(sut)
    ch = spec.channels[0]
    pts = ch.lo + np.array(unit_points) * (ch.hi - ch.lo)
    out = sut.simulate(synthesize_input(spec, [pts], sut.grid()))
    for n, (lo, hi) in sut.guards.items():
        assert np.all((out.values[n] >= lo) & (out.values[n] <= hi))
