import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpsarch.errors import BadInterval, EmptyWindow, HorizonExceeded, StlSyntaxError, UnknownSignal
from cpsarch.stl import (
    Abs,
    Always,
    And,
    BinOp,
    Const,
    Eventually,
    Implies,
    Neg,
    Not,
    Or,
    Predicate,
    Trace,
    Var,
    Verdict,
    builtin_requirements,
    check,
    classify,
    depth,
    parse_stl,
    robustness,
    robustness_signal,
    signals_of,
    to_text,
    trace_from_csv,
    trace_to_csv,
)

from stl_oracle import ERRORS, brute_robustness, evaluate_or_error, expr_value, random_formula, random_trace

x, y = Var("x"), Var("y")
rngs = st.randoms(use_true_random=False)


# --- parsing ------------------------------------------------------------


def test_parse_temporal_and_abs():
    phi = parse_stl("G[30,630] F[0,5] abs(theta - theta_d) <= 1.6", ["theta", "theta_d"])
    assert phi == Always(30, 630, Eventually(0, 5, Predicate(Abs(BinOp("-", Var("theta"), Var("theta_d"))), "<=", Const(1.6))))


def test_unary_binds_tighter_than_conjunction():
    assert parse_stl("G[0,1] x < 3 && y > 2", None) == And(
        Always(0, 1, Predicate(x, "<", Const(3))), Predicate(y, ">", Const(2))
    )


def test_chained_comparison_is_conjunction():
    assert parse_stl("1 <= x <= 2", None) == And(Predicate(Const(1), "<=", x), Predicate(x, "<=", Const(2)))


def test_unicode_operators():
    assert parse_stl("¬(x ≤ 3 ∧ y ≥ 1) → x > 0", None) == parse_stl("!(x <= 3 && y >= 1) -> x > 0", None)


def test_implication_is_right_associative():
    a, b, c = (parse_stl(t, None) for t in ("x > 1", "y > 1", "x > 2"))
    assert parse_stl("x > 1 -> y > 1 -> x > 2", None) == Implies(a, Implies(b, c))


@pytest.mark.parametrize("text", ["", "G[0,1]", "x >", "(x > 1", "x > 1)", "G(0,1) x > 1", "x $ 1", "G[0] x > 1"])
def test_syntax_errors(text):
    with pytest.raises(StlSyntaxError):
        parse_stl(text, None)


@pytest.mark.parametrize("text", ["G[2,1] x > 0", "F[-1,1] x > 0"])
def test_bad_intervals(text):
    with pytest.raises(BadInterval):
        parse_stl(text, None)


def test_unknown_signal():
    with pytest.raises(UnknownSignal):
        parse_stl("G[0,1] z > 0", ["x"])


def test_signals_and_depth():
    phi = parse_stl("G[0,1] (x > 0 -> F[0,1] y < 2)", None)
    assert signals_of(phi) == {"x", "y"}
    assert depth(phi) == 3
    assert depth(parse_stl("x > 0", None)) == 0


def test_negated_parenthesized_constant_stays_negation():
    phi = parse_stl("-(0) < x", None)
    assert isinstance(phi.lhs, Neg)
    assert parse_stl(to_text(phi), None) == phi
    assert parse_stl("-0.5 < x", None).lhs == Const(-0.5)


@given(rngs)
def test_print_parse_round_trip(rng):
    phi = random_formula(rng)
    assert parse_stl(to_text(phi), None) == phi


# --- traces -------------------------------------------------------------


def test_trace_validation():
    with pytest.raises(ValueError):
        Trace([0.0, 0.0], {"x": [1, 2]})
    with pytest.raises(ValueError):
        Trace([0.0, 1.0], {"x": [1]})
    with pytest.raises(ValueError):
        Trace([], {})


def test_trace_csv_round_trip():
    tr = Trace([0.0, 0.1, 0.2], {"pressure": [87.25, 87.3, 1 / 3], "Pa": [0, 1, 2]})
    assert trace_from_csv(trace_to_csv(tr)) == tr
    with pytest.raises(ValueError):
        trace_from_csv("t,x\n0,1\n")


# --- robustness ---------------------------------------------------------


def sc_trace(value, t_end=35.0, dt=0.1):
    ts = np.round(np.arange(int(round(t_end / dt)) + 1) * dt, 9)
    return Trace(ts, {"pressure": np.full(ts.shape, value)})


def test_constant_pressure_sc_robustness():
    phi = builtin_requirements()["SC"].formula
    assert robustness(phi, sc_trace(87.25)) == pytest.approx(0.25, abs=1e-12)
    assert check(phi, sc_trace(87.25)).verdict is Verdict.SATISFIED
    assert check(phi, sc_trace(88.0)).verdict is Verdict.VIOLATED
    assert classify(0.0) is Verdict.BOUNDARY


def test_eventually_on_short_trace():
    tr = Trace([0.0, 2.0, 4.0], {"x": [1.0, 4.0, 0.0]})
    assert robustness(parse_stl("F[0,2] x > 3", None), tr) == 1.0
    assert robustness(parse_stl("G[0,2] x > 3", None), tr) == -2.0


def test_horizon_and_empty_window():
    tr = Trace([0.0, 2.0, 4.0], {"x": [1.0, 4.0, 0.0]})
    with pytest.raises(HorizonExceeded):
        robustness(parse_stl("G[0,5] x > 0", None), tr)
    with pytest.raises(EmptyWindow):
        robustness(parse_stl("G[0.5,1.5] x > 0", None), tr)
    with pytest.raises(UnknownSignal):
        robustness(parse_stl("z > 0", None), tr)


def test_t0_must_be_a_sample_time():
    tr = Trace([0.0, 1.0, 2.0], {"x": [1.0, 2.0, 3.0]})
    phi = parse_stl("x > 0", None)
    assert robustness(phi, tr, t0=2.0) == 3.0
    with pytest.raises(ValueError):
        robustness(phi, tr, t0=0.5)


def test_robustness_signal_matches_pointwise():
    tr = Trace([0, 1, 2, 3, 4], {"x": [3.0, -1.0, 2.0, 5.0, 0.0]})
    phi = parse_stl("F[0,1] x > 1", None)
    sig = robustness_signal(phi, tr, range(4))
    assert sig.tolist() == [robustness(phi, tr, t0=float(t)) for t in range(4)] == [2.0, 1.0, 4.0, 4.0]


def _compare_with_oracle(phi, trace):
    for i, t in enumerate(trace.timestamps):
        want, want_err = evaluate_or_error(lambda: brute_robustness(phi, trace, i))
        got, got_err = evaluate_or_error(lambda: robustness(phi, trace, t0=float(t)))
        assert (want_err is None) == (got_err is None), (to_text(phi), i, want_err, got_err)
        if want_err is None:
            assert got == want or (math.isnan(got) and math.isnan(want)), (to_text(phi), i)


@settings(max_examples=300)
@given(rngs)
def test_matches_brute_force_oracle(rng):
    _compare_with_oracle(random_formula(rng), random_trace(rng))


@settings(max_examples=200)
@given(rngs)
def test_always_eventually_duality(rng):
    phi, trace = random_formula(rng, 2), random_trace(rng)
    lo, hi = sorted(rng.choice((0.0, 0.5, 1.0, 2.0)) for _ in range(2))
    g, g_err = evaluate_or_error(lambda: robustness(Always(lo, hi, phi), trace))
    f, f_err = evaluate_or_error(lambda: robustness(Not(Eventually(lo, hi, Not(phi))), trace))
    assert g_err == f_err
    if g_err is None:
        assert g == f
    nn, _ = evaluate_or_error(lambda: robustness(Not(Not(phi)), trace))
    base, _ = evaluate_or_error(lambda: robustness(phi, trace))
    assert nn == base


def boolean_holds(phi, trace, i):
    """Qualitative semantics, enumerating windows directly."""
    ts = trace.timestamps
    if isinstance(phi, Predicate):
        a, b = expr_value(phi.lhs, trace, i), expr_value(phi.rhs, trace, i)
        return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[phi.op]
    if isinstance(phi, Not):
        return not boolean_holds(phi.arg, trace, i)
    if isinstance(phi, And):
        return boolean_holds(phi.left, trace, i) and boolean_holds(phi.right, trace, i)
    if isinstance(phi, Or):
        return boolean_holds(phi.left, trace, i) or boolean_holds(phi.right, trace, i)
    if isinstance(phi, Implies):
        return (not boolean_holds(phi.left, trace, i)) or boolean_holds(phi.right, trace, i)
    window = [j for j in range(len(ts)) if ts[i] + phi.lo <= ts[j] <= ts[i] + phi.hi]
    results = [boolean_holds(phi.arg, trace, j) for j in window]
    return all(results) if isinstance(phi, Always) else any(results)


@settings(max_examples=300)
@given(rngs)
def test_sign_soundness(rng):
    phi, trace = random_formula(rng), random_trace(rng)
    rho, err = evaluate_or_error(lambda: robustness(phi, trace))
    if err is not None or math.isnan(rho) or rho == 0:
        return
    assert boolean_holds(phi, trace, 0) == (rho > 0)


@given(rngs, st.floats(0, 3))
def test_predicate_shift_monotone(rng, shift):
    trace = random_trace(rng)
    phi = Always(0.0, 0.0, Predicate(x, ">", Const(0.0)))
    shifted = Trace(trace.timestamps, {**trace.values, "x": trace.values["x"] + shift})
    assert robustness(phi, shifted) >= robustness(phi, trace)


@given(rngs)
def test_widening_always_window_never_raises_robustness(rng):
    trace = random_trace(rng)
    phi = random_formula(rng, 1)
    narrow, e1 = evaluate_or_error(lambda: robustness(Always(0.0, 0.5, phi), trace))
    wide, e2 = evaluate_or_error(lambda: robustness(Always(0.0, 1.0, phi), trace))
    if e1 is None and e2 is None:
        assert wide <= narrow


# --- requirement library ------------------------------------------------


def test_requirement_library():
    reqs = builtin_requirements()
    assert list(reqs) == ["AFC27", "AFC29", "AFC33", "WT1", "WT2", "WT3", "WT4", "SC"]
    for r in reqs.values():
        assert parse_stl(to_text(r.formula), r.decls) == r.formula
        assert signals_of(r.formula) <= {d.name for d in r.decls}


def test_wt4_needs_trace_past_horizon():
    phi = builtin_requirements()["WT4"].formula
    ts = np.arange(0, 630.5, 0.5)
    tr = Trace(ts, {"theta": np.zeros(ts.size), "theta_d": np.zeros(ts.size)})
    with pytest.raises(ERRORS):
        robustness(phi, tr)
    ts = np.arange(0, 635.5, 0.5)
    tr = Trace(ts, {"theta": np.zeros(ts.size), "theta_d": np.full(ts.size, 1.0)})
    assert robustness(phi, tr) == pytest.approx(0.6)
