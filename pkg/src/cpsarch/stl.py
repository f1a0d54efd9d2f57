"""Signal Temporal Logic: formula AST, text parser/printer, and space robustness.

Grammar (loosest binding first)::

    formula  := disj ('->' formula)?            right-associative
    disj     := conj ('||' conj)*
    conj     := unary ('&&' unary)*
    unary    := '!' unary | 'G' interval unary | 'F' interval unary | primary
    primary  := predicate | '(' formula ')'
    predicate:= expr CMP expr (CMP expr)?       a chain a <= x <= b means a <= x && x <= b
    expr     := term (('+' | '-') term)*
    term     := factor (('*' | '/') factor)*
    factor   := NUMBER | SIGNAL | 'abs' '(' expr ')' | '(' expr ')' | '-' factor
    interval := '[' NUMBER ',' NUMBER ']'
    CMP      := '<' | '<=' | '>' | '>='

Temporal windows range over the trace's own sample times; there is no
interpolation between samples.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

import numpy as np

from .errors import BadInterval, EmptyWindow, HorizonExceeded, StlSyntaxError, UnknownSignal

# --- expressions --------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Abs:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


Expr = Union[Var, Const, Neg, Abs, BinOp]

# --- formulas -----------------------------------------------------------

COMPARATORS = ("<", "<=", ">", ">=")


@dataclass(frozen=True)
class Predicate:
    lhs: Expr
    op: str
    rhs: Expr


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Always:
    lo: float
    hi: float
    arg: "Formula"


@dataclass(frozen=True)
class Eventually:
    lo: float
    hi: float
    arg: "Formula"


Formula = Union[Predicate, Not, And, Or, Implies, Always, Eventually]


@dataclass(frozen=True)
class SignalDeclaration:
    name: str
    unit: str = ""


def signals_of(node) -> set[str]:
    """Names of all signals referenced by a formula or expression."""
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Const):
        return set()
    if isinstance(node, Predicate):
        return signals_of(node.lhs) | signals_of(node.rhs)
    if isinstance(node, (Neg, Abs, Not, Always, Eventually)):
        return signals_of(node.arg)
    return signals_of(node.left) | signals_of(node.right)


def depth(phi: Formula) -> int:
    """Operator nesting depth; a bare predicate has depth 0."""
    if isinstance(phi, Predicate):
        return 0
    if isinstance(phi, (Not, Always, Eventually)):
        return 1 + depth(phi.arg)
    return 1 + max(depth(phi.left), depth(phi.right))


# --- lexer / parser -----------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>&&|\|\||->|<=|>=|[<>!()\[\],+\-*/]|≤|≥|∧|∨|¬|→)
    """,
    re.VERBOSE,
)

_UNICODE = {"≤": "<=", "≥": ">=", "∧": "&&", "∨": "||", "¬": "!", "→": "->"}
_RESERVED = {"G", "F", "abs"}


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise StlSyntaxError(f"unexpected character {text[pos]!r} at offset {pos}")
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group(kind)
            out.append(_Tok(kind, _UNICODE.get(tok, tok), pos))
        pos = m.end()
    out.append(_Tok("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, known: set[str] | None):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.known = known

    # helpers
    def peek(self, offset=0) -> _Tok:
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind in ("op", "ident") and tok.text == text

    def take(self, text: str) -> _Tok:
        tok = self.peek()
        if not self.at(text):
            raise StlSyntaxError(f"expected {text!r} at offset {tok.pos}, found {tok.text or 'end of input'!r}")
        self.i += 1
        return tok

    def fail(self, what: str):
        tok = self.peek()
        raise StlSyntaxError(f"expected {what} at offset {tok.pos}, found {tok.text or 'end of input'!r}")

    # formulas
    def parse(self) -> Formula:
        phi = self.formula()
        if self.peek().kind != "eof":
            self.fail("end of input")
        return phi

    def formula(self) -> Formula:
        left = self.disj()
        if self.at("->"):
            self.i += 1
            return Implies(left, self.formula())
        return left

    def disj(self) -> Formula:
        left = self.conj()
        while self.at("||"):
            self.i += 1
            left = Or(left, self.conj())
        return left

    def conj(self) -> Formula:
        left = self.unary()
        while self.at("&&"):
            self.i += 1
            left = And(left, self.unary())
        return left

    def unary(self) -> Formula:
        if self.at("!"):
            self.i += 1
            return Not(self.unary())
        tok = self.peek()
        if tok.kind == "ident" and tok.text in ("G", "F") and self.peek(1).text == "[":
            self.i += 1
            lo, hi = self.interval()
            arg = self.unary()
            return Always(lo, hi, arg) if tok.text == "G" else Eventually(lo, hi, arg)
        return self.primary()

    def interval(self) -> tuple[float, float]:
        start = self.take("[").pos
        lo = self.number()
        self.take(",")
        hi = self.number()
        self.take("]")
        if lo < 0 or hi < 0 or lo > hi:
            raise BadInterval(f"interval [{lo:g},{hi:g}] at offset {start} must satisfy 0 <= a <= b")
        return lo, hi

    def number(self) -> float:
        sign = 1.0
        if self.at("-"):
            self.i += 1
            sign = -1.0
        tok = self.peek()
        if tok.kind != "num":
            self.fail("a number")
        self.i += 1
        return sign * float(tok.text)

    def primary(self) -> Formula:
        if self.at("("):
            mark = self.i
            try:
                return self.predicate()
            except StlSyntaxError:
                self.i = mark
            self.take("(")
            phi = self.formula()
            self.take(")")
            return phi
        return self.predicate()

    def predicate(self) -> Formula:
        lhs = self.expr()
        op = self.peek().text
        if op not in COMPARATORS:
            self.fail("a comparison operator")
        self.i += 1
        rhs = self.expr()
        pred = Predicate(lhs, op, rhs)
        if self.peek().text in COMPARATORS:
            op2 = self.peek().text
            self.i += 1
            pred = And(pred, Predicate(rhs, op2, self.expr()))
        return pred

    # expressions
    def expr(self) -> Expr:
        left = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.peek().text
            self.i += 1
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            op = self.peek().text
            self.i += 1
            left = BinOp(op, left, self.factor())
        return left

    def factor(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if self.at("-"):
            self.i += 1
            literal = self.peek().kind == "num"
            arg = self.factor()
            return Const(-arg.value) if literal else Neg(arg)
        if self.at("("):
            self.i += 1
            e = self.expr()
            self.take(")")
            return e
        if tok.kind == "ident":
            if tok.text == "abs":
                self.i += 1
                self.take("(")
                e = self.expr()
                self.take(")")
                return Abs(e)
            if tok.text in _RESERVED:
                self.fail("an expression")
            if self.known is not None and tok.text not in self.known:
                raise UnknownSignal(f"signal {tok.text!r} at offset {tok.pos} is not declared")
            self.i += 1
            return Var(tok.text)
        self.fail("an expression")


def _names(decls) -> set[str] | None:
    if decls is None:
        return None
    return {d.name if isinstance(d, SignalDeclaration) else str(d) for d in decls}


def parse_stl(text: str, decls: Iterable[SignalDeclaration | str] | None) -> Formula:
    """Parse ``text``; every signal must appear in ``decls`` (``None`` skips the check)."""
    return _Parser(text, _names(decls)).parse()


# --- printer ------------------------------------------------------------


def _num(v: float) -> str:
    if math.isfinite(v) and v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def expr_to_text(e: Expr, top: bool = True) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Const):
        return _num(e.value)
    if isinstance(e, Neg):
        return f"-({expr_to_text(e.arg)})"
    if isinstance(e, Abs):
        return f"abs({expr_to_text(e.arg)})"
    text = f"{expr_to_text(e.left, False)} {e.op} {expr_to_text(e.right, False)}"
    return text if top else f"({text})"


def to_text(phi: Formula) -> str:
    """Render a formula so that ``parse_stl(to_text(phi)) == phi``.

    Binary connectives are always parenthesized; unary operators need no
    parentheses around their operand because they bind tightest.
    """
    if isinstance(phi, Predicate):
        return f"{expr_to_text(phi.lhs)} {phi.op} {expr_to_text(phi.rhs)}"
    if isinstance(phi, Not):
        return f"!{to_text(phi.arg)}"
    if isinstance(phi, (Always, Eventually)):
        name = "G" if isinstance(phi, Always) else "F"
        return f"{name}[{_num(phi.lo)},{_num(phi.hi)}] {to_text(phi.arg)}"
    sym = {And: "&&", Or: "||", Implies: "->"}[type(phi)]
    return f"({to_text(phi.left)} {sym} {to_text(phi.right)})"


# --- traces -------------------------------------------------------------


@dataclass(frozen=True)
class Trace:
    """Timed multi-signal record; all series share ``timestamps``."""

    timestamps: np.ndarray
    values: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=float)
        if ts.ndim != 1 or ts.size < 1:
            raise ValueError("trace needs at least one timestamp")
        if ts.size > 1 and not np.all(np.diff(ts) > 0):
            raise ValueError("timestamps must be strictly increasing")
        vals = {}
        for name, series in self.values.items():
            arr = np.asarray(series, dtype=float)
            if arr.shape != ts.shape:
                raise ValueError(f"signal {name!r} has {arr.size} samples, expected {ts.size}")
            vals[name] = arr
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.timestamps.size

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            np.array_equal(self.timestamps, other.timestamps)
            and self.values.keys() == other.values.keys()
            and all(np.array_equal(v, other.values[k]) for k, v in self.values.items())
        )

    __hash__ = None

    def merged(self, other: "Trace") -> "Trace":
        if not np.array_equal(self.timestamps, other.timestamps):
            raise ValueError("cannot merge traces on different time grids")
        return Trace(self.timestamps, {**self.values, **other.values})


def trace_from_csv(data: bytes | str) -> Trace:
    """Read ``time,<signal>...`` CSV (one row per sample)."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    rows = [r for r in csv.reader(io.StringIO(data)) if r]
    if not rows or rows[0][0].strip() != "time":
        raise ValueError("trace CSV must start with a 'time' header column")
    names = [h.strip() for h in rows[0][1:]]
    body = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    if body.size == 0:
        raise ValueError("trace CSV has no samples")
    if body.shape[1] != len(names) + 1:
        raise ValueError("ragged trace CSV")
    return Trace(body[:, 0], {n: body[:, j + 1] for j, n in enumerate(names)})


def trace_to_csv(trace: Trace) -> bytes:
    names = sorted(trace.values)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", *names])
    for i, t in enumerate(trace.timestamps):
        w.writerow([repr(float(t)), *(repr(float(trace.values[n][i])) for n in names)])
    return buf.getvalue().encode("utf-8")


# --- robustness ---------------------------------------------------------


def _expr(e: Expr, trace: Trace, idx: np.ndarray) -> np.ndarray:
    if isinstance(e, Var):
        try:
            return trace.values[e.name][idx]
        except KeyError:
            raise UnknownSignal(f"trace has no signal {e.name!r}") from None
    if isinstance(e, Const):
        return np.full(idx.shape, e.value, dtype=float)
    if isinstance(e, Neg):
        return -_expr(e.arg, trace, idx)
    if isinstance(e, Abs):
        return np.abs(_expr(e.arg, trace, idx))
    a, b = _expr(e.left, trace, idx), _expr(e.right, trace, idx)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    with np.errstate(divide="ignore", invalid="ignore"):
        return a / b


def _eval(phi: Formula, trace: Trace, idx: np.ndarray) -> np.ndarray:
    if isinstance(phi, Predicate):
        lhs, rhs = _expr(phi.lhs, trace, idx), _expr(phi.rhs, trace, idx)
        return rhs - lhs if phi.op in ("<", "<=") else lhs - rhs
    if isinstance(phi, Not):
        return -_eval(phi.arg, trace, idx)
    if isinstance(phi, And):
        return np.minimum(_eval(phi.left, trace, idx), _eval(phi.right, trace, idx))
    if isinstance(phi, Or):
        return np.maximum(_eval(phi.left, trace, idx), _eval(phi.right, trace, idx))
    if isinstance(phi, Implies):
        return np.maximum(-_eval(phi.left, trace, idx), _eval(phi.right, trace, idx))

    ts = trace.timestamps
    t = ts[idx]
    starts, ends = t + phi.lo, t + phi.hi
    if np.any(ends > ts[-1]):
        bad = float(t[np.argmax(ends > ts[-1])])
        raise HorizonExceeded(
            f"window [{bad:g}+{phi.lo:g}, {bad:g}+{phi.hi:g}] ends after the last sample at {ts[-1]:g}"
        )
    lo = np.searchsorted(ts, starts, side="left")
    hi = np.searchsorted(ts, ends, side="right")
    if np.any(hi <= lo):
        bad = float(t[np.argmax(hi <= lo)])
        raise EmptyWindow(f"no sample in [{bad:g}+{phi.lo:g}, {bad:g}+{phi.hi:g}]")

    n = ts.size
    cover = np.zeros(n + 1, dtype=np.int64)
    np.add.at(cover, lo, 1)
    np.add.at(cover, hi, -1)
    needed = np.flatnonzero(np.cumsum(cover[:n]) > 0)
    inner = np.zeros(n + 1)
    inner[needed] = _eval(phi.arg, trace, needed)
    # reduceat over interleaved (lo, hi) bounds; only the [lo, hi) slices are kept
    bounds = np.empty(2 * lo.size, dtype=np.int64)
    bounds[0::2], bounds[1::2] = lo, hi
    ufunc = np.minimum if isinstance(phi, Always) else np.maximum
    return ufunc.reduceat(inner, bounds)[0::2]


def _index_of(trace: Trace, t0: float | None) -> int:
    ts = trace.timestamps
    if t0 is None:
        return 0
    i = int(np.searchsorted(ts, t0))
    if i >= ts.size or ts[i] != t0:
        raise ValueError(f"t0={t0!r} is not a sample time of the trace")
    return i


def robustness(phi: Formula, trace: Trace, t0: float | None = None) -> float:
    """Space robustness of ``phi`` at sample time ``t0`` (default: first sample)."""
    i0 = _index_of(trace, t0)
    return float(_eval(phi, trace, np.array([i0]))[0])


def robustness_signal(phi: Formula, trace: Trace, indices: Iterable[int]) -> np.ndarray:
    return _eval(phi, trace, np.asarray(list(indices), dtype=np.int64))


class Verdict(enum.Enum):
    SATISFIED = "Satisfied"
    VIOLATED = "Violated"
    BOUNDARY = "Boundary"


def classify(rho: float) -> Verdict:
    if rho > 0:
        return Verdict.SATISFIED
    if rho < 0:
        return Verdict.VIOLATED
    return Verdict.BOUNDARY


@dataclass(frozen=True)
class CheckResult:
    verdict: Verdict
    robustness: float


def check(phi: Formula, trace: Trace) -> CheckResult:
    rho = robustness(phi, trace)
    return CheckResult(classify(rho), rho)


# --- requirement library ------------------------------------------------


@dataclass(frozen=True)
class Requirement:
    req_id: str
    system: str
    text: str
    formula: Formula
    decls: tuple[SignalDeclaration, ...]
    description: str = ""


_AFC = (SignalDeclaration("mu", "normalized air-fuel ratio error"), SignalDeclaration("theta", "deg (throttle)"))
_WT = (
    SignalDeclaration("theta", "deg (blade pitch)"),
    SignalDeclaration("theta_d", "deg (demanded pitch)"),
    SignalDeclaration("Omega", "rpm (rotor speed)"),
    SignalDeclaration("M_gd", "Nm (generator torque)"),
)
_SC = (SignalDeclaration("pressure", "Pa"),)

_TABLE = (
    (
        "AFC27",
        "AFC",
        _AFC,
        "G[11,50] (((theta < 8.8 && F[0,0.05] (theta > 40.0)) || (theta > 40.0 && F[0,0.05] (theta < 8.8)))"
        " -> G[1,5] abs(mu) < 0.008)",
        "after a throttle rise or fall between 11 s and 50 s, |mu| stays below 0.008",
    ),
    ("AFC29", "AFC", _AFC, "G[11,50] abs(mu) < 0.008", "from 11 s to 50 s, |mu| stays below 0.008"),
    ("AFC33", "AFC", _AFC, "G[11,50] abs(mu) < 0.007", "from 11 s to 50 s, |mu| stays below 0.007"),
    ("WT1", "WT", _WT, "G[30,630] theta <= 14.2", "from 30 s to 630 s, pitch stays at or below 14.2"),
    ("WT2", "WT", _WT, "G[30,630] 21000 <= M_gd <= 47500", "from 30 s to 630 s, torque within [21000, 47500] Nm"),
    ("WT3", "WT", _WT, "G[30,630] Omega <= 14.3", "from 30 s to 630 s, rotor speed at or below 14.3"),
    ("WT4", "WT", _WT, "G[30,630] F[0,5] abs(theta - theta_d) <= 1.6", "pitch tracking error above 1.6 never lasts 5 s"),
    ("SC", "SC", _SC, "G[30,35] (87 <= pressure && pressure <= 87.5)", "from 30 s to 35 s, pressure within [87, 87.5] Pa"),
)

REQUIREMENT_IDS = tuple(row[0] for row in _TABLE)


def builtin_requirements() -> dict[str, Requirement]:
    out = {}
    for req_id, system, decls, text, desc in _TABLE:
        out[req_id] = Requirement(req_id, system, text, parse_stl(text, decls), decls, desc)
    return out
