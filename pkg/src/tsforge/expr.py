"""Symbolic expression trees: node types, operator catalog, evaluation and printing.

Expressions are immutable trees. Evaluation is total: every operator is
guarded so that any finite input produces a finite output, and values that
can grow are clamped to ``[-CLAMP, CLAMP]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence, Union

CLAMP = 1e12
EPS = 1e-8
# exp(x) exceeds CLAMP for every x above this
_EXP_CUTOFF = math.log(CLAMP)

WINDOW_KINDS = ("integral", "sum", "mean")


# ---------------------------------------------------------------------------
# Nodes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class TimeIndex:
    pass


@dataclass(frozen=True)
class VarRef:
    var: int
    lag: int

    def __post_init__(self):
        if self.lag < 1:
            raise ValueError(f"VarRef lag must be >= 1, got {self.lag}")
        if self.var < 0:
            raise ValueError(f"VarRef var must be >= 0, got {self.var}")


@dataclass(frozen=True)
class Unary:
    op: str
    child: "ExprNode"

    def __post_init__(self):
        if OPERATORS[self.op].arity != 1:
            raise ValueError(f"{self.op} is not a unary operator")


@dataclass(frozen=True)
class Binary:
    op: str
    left: "ExprNode"
    right: "ExprNode"

    def __post_init__(self):
        if OPERATORS[self.op].arity != 2:
            raise ValueError(f"{self.op} is not a binary operator")


@dataclass(frozen=True)
class WindowAgg:
    """Aggregate of one variable over the window ``[t - lag_from, t - lag_to]``."""

    kind: str
    var: int
    lag_from: int
    lag_to: int

    def __post_init__(self):
        if self.kind not in WINDOW_KINDS:
            raise ValueError(f"unknown window aggregate {self.kind!r}")
        if self.lag_to < 1 or self.lag_from <= self.lag_to:
            raise ValueError(
                f"window needs lag_from > lag_to >= 1, got ({self.lag_from}, {self.lag_to})"
            )


ExprNode = Union[Const, TimeIndex, VarRef, Unary, Binary, WindowAgg]
LEAF_TYPES = (Const, TimeIndex, VarRef, WindowAgg)


# ---------------------------------------------------------------------------
# Operator catalog
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OperatorSpec:
    id: int
    name: str
    arity: int
    growth_score: int
    # bounded output: the operand's cumulative score does not carry through
    resets_score: bool = False


_CATALOG = (
    OperatorSpec(0, "sin", 1, 0, resets_score=True),
    OperatorSpec(1, "cos", 1, 0, resets_score=True),
    OperatorSpec(2, "tan", 1, 0),
    OperatorSpec(3, "exp", 1, 2),
    OperatorSpec(4, "log", 1, -2),
    OperatorSpec(5, "sqrt", 1, -1),
    OperatorSpec(6, "abs", 1, 0),
    OperatorSpec(7, "neg", 1, 0),
    OperatorSpec(8, "add", 2, 0),
    OperatorSpec(9, "sub", 2, 0),
    OperatorSpec(10, "mul", 2, 1),
    OperatorSpec(11, "div", 2, -1),
    OperatorSpec(12, "pow", 2, 2),
)

OPERATORS = {spec.name: spec for spec in _CATALOG}
UNARY_OPS = tuple(s.name for s in _CATALOG if s.arity == 1)
BINARY_OPS = tuple(s.name for s in _CATALOG if s.arity == 2)


def catalog() -> list[OperatorSpec]:
    """Return the default operator catalog."""
    return list(_CATALOG)


# ---------------------------------------------------------------------------
# Guarded primitives (shared with the compiled evaluator in engine.py, so the
# two paths produce bit-identical results)
# ---------------------------------------------------------------------------


def clamp(v: float) -> float:
    if v > CLAMP:
        return CLAMP
    if v < -CLAMP:
        return -CLAMP
    return v


def g_div(a: float, b: float) -> float:
    if b >= 0.0:
        if b < EPS:
            b = EPS
    elif b > -EPS:
        b = -EPS
    return clamp(a / b)


def g_log(x: float) -> float:
    return math.log(abs(x) + EPS)


def g_sqrt(x: float) -> float:
    return math.sqrt(abs(x))


def g_exp(x: float) -> float:
    if x > _EXP_CUTOFF:
        return CLAMP
    return clamp(math.exp(x))


def g_tan(x: float) -> float:
    return clamp(math.tan(x))


def g_pow(a: float, b: float) -> float:
    m = abs(a)
    if m < EPS and b < 0.0:
        m = EPS
    if m == 0.0:
        r = 0.0 if b > 0.0 else 1.0
    else:
        try:
            r = math.pow(m, b)
        except OverflowError:
            r = CLAMP
    if a < 0.0 and negates(b):
        r = -r
    return clamp(r)


def negates(b: float) -> bool:
    """Whether a negative base flips the sign of ``|a|^b``.

    Integer exponents follow the real power (even ones give a positive result);
    other exponents have no real value on a negative base, so the sign is kept.
    """
    return not (b.is_integer() and b % 2.0 == 0.0)


def w_integral(read: Callable[[int], float], t: int, lag_from: int, lag_to: int) -> float:
    """Trapezoidal integral of a variable with respect to itself over a lagged window."""
    total = 0.0
    for k in range(lag_to, lag_from):
        hi = read(t - k)
        lo = read(t - k - 1)
        total += (hi + lo) / 2.0 * (hi - lo)
    return clamp(total)


def w_sum(read: Callable[[int], float], t: int, lag_from: int, lag_to: int) -> float:
    total = 0.0
    for k in range(lag_from, lag_to - 1, -1):
        total += read(t - k)
    return clamp(total)


def w_mean(read: Callable[[int], float], t: int, lag_from: int, lag_to: int) -> float:
    return clamp(w_sum(read, t, lag_from, lag_to) / (lag_from - lag_to + 1))


WINDOW_FUNCS = {"integral": w_integral, "sum": w_sum, "mean": w_mean}


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalContext:
    """Read-only view of the series history at timestep ``t``.

    ``history(var, time)`` is only ever called with ``0 <= time < t``; reads at
    negative time return 0.0 without touching it.
    """

    t: int
    history: Callable[[int, int], float]

    def read(self, var: int, time: int) -> float:
        if time < 0:
            return 0.0
        if time >= self.t:
            raise IndexError(f"read of x{var} at {time} is not strictly in the past of {self.t}")
        return self.history(var, time)

    @classmethod
    def from_rows(cls, t: int, rows: Sequence[Sequence[float]]) -> "EvalContext":
        """Context over a row-major history, ``rows[time][var]``."""
        return cls(t, lambda var, time: rows[time][var])


def evaluate(node: ExprNode, ctx: EvalContext) -> float:
    """Evaluate ``node`` at ``ctx.t``. Never raises for finite history."""
    tp = type(node)
    if tp is Const:
        return clamp(node.value)
    if tp is TimeIndex:
        return float(ctx.t)
    if tp is VarRef:
        # history produced by the engine is already clamped; this covers foreign contexts
        return clamp(ctx.read(node.var, ctx.t - node.lag))
    if tp is Unary:
        x = evaluate(node.child, ctx)
        op = node.op
        if op == "sin":
            return math.sin(x)
        if op == "cos":
            return math.cos(x)
        if op == "tan":
            return g_tan(x)
        if op == "exp":
            return g_exp(x)
        if op == "log":
            return g_log(x)
        if op == "sqrt":
            return g_sqrt(x)
        if op == "abs":
            return abs(x)
        return -x
    if tp is Binary:
        a = evaluate(node.left, ctx)
        b = evaluate(node.right, ctx)
        op = node.op
        if op == "add":
            return clamp(a + b)
        if op == "sub":
            return clamp(a - b)
        if op == "mul":
            return clamp(a * b)
        if op == "div":
            return g_div(a, b)
        return g_pow(a, b)
    if tp is WindowAgg:
        var = node.var
        return WINDOW_FUNCS[node.kind](lambda time: ctx.read(var, time), ctx.t, node.lag_from, node.lag_to)
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Structural queries
# ---------------------------------------------------------------------------


def children(node: ExprNode) -> tuple:
    if isinstance(node, Unary):
        return (node.child,)
    if isinstance(node, Binary):
        return (node.left, node.right)
    return ()


def iter_nodes(node: ExprNode, path: tuple = ()) -> Iterator[tuple[tuple, ExprNode]]:
    """Pre-order walk yielding ``(path, node)``; a path is a tuple of child indices."""
    yield path, node
    for i, child in enumerate(children(node)):
        yield from iter_nodes(child, path + (i,))


def node_at(node: ExprNode, path: tuple) -> ExprNode:
    for i in path:
        node = children(node)[i]
    return node


def replace_at(node: ExprNode, path: tuple, new: ExprNode) -> ExprNode:
    """Return a copy of ``node`` with the subtree at ``path`` replaced by ``new``."""
    if not path:
        return new
    head, rest = path[0], path[1:]
    if isinstance(node, Unary):
        return Unary(node.op, replace_at(node.child, rest, new))
    if isinstance(node, Binary):
        if head == 0:
            return Binary(node.op, replace_at(node.left, rest, new), node.right)
        return Binary(node.op, node.left, replace_at(node.right, rest, new))
    raise IndexError(f"path {path} descends into a leaf")


def size(node: ExprNode) -> int:
    return sum(1 for _ in iter_nodes(node))


def depth(node: ExprNode) -> int:
    return max(len(p) for p, _ in iter_nodes(node))


def contains_time(node: ExprNode) -> bool:
    return any(isinstance(n, TimeIndex) for _, n in iter_nodes(node))


def cumulative_growth_score(node: ExprNode) -> int:
    """Sum of operator growth scores; sin/cos subtrees contribute 0."""
    if isinstance(node, Unary):
        spec = OPERATORS[node.op]
        if spec.resets_score:
            return 0
        return spec.growth_score + cumulative_growth_score(node.child)
    if isinstance(node, Binary):
        return (
            OPERATORS[node.op].growth_score
            + cumulative_growth_score(node.left)
            + cumulative_growth_score(node.right)
        )
    return 0


def required_lags(node: ExprNode) -> dict[int, int]:
    """Map each referenced variable to the largest lag at which it is read."""
    lags: dict[int, int] = {}
    for _, n in iter_nodes(node):
        if isinstance(n, VarRef):
            lag = n.lag
        elif isinstance(n, WindowAgg):
            lag = n.lag_from
        else:
            continue
        if lags.get(n.var, 0) < lag:
            lags[n.var] = lag
    return lags


def read_offsets(node: ExprNode) -> dict[int, set[int]]:
    """Every lag ``k`` such that ``x[t-k, var]`` is read when evaluating ``node``."""
    offsets: dict[int, set[int]] = {}
    for _, n in iter_nodes(node):
        if isinstance(n, VarRef):
            offsets.setdefault(n.var, set()).add(n.lag)
        elif isinstance(n, WindowAgg):
            offsets.setdefault(n.var, set()).update(range(n.lag_to, n.lag_from + 1))
    return offsets


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_FUNC_TOKENS = {"sin", "cos", "tan", "exp", "log", "sqrt", "abs"}
_AGG_TOKENS = {"integral": "integral", "sum": "wsum", "mean": "wmean"}
_BIN_SYMBOL = {"add": " + ", "sub": " - ", "mul": "*", "div": "/", "pow": "^"}

# precedence levels: sum < product < prefix minus < power < atom
_PREC_SUM, _PREC_PROD, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def format_number(value: float) -> str:
    if value == 0.0 and math.copysign(1.0, value) < 0:
        return "-0.0"
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _prec(node: ExprNode) -> int:
    if isinstance(node, Binary):
        if node.op in ("add", "sub"):
            return _PREC_SUM
        if node.op in ("mul", "div"):
            return _PREC_PROD
        return _PREC_POW
    if isinstance(node, Unary) and node.op == "neg":
        return _PREC_NEG
    if isinstance(node, Const) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return _PREC_NEG
    return _PREC_ATOM


def _wrap(node: ExprNode, parens: bool) -> str:
    s = to_string(node)
    return f"({s})" if parens else s


def to_string(node: ExprNode) -> str:
    """Canonical DSL text with the fewest parentheses that keep the tree shape."""
    if isinstance(node, Const):
        return format_number(node.value)
    if isinstance(node, TimeIndex):
        return "t"
    if isinstance(node, VarRef):
        return f"x{node.var}[t-{node.lag}]"
    if isinstance(node, WindowAgg):
        return f"{_AGG_TOKENS[node.kind]}(x{node.var}, {node.lag_from}, {node.lag_to})"
    if isinstance(node, Unary):
        if node.op == "neg":
            return "-" + _wrap(node.child, _prec(node.child) < _PREC_NEG)
        return f"{node.op}({to_string(node.child)})"
    if isinstance(node, Binary):
        p = _prec(node)
        if node.op == "pow":
            left = _wrap(node.left, _prec(node.left) < _PREC_ATOM)
            right = _wrap(node.right, _prec(node.right) < _PREC_NEG)
        else:
            left = _wrap(node.left, _prec(node.left) < p)
            right = _wrap(node.right, _prec(node.right) <= p)
        return left + _BIN_SYMBOL[node.op] + right
    raise TypeError(f"not an expression node: {node!r}")
