"""Random generative functions built bottom-up from a pool of operands."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import GenerationExhausted
from .expr import (
    BINARY_OPS,
    Binary,
    Const,
    EvalContext,
    ExprNode,
    OperatorSpec,
    UNARY_OPS,
    TimeIndex,
    Unary,
    VarRef,
    WindowAgg,
    catalog,
    cumulative_growth_score,
    evaluate,
    required_lags,
)
from .params import GenerationParams

LAMBDA = 0.5
WEIGHT_MIN, WEIGHT_MAX = 0.01, 100.0
MAX_UNARY_WRAPS = 3
MAX_REROLLS = 100
CONST_RANGE = 5.0
POW_EXPONENTS = (2.0, 3.0)


@dataclass
class Operand:
    node: ExprNode
    wraps: int = 0


@dataclass
class OperandPool:
    items: list[Operand] = field(default_factory=list)

    def __len__(self):
        return len(self.items)

    def nodes(self) -> list[ExprNode]:
        return [o.node for o in self.items]


def random_constant(rng: np.random.Generator) -> Const:
    return Const(round(float(rng.uniform(-CONST_RANGE, CONST_RANGE)), 2) + 0.0)


def time_leaf(max_lag: int, rng: np.random.Generator) -> ExprNode:
    return Binary("sub", TimeIndex(), Const(float(rng.integers(1, max_lag + 1))))


def operator_weights(operand_score: int, specs: Optional[list[OperatorSpec]] = None) -> np.ndarray:
    specs = catalog() if specs is None else specs
    raw = np.array([math.exp(-LAMBDA * operand_score * s.growth_score) for s in specs])
    w = np.clip(raw, WEIGHT_MIN, WEIGHT_MAX)
    return w / w.sum()


def pick_operator_weighted(
    operand_score: int, rng: np.random.Generator, binary_only: bool = False
) -> OperatorSpec:
    """Sample an operator, steering away from amplifiers when the operand already grows."""
    specs = catalog()
    if binary_only:
        specs = [s for s in specs if s.arity == 2 and s.name != "pow"]
    p = operator_weights(operand_score, specs)
    return specs[int(rng.choice(len(specs), p=p))]


def initialize_leaves(
    parents: Iterable[int], params: GenerationParams, rng: np.random.Generator
) -> OperandPool:
    parents = sorted(parents)
    leaves: list[ExprNode] = [VarRef(p, int(rng.integers(1, params.max_lag + 1))) for p in parents]
    if params.enable_window_agg and parents and params.max_lag >= 2:
        p = parents[int(rng.integers(len(parents)))]
        lag_to = int(rng.integers(1, params.max_lag))
        lag_from = int(rng.integers(lag_to + 1, params.max_lag + 1))
        leaves.append(WindowAgg("integral", p, lag_from, lag_to))
    leaves.extend(random_constant(rng) for _ in range(params.n_const))
    if not parents:
        leaves.extend(time_leaf(params.max_lag, rng) for _ in range(int(rng.integers(1, 3))))
    while len(leaves) < 2:
        leaves.append(random_constant(rng))
    return OperandPool([Operand(n) for n in leaves])


def _pop_random(pool: OperandPool, rng: np.random.Generator) -> Operand:
    return pool.items.pop(int(rng.integers(len(pool.items))))


def merge_step(pool: OperandPool, rng: np.random.Generator) -> OperandPool:
    """Apply one operator to one or two operands drawn from the pool (in place)."""
    if len(pool) < 2:
        raise ValueError("merge_step needs at least two operands")
    first = _pop_random(pool, rng)
    op = pick_operator_weighted(
        cumulative_growth_score(first.node), rng, binary_only=first.wraps >= MAX_UNARY_WRAPS
    )
    if op.name == "pow":
        # exponent is a small constant, so this wraps rather than merges
        exponent = POW_EXPONENTS[int(rng.integers(len(POW_EXPONENTS)))]
        pool.items.append(Operand(Binary("pow", first.node, Const(exponent)), first.wraps + 1))
    elif op.arity == 1:
        pool.items.append(Operand(Unary(op.name, first.node), first.wraps + 1))
    else:
        second = _pop_random(pool, rng)
        pool.items.append(Operand(Binary(op.name, first.node, second.node)))
    return pool


def _is_constant_in_time(node: ExprNode, steps: int = 100) -> bool:
    first = evaluate(node, EvalContext(0, lambda v, t: 0.0))
    return all(evaluate(node, EvalContext(t, lambda v, s: 0.0)) == first for t in range(1, steps))


def _grow(pool: OperandPool, rng: np.random.Generator) -> ExprNode:
    while len(pool) > 1:
        merge_step(pool, rng)
    return pool.items[0].node


def generate_function(
    parents: Iterable[int], is_exogenous: bool, params: GenerationParams, rng: np.random.Generator
) -> ExprNode:
    parents = sorted(set(parents))
    if is_exogenous != (not parents):
        raise ValueError("is_exogenous must hold exactly when parents is empty")
    for _ in range(MAX_REROLLS):
        node = _grow(initialize_leaves(parents, params, rng), rng)
        if is_exogenous:
            if not _is_constant_in_time(node):
                return node
            continue
        missing = set(parents) - set(required_lags(node))
        assert not missing, f"parents {missing} dropped during merging"
        return node
    raise GenerationExhausted(f"no time-varying function after {MAX_REROLLS} attempts")


def random_subtree(
    variables: Iterable[int], params: GenerationParams, rng: np.random.Generator, max_depth: int = 2
) -> ExprNode:
    """Small random tree (depth <= max_depth) over the given variables, time and constants."""
    variables = sorted(set(variables))

    def leaf() -> ExprNode:
        choice = int(rng.integers(3 if variables else 2))
        if choice == 0:
            return random_constant(rng)
        if choice == 1:
            return TimeIndex()
        return VarRef(variables[int(rng.integers(len(variables)))], int(rng.integers(1, params.max_lag + 1)))

    def grow(depth: int) -> ExprNode:
        if depth == 0 or rng.random() < 0.3:
            return leaf()
        if depth >= 1 and rng.random() < 0.5:
            return Unary(UNARY_OPS[int(rng.integers(len(UNARY_OPS)))], grow(depth - 1))
        # pow is left out: an arbitrary exponent subtree explodes too easily
        op = BINARY_OPS[int(rng.integers(len(BINARY_OPS) - 1))]
        return Binary(op, grow(depth - 1), grow(depth - 1))

    return grow(max_depth)
