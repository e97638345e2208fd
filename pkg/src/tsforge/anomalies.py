"""Anomaly planning and expression-tree mutation."""
from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import NoCandidate, SchedulingFailed
from .expr import (
    BINARY_OPS,
    UNARY_OPS,
    WINDOW_KINDS,
    Binary,
    Const,
    ExprNode,
    Unary,
    WindowAgg,
    iter_nodes,
    node_at,
    replace_at,
)
from .functions import random_constant, random_subtree
from .graph import DependencyGraph
from .params import GenerationParams

STRATEGIES = ("insert_subtree", "delete_subtree", "replace_operator")
MAX_PLACEMENT_RETRIES = 50
MAX_MUTATION_RETRIES = 20
EFFECT_THRESHOLD = 1e-6
MEAN_WINDOW = 50


@dataclass(frozen=True)
class AnomalySpec:
    """One contaminated window ``[t_start, t_end)`` on ``var`` (global timesteps)."""

    var: int
    t_start: int
    t_end: int
    strategy: str
    mutated: ExprNode

    @property
    def length(self) -> int:
        return self.t_end - self.t_start


@dataclass
class Contamination:
    mutated: ExprNode
    strategy: str
    # strategy drawn on the first attempt, before any switch or fallback
    sampled: str
    attempts: int = 1
    fallback: bool = False

    def __iter__(self):
        return iter((self.mutated, self.strategy))


# ---------------------------------------------------------------------------
# Planning
# ---------------------------------------------------------------------------


def default_num_anomalies(n_anomalous: int) -> int:
    return max(1, n_anomalous // MEAN_WINDOW)


def window_lengths(n_anomalous: int, k: int, rng: np.random.Generator) -> list[int]:
    """Split ``n_anomalous`` into ``k`` positive lengths via sorted random cut points."""
    k = min(k, n_anomalous)
    if k <= 0:
        return []
    cuts = sorted(int(c) for c in rng.choice(np.arange(1, n_anomalous), size=k - 1, replace=False)) if k > 1 else []
    bounds = [0] + cuts + [n_anomalous]
    return [b - a for a, b in zip(bounds, bounds[1:])]


def plan_anomalies(params: GenerationParams, rng: np.random.Generator) -> list[tuple[int, int, int]]:
    """Place windows ``(t_start, t_end, var)`` in the test segment, disjoint per variable."""
    n = params.n_anomalous
    if n == 0:
        return []
    k = params.num_anomalies or default_num_anomalies(n)
    lengths = window_lengths(n, k, rng)
    begin = params.train_length
    end = params.train_length + params.test_length
    taken: dict[int, list[tuple[int, int]]] = {}
    plan = []
    for length in lengths:
        for _ in range(MAX_PLACEMENT_RETRIES):
            start = int(rng.integers(begin, end - length + 1))
            var = int(rng.integers(params.d))
            stop = start + length
            if all(stop <= a or b <= start for a, b in taken.get(var, [])):
                taken.setdefault(var, []).append((start, stop))
                plan.append((start, stop, var))
                break
        else:
            raise SchedulingFailed(
                f"could not place a window of length {length} without overlap "
                f"after {MAX_PLACEMENT_RETRIES} tries"
            )
    return plan


def assign_propagation(
    graph: DependencyGraph, rng: np.random.Generator, propagation_prob: float = 0.5
) -> dict[tuple[int, int], bool]:
    """Decide per edge whether a child reads its parent's corrupted values.

    Self-loops always propagate: a variable reads its own delivered values.
    """
    out = {}
    for e in graph.edges:
        draw = bool(rng.random() < propagation_prob)
        out[e.key] = True if e.src == e.dst else draw
    return out


# ---------------------------------------------------------------------------
# Mutation
# ---------------------------------------------------------------------------


def _depths(f: ExprNode) -> list[tuple[tuple, int]]:
    return [(path, len(path)) for path, _ in iter_nodes(f) if path]


def deletion_candidates(f: ExprNode) -> list[tuple]:
    nodes = _depths(f)
    if not nodes:
        return []
    median = statistics.median(d for _, d in nodes)
    return [path for path, d in nodes if abs(d - median) <= 1]


def select_deletion_node(f: ExprNode, rng: np.random.Generator) -> tuple:
    """Pick a non-root node within one level of the median non-root depth."""
    candidates = deletion_candidates(f)
    if not candidates:
        raise NoCandidate("tree has a single node")
    return candidates[int(rng.integers(len(candidates)))]


def _operator_paths(f: ExprNode) -> list[tuple]:
    return [p for p, n in iter_nodes(f) if isinstance(n, (Unary, Binary, WindowAgg))]


def _insert(f, variables, params, rng) -> ExprNode:
    paths = [p for p, _ in iter_nodes(f)]
    path = paths[int(rng.integers(len(paths)))]
    subtree = random_subtree(variables, params, rng, max_depth=2)
    op = BINARY_OPS[int(rng.integers(len(BINARY_OPS)))]
    return replace_at(f, path, Binary(op, node_at(f, path), subtree))


def _delete(f, rng) -> ExprNode:
    path = select_deletion_node(f, rng)
    return replace_at(f, path, random_constant(rng))


def _replace(f, rng) -> ExprNode:
    paths = _operator_paths(f)
    if not paths:
        raise NoCandidate("tree has no operator node")
    path = paths[int(rng.integers(len(paths)))]
    node = node_at(f, path)
    if isinstance(node, Unary):
        options = [o for o in UNARY_OPS if o != node.op]
        new = Unary(options[int(rng.integers(len(options)))], node.child)
    elif isinstance(node, Binary):
        options = [o for o in BINARY_OPS if o != node.op]
        new = Binary(options[int(rng.integers(len(options)))], node.left, node.right)
    else:
        options = [k for k in WINDOW_KINDS if k != node.kind]
        new = WindowAgg(options[int(rng.integers(len(options)))], node.var, node.lag_from, node.lag_to)
    return replace_at(f, path, new)


def apply_strategy(
    f: ExprNode, strategy: str, variables: Iterable[int], params: GenerationParams,
    rng: np.random.Generator,
) -> tuple[ExprNode, str]:
    """Apply one strategy, switching to insertion when the tree offers no candidate."""
    try:
        if strategy == "delete_subtree":
            return _delete(f, rng), strategy
        if strategy == "replace_operator":
            return _replace(f, rng), strategy
    except NoCandidate:
        strategy = "insert_subtree"
    return _insert(f, variables, params, rng), "insert_subtree"


def constant_offset(f: ExprNode, rng: np.random.Generator, sign: Optional[float] = None) -> ExprNode:
    magnitude = round(float(rng.uniform(2.0, 5.0)), 2)
    if sign is None:
        sign = 1.0 if rng.random() < 0.5 else -1.0
    return Binary("add", f, Const(sign * magnitude))


def contaminate(
    f: ExprNode,
    parents: Iterable[int],
    params: GenerationParams,
    rng: np.random.Generator,
    var: Optional[int] = None,
    is_effective: Optional[Callable[[ExprNode], bool]] = None,
) -> Contamination:
    """Mutate ``f`` into an anomalous version using one of three strategies.

    ``is_effective`` decides whether a candidate visibly changes the output;
    candidates are redrawn up to 20 times, then a constant offset is added.
    """
    variables = set(parents)
    if var is not None:
        variables.add(var)
    sampled = None
    for attempt in range(1, MAX_MUTATION_RETRIES + 1):
        strategy = STRATEGIES[int(rng.integers(len(STRATEGIES)))]
        sampled = sampled or strategy
        mutated, applied = apply_strategy(f, strategy, variables, params, rng)
        if mutated != f and (is_effective is None or is_effective(mutated)):
            return Contamination(mutated, applied, sampled, attempt)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    mutated = constant_offset(f, rng, sign)
    if is_effective is not None and not is_effective(mutated):
        mutated = Binary("add", f, Const(-mutated.right.value))
    return Contamination(mutated, "insert_subtree", sampled, MAX_MUTATION_RETRIES, fallback=True)
