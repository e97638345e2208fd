"""Time-stepped simulation: clean and contaminated tracks, labels, noise.

Each equation system is compiled to straight-line Python source (one loop over
time, one block per variable) that calls the same guarded primitives as
:func:`tsforge.expr.evaluate`, so both paths agree bit for bit. Histories live
in per-variable lists padded with ``W`` leading zeros, which serve the reads
at negative time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import expr as E
from .anomalies import (
    EFFECT_THRESHOLD,
    AnomalySpec,
    assign_propagation,
    constant_offset,
    contaminate,
    plan_anomalies,
)
from .errors import TsforgeError
from .expr import CLAMP, EPS, EvalContext, ExprNode, evaluate, read_offsets, required_lags
from .functions import generate_function
from .graph import DependencyGraph, generate_graph
from .params import GenerationParams, ManualSpec
from .parser import parse_expression
from .rng import substream

LABEL_NORMAL, LABEL_ANOMALY, LABEL_PARENT, LABEL_PROPAGATED = 0, 1, 2, 3
MAX_REPAIR_PASSES = 3
PROBE_HORIZON = 1000
MAX_SATURATION_REDRAWS = 25


# ---------------------------------------------------------------------------
# Buffer-based window aggregates (same arithmetic as expr.w_*)
# ---------------------------------------------------------------------------


def _wintegral(buf, i, lag_from, lag_to):
    total = 0.0
    for k in range(lag_to, lag_from):
        hi = buf[i - k]
        lo = buf[i - k - 1]
        total += (hi + lo) / 2.0 * (hi - lo)
    return E.clamp(total)


def _wsum(buf, i, lag_from, lag_to):
    total = 0.0
    for k in range(lag_from, lag_to - 1, -1):
        total += buf[i - k]
    return E.clamp(total)


def _wmean(buf, i, lag_from, lag_to):
    return E.clamp(_wsum(buf, i, lag_from, lag_to) / (lag_from - lag_to + 1))


_HELPERS = {
    "_msin": math.sin,
    "_mcos": math.cos,
    "_mtan": math.tan,
    "_mexp": math.exp,
    "_mlog": math.log,
    "_msqrt": math.sqrt,
    "_mpow": math.pow,
    "_pow": E.g_pow,
    "_wintegral": _wintegral,
    "_wsum": _wsum,
    "_wmean": _wmean,
}


# ---------------------------------------------------------------------------
# Code generation
# ---------------------------------------------------------------------------


class _Emitter:
    """Turns an expression into straight-line statements.

    Guards and clamps are inlined; they must stay arithmetically identical to
    the helpers in expr.py.
    """

    def __init__(self):
        self.n = 0

    def fresh(self) -> str:
        self.n += 1
        return f"v{self.n}"

    def bind(self, x: str, lines: list[str]) -> str:
        if x.isidentifier():
            return x
        v = self.fresh()
        lines.append(f"{v} = {x}")
        return v

    def clamp(self, v: str, lines: list[str]) -> str:
        lines.append(f"if {v} > {CLAMP!r}: {v} = {CLAMP!r}")
        lines.append(f"elif {v} < {-CLAMP!r}: {v} = {-CLAMP!r}")
        return v

    def emit(self, node: ExprNode, buf_for, lines: list[str]) -> str:
        """Append statements for ``node`` to ``lines``; return an expression string."""
        tp = type(node)
        if tp is E.Const:
            return f"({E.clamp(node.value)!r})"
        if tp is E.TimeIndex:
            return "tf"
        if tp is E.VarRef:
            return f"{buf_for(node.var)}[i - {node.lag}]"
        if tp is E.WindowAgg:
            return f"_w{node.kind}({buf_for(node.var)}, i, {node.lag_from}, {node.lag_to})"
        if tp is E.Unary:
            return self._unary(node.op, self.emit(node.child, buf_for, lines), lines)
        a = self.emit(node.left, buf_for, lines)
        b = self.emit(node.right, buf_for, lines)
        return self._binary(node, a, b, lines)

    def _unary(self, op: str, x: str, lines: list[str]) -> str:
        if op == "neg":
            return f"(-{x})"
        if op == "abs":
            return f"abs({x})"
        if op in ("sin", "cos"):
            return f"_m{op}({x})"
        if op == "log":
            return f"_mlog(abs({x}) + {EPS!r})"
        if op == "sqrt":
            return f"_msqrt(abs({x}))"
        v = self.fresh()
        if op == "tan":
            lines.append(f"{v} = _mtan({x})")
            return self.clamp(v, lines)
        # exp
        lines.append(f"{v} = {x}")
        lines.append(f"if {v} > {E._EXP_CUTOFF!r}: {v} = {CLAMP!r}")
        lines.append("else:")
        lines.append(f"    {v} = _mexp({v})")
        lines.append(f"    if {v} > {CLAMP!r}: {v} = {CLAMP!r}")
        return v

    def _binary(self, node, a: str, b: str, lines: list[str]) -> str:
        op = node.op
        v = self.fresh()
        if op in ("add", "sub", "mul"):
            sym = {"add": "+", "sub": "-", "mul": "*"}[op]
            lines.append(f"{v} = {a} {sym} {b}")
            return self.clamp(v, lines)
        if op == "div":
            den = self.fresh()
            lines.append(f"{den} = {b}")
            lines.append(f"if {den} >= 0.0:")
            lines.append(f"    if {den} < {EPS!r}: {den} = {EPS!r}")
            lines.append(f"elif {den} > {-EPS!r}: {den} = {-EPS!r}")
            lines.append(f"{v} = {a} / {den}")
            return self.clamp(v, lines)
        right = node.right
        if isinstance(right, E.Const) and 0.0 < right.value <= 8.0:
            # small positive constant exponent: math.pow cannot overflow on |a| <= CLAMP
            base = self.bind(a, lines)
            lines.append(f"{v} = _mpow(abs({base}), {b})")
            if E.negates(right.value):
                lines.append(f"if {base} < 0.0: {v} = -{v}")
            return self.clamp(v, lines)
        return f"_pow({a}, {b})"


def _indent(lines, n):
    pad = "    " * n
    return [pad + line for line in lines]


def _build(name: str, args: Sequence[str], prologue: list[str], body: list[str]):
    defaults = ", ".join(f"{k}={k}" for k in _HELPERS)
    src = [f"def {name}({', '.join(args)}, {defaults}):"]
    src += _indent(prologue, 1)
    src.append("    for t in range(t0, t1):")
    src.append("        i = t + W")
    src.append("        tf = float(t)")
    src += _indent(body or ["pass"], 2)
    code = "\n".join(src) + "\n"
    namespace = dict(_HELPERS)
    exec(compile(code, f"<tsforge:{name}>", "exec"), namespace)
    fn = namespace[name]
    fn.source = code
    return fn


@dataclass
class System:
    """A fully specified equation system ready to simulate."""

    d: int
    equations: list[ExprNode]
    anomalies: list[AnomalySpec] = field(default_factory=list)
    propagation: dict[tuple[int, int], bool] = field(default_factory=dict)

    def propagates(self, src: int, dst: int) -> bool:
        return src == dst or self.propagation.get((src, dst), False)

    def warmup(self) -> int:
        lags = [0]
        for node in list(self.equations) + [a.mutated for a in self.anomalies]:
            lags.extend(required_lags(node).values())
        return max(lags)

    def anomalies_of(self, var: int) -> list[AnomalySpec]:
        return [a for a in self.anomalies if a.var == var]

    def corruptible(self) -> set[int]:
        """Variables whose contaminated value can ever differ from the clean one."""
        bad = {a.var for a in self.anomalies}
        reads = [read_offsets(f) for f in self.equations]
        changed = True
        while changed:
            changed = False
            for j in range(self.d):
                if j not in bad and any(p in bad and self.propagates(p, j) for p in reads[j]):
                    bad.add(j)
                    changed = True
        return bad


def compile_clean(system: System):
    em = _Emitter()
    prologue = [f"B{j} = B[{j}]" for j in range(system.d)]
    body = []
    for j, f in enumerate(system.equations):
        lines: list[str] = []
        out = em.emit(f, lambda v: f"B{v}", lines)
        body += lines + [f"B{j}[i] = {out}"]
    return _build("run_clean", ["B", "t0", "t1", "W"], prologue, body)


def compile_contaminated(system: System):
    em = _Emitter()
    bad = system.corruptible()
    prologue = [f"B{j} = B[{j}]" for j in range(system.d)]
    prologue += [f"C{j} = C[{j}]" for j in sorted(bad)]
    prologue += [f"A{j} = A[{j}]" for j in sorted({a.var for a in system.anomalies})]
    body = []
    for j in sorted(bad):

        def buf(v, j=j):
            return f"C{v}" if v in bad and system.propagates(v, j) else f"B{v}"

        lines: list[str] = []
        out = em.emit(system.equations[j], buf, lines)
        nominal = lines + [f"C{j}[i] = {out}"]
        own = system.anomalies_of(j)
        if not own:
            body += nominal
            continue
        body.append(f"a = A{j}[i]")
        body.append("if a < 0:")
        body += _indent(nominal, 1)
        # every anomaly on j gets its own branch, keyed by index in system.anomalies
        for k, spec in enumerate(system.anomalies):
            if spec.var != j:
                continue
            lines = []
            out = em.emit(spec.mutated, buf, lines)
            body.append(f"elif a == {k}:")
            body += _indent(lines + [f"C{j}[i] = {out}"], 1)
    return _build("run_contaminated", ["B", "C", "A", "t0", "t1", "W"], prologue, body)


def compile_labels(system: System):
    bad = system.corruptible()
    anomalous = {a.var for a in system.anomalies}
    prologue = [f"L{j} = L[{j}]" for j in range(system.d)]
    prologue += [f"A{j} = A[{j}]" for j in sorted(anomalous)]
    body = []
    for j, f in enumerate(system.equations):
        prop, nonprop = [], []
        for p, offsets in sorted(read_offsets(f).items()):
            if p not in bad:
                continue
            target = prop if system.propagates(p, j) else nonprop
            target.extend(f"L{p}[i - {k}]" for k in sorted(offsets))
        branches = []
        if j in anomalous:
            branches.append((f"A{j}[i] >= 0", LABEL_ANOMALY))
        if prop:
            branches.append((f"({' | '.join(prop)}) & 1", LABEL_PROPAGATED))
        if nonprop:
            branches.append((f"({' | '.join(nonprop)}) & 1", LABEL_PARENT))
        for n, (cond, label) in enumerate(branches):
            body.append(f"{'if' if n == 0 else 'elif'} {cond}:")
            body.append(f"    L{j}[i] = {label}")
    return _build("run_labels", ["L", "A", "t0", "t1", "W"], prologue, body)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


class Simulation:
    """Owns the padded history buffers for one system over ``[0, length)``."""

    def __init__(self, system: System, length: int, warmup: Optional[int] = None):
        self.system = system
        self.length = length
        self.W = max(system.warmup(), warmup or 0)
        size = self.W + length
        self.clean = [[0.0] * size for _ in range(system.d)]
        self.contaminated: Optional[list] = None
        self.labels: Optional[list] = None

    def run_clean(self, t0: int = 0, t1: Optional[int] = None) -> None:
        compile_clean(self.system)(self.clean, t0, self.length if t1 is None else t1, self.W)

    def _activity(self):
        size = self.W + self.length
        act = {}
        for k, a in enumerate(self.system.anomalies):
            row = act.setdefault(a.var, [-1] * size)
            for t in range(a.t_start, a.t_end):
                row[t + self.W] = k
        return act

    def run_contaminated(self) -> None:
        system = self.system
        bad = system.corruptible()
        self.contaminated = [list(col) if j in bad else col for j, col in enumerate(self.clean)]
        self.labels = [[0] * (self.W + self.length) for _ in range(system.d)]
        if not system.anomalies:
            return
        t0 = min(a.t_start for a in system.anomalies)
        act = self._activity()
        compile_contaminated(system)(self.clean, self.contaminated, act, t0, self.length, self.W)
        compile_labels(system)(self.labels, act, t0, self.length, self.W)

    def context(self, t: int, track: str = "clean") -> EvalContext:
        bufs = self.clean if track == "clean" else self.contaminated
        W = self.W
        return EvalContext(t, lambda v, s: bufs[v][s + W])

    def matrix(self, track: str, t0: int, t1: int) -> np.ndarray:
        bufs = {"clean": self.clean, "contaminated": self.contaminated, "labels": self.labels}[track]
        dtype = np.int8 if track == "labels" else np.float64
        out = np.empty((t1 - t0, self.system.d), dtype=dtype)
        for j, col in enumerate(bufs):
            out[:, j] = col[self.W + t0:self.W + t1]
        return out

    def ineffective(self) -> list[int]:
        """Indices of anomalies whose window shows no clean/contaminated difference."""
        out = []
        W = self.W
        for k, a in enumerate(self.system.anomalies):
            c, x = self.clean[a.var], self.contaminated[a.var]
            if not any(abs(c[t + W] - x[t + W]) > EFFECT_THRESHOLD for t in range(a.t_start, a.t_end)):
                out.append(k)
        return out


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def compute_values(
    graph: Optional[DependencyGraph],
    equations: Sequence[ExprNode],
    t_range: tuple[int, int],
    history: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Clean values for ``t`` in ``t_range``; ``history`` holds rows ``[0, t_range[0])``."""
    t0, t1 = t_range
    d = len(equations) if graph is None else graph.d
    sim = Simulation(System(d, list(equations)), t1)
    if t0 > 0:
        if history is None or len(history) != t0:
            raise ValueError(f"history must provide exactly {t0} rows")
        for j in range(d):
            sim.clean[j][sim.W:sim.W + t0] = [float(v) for v in history[:, j]]
    sim.run_clean(t0, t1)
    return sim.matrix("clean", t0, t1)


def compute_anomalies(
    graph: Optional[DependencyGraph],
    equations: Sequence[ExprNode],
    anomalies: Sequence[AnomalySpec],
    propagation: dict[tuple[int, int], bool],
    t_range: tuple[int, int],
) -> tuple[np.ndarray, np.ndarray]:
    """Clean and contaminated tracks over ``t_range`` (simulated from ``t = 0``)."""
    t0, t1 = t_range
    d = len(equations) if graph is None else graph.d
    sim = Simulation(System(d, list(equations), list(anomalies), dict(propagation)), t1)
    sim.run_clean()
    sim.run_contaminated()
    return sim.matrix("clean", t0, t1), sim.matrix("contaminated", t0, t1)


def compute_labels(
    graph: Optional[DependencyGraph],
    equations: Sequence[ExprNode],
    anomalies: Sequence[AnomalySpec],
    propagation: dict[tuple[int, int], bool],
    t_range: tuple[int, int],
) -> np.ndarray:
    """Rich labels over ``t_range``. Labels depend only on structure, not on values."""
    t0, t1 = t_range
    d = len(equations) if graph is None else graph.d
    system = System(d, list(equations), list(anomalies), dict(propagation))
    sim = Simulation(system, t1)
    sim.labels = [[0] * (sim.W + t1) for _ in range(d)]
    if anomalies:
        start = min(a.t_start for a in anomalies)
        compile_labels(system)(sim.labels, sim._activity(), start, t1, sim.W)
    return sim.matrix("labels", t0, t1)


def binary_labels(rich: np.ndarray) -> np.ndarray:
    """1 where values are actually corrupted (rich label 1 or 3)."""
    return (rich & 1).astype(np.int8)


def add_noise(
    train: np.ndarray, test: np.ndarray, noise_sigma: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian noise scaled per column by ``noise_sigma`` times the train std."""
    if noise_sigma == 0:
        return train, test
    std = noise_sigma * train.std(axis=0)
    noise = rng.normal(0.0, 1.0, size=(train.shape[0] + test.shape[0], train.shape[1])) * std
    n = train.shape[0]
    return train + noise[:n], test + noise[n:]


@dataclass
class GenerationResult:
    mode: str
    params: dict
    graph: DependencyGraph
    equations: list[ExprNode]
    anomalies: list[AnomalySpec]
    propagation: dict[tuple[int, int], bool]
    train: np.ndarray
    test: np.ndarray
    labels_rich: np.ndarray
    labels_binary: np.ndarray
    # noise-free tracks over the test segment
    clean_test: np.ndarray
    contaminated_test: np.ndarray
    train_length: int
    test_length: int
    seed: int
    noise_sigma: float = 0.0
    constants: dict = field(default_factory=lambda: {"clamp": CLAMP, "eps": EPS})

    @property
    def d(self) -> int:
        return self.graph.d


def _finish(mode, params_dict, graph, system, sim, train_length, test_length, seed, noise_sigma):
    total = train_length + test_length
    train = sim.matrix("clean", 0, train_length)
    clean_test = sim.matrix("clean", train_length, total)
    contaminated_test = sim.matrix("contaminated", train_length, total)
    rich = sim.matrix("labels", train_length, total)
    train_out, test_out = add_noise(train, contaminated_test, noise_sigma, substream(seed, "noise"))
    return GenerationResult(
        mode=mode,
        params=params_dict,
        graph=graph.with_propagation(system.propagation),
        equations=list(system.equations),
        anomalies=list(system.anomalies),
        propagation=dict(system.propagation),
        train=train_out,
        test=test_out,
        labels_rich=rich,
        labels_binary=binary_labels(rich),
        clean_test=clean_test,
        contaminated_test=contaminated_test,
        train_length=train_length,
        test_length=test_length,
        seed=seed,
        noise_sigma=noise_sigma,
    )


def _saturated(equations: list[ExprNode], d: int, horizon: int) -> list[int]:
    sim = Simulation(System(d, equations), horizon)
    sim.run_clean()
    W = sim.W
    return [j for j, col in enumerate(sim.clean) if any(abs(v) >= CLAMP for v in col[W:])]


def _generate_functions(graph: DependencyGraph, params: GenerationParams) -> list[ExprNode]:
    """One function per variable; functions that saturate on a short probe run are redrawn."""
    exo = set(graph.exogenous)

    def draw(j, attempt):
        ids = (j,) if attempt == 0 else (j, attempt)
        rng = substream(params.seed, "function", *ids)
        return generate_function(graph.parents(j), j in exo, params, rng)

    equations = [draw(j, 0) for j in range(graph.d)]
    horizon = min(PROBE_HORIZON, params.train_length + params.test_length)
    for attempt in range(1, MAX_SATURATION_REDRAWS + 1):
        bad = _saturated(equations, graph.d, horizon)
        if not bad:
            break
        for j in bad:
            equations[j] = draw(j, attempt)
    return equations


def generate_dataset(params: GenerationParams) -> GenerationResult:
    """Automatic mode: random graph, random functions, mutated anomalies."""
    seed = params.seed
    try:
        graph = generate_graph(params, substream(seed, "graph"))
        equations = _generate_functions(graph, params)
        plan = plan_anomalies(params, substream(seed, "plan"))
    except TsforgeError as exc:
        raise type(exc)(f"seed {seed}: {exc}") from exc
    propagation = assign_propagation(graph, substream(seed, "propagation"), params.propagation_prob)

    total = params.train_length + params.test_length
    system = System(graph.d, equations, [], propagation)
    sim = Simulation(system, total, warmup=params.max_lag)
    sim.run_clean()

    anomalies = []
    for k, (t0, t1, var) in enumerate(plan):
        f = equations[var]

        def effective(g, var=var, t0=t0, t1=t1):
            col = sim.clean[var]
            return any(
                abs(evaluate(g, sim.context(t)) - col[t + sim.W]) > EFFECT_THRESHOLD
                for t in range(t0, t1)
            )

        result = contaminate(
            f, graph.parents(var), params, substream(seed, "mutation", k), var=var, is_effective=effective
        )
        anomalies.append(AnomalySpec(var, t0, t1, result.strategy, result.mutated))
    system.anomalies = anomalies
    sim.run_contaminated()

    # interplay between overlapping anomalies can cancel an effect; repair with offsets
    for _ in range(MAX_REPAIR_PASSES):
        broken = sim.ineffective()
        if not broken:
            break
        for k in broken:
            a = anomalies[k]
            rng = substream(seed, "mutation", k, 1)
            g = constant_offset(equations[a.var], rng)
            anomalies[k] = AnomalySpec(a.var, a.t_start, a.t_end, "insert_subtree", g)
        sim.run_contaminated()

    return _finish("automatic", params.to_dict(), graph, system, sim,
                   params.train_length, params.test_length, seed, params.noise_sigma)


def build_manual_system(spec: ManualSpec) -> tuple[DependencyGraph, System]:
    equations = [parse_expression(text, spec.d) for text in spec.equations]
    parents = {j: list(required_lags(f)) for j, f in enumerate(equations)}
    graph = DependencyGraph.from_parents(spec.d, parents)
    propagation = assign_propagation(graph, substream(spec.seed, "propagation"), spec.propagation_prob)
    for src, dst, flag in spec.propagation:
        if (src, dst) in propagation:
            propagation[(src, dst)] = bool(flag) or src == dst
    anomalies = [
        AnomalySpec(a.var, a.start, a.end, a.strategy, parse_expression(a.equation, spec.d))
        for a in spec.anomalies
    ]
    return graph, System(spec.d, equations, anomalies, propagation)


def generate_manual(spec: ManualSpec) -> GenerationResult:
    """Manual mode: user equations and anomaly windows."""
    graph, system = build_manual_system(spec)
    sim = Simulation(system, spec.total_length)
    sim.run_clean()
    sim.run_contaminated()
    return _finish("manual", spec.to_dict(), graph, system, sim,
                   spec.train_length, spec.test_length, spec.seed, spec.noise_sigma)


def generate(config) -> GenerationResult:
    if isinstance(config, ManualSpec):
        return generate_manual(config)
    return generate_dataset(config)
