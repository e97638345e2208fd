"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even when
output capture is on).
"""
import math
import time
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from tsforge.anomalies import STRATEGIES, contaminate
from tsforge.cli import cli_main
from tsforge.config import load_config
from tsforge.engine import generate_dataset, generate_manual
from tsforge.expr import OPERATORS, Binary, Unary, evaluate, iter_nodes, read_offsets, to_string
from tsforge.functions import generate_function, pick_operator_weighted
from tsforge.graph import generate_graph, validate_graph
from tsforge.params import GenerationParams
from tsforge.parser import parse_expression
from tsforge.rng import substream

from conftest import AUTO_CONFIG, FIG1_CONFIG, bits, random_context, random_tree


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {number:>2}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


def test_01_figure_fixture_values(report):
    spec = load_config(FIG1_CONFIG)
    start = time.perf_counter()
    result = generate_manual(spec)
    elapsed = time.perf_counter() - start
    column = np.concatenate([result.train[:, 1], result.test[:, 1]])
    oracle = [math.cos(9 * (t - 4)) / math.sin(9) for t in range(len(column))]
    err = float(np.max(np.abs(column - np.array(oracle))))
    report(1, err <= 1e-9 and elapsed < 1.0 and len(column) == 500,
           f"x1 max error {err:.2e} over 500 steps in {elapsed:.3f}s")


def test_02_figure_anomaly(report):
    result = generate_manual(load_config(FIG1_CONFIG))
    T = result.train_length
    ones = {(int(t) + T, int(j)) for t, j in zip(*np.nonzero(result.labels_rich == 1))}
    expected = {(t, 3) for t in range(106, 137)}
    window = slice(106 - T, 137 - T)
    gap = float(np.max(np.abs(result.clean_test[window, 3] - result.contaminated_test[window, 3])))
    report(2, ones == expected and gap > 1e-6,
           f"label-1 cells {'match' if ones == expected else 'differ from'} [106,137) on x3, "
           f"max track gap {gap:.3g}")


def test_03_contamination_exactness(report):
    counts = []
    for seed in range(100):
        params = GenerationParams(d=5, test_length=2000, contamination_ratio=0.05, seed=seed)
        counts.append(int((generate_dataset(params).labels_rich == 1).sum()))
    bad = [s for s, c in enumerate(counts) if c != 100]
    report(3, not bad, f"label-1 count == 100 in {100 - len(bad)}/100 seeds")


def test_04_graph_invariants(report):
    grid = [(d, k, m) for d in (2, 5, 20) for k in (1, 2, 4) for m in (1, 2, 4) if k <= d]
    failures, total, seed = [], 0, 0
    while total < 1000:
        d, k, m = grid[total % len(grid)]
        # links are infeasible with max_indegree 1 or all-singleton communities
        linking = k >= 2 and m >= 2 and d > k and total % 2 == 1
        params = GenerationParams(d=d, num_communities=k, max_indegree=m,
                                  link_communities=linking, nb_links=1, seed=seed)
        g = generate_graph(params, substream(seed, "graph"))
        found = validate_graph(g, params)
        if found:
            failures.append((params, found))
        total += 1
        seed += 1
    report(4, not failures, f"{total} graphs over {len(grid)} settings, {len(failures)} with violations")


def test_05_determinism(report, tmp_path, capsys):
    mismatched = []
    for seed in range(10):
        dirs = [tmp_path / f"{seed}-{n}" for n in "ab"]
        for out in dirs:
            code = cli_main(["generate", "--config", str(AUTO_CONFIG), "--out", str(out), "--seed", str(seed)])
            assert code == 0
        names = sorted(p.name for p in dirs[0].iterdir())
        same = names == sorted(p.name for p in dirs[1].iterdir()) and all(
            (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in names
        )
        if not same:
            mismatched.append(seed)
    capsys.readouterr()
    report(5, not mismatched, f"byte-identical output directories for {10 - len(mismatched)}/10 seeds")


def soundness_problems(result):
    """Trace every label back to the data and the graph; return a list of problems."""
    problems = []
    T = result.train_length
    rich = result.labels_rich
    n = rich.shape[0]
    windows = {(t, a.var) for a in result.anomalies for t in range(a.t_start, a.t_end)}
    offsets = [read_offsets(f) for f in result.equations]
    prop = result.propagation

    def parent_label(p, t):
        return rich[t - T, p] if t >= T else 0

    for i, j in zip(*np.nonzero(rich)):
        t, label = int(i) + T, int(rich[i, j])
        if label == 1:
            if (t, j) not in windows:
                problems.append(("label1-outside-window", t, j))
            continue
        want = label == 3
        traced = any(
            parent_label(p, t - k) in (1, 3) and (p == j or prop.get((p, j), False)) == want
            for p, ks in offsets[j].items()
            for k in ks
        )
        if not traced:
            problems.append((f"label{label}-untraced", t, j))
    zero = rich == 0
    if not np.array_equal(result.clean_test[zero], result.contaminated_test[zero]):
        problems.append(("label0-track-mismatch",))
    if len(windows) != int((rich == 1).sum()) or n != result.test_length:
        problems.append(("label1-coverage",))
    for a in result.anomalies:
        w = slice(a.t_start - T, a.t_end - T)
        if not np.max(np.abs(result.clean_test[w, a.var] - result.contaminated_test[w, a.var])) > 1e-6:
            problems.append(("ineffective", a.var, a.t_start))
    return problems


def test_06_label_soundness(report):
    failing = {}
    for seed in range(100):
        params = GenerationParams(d=5, num_communities=2, max_indegree=4, train_length=500,
                                  test_length=1500, contamination_ratio=0.05, seed=seed)
        problems = soundness_problems(generate_dataset(params))
        if problems:
            failing[seed] = problems[:3]
    report(6, not failing, f"{100 - len(failing)}/100 runs with fully traced labels "
           f"and exact clean/contaminated agreement on label 0")


def test_07_parser_round_trip(report):
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(1000):
        d = int(rng.integers(1, 6))
        tree = random_tree(rng, d, depth=5)
        back = parse_expression(to_string(tree), d)
        for _ in range(100):
            ctx = random_context(rng, d)
            if bits(evaluate(back, ctx)) != bits(evaluate(tree, ctx)):
                mismatches += 1
    report(7, mismatches == 0, f"{mismatches} bit mismatches over 1000 trees x 100 contexts")


def test_08_growth_regulation(report):
    rng = np.random.default_rng(8)
    draws = 100_000
    hits = sum(pick_operator_weighted(4, rng).name == "exp" for _ in range(draws))
    baseline = 1 / len(OPERATORS)
    p = stats.binomtest(hits, draws, baseline, alternative="less").pvalue
    report(8, p < 0.01, f"exp chosen {hits}/{draws} at score +4 vs {baseline:.4f} at score 0, p={p:.2e}")


def test_09_mutation_validity(report):
    rng = np.random.default_rng(9)
    params = GenerationParams(d=6)
    invalid = 0
    sampled = Counter()
    for i in range(10_000):
        parents = {int(v) for v in rng.choice(6, size=int(rng.integers(0, 3)), replace=False)}
        var = int(rng.integers(6))
        f = generate_function(parents, not parents, params, rng)
        out = contaminate(f, parents, params, rng, var=var)
        sampled[out.sampled] += 1
        g = out.mutated
        ok = all(
            OPERATORS[n.op].arity == (1 if isinstance(n, Unary) else 2)
            for _, n in iter_nodes(g)
            if isinstance(n, (Unary, Binary))
        )
        ctx = random_context(rng, 6)
        value = evaluate(g, ctx)
        back = parse_expression(to_string(g), 6)
        ok = ok and math.isfinite(value) and bits(evaluate(back, ctx)) == bits(value)
        invalid += not ok
    chi = stats.chisquare([sampled[s] for s in STRATEGIES])
    report(9, invalid == 0 and chi.pvalue > 0.01,
           f"{invalid} invalid mutations in 10^4; strategy counts "
           f"{[sampled[s] for s in STRATEGIES]} chi-square p={chi.pvalue:.3f}")


def test_10_performance(report):
    small = GenerationParams(d=5, num_communities=2, max_indegree=4, train_length=5000,
                             test_length=5000, seed=1)
    start = time.perf_counter()
    generate_dataset(small)
    t_small = time.perf_counter() - start
    large = GenerationParams(d=50, num_communities=5, max_indegree=4, train_length=50_000,
                             test_length=50_000, seed=1)
    start = time.perf_counter()
    generate_dataset(large)
    t_large = time.perf_counter() - start
    report(10, t_small < 1.0 and t_large < 30.0,
           f"d=5 x 10^4 steps in {t_small:.2f}s (< 1s); d=50 x 10^5 steps in {t_large:.2f}s (< 30s)")
