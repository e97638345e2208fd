from collections import Counter

import numpy as np
import pytest

from tsforge.errors import InfeasibleParams
from tsforge.graph import (
    DependencyGraph,
    Edge,
    assign_communities,
    generate_graph,
    pick_exogenous,
    validate_graph,
)
from tsforge.params import GenerationParams
from tsforge.rng import substream


def fig1_graph():
    edges = [Edge(1, 0), Edge(4, 2), Edge(2, 3), Edge(3, 2), Edge(3, 3)]
    return DependencyGraph(5, [[0, 1], [2, 3, 4]], edges)


def kinds(violations):
    return sorted(v.kind for v in violations)


def test_figure_graph_is_valid():
    g = fig1_graph()
    params = GenerationParams(d=5, num_communities=2, max_indegree=4)
    assert validate_graph(g, params) == []
    assert g.exogenous == [1, 4]
    assert g.parents(2) == [3, 4]


def test_indegree_violation():
    edges = [Edge(s, 5) for s in range(5)]
    g = DependencyGraph(6, [list(range(6))], edges)
    found = validate_graph(g, GenerationParams(d=6, max_indegree=4))
    assert kinds(found) == ["IndegreeExceeded"]
    assert found[0].where == 5


def test_disconnected_community():
    g = DependencyGraph(4, [[0, 1, 2, 3]], [Edge(0, 1), Edge(2, 3)])
    found = validate_graph(g, GenerationParams(d=4))
    assert kinds(found) == ["CommunityDisconnected"]


def test_other_violations():
    g = DependencyGraph(3, [[0, 1], [2]], [Edge(0, 1), Edge(0, 1), Edge(1, 0), Edge(2, 7)])
    found = kinds(validate_graph(g, GenerationParams(d=3, num_communities=2)))
    assert "DuplicateEdge" in found
    assert "EndpointOutOfRange" in found
    assert "NoExogenous" in found
    assert "CrossCommunityEdge" in found
    assert "BadPartition" in kinds(validate_graph(DependencyGraph(3, [[0, 1]], [])))


def test_self_loops_do_not_connect():
    g = DependencyGraph(2, [[0, 1]], [Edge(1, 1)])
    assert "CommunityDisconnected" in kinds(validate_graph(g))


def test_single_variable():
    g = generate_graph(GenerationParams(d=1), substream(0, "graph"))
    assert g.edges == [] and g.exogenous == [0]


def test_infeasible_params():
    params = GenerationParams(d=3, num_communities=2, link_communities=True, nb_links=5, max_indegree=1)
    with pytest.raises(InfeasibleParams):
        generate_graph(params, substream(0, "graph"))
    with pytest.raises(InfeasibleParams):
        generate_graph(GenerationParams(d=6, num_communities=2, link_communities=True, max_indegree=1),
                       substream(0, "graph"))


@pytest.mark.parametrize("d", [2, 5, 12])
@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("max_indegree", [1, 2, 4])
def test_generated_graphs_are_valid(d, k, max_indegree):
    for seed in range(40):
        params = GenerationParams(d=d, num_communities=k, max_indegree=max_indegree, seed=seed)
        g = generate_graph(params, substream(seed, "graph"))
        assert validate_graph(g, params) == [], seed
        assert set(g.exogenous) == {v for v in range(d) if g.indegree(v) == 0}


@pytest.mark.parametrize("max_indegree", [2, 3, 4])
def test_linked_communities(max_indegree):
    for seed in range(200):
        params = GenerationParams(d=8, num_communities=3, max_indegree=max_indegree,
                                  link_communities=True, nb_links=2, seed=seed)
        g = generate_graph(params, substream(seed, "graph"))
        assert validate_graph(g, params) == [], seed


def test_no_cross_edges_without_links():
    for seed in range(1000):
        params = GenerationParams(d=6, num_communities=2, max_indegree=3, seed=seed)
        g = generate_graph(params, substream(seed, "graph"))
        member = g.community_of()
        assert all(member[e.src] == member[e.dst] for e in g.edges)


def test_edge_count_bounds():
    for seed in range(200):
        params = GenerationParams(d=7, num_communities=2, max_indegree=3, seed=seed)
        g = generate_graph(params, substream(seed, "graph"))
        exo = set(g.exogenous)
        for members in g.communities:
            endo = [v for v in members if v not in exo]
            inner = [e for e in g.edges if e.dst in members]
            cap = len(endo) * min(params.max_indegree, len(members))
            assert min(len(members), cap) <= len(inner) <= len(endo) * params.max_indegree


def test_determinism():
    params = GenerationParams(d=10, num_communities=3, max_indegree=3, seed=9)
    a = generate_graph(params, substream(9, "graph"))
    b = generate_graph(params, substream(9, "graph"))
    assert a == b


def test_assign_communities_examples():
    rng = np.random.default_rng(0)
    groups, rest = assign_communities(range(5), 5, rng)
    assert sorted(map(len, groups)) == [1] * 5 and rest == []
    groups, _ = assign_communities(range(3), 1, rng)
    assert groups == [[0, 1, 2]]
    with pytest.raises(InfeasibleParams):
        assign_communities(range(3), 4, rng)


def test_assign_communities_sizes():
    rng = np.random.default_rng(1)
    sizes = Counter()
    for _ in range(10_000):
        groups, _ = assign_communities(range(5), 2, rng)
        assert sorted(v for g in groups for v in g) == list(range(5))
        sizes[tuple(len(g) for g in groups)] += 1
    assert set(sizes) == {(1, 4), (2, 3), (3, 2), (4, 1)}


def test_assign_communities_holdout():
    groups, rest = assign_communities(range(6), 2, np.random.default_rng(3), holdout=2)
    assert len(rest) == 2 and all(groups)
    assert sorted(rest + [v for g in groups for v in g]) == list(range(6))


def test_pick_exogenous():
    rng = np.random.default_rng(4)
    assert pick_exogenous([7], rng) == ([7], [])
    counts = Counter()
    for _ in range(10_000):
        exo, endo = pick_exogenous([0, 1, 2, 3], rng)
        assert sorted(exo + endo) == [0, 1, 2, 3]
        assert not set(exo) & set(endo)
        counts[len(exo)] += 1
    assert set(counts) == {1, 2, 3}
