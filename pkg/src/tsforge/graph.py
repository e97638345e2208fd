"""Random dependency graphs with community structure."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import InfeasibleParams
from .params import GenerationParams


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    propagates: bool = False

    @property
    def key(self) -> tuple[int, int]:
        return (self.src, self.dst)


@dataclass
class DependencyGraph:
    d: int
    communities: list[list[int]]
    edges: list[Edge] = field(default_factory=list)

    def parents(self, v: int) -> list[int]:
        return sorted({e.src for e in self.edges if e.dst == v})

    def indegree(self, v: int) -> int:
        return len({e.src for e in self.edges if e.dst == v})

    @property
    def exogenous(self) -> list[int]:
        targets = {e.dst for e in self.edges}
        return [v for v in range(self.d) if v not in targets]

    def community_of(self) -> dict[int, int]:
        return {v: ci for ci, members in enumerate(self.communities) for v in members}

    def edge_keys(self) -> list[tuple[int, int]]:
        return [e.key for e in self.edges]

    def with_propagation(self, propagation: dict[tuple[int, int], bool]) -> "DependencyGraph":
        edges = [Edge(e.src, e.dst, propagation.get(e.key, e.propagates)) for e in self.edges]
        return DependencyGraph(self.d, [list(c) for c in self.communities], edges)

    @classmethod
    def from_parents(cls, d: int, parents: dict[int, Iterable[int]]) -> "DependencyGraph":
        """Graph implied by explicit parent sets; communities are weak components."""
        edges = sorted({(p, j) for j, ps in parents.items() for p in ps})
        comp = _components(d, edges)
        return cls(d, comp, [Edge(s, t) for s, t in edges])


def _components(d: int, edges: Iterable[tuple[int, int]], nodes: Optional[list[int]] = None):
    nodes = list(range(d)) if nodes is None else nodes
    parent = {v: v for v in nodes}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for s, t in edges:
        if s in parent and t in parent:
            parent[find(s)] = find(t)
    groups: dict[int, list[int]] = {}
    for v in nodes:
        groups.setdefault(find(v), []).append(v)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


# ---------------------------------------------------------------------------
# Generation steps
# ---------------------------------------------------------------------------


def assign_communities(
    variables: Iterable[int], k: int, rng: np.random.Generator, holdout: int = 0
) -> tuple[list[list[int]], list[int]]:
    """Split ``variables`` into ``k`` nonempty groups, keeping ``holdout`` of them aside.

    Returns ``(communities, unassigned)``.
    """
    pool = [int(v) for v in variables]
    n = len(pool)
    if not 1 <= k <= n - holdout:
        raise InfeasibleParams(f"cannot split {n} variables ({holdout} held out) into {k} communities")
    order = [pool[i] for i in rng.permutation(n)]
    unassigned = sorted(order[:holdout])
    rest = order[holdout:]
    m = len(rest)
    cuts = sorted(int(c) for c in rng.choice(np.arange(1, m), size=k - 1, replace=False)) if k > 1 else []
    bounds = [0] + cuts + [m]
    communities = [sorted(rest[a:b]) for a, b in zip(bounds, bounds[1:])]
    return communities, unassigned


def max_exogenous(size: int, max_indegree: int) -> int:
    """Largest exogenous count that still lets the community be connected.

    Connecting ``size`` nodes needs ``size - 1`` edges, all of which land on
    endogenous nodes: ``(size - n_exo) * min(max_indegree, size) >= size - 1``.
    """
    if size == 1:
        return 1
    cap = min(max_indegree, size)
    best = 1
    for n_exo in range(1, size):
        if (size - n_exo) * cap >= size - 1:
            best = n_exo
    return best


def pick_exogenous(
    community: Iterable[int], rng: np.random.Generator, max_indegree: Optional[int] = None
) -> tuple[list[int], list[int]]:
    members = sorted(int(v) for v in community)
    if not members:
        raise ValueError("community must be nonempty")
    if len(members) == 1:
        return members, []
    upper = len(members) - 1
    if max_indegree is not None:
        upper = min(upper, max_exogenous(len(members), max_indegree))
    n_exo = int(rng.integers(1, upper + 1))
    chosen = set(int(v) for v in rng.choice(members, size=n_exo, replace=False))
    exo = [v for v in members if v in chosen]
    endo = [v for v in members if v not in chosen]
    return exo, endo


def _community_edges(
    exo: list[int], endo: list[int], max_indegree: int, rng: np.random.Generator
) -> list[tuple[int, int]]:
    members = sorted(exo + endo)
    if not endo:
        return []
    cap = min(max_indegree, len(members))
    capacity = len(endo) * cap
    hi = len(endo) * max_indegree
    lo = len(members)
    target = int(rng.integers(lo, hi + 1)) if hi >= lo else hi
    target = min(target, capacity)

    edges: set[tuple[int, int]] = set()
    indeg = {v: 0 for v in endo}

    def add(s, t):
        edges.add((s, t))
        indeg[t] += 1

    # spanning structure: every endogenous node hangs off an already connected node
    connected = [exo[int(rng.integers(len(exo)))]]
    pending_exo = [v for v in exo if v != connected[0]]
    for v in (endo[i] for i in rng.permutation(len(endo))):
        add(connected[int(rng.integers(len(connected)))], v)
        connected.append(v)
    for v in (pending_exo[i] for i in rng.permutation(len(pending_exo))):
        open_dst = [u for u in endo if indeg[u] < cap]
        if not open_dst:
            raise InfeasibleParams("not enough indegree capacity to connect community")
        add(v, open_dst[int(rng.integers(len(open_dst)))])

    # fill up to the target with uniform admissible pairs (self-loops included)
    while len(edges) < target:
        candidates = [(s, u) for u in endo if indeg[u] < cap for s in members if (s, u) not in edges]
        if not candidates:
            break
        add(*candidates[int(rng.integers(len(candidates)))])
    return sorted(edges)


def generate_graph(params: GenerationParams, rng: np.random.Generator) -> DependencyGraph:
    d, k = params.d, params.num_communities
    if k > d:
        raise InfeasibleParams(f"num_communities={k} exceeds d={d}")
    linking = params.link_communities
    if linking and k < 2:
        raise InfeasibleParams("link_communities needs at least 2 communities")
    if linking and params.max_indegree < 2:
        # with one parent per node, every community is a tree with a single exogenous
        # root, and a cross link could only land on that root
        raise InfeasibleParams("link_communities needs max_indegree >= 2")
    if linking and k == d:
        # singleton communities must stay exogenous, so no node could receive a link
        raise InfeasibleParams("link_communities needs at least one community with 2+ variables")

    holdout = 0
    if linking and params.max_indegree >= 2:
        most = min(params.nb_links, d - k)
        holdout = int(rng.integers(0, most + 1)) if most > 0 else 0
    communities, unassigned = assign_communities(range(d), k, rng, holdout)

    edges: set[tuple[int, int]] = set()
    for members in communities:
        exo, endo = pick_exogenous(members, rng, params.max_indegree)
        edges.update(_community_edges(exo, endo, params.max_indegree, rng))

    if linking:
        _add_bridges(communities, unassigned, edges, params, rng)

    return DependencyGraph(d, [sorted(c) for c in communities], [Edge(s, t) for s, t in sorted(edges)])


def _bridge_options(communities, edges, cap) -> list[tuple[int, int]]:
    """Admissible cross-community (src, dst) pairs under the indegree cap.

    A destination is either endogenous with spare capacity, or exogenous in a
    community that keeps another exogenous member.
    """
    member = {v: ci for ci, c in enumerate(communities) for v in c}
    indeg = {v: 0 for v in member}
    for _, t in edges:
        indeg[t] += 1
    exo_count = [sum(1 for v in c if indeg[v] == 0) for c in communities]
    options = []
    for t, ct in member.items():
        if indeg[t] >= cap or (indeg[t] == 0 and exo_count[ct] < 2):
            continue
        options.extend((s, t) for s, cs in member.items() if cs != ct and (s, t) not in edges)
    return sorted(options)


def _free_capacity(communities, edges, rng) -> bool:
    """Drop one intra-community edge whose removal keeps its community connected."""
    member = {v: ci for ci, c in enumerate(communities) for v in c}
    removable = []
    for s, t in sorted(edges):
        if member.get(s) != member.get(t):
            continue
        c = communities[member[t]]
        rest = [(a, b) for a, b in edges if (a, b) != (s, t) and a != b and a in c and b in c]
        if len(_components(0, rest, nodes=list(c))) == 1:
            removable.append((s, t))
    if not removable:
        return False
    edges.discard(removable[int(rng.integers(len(removable)))])
    return True


def _add_bridges(communities, unassigned, edges, params, rng) -> None:
    k = len(communities)
    cap = params.max_indegree
    pending = [unassigned[i] for i in rng.permutation(len(unassigned))]
    for _ in range(params.nb_links):
        if pending:
            # a held-out variable joins the destination community: u -> v inside it,
            # and the bridge src -> v from the source community
            a, b = (int(i) for i in rng.choice(k, size=2, replace=False))
            src_c, dst_c = communities[a], communities[b]
            v = pending.pop()
            u = dst_c[int(rng.integers(len(dst_c)))]
            src = src_c[int(rng.integers(len(src_c)))]
            edges.add((u, v))
            edges.add((src, v))
            dst_c.append(v)
            dst_c.sort()
            continue
        options = _bridge_options(communities, edges, cap)
        while not options and _free_capacity(communities, edges, rng):
            options = _bridge_options(communities, edges, cap)
        if not options:
            raise InfeasibleParams("could not place an inter-community link within indegree limits")
        # uniform over community pairs that admit a link, then over their node pairs
        member = {v: ci for ci, c in enumerate(communities) for v in c}
        by_pair: dict[tuple[int, int], list] = {}
        for st in options:
            by_pair.setdefault((member[st[0]], member[st[1]]), []).append(st)
        pairs = sorted(by_pair)
        chosen = by_pair[pairs[int(rng.integers(len(pairs)))]]
        edges.add(chosen[int(rng.integers(len(chosen)))])


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    where: object

    def __str__(self):
        return f"{self.kind}({self.where})"


def validate_graph(g: DependencyGraph, params: Optional[GenerationParams] = None) -> list[Violation]:
    """List every broken structural invariant (empty when the graph is valid)."""
    out: list[Violation] = []
    seen = set()
    for e in g.edges:
        if e.key in seen:
            out.append(Violation("DuplicateEdge", e.key))
        seen.add(e.key)
        if not (0 <= e.src < g.d and 0 <= e.dst < g.d):
            out.append(Violation("EndpointOutOfRange", e.key))

    assigned = [v for c in g.communities for v in c]
    if sorted(assigned) != list(range(g.d)):
        out.append(Violation("BadPartition", sorted(assigned)))

    if params is not None:
        for v in range(g.d):
            if g.indegree(v) > params.max_indegree:
                out.append(Violation("IndegreeExceeded", v))

    targets = {e.dst for e in g.edges}
    member_of = g.community_of()
    for ci, members in enumerate(g.communities):
        if members and all(v in targets for v in members):
            out.append(Violation("NoExogenous", ci))
        inner = [e.key for e in g.edges if e.src in members and e.dst in members and e.src != e.dst]
        if len(_components(g.d, inner, nodes=list(members))) > 1:
            out.append(Violation("CommunityDisconnected", ci))

    cross = [e.key for e in g.edges if member_of.get(e.src) != member_of.get(e.dst)]
    if params is not None:
        if not params.link_communities:
            out.extend(Violation("CrossCommunityEdge", key) for key in cross)
        elif len(cross) != params.nb_links:
            out.append(Violation("WrongLinkCount", len(cross)))
    return out
