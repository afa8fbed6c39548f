"""Minimum-cost multicut: objective, feasibility, greedy solver, exact oracle.

The solver operates on any undirected weighted graph exposing `vertices`
and `edges`; the pipeline feeds it bipartite trajectory graphs, while tests
also exercise cliques and random topologies through :class:`EdgeGraph`.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Sequence, Tuple

from .core import Multicut, Partition, TrajectoryGraph

MAX_EXACT_VERTICES = 10


@dataclass(frozen=True)
class EdgeGraph:
    """Plain weighted graph for solver-level use outside the bipartite pipeline."""

    vertices: FrozenSet[int]
    edges: Tuple[Tuple[int, int, float], ...]

    @classmethod
    def from_edges(cls, edges, extra_vertices=()) -> "EdgeGraph":
        vs = set(extra_vertices)
        canon = []
        for u, v, w in edges:
            vs.add(u)
            vs.add(v)
            canon.append((u, v, float(w)))
        return cls(frozenset(vs), tuple(canon))


@dataclass(frozen=True)
class SolveResult:
    partition: Partition
    multicut: Multicut
    objective: float
    component_count: int
    contraction_log: Tuple[Tuple[int, int, float], ...] = field(default=())


class _UnionFind:
    def __init__(self, items):
        self.parent = {v: v for v in items}

    def find(self, v: int) -> int:
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def union(self, a: int, b: int) -> int:
        """Merge; the smaller id becomes the representative."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        keep, drop = (ra, rb) if ra < rb else (rb, ra)
        self.parent[drop] = keep
        return keep


def objective_of(g, y: Multicut) -> float:
    """Eq. objective: sum of edge weights over the cut set."""
    if len(y.cut) != len(g.edges):
        raise ValueError(
            f"multicut covers {len(y.cut)} edges, graph has {len(g.edges)}"
        )
    return float(sum(w for (_, _, w), ye in zip(g.edges, y.cut) if ye))


def is_feasible(g, y: Multicut) -> bool:
    """True iff every cut edge crosses components of the uncut subgraph."""
    if len(y.cut) != len(g.edges):
        raise ValueError("multicut does not cover all edges")
    uf = _UnionFind(g.vertices)
    for (u, v, _), ye in zip(g.edges, y.cut):
        if not ye:
            uf.union(u, v)
    return all(
        uf.find(u) != uf.find(v)
        for (u, v, _), ye in zip(g.edges, y.cut)
        if ye
    )


def components_of(g, y: Multicut) -> Partition:
    """Connected components over uncut edges, labeled by smallest member id."""
    uf = _UnionFind(g.vertices)
    for (u, v, _), ye in zip(g.edges, y.cut):
        if not ye:
            uf.union(u, v)
    for (u, v, _), ye in zip(g.edges, y.cut):
        if ye and uf.find(u) == uf.find(v):
            raise ValueError(f"infeasible multicut: cut edge ({u}, {v}) inside a component")
    roots: Dict[int, List[int]] = {}
    for v in g.vertices:
        roots.setdefault(uf.find(v), []).append(v)
    labels: Dict[int, int] = {}
    for lab, root in enumerate(sorted(roots, key=lambda r: min(roots[r]))):
        for v in roots[root]:
            labels[v] = lab
    return Partition(labels)


def _result_from_labels(g, labels: Dict[int, int], log=()) -> SolveResult:
    # relabel contiguously, ordered by smallest member vertex
    groups: Dict[int, List[int]] = {}
    for v, lab in labels.items():
        groups.setdefault(lab, []).append(v)
    order = sorted(groups, key=lambda lab: min(groups[lab]))
    remap = {lab: i for i, lab in enumerate(order)}
    p = Partition({v: remap[lab] for v, lab in labels.items()})
    y = _labels_to_cut(g, p.labels)
    return SolveResult(
        partition=p,
        multicut=y,
        objective=objective_of(g, y),
        component_count=len(groups),
        contraction_log=tuple(log),
    )


def _labels_to_cut(g, labels) -> Multicut:
    return Multicut(
        tuple(0 if labels[u] == labels[v] else 1 for u, v, _ in g.edges)
    )


def solve_gaec(g, refine: bool = False, max_refine_sweeps: int = 5) -> SolveResult:
    """Greedy additive edge contraction.

    Repeatedly contracts the strictly-positive maximum-weight edge, summing
    parallel edges, until no positive edge remains.  Ties break on the
    (min endpoint id, max endpoint id) pair of the current super-vertices,
    where a super-vertex is represented by its smallest original member id.
    """
    for _, _, w in g.edges:
        if not math.isfinite(w):
            raise ValueError("non-finite edge weight")

    adj: Dict[int, Dict[int, float]] = {v: {} for v in g.vertices}
    for u, v, w in g.edges:
        if u == v:
            raise ValueError(f"self loop on vertex {u}")
        if v in adj[u]:
            raise ValueError(f"duplicate edge ({u}, {v})")
        adj[u][v] = w
        adj[v][u] = w

    uf = _UnionFind(g.vertices)
    heap: List[Tuple[float, int, int]] = []
    for u, v, w in g.edges:
        a, b = (u, v) if u < v else (v, u)
        heap.append((-w, a, b))
    heapq.heapify(heap)

    log: List[Tuple[int, int, float]] = []
    while heap:
        neg_w, a, b = heapq.heappop(heap)
        w = -neg_w
        # lazy invalidation: both endpoints must still be live representatives
        # carrying exactly this weight
        if uf.find(a) != a or uf.find(b) != b:
            continue
        if adj[a].get(b) != w:
            continue
        if w <= 0:
            break
        log.append((a, b, w))
        keep = uf.union(a, b)
        drop = b if keep == a else a
        del adj[keep][drop]
        del adj[drop][keep]
        for x, wx in adj[drop].items():
            del adj[x][drop]
            merged = adj[keep].get(x, 0.0) + wx
            adj[keep][x] = merged
            adj[x][keep] = merged
            lo, hi = (keep, x) if keep < x else (x, keep)
            heapq.heappush(heap, (-merged, lo, hi))
        adj[drop].clear()

    labels = {v: uf.find(v) for v in g.vertices}
    if refine:
        labels = _refine_moves(g, labels, max_refine_sweeps)
    return _result_from_labels(g, labels, log)


def _refine_moves(g, labels: Dict[int, int], max_sweeps: int) -> Dict[int, int]:
    """Single-vertex label moves, accepted only on strict objective decrease."""
    incident: Dict[int, List[Tuple[int, float]]] = {v: [] for v in g.vertices}
    for u, v, w in g.edges:
        incident[u].append((v, w))
        incident[v].append((u, w))
    fresh = max(labels.values(), default=0) + 1
    for _ in range(max_sweeps):
        improved = False
        for v in sorted(g.vertices):
            cur = labels[v]
            base = sum(w for u, w in incident[v] if labels[u] != cur)
            candidates = sorted({labels[u] for u, _ in incident[v]} - {cur})
            candidates.append(fresh)  # move to a new singleton
            best_lab, best_cost = cur, base
            for cand in candidates:
                cost = sum(w for u, w in incident[v] if labels[u] != cand)
                if cost < best_cost - 1e-12:
                    best_lab, best_cost = cand, cost
            if best_lab != cur:
                labels[v] = best_lab
                if best_lab == fresh:
                    fresh += 1
                improved = True
        if not improved:
            break
    return labels


def _restricted_growth_strings(n: int):
    """All set partitions of range(n) as label vectors, in lex order."""
    labels = [0] * n

    def rec(i: int, max_used: int):
        if i == n:
            yield tuple(labels)
            return
        for lab in range(max_used + 2):
            labels[i] = lab
            yield from rec(i + 1, max(max_used, lab))

    yield from rec(0, -1) if n else iter(((),))


def solve_exact(g) -> SolveResult:
    """Brute-force oracle: enumerate all vertex-set partitions (n <= 10)."""
    verts = sorted(g.vertices)
    n = len(verts)
    if n > MAX_EXACT_VERTICES:
        raise ValueError(f"exact solver limited to {MAX_EXACT_VERTICES} vertices, got {n}")
    idx = {v: i for i, v in enumerate(verts)}
    edge_idx = [(idx[u], idx[v], w) for u, v, w in g.edges]

    best = None  # (objective, component count, label vector)
    for rgs in _restricted_growth_strings(n):
        obj = sum(w for iu, iv, w in edge_idx if rgs[iu] != rgs[iv])
        key = (obj, max(rgs, default=0) + 1 if n else 0, rgs)
        if best is None or key < best:
            best = key
    assert best is not None or n == 0
    if n == 0:
        return _result_from_labels(g, {})
    labels = {v: best[2][idx[v]] for v in verts}
    return _result_from_labels(g, labels)
