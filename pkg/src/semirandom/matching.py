"""Matching checks on the process digraph.

Includes an exact maximum-matching routine (Edmonds' blossom algorithm,
O(n^3)) for small instances, and the approximate perfect matching
certificate: a set ``S`` of vertices with in-degree at most ``mu`` such that
the induced graph on ``S`` has a perfect matching and ``|S| >= n - 2 m delta``.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

MAX_MATCHING_CAP = 2000


class MatchingError(ValueError):
    pass


class Digraph:
    """Arcs ``square -> circle`` on vertices ``0 .. n-1``.

    Edges preset without a round (a seeded matching) are stored as ordinary
    arcs; they take part in in-degree counts like any other.
    """

    def __init__(self, n: int, arcs: Iterable[tuple[int, int]] = ()):
        self.n = int(n)
        self.arcs = [(int(u), int(v)) for u, v in arcs]
        for u, v in self.arcs:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise MatchingError(f"arc {u}->{v} outside [0, {self.n})")
        self._adj = None
        self._keys = None

    @classmethod
    def from_state(cls, state) -> "Digraph":
        if not state.retain_arcs and state.step:
            raise MatchingError("run was played without retaining its arcs")
        arcs = [(a.square, a.circle) for a in state.arcs]
        return cls(state.n, list(state.preset) + arcs)

    @classmethod
    def from_csv(cls, path, n: Optional[int] = None) -> "Digraph":
        """Read ``round,square,circle`` rows; ``n`` defaults to the smallest even bound."""
        arcs = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                arcs.append((int(rec["square"]), int(rec["circle"])))
        if n is None:
            top = max((max(a) for a in arcs), default=-1) + 1
            n = top + (top % 2)
        return cls(n, arcs)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("round", "square", "circle"))
            for i, (u, v) in enumerate(self.arcs, 1):
                w.writerow((i, u, v))

    @property
    def m(self) -> int:
        return len(self.arcs)

    def edge_keys(self) -> set:
        if self._keys is None:
            n = self.n
            self._keys = {u * n + v if u < v else v * n + u for u, v in self.arcs}
        return self._keys

    def has_edge(self, u: int, v: int) -> bool:
        return (u * self.n + v if u < v else v * self.n + u) in self.edge_keys()

    def adjacency(self) -> list[list[int]]:
        if self._adj is None:
            adj = [set() for _ in range(self.n)]
            for u, v in self.arcs:
                if u != v:
                    adj[u].add(v)
                    adj[v].add(u)
            self._adj = [sorted(s) for s in adj]
        return self._adj

    def in_degrees(self) -> list[int]:
        deg = [0] * self.n
        for _, v in self.arcs:
            deg[v] += 1
        return deg

    def is_simple(self) -> bool:
        return all(u != v for u, v in self.arcs) and len(self.edge_keys()) == len(self.arcs)


def read_matching_csv(path) -> list[tuple[int, int]]:
    with open(path, newline="") as fh:
        return [(int(r["u"]), int(r["v"])) for r in csv.DictReader(fh)]


def write_matching_csv(path, pairs) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("u", "v"))
        w.writerows(pairs)


def _valid_on(graph: Digraph, pairs, vertices) -> bool:
    seen = set()
    for u, v in pairs:
        if u == v or u in seen or v in seen or not graph.has_edge(u, v):
            return False
        if u not in vertices or v not in vertices:
            return False
        seen.add(u)
        seen.add(v)
    return len(seen) == len(vertices)


def is_perfect_matching(graph: Digraph, matching) -> bool:
    """Pairs are disjoint edges of ``graph`` covering every vertex."""
    pairs = list(matching)
    if 2 * len(pairs) != graph.n:
        return False
    return _valid_on(graph, pairs, range(graph.n))


def is_matching(graph: Digraph, matching) -> bool:
    seen = set()
    for u, v in matching:
        if u == v or u in seen or v in seen or not graph.has_edge(u, v):
            return False
        seen.update((u, v))
    return True


def max_matching(graph: Digraph, cap: int = MAX_MATCHING_CAP) -> list[tuple[int, int]]:
    """Maximum matching of the underlying undirected graph (Edmonds)."""
    n = graph.n
    if n > cap:
        raise MatchingError(f"max_matching is limited to n <= {cap}, got {n}")
    adj = graph.adjacency()
    match = [-1] * n
    # Greedy start; the search below only has to repair it.
    for v in range(n):
        if match[v] < 0:
            for w in adj[v]:
                if match[w] < 0:
                    match[v], match[w] = w, v
                    break

    base = list(range(n))
    parent = [-1] * n

    def lca(a, b):
        seen = [False] * n
        while True:
            a = base[a]
            seen[a] = True
            if match[a] < 0:
                break
            a = parent[match[a]]
        while True:
            b = base[b]
            if seen[b]:
                return b
            b = parent[match[b]]

    def mark(v, b, child, blossom):
        while base[v] != b:
            blossom[base[v]] = blossom[base[match[v]]] = True
            parent[v] = child
            child = match[v]
            v = parent[match[v]]

    def search(root):
        used = [False] * n
        for i in range(n):
            parent[i] = -1
            base[i] = i
        used[root] = True
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for to in adj[v]:
                if base[v] == base[to] or match[v] == to:
                    continue
                if to == root or (match[to] >= 0 and parent[match[to]] >= 0):
                    b = lca(v, to)
                    blossom = [False] * n
                    mark(v, b, to, blossom)
                    mark(to, b, v, blossom)
                    for i in range(n):
                        if blossom[base[i]]:
                            base[i] = b
                            if not used[i]:
                                used[i] = True
                                queue.append(i)
                elif parent[to] < 0:
                    parent[to] = v
                    if match[to] < 0:
                        return to
                    used[match[to]] = True
                    queue.append(match[to])
        return -1

    for root in range(n):
        if match[root] >= 0:
            continue
        v = search(root)
        while v >= 0:
            pv = parent[v]
            nxt = match[pv]
            match[v], match[pv] = pv, v
            v = nxt
    return [(u, w) for u, w in enumerate(match) if w > u]


@dataclass(frozen=True)
class ApproxPmCertificate:
    S: frozenset
    matching: tuple
    mu: float
    delta: float

    def to_dict(self) -> dict:
        return {"size": len(self.S), "pairs": len(self.matching), "mu": self.mu,
                "delta": self.delta}


def check_certificate(graph: Digraph, cert: ApproxPmCertificate) -> bool:
    """All three conditions: perfect matching on ``D[S]``, in-degrees at most
    ``mu`` (counted in the whole digraph) and ``|S| >= n - 2 m delta``."""
    S = cert.S
    if not _valid_on(graph, cert.matching, S):
        return False
    deg = graph.in_degrees()
    if any(deg[v] > cert.mu for v in S):
        return False
    return len(S) >= graph.n - 2 * graph.m * cert.delta


def construct_S(graph: Digraph, matching, mu: float) -> ApproxPmCertificate:
    """Drop vertices of in-degree above ``mu`` together with their mates."""
    pairs = list(matching)
    if not is_perfect_matching(graph, pairs):
        raise MatchingError("construct_S needs a perfect matching of the graph")
    deg = graph.in_degrees()
    heavy = {v for v in range(graph.n) if deg[v] > mu}
    kept = tuple((u, v) for u, v in pairs if u not in heavy and v not in heavy)
    S = frozenset(x for e in kept for x in e)
    return ApproxPmCertificate(S, kept, mu, 1.0 / mu)


def brute_force_matching_size(graph: Digraph) -> int:
    """Exhaustive maximum matching size; only sensible for tiny graphs."""
    adj = [set(a) for a in graph.adjacency()]
    n = graph.n

    def best(free: int) -> int:
        if not free:
            return 0
        v = (free & -free).bit_length() - 1
        rest = free & ~(1 << v)
        top = best(rest)
        for w in adj[v]:
            if rest >> w & 1:
                top = max(top, 1 + best(rest & ~(1 << w)))
        return top

    return best((1 << n) - 1)
