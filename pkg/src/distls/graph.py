"""Directed graphs with incidence algebra and hop-distance queries.

Edges are stored as ``(tail, head)`` pairs. The node-edge incidence matrix
``A`` has ``+1`` where an edge leaves a node and ``-1`` where it enters, so
``(A x)_i`` is net outflow at node ``i`` and ``(A' lam)_e = lam[tail] - lam[head]``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from distls.errors import InvalidArgument, PreconditionViolation


@dataclass(frozen=True)
class Neighborhood:
    center: int
    radius: int
    members: frozenset

    def __contains__(self, node):
        return node in self.members

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class DirectedGraph:
    n: int
    edges: tuple
    check_connected: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        edges = tuple((int(t), int(h)) for t, h in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.n < 2:
            raise InvalidArgument(f"need at least 2 nodes, got n={self.n}")
        seen = set()
        for e, (t, h) in enumerate(edges):
            if not (0 <= t < self.n and 0 <= h < self.n):
                raise InvalidArgument(f"edge {e}={t, h} has a node id outside [0, {self.n})")
            if t == h:
                raise InvalidArgument(f"edge {e} is a self-loop at node {t}")
            key = (min(t, h), max(t, h))
            if key in seen:
                raise InvalidArgument(f"edge {e}={t, h} duplicates an existing undirected pair")
            seen.add(key)
        if self.check_connected and not self.is_connected():
            raise PreconditionViolation("undirected support of the graph is not connected")

    @property
    def E(self):
        return len(self.edges)

    @cached_property
    def tails(self):
        return np.fromiter((t for t, _ in self.edges), dtype=np.intp, count=self.E)

    @cached_property
    def heads(self):
        return np.fromiter((h for _, h in self.edges), dtype=np.intp, count=self.E)

    @cached_property
    def incidence(self):
        """Sparse ``n x E`` incidence matrix in CSR form."""
        cols = np.arange(self.E)
        data = np.concatenate([np.ones(self.E), -np.ones(self.E)])
        rows = np.concatenate([self.tails, self.heads])
        return sp.csr_matrix((data, (rows, np.concatenate([cols, cols]))), shape=(self.n, self.E))

    @cached_property
    def adjacency(self):
        """Sorted undirected neighbor lists."""
        nbrs = [set() for _ in range(self.n)]
        for t, h in self.edges:
            nbrs[t].add(h)
            nbrs[h].add(t)
        return tuple(tuple(sorted(s)) for s in nbrs)

    @cached_property
    def incident_edges(self):
        """Edge ids touching each node, in increasing order."""
        inc = [[] for _ in range(self.n)]
        for e, (t, h) in enumerate(self.edges):
            inc[t].append(e)
            inc[h].append(e)
        return tuple(tuple(x) for x in inc)

    @cached_property
    def hop_distances(self):
        """All-pairs undirected hop counts (``inf`` between components)."""
        a = sp.coo_matrix((np.ones(self.E), (self.tails, self.heads)), shape=(self.n, self.n))
        return shortest_path(a.tocsr(), directed=False, unweighted=True)

    def is_connected(self):
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.n

    def neighborhood_mask(self, radius):
        """Sparse 0/1 matrix with ``[i, j] = 1`` iff ``dist(i, j) <= radius``."""
        if radius < 0:
            raise InvalidArgument(f"radius must be >= 0, got {radius}")
        return sp.csr_matrix((self.hop_distances <= radius).astype(float))


def _check_len(vec, expected, what):
    vec = np.asarray(vec, dtype=float)
    if vec.ndim != 1 or vec.shape[0] != expected:
        raise InvalidArgument(f"{what} must have length {expected}, got shape {vec.shape}")
    return vec


def incidence_apply(graph, x):
    """Return ``A x``: outflow minus inflow at each node."""
    x = _check_len(x, graph.E, "edge vector")
    return (np.bincount(graph.tails, weights=x, minlength=graph.n)
            - np.bincount(graph.heads, weights=x, minlength=graph.n))


def incidence_transpose_apply(graph, lam):
    """Return ``A' lam``: the tail-minus-head difference on each edge."""
    lam = _check_len(lam, graph.n, "node vector")
    return lam[graph.tails] - lam[graph.heads]


def n_hop_neighborhood(graph, center, radius):
    if not 0 <= center < graph.n:
        raise InvalidArgument(f"node id {center} outside [0, {graph.n})")
    if radius < 0:
        raise InvalidArgument(f"radius must be >= 0, got {radius}")
    members = {center}
    frontier = [center]
    for _ in range(radius):
        nxt = []
        for u in frontier:
            for v in graph.adjacency[u]:
                if v not in members:
                    members.add(v)
                    nxt.append(v)
        if not nxt:
            break
        frontier = nxt
    return Neighborhood(center=center, radius=radius, members=frozenset(members))


def diameter(graph):
    dist = graph.hop_distances
    if not np.all(np.isfinite(dist)):
        raise PreconditionViolation("diameter is undefined for a disconnected graph")
    return int(dist.max())


def _uniform_tree(n, rng):
    # Pruefer decoding: a uniform sequence in [0, n)^(n-2) gives a uniform labeled tree.
    if n == 2:
        return [(0, 1)]
    seq = rng.integers(0, n, size=n - 2)
    degree = np.ones(n, dtype=int)
    for v in seq:
        degree[v] += 1
    tree = []
    for v in seq:
        leaf = int(np.flatnonzero(degree == 1)[0])
        tree.append((leaf, int(v)))
        degree[leaf] -= 1
        degree[v] -= 1
    u, w = np.flatnonzero(degree == 1)
    tree.append((int(u), int(w)))
    return tree


def random_connected_graph(n, E, seed):
    """Connected random graph with exactly ``E`` edges.

    A uniform spanning tree is drawn first, the remaining ``E - n + 1``
    undirected pairs are sampled uniformly without replacement from the
    complement, and each edge gets a fair-coin direction. All randomness
    comes from ``numpy.random.default_rng(seed)`` (PCG64).
    """
    if n < 2:
        raise InvalidArgument(f"need n >= 2, got {n}")
    max_edges = n * (n - 1) // 2
    if not n - 1 <= E <= max_edges:
        raise InvalidArgument(f"E={E} infeasible for n={n}; need {n - 1} <= E <= {max_edges}")
    rng = np.random.default_rng(seed)
    support = {(min(a, b), max(a, b)) for a, b in _uniform_tree(n, rng)}
    extra = E - len(support)
    if extra:
        rest = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in support]
        picks = rng.choice(len(rest), size=extra, replace=False)
        support.update(rest[k] for k in picks)
    pairs = sorted(support)
    flips = rng.random(len(pairs)) < 0.5
    edges = [(j, i) if flip else (i, j) for (i, j), flip in zip(pairs, flips)]
    return DirectedGraph(n, tuple(edges))


def format_graph(graph):
    lines = [f"{graph.n} {graph.E}"]
    lines += [f"{t} {h}" for t, h in graph.edges]
    return "\n".join(lines) + "\n"


def parse_graph_lines(lines):
    """Parse the ``n E`` header and ``E`` edge lines; returns (graph, unread lines)."""
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise InvalidArgument("empty graph file")
    try:
        n, E = (int(tok) for tok in lines[0].split())
    except ValueError as exc:
        raise InvalidArgument(f"bad header line {lines[0]!r}; expected 'n E'") from exc
    if len(lines) < E + 1:
        raise InvalidArgument(f"header promises {E} edges but only {len(lines) - 1} lines follow")
    edges = []
    for ln in lines[1:E + 1]:
        toks = ln.split()
        if len(toks) != 2:
            raise InvalidArgument(f"bad edge line {ln!r}; expected 'tail head'")
        try:
            edges.append((int(toks[0]), int(toks[1])))
        except ValueError as exc:
            raise InvalidArgument(f"bad edge line {ln!r}") from exc
    return DirectedGraph(n, tuple(edges)), lines[E + 1:]


def read_graph(path):
    graph, rest = parse_graph_lines(Path(path).read_text().splitlines())
    if rest:
        raise InvalidArgument(f"{path}: trailing content after edge list")
    return graph


def write_graph(graph, path):
    Path(path).write_text(format_graph(graph))
