"""Undirected weighted graphs over dense node ids.

Graphs are immutable. Node ids are always ``0..N-1``; the original ids seen
at ingestion are kept in ``Graph.labels`` so reports can map back.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConnectivityError, EdgeListError, GraphError


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph with positive edge weights.

    Parameters
    ----------
    n : int
        Number of nodes.
    edges : ndarray, shape (m, 2)
        Unordered pairs stored with ``i < j``, sorted lexicographically.
    weights : ndarray, shape (m,)
        Positive weight ``a_ij`` for each stored pair.
    labels : ndarray, shape (n,)
        Original node id of each dense id.
    """

    n: int
    edges: np.ndarray
    weights: np.ndarray
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.n < 1:
            raise GraphError("graph needs at least one node")
        if len(weights) != len(edges):
            raise GraphError("one weight per edge required")
        if len(edges):
            if edges.min() < 0 or edges.max() >= self.n:
                raise GraphError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise GraphError("self-loops are not graph edges")
            if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
                raise GraphError("edge weights must be positive and finite")
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        order = np.lexsort((hi, lo))
        canon = np.column_stack([lo, hi])[order]
        if len(canon) > 1 and np.any(np.all(canon[1:] == canon[:-1], axis=1)):
            raise GraphError("parallel edges are not allowed")
        labels = np.arange(self.n) if self.labels is None else np.asarray(self.labels)
        if len(labels) != self.n:
            raise GraphError("one label per node required")
        canon.setflags(write=False)
        w = weights[order]
        w.setflags(write=False)
        object.__setattr__(self, "edges", canon)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "labels", labels)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> sp.csr_array:
        """Symmetric weighted adjacency matrix ``A`` in CSR form."""
        i, j = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        vals = np.concatenate([self.weights, self.weights])
        return sp.csr_array((vals, (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.asarray(self.adjacency.sum(axis=1)).ravel()
        d.setflags(write=False)
        return d

    def neighbors(self, i: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def is_connected(self) -> bool:
        ncomp, _ = connected_components(self.adjacency, directed=False)
        return ncomp == 1

    def is_bipartite(self) -> bool:
        """Two-colouring check by BFS over every component."""
        a = self.adjacency
        colour = np.full(self.n, -1)
        for root in range(self.n):
            if colour[root] >= 0:
                continue
            colour[root] = 0
            queue = [root]
            while queue:
                u = queue.pop()
                for v in a.indices[a.indptr[u]:a.indptr[u + 1]]:
                    if colour[v] < 0:
                        colour[v] = 1 - colour[u]
                        queue.append(v)
                    elif colour[v] == colour[u]:
                        return False
        return True

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}


def degree(g: Graph, i: int) -> float:
    """Sum of the weights of edges incident to node ``i``."""
    if not 0 <= i < g.n:
        raise IndexError(f"node {i} out of range for graph with {g.n} nodes")
    return float(g.degrees[i])


def load_edge_list(stream: TextIO | Iterable[str]) -> Graph:
    """Read a SNAP-style edge list.

    Lines starting with ``#`` are comments and blank lines are skipped. Each
    data line holds two integer node ids, optionally followed by a positive
    weight. Reversed and repeated pairs collapse to a single undirected edge.
    Node ids are remapped to ``0..N-1`` in ascending order of the original id.
    """
    pairs: dict[tuple[int, int], float] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) not in (2, 3):
            raise EdgeListError(f"expected 2 node ids (and optional weight), got {len(tokens)} tokens", lineno)
        try:
            a, b = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise EdgeListError(f"non-integer node id in {line!r}", lineno) from None
        w = 1.0
        if len(tokens) == 3:
            try:
                w = float(tokens[2])
            except ValueError:
                raise EdgeListError(f"non-numeric weight in {line!r}", lineno) from None
            if not (w > 0 and np.isfinite(w)):
                raise EdgeListError("edge weight must be positive", lineno)
        if a == b:
            raise EdgeListError(f"self-loop on node {a}", lineno)
        key = (min(a, b), max(a, b))
        if key in pairs and pairs[key] != w:
            raise EdgeListError(f"conflicting weights for edge {key}", lineno)
        pairs[key] = w
    if not pairs:
        raise EdgeListError("edge list contains no edges")
    keys = np.array(sorted(pairs), dtype=np.int64)
    labels = np.unique(keys)
    dense = np.searchsorted(labels, keys)
    weights = np.array([pairs[tuple(k)] for k in keys.tolist()])
    return Graph(len(labels), dense, weights, labels)


def read_edge_list(path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh)


def induced_subgraph(g: Graph, nodes) -> Graph:
    """Subgraph on ``nodes`` (dense ids), remapped in ascending id order."""
    nodes = np.unique(np.asarray(nodes, dtype=np.int64))
    remap = np.full(g.n, -1)
    remap[nodes] = np.arange(len(nodes))
    keep = (remap[g.edges[:, 0]] >= 0) & (remap[g.edges[:, 1]] >= 0)
    return Graph(len(nodes), remap[g.edges[keep]], g.weights[keep], g.labels[nodes])


def largest_connected_component(g: Graph) -> Graph:
    """Induced subgraph on the largest component.

    Ties between equally sized components go to the one containing the
    smallest original id.
    """
    ncomp, comp = connected_components(g.adjacency, directed=False)
    if ncomp == 1:
        return g
    sizes = np.bincount(comp, minlength=ncomp)
    best = None
    for c in np.flatnonzero(sizes == sizes.max()):
        smallest = g.labels[comp == c].min()
        if best is None or smallest < best[0]:
            best = (smallest, c)
    return induced_subgraph(g, np.flatnonzero(comp == best[1]))


def require_connected(g: Graph) -> Graph:
    if not g.is_connected():
        raise ConnectivityError(f"graph with {g.n} nodes is not connected")
    return g


def erdos_renyi(n: int, m: int, seed=None) -> Graph:
    """Uniform simple graph with exactly ``m`` edges, reduced to its LCC."""
    total = n * (n - 1) // 2
    if n < 2 or not 0 < m <= total:
        raise GraphError(f"cannot place {m} edges on {n} nodes")
    rng = np.random.default_rng(seed)
    flat = np.sort(rng.choice(total, size=m, replace=False))
    # decode flat index k -> pair (i, j), i < j, in row-major upper-triangle order
    starts = np.cumsum(np.concatenate([[0], np.arange(n - 1, 0, -1)]))
    i = np.searchsorted(starts, flat, side="right") - 1
    j = flat - starts[i] + i + 1
    return largest_connected_component(Graph(n, np.column_stack([i, j]), np.ones(m)))


def path_graph(n: int) -> Graph:
    i = np.arange(n - 1)
    return Graph(n, np.column_stack([i, i + 1]), np.ones(n - 1))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise GraphError("cycle needs at least 3 nodes")
    i = np.arange(n)
    return Graph(n, np.column_stack([i, (i + 1) % n]), np.ones(n))


def complete_graph(n: int) -> Graph:
    i, j = np.triu_indices(n, k=1)
    return Graph(n, np.column_stack([i, j]), np.ones(len(i)))


def random_connected_graph(n: int, rng: np.random.Generator, extra_edge_prob: float = 0.3,
                           weighted: bool = False) -> Graph:
    """Random spanning tree plus independent extra edges; always connected."""
    if n == 1:
        raise GraphError("need at least two nodes")
    perm = rng.permutation(n)
    tree = [(perm[k], perm[rng.integers(0, k)]) for k in range(1, n)]
    present = {(min(a, b), max(a, b)) for a, b in tree}
    for a, b in zip(*np.triu_indices(n, k=1)):
        if (a, b) not in present and rng.random() < extra_edge_prob:
            present.add((a, b))
    edges = np.array(sorted(present))
    weights = rng.uniform(0.5, 2.0, len(edges)) if weighted else np.ones(len(edges))
    return Graph(n, edges, weights)
