"""Simple undirected graphs: parsing, statistics, edge removal and random generators."""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path


class EdgeListError(ValueError):
    """Raised for unparseable edge-list input; carries the offending line number."""

    def __init__(self, message, lineno):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class Graph:
    """Immutable simple undirected graph on vertices ``0..n-1``.

    Edges are stored as ``(i, j)`` tuples with ``i < j``. ``labels`` maps vertex
    ids back to the strings they were read from (defaults to ``str(id)``).
    """

    __slots__ = ("_n", "_edges", "_adj", "_labels", "_edge_array", "_csr")

    def __init__(self, n, edges=(), labels=None):
        n = int(n)
        if n < 0:
            raise ValueError("vertex count must be non-negative")
        canon = set()
        adj = [set() for _ in range(n)]
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop on vertex {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge ({a}, {b}) has an endpoint outside [0, {n})")
            if a > b:
                a, b = b, a
            canon.add((a, b))
            adj[a].add(b)
            adj[b].add(a)
        if labels is None:
            labels = [str(i) for i in range(n)]
        elif len(labels) != n:
            raise ValueError("labels must have one entry per vertex")
        self._n = n
        self._edges = frozenset(canon)
        self._adj = tuple(frozenset(s) for s in adj)
        self._labels = tuple(str(x) for x in labels)
        self._edge_array = None
        self._csr = None

    @property
    def n(self):
        return self._n

    @property
    def m(self):
        return len(self._edges)

    @property
    def edges(self):
        return self._edges

    @property
    def labels(self):
        return self._labels

    def neighbors(self, v):
        return self._adj[v]

    def degree(self, v):
        return len(self._adj[v])

    def degrees(self):
        return np.array([len(a) for a in self._adj], dtype=np.int64)

    def has_edge(self, i, j):
        return j in self._adj[i]

    def edge_array(self):
        """Sorted ``(m, 2)`` int64 array of edges with ``i < j`` per row."""
        if self._edge_array is None:
            arr = np.array(sorted(self._edges), dtype=np.int64).reshape(-1, 2)
            self._edge_array = arr
        return self._edge_array

    def csr(self):
        """Adjacency in CSR form as ``(indptr, indices)`` int64 arrays."""
        if self._csr is None:
            indptr = np.zeros(self._n + 1, dtype=np.int64)
            indptr[1:] = np.cumsum(self.degrees())
            indices = np.empty(indptr[-1], dtype=np.int64)
            for v, nb in enumerate(self._adj):
                indices[indptr[v]:indptr[v + 1]] = sorted(nb)
            self._csr = (indptr, indices)
        return self._csr

    def adjacency_matrix(self, dtype=np.int64):
        A = np.zeros((self._n, self._n), dtype=dtype)
        e = self.edge_array()
        A[e[:, 0], e[:, 1]] = 1
        A[e[:, 1], e[:, 0]] = 1
        return A

    def sparse_adjacency(self):
        indptr, indices = self.csr()
        data = np.ones(len(indices), dtype=np.float64)
        return csr_matrix((data, indices, indptr), shape=(self._n, self._n))

    def with_edges(self, edges):
        """A graph on the same vertices and labels with a different edge set."""
        return Graph(self._n, edges, self._labels)

    def relabeled(self, perm):
        """Graph with vertex ``v`` renamed ``perm[v]``; labels travel with vertices."""
        perm = [int(p) for p in perm]
        labels = [None] * self._n
        for v, p in enumerate(perm):
            labels[p] = self._labels[v]
        return Graph(self._n, ((perm[a], perm[b]) for a, b in self._edges), labels)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self._n, self._edges, self._labels) == (other._n, other._edges, other._labels)

    def __hash__(self):
        return hash((self._n, self._edges))

    def __repr__(self):
        return f"Graph(n={self._n}, m={self.m})"


def parse_edge_list(text, symmetrize_warn=False):
    """Parse a whitespace-separated edge list.

    Vertex labels are arbitrary tokens numbered in order of first appearance.
    ``#`` starts a comment. Duplicate edges (in either orientation) collapse to
    one, so directed inputs are symmetrized.
    """
    index = {}
    labels = []
    edges = []
    seen = set()
    directed_dupes = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListError(f"expected two vertex labels, got {len(parts)}", lineno)
        a, b = parts
        if a == b:
            raise EdgeListError(f"self-loop on vertex {a!r}", lineno)
        ids = []
        for lab in (a, b):
            if lab not in index:
                index[lab] = len(labels)
                labels.append(lab)
            ids.append(index[lab])
        key = (min(ids), max(ids))
        if key in seen:
            directed_dupes += 1
            continue
        seen.add(key)
        edges.append(key)
    if symmetrize_warn and directed_dupes:
        warnings.warn(f"{directed_dupes} repeated or reversed edges collapsed", stacklevel=2)
    return Graph(len(labels), edges, labels)


def read_edge_list(path):
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh.read())


def serialize_edge_list(g):
    """Write ``g`` back as edge-list text using its vertex labels.

    Isolated vertices cannot be represented and are dropped, which is the
    only way ``parse_edge_list(serialize_edge_list(g))`` can differ from ``g``.
    """
    lab = g.labels
    lines = [f"{lab[i]} {lab[j]}" for i, j in sorted(g.edges)]
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass
class GraphStatistics:
    mean_degree: float
    clustering: float
    mean_distance: float
    degree_histogram: list = field(default_factory=list)
    distance_histogram: list = field(default_factory=list)
    transitivity: float = 0.0
    connected_pairs: int = 0
    disconnected_pairs: int = 0
    distance_defined: bool = True

    def to_dict(self):
        return {
            "mean_degree": self.mean_degree,
            "clustering": self.clustering,
            "transitivity": self.transitivity,
            "mean_distance": self.mean_distance,
            "distance_defined": self.distance_defined,
            "connected_pairs": self.connected_pairs,
            "disconnected_pairs": self.disconnected_pairs,
            "degree_histogram": list(self.degree_histogram),
            "distance_histogram": list(self.distance_histogram),
        }


def triangle_counts(g):
    """Number of triangles through each vertex."""
    tri = np.zeros(g.n, dtype=np.int64)
    for v in range(g.n):
        nb = g.neighbors(v)
        t = 0
        for u in nb:
            t += len(nb & g.neighbors(u))
        tri[v] = t // 2
    return tri


def local_clustering(g):
    deg = g.degrees()
    tri = triangle_counts(g)
    possible = deg * (deg - 1) / 2.0
    out = np.zeros(g.n)
    mask = deg >= 2
    out[mask] = tri[mask] / possible[mask]
    return out


def distance_matrix(g):
    """Hop distances between all pairs; ``inf`` for disconnected pairs."""
    if g.n == 0:
        return np.zeros((0, 0))
    return shortest_path(g.sparse_adjacency(), method="D", directed=False, unweighted=True)


def graph_statistics(g):
    """Mean degree, clustering, mean geodesic distance and their histograms.

    ``clustering`` is the mean local coefficient (zero for vertices of degree
    below two); ``transitivity`` is the global triangle ratio. Distances are
    averaged over connected pairs only.
    """
    n = g.n
    if n < 1:
        raise ValueError("graph_statistics needs at least one vertex")
    deg = g.degrees()
    mean_degree = 2.0 * g.m / n
    tri = triangle_counts(g)
    clustering = float(local_clustering(g).mean())
    triples = int((deg * (deg - 1) // 2).sum())
    transitivity = float(tri.sum() / triples) if triples else 0.0

    dist = distance_matrix(g)
    iu = np.triu_indices(n, k=1)
    pair_d = dist[iu]
    finite = np.isfinite(pair_d)
    connected = int(finite.sum())
    disconnected = int(len(pair_d) - connected)
    if connected:
        d_int = pair_d[finite].astype(np.int64)
        mean_distance = float(d_int.mean())
        dist_hist = np.bincount(d_int).tolist()
    else:
        mean_distance = 0.0
        dist_hist = []
    return GraphStatistics(
        mean_degree=float(mean_degree),
        clustering=clustering,
        mean_distance=mean_distance,
        degree_histogram=np.bincount(deg).tolist() if n else [],
        distance_histogram=dist_hist,
        transitivity=transitivity,
        connected_pairs=connected,
        disconnected_pairs=disconnected,
        distance_defined=connected > 0,
    )


def bfs_distances(g, source):
    """Hop distance from ``source`` to every vertex (-1 when unreachable)."""
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for u in g.neighbors(v):
            if dist[u] < 0:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def remove_random_edges(g, fraction, seed):
    """Hide ``round(fraction * m)`` edges chosen uniformly without replacement.

    Returns ``(observed, removed)`` where ``removed`` is a set of ``(i, j)``
    pairs with ``i < j``. Vertices are never dropped.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    edges = g.edge_array()
    k = int(round(fraction * g.m))
    idx = rng.choice(g.m, size=k, replace=False) if k else np.empty(0, dtype=np.int64)
    removed = {(int(a), int(b)) for a, b in edges[idx]}
    observed = g.with_edges(g.edges - removed)
    return observed, removed


def generate_er_graph(n, p, seed):
    """G(n, p): every pair joined independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return Graph(n, zip(iu[keep].tolist(), ju[keep].tolist()))


def generate_configuration_model(degree_sequence, seed):
    """Uniform stub matching, projected to a simple graph.

    Self-loops and repeated edges produced by the matching are discarded, so
    realized degrees can fall short of the request for hubs.
    """
    deg = np.asarray(degree_sequence, dtype=np.int64)
    if np.any(deg < 0):
        raise ValueError("degrees must be non-negative")
    if int(deg.sum()) % 2:
        raise ValueError("degree sum must be even")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(len(deg)), deg)
    rng.shuffle(stubs)
    pairs = stubs.reshape(-1, 2)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    return Graph(len(deg), map(tuple, pairs.tolist()))


def power_law_degree_sequence(n, alpha, seed, k_min=1, k_max=None):
    """Draw ``n`` degrees from a discrete power law ``P(k) ~ k**-alpha``.

    The support is ``[k_min, k_max]`` (``k_max`` defaults to ``n - 1``). One
    degree is bumped by one if needed so the total is even.
    """
    if k_max is None:
        k_max = n - 1
    rng = np.random.default_rng(seed)
    ks = np.arange(k_min, k_max + 1)
    pmf = ks.astype(float) ** -alpha
    pmf /= pmf.sum()
    deg = rng.choice(ks, size=n, p=pmf)
    if deg.sum() % 2:
        i = int(rng.integers(n))
        deg[i] += 1 if deg[i] < k_max else -1
    return deg
