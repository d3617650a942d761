"""Drawing synthetic graphs from fitted hierarchical random graphs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, graph_statistics
from .rng import make_rng


def resample_graph(d, seed):
    """Join every vertex pair independently with probability ``p_r`` of its LCA.

    Works block by block: internal node ``r`` contributes an ``L_r x R_r``
    Bernoulli block between its two leaf ranges.
    """
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    order, spans = d.leaf_order()
    rows = []
    cols = []
    for r in sorted(spans):
        a, c, b = spans[r]
        p = d.prob[r - d.n]
        hit = rng.random((c - a, b - c)) < p
        ii, jj = np.nonzero(hit)
        rows.append(order[a + ii])
        cols.append(order[c + jj])
    if rows:
        i = np.concatenate(rows)
        j = np.concatenate(cols)
    else:
        i = j = np.empty(0, dtype=np.int64)
    return Graph(d.n, zip(i.tolist(), j.tolist()))


def expected_edge_count(d):
    return float(np.sum(d.pair_counts() * d.prob))


def edge_count_variance(d):
    return float(np.sum(d.pair_counts() * d.prob * (1.0 - d.prob)))


def expected_degrees(d):
    """Expected degree of every vertex: sum over its ancestors of opposite-side size times ``p_r``."""
    out = np.zeros(d.n)
    for v in range(d.n):
        node = v
        while d.parent[node] != -1:
            r = d.parent[node]
            other = d.right[r] if d.left[r] == node else d.left[r]
            out[v] += d.size[other] * d.prob[r - d.n]
            node = r
    return out


@dataclass
class ResampleReport:
    statistics: list
    mean: dict
    stderr: dict
    degree_histogram: list = field(default_factory=list)
    distance_histogram: list = field(default_factory=list)
    disconnected_fraction: float = 0.0

    def to_dict(self):
        return {
            "num_graphs": len(self.statistics),
            "mean": self.mean,
            "stderr": self.stderr,
            "degree_histogram": self.degree_histogram,
            "distance_histogram": self.distance_histogram,
            "disconnected_fraction": self.disconnected_fraction,
            "per_graph": [s.to_dict() for s in self.statistics],
        }


def _pool(hists):
    """Average normalized histograms with equal weight per graph."""
    width = max((len(h) for h in hists), default=0)
    acc = np.zeros(width)
    used = 0
    for h in hists:
        h = np.asarray(h, dtype=np.float64)
        if h.sum() == 0:
            continue
        acc[: len(h)] += h / h.sum()
        used += 1
    return (acc / used).tolist() if used else []


def resample_report(samples, seed, resamples_per_dendrogram=1):
    """Statistics of graphs resampled from each dendrogram, with standard errors.

    ``samples`` may hold bare dendrograms or ``(dendrogram, logL)`` pairs.
    Graph ``k`` of dendrogram ``s`` uses the stream ``(seed, "resample", s, k)``.
    """
    dendros = [s[0] if isinstance(s, tuple) else s for s in samples]
    if not dendros:
        raise ValueError("need at least one sampled dendrogram")
    stats = []
    for si, d in enumerate(dendros):
        for k in range(resamples_per_dendrogram):
            g = resample_graph(d, make_rng(seed, "resample", si, k))
            stats.append(graph_statistics(g))
    keys = ("mean_degree", "clustering", "transitivity", "mean_distance")
    mean = {}
    stderr = {}
    for key in keys:
        vals = np.array([getattr(s, key) for s in stats])
        if key == "mean_distance":
            vals = np.array([s.mean_distance for s in stats if s.distance_defined])
        mean[key] = float(vals.mean()) if len(vals) else 0.0
        stderr[key] = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
    total_pairs = sum(s.connected_pairs + s.disconnected_pairs for s in stats)
    disc = sum(s.disconnected_pairs for s in stats)
    return ResampleReport(
        statistics=stats,
        mean=mean,
        stderr=stderr,
        degree_histogram=_pool([s.degree_histogram for s in stats]),
        distance_histogram=_pool([s.distance_histogram for s in stats]),
        disconnected_fraction=disc / total_pairs if total_pairs else 0.0,
    )
