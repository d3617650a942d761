"""Scoring unobserved vertex pairs as candidate missing links."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dendrogram import connection_matrix
from .graph import bfs_distances, distance_matrix
from .rng import make_rng

BASELINES = ("common_neighbors", "jaccard", "degree_product", "shortest_path")
METHODS = ("hrg",) + BASELINES


class ScoredPair(NamedTuple):
    i: int
    j: int
    score: float


@dataclass
class PairScores:
    """Scores for a set of vertex pairs, stored column-wise (``i < j`` per row)."""

    i: np.ndarray
    j: np.ndarray
    score: np.ndarray
    method: str = ""

    def __len__(self):
        return len(self.score)

    def __iter__(self):
        for a, b, s in zip(self.i.tolist(), self.j.tolist(), self.score.tolist()):
            yield ScoredPair(a, b, s)

    def __getitem__(self, k):
        return ScoredPair(int(self.i[k]), int(self.j[k]), float(self.score[k]))

    def take(self, idx):
        return PairScores(self.i[idx], self.j[idx], self.score[idx], self.method)

    def as_dict(self):
        return {(a, b): s for a, b, s in self}


def candidate_pairs(g):
    """All non-adjacent pairs ``(i, j)``, ``i < j``, in row-major order."""
    A = g.adjacency_matrix(dtype=bool)
    iu, ju = np.triu_indices(g.n, k=1)
    keep = ~A[iu, ju]
    return iu[keep], ju[keep]


def _from_matrix(g, M, method):
    i, j = candidate_pairs(g)
    return PairScores(i, j, np.asarray(M[i, j], dtype=np.float64), method)


def hrg_scores(g, samples):
    """Mean connection probability over sampled dendrograms for every non-edge."""
    dendros = [s[0] if isinstance(s, tuple) else s for s in samples]
    if not dendros:
        raise ValueError("need at least one sampled dendrogram")
    acc = np.zeros((g.n, g.n))
    for d in dendros:
        if d.n != g.n:
            raise ValueError("sample does not match the graph's vertex count")
        acc += connection_matrix(d)
    acc /= len(dendros)
    return _from_matrix(g, acc, "hrg")


def common_neighbors_score(g, i, j):
    return len(g.neighbors(i) & g.neighbors(j))


def jaccard_score(g, i, j):
    union = g.neighbors(i) | g.neighbors(j)
    if not union:
        return 0.0
    return len(g.neighbors(i) & g.neighbors(j)) / len(union)


def degree_product_score(g, i, j):
    return g.degree(i) * g.degree(j)


def shortest_path_score(g, i, j):
    d = bfs_distances(g, i)[j]
    return 1.0 / d if d > 0 else 0.0


def baseline_matrix(g, method):
    """Dense ``n x n`` score matrix for one of the heuristic baselines."""
    A = g.adjacency_matrix(dtype=np.float64)
    if method == "common_neighbors":
        return A @ A
    deg = A.sum(axis=1)
    if method == "degree_product":
        return np.outer(deg, deg)
    if method == "jaccard":
        cn = A @ A
        union = deg[:, None] + deg[None, :] - cn
        out = np.zeros_like(cn)
        np.divide(cn, union, out=out, where=union > 0)
        return out
    if method == "shortest_path":
        D = distance_matrix(g)
        with np.errstate(divide="ignore"):
            out = 1.0 / D
        out[~np.isfinite(D)] = 0.0
        np.fill_diagonal(out, 0.0)
        return out
    raise ValueError(f"unknown baseline {method!r}")


def baseline_scores(g, method):
    return _from_matrix(g, baseline_matrix(g, method), method)


def score_pairs(g, method, samples=None):
    if method == "hrg":
        if samples is None:
            raise ValueError("the hrg method needs sampled dendrograms")
        return hrg_scores(g, samples)
    return baseline_scores(g, method)


def rank_pairs(scores, seed, top_k=None):
    """Sort by decreasing score; ties are broken by a seeded random permutation."""
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, "rank")
    perm = rng.permutation(len(scores))
    order = perm[np.argsort(-scores.score[perm], kind="stable")]
    if top_k is not None:
        order = order[:top_k]
    return scores.take(order)
