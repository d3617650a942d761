"""Weighted majority-rule consensus of sampled dendrograms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class HierarchyNode:
    cluster: int  # leaf bitmask
    support: float
    children: list = field(default_factory=list)  # HierarchyNode or leaf id
    mean_prob: float = float("nan")


@dataclass
class Hierarchy:
    """Rooted n-ary tree of clusters, each backed by more than half the sample weight."""

    n: int
    root: HierarchyNode

    def nodes(self):
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            out.append(node)
            stack.extend(c for c in node.children if isinstance(c, HierarchyNode))
        return out

    def clusters(self):
        return {node.cluster: node.support for node in self.nodes()}

    def to_text(self, labels=None):
        """Nested form ``(a,b,(c,d)0.83)1`` with supports after each closing bracket."""
        lab = labels if labels is not None else [str(i) for i in range(self.n)]

        def render(node):
            parts = [render(c) if isinstance(c, HierarchyNode) else lab[c] for c in node.children]
            return "(" + ",".join(parts) + ")" + format(node.support, ".6g")

        return render(self.root) + ";\n"

    def render(self, labels=None):
        """Indented tree for terminal display."""
        lab = labels if labels is not None else [str(i) for i in range(self.n)]
        lines = []

        def walk(node, depth):
            size = bin(node.cluster).count("1")
            lines.append(f"{'  ' * depth}+ [{node.support:.3f}] {size} vertices")
            leaves = [lab[c] for c in node.children if not isinstance(c, HierarchyNode)]
            if leaves:
                lines.append(f"{'  ' * (depth + 1)}{' '.join(leaves)}")
            for c in node.children:
                if isinstance(c, HierarchyNode):
                    walk(c, depth + 1)

        walk(self.root, 0)
        return "\n".join(lines) + "\n"


def sample_weights(log_likelihoods, exponent=2.0):
    """Normalized weights proportional to ``L**exponent``, computed in log space."""
    ll = np.asarray(log_likelihoods, dtype=np.float64)
    w = np.exp(exponent * (ll - ll.max()))
    return w / w.sum()


def consensus_tree(samples, exponent=2.0, threshold=0.5):
    """Keep every cluster whose weight exceeds ``threshold`` and nest them into a tree.

    ``samples`` is a list of ``(dendrogram, log_likelihood)``. The all-leaves
    cluster is always the root.
    """
    if not samples:
        raise ValueError("need at least one sample")
    n = samples[0][0].n
    for d, _ in samples:
        if d.n != n:
            raise ValueError("samples disagree on the leaf set")
    weights = sample_weights([ll for _, ll in samples], exponent)
    support = {}
    prob_acc = {}
    for (d, _), w in zip(samples, weights):
        for node, mask in d.cluster_masks().items():
            support[mask] = support.get(mask, 0.0) + w
            prob_acc[mask] = prob_acc.get(mask, 0.0) + w * d.prob[node - d.n]
    full = (1 << n) - 1
    kept = {m: s for m, s in support.items() if s > threshold}
    kept[full] = 1.0
    nodes = {
        m: HierarchyNode(m, float(min(s, 1.0)), mean_prob=float(prob_acc.get(m, 0.0) / support.get(m, 1.0)))
        for m, s in kept.items()
    }
    # larger clusters first, so each cluster's parent is already placed
    order = sorted(kept, key=lambda m: (-bin(m).count("1"), m))
    placed = []
    for m in order[1:]:
        parent = min((p for p in placed + [full] if p & m == m and p != m),
                     key=lambda p: bin(p).count("1"))
        nodes[parent].children.append(nodes[m])
        placed.append(m)
    for v in range(n):
        bit = 1 << v
        parent = min((p for p in kept if p & bit), key=lambda p: bin(p).count("1"))
        nodes[parent].children.append(v)
    for node in nodes.values():
        node.children.sort(key=lambda c: _first_leaf(c))
    return Hierarchy(n, nodes[full])


def _first_leaf(c):
    if isinstance(c, HierarchyNode):
        m = c.cluster
        return (m & -m).bit_length() - 1
    return c


def is_laminar(clusters):
    cl = list(clusters)
    for a in range(len(cl)):
        for b in range(a + 1, len(cl)):
            x, y = cl[a], cl[b]
            inter = x & y
            if inter and inter != x and inter != y:
                return False
    return True
