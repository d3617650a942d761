"""Dendrograms and the hierarchical random graph likelihood.

A dendrogram over ``n`` vertices lives in a flat arena of ``2n - 1`` nodes:
ids ``0..n-1`` are the leaves (leaf ``v`` is graph vertex ``v``) and ids
``n..2n-2`` are internal nodes. Internal node ``r`` keeps the number of graph
edges ``E_r`` whose endpoints have ``r`` as lowest common ancestor, and the
connection probability ``p_r``. After :func:`compute_stats` the probability is
the maximum-likelihood value ``E_r / (L_r R_r)``.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .rng import make_rng

NO_NODE = -1
MAX_ENUMERATE = 7


class DendrogramFormatError(ValueError):
    def __init__(self, message, pos=None):
        where = f" at position {pos}" if pos is not None else ""
        super().__init__(message + where)
        self.pos = pos


class Dendrogram:
    """Rooted binary tree with labeled leaves and per-node connection probabilities."""

    def __init__(self, n, parent, left, right, root, prob=None, edge_counts=None):
        self.n = int(n)
        self.parent = np.asarray(parent, dtype=np.int64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.root = int(root)
        self.size = np.ones(2 * self.n - 1, dtype=np.int64)
        self._refresh_sizes()
        k = self.n - 1
        self.prob = np.zeros(k) if prob is None else np.asarray(prob, dtype=np.float64).copy()
        self.edge_counts = (
            np.full(k, -1, dtype=np.int64)
            if edge_counts is None
            else np.asarray(edge_counts, dtype=np.int64).copy()
        )

    # construction -----------------------------------------------------

    @classmethod
    def from_nested(cls, nested, n=None):
        """Build from nested 2-tuples of leaf ids, e.g. ``((0, 1), 2)``."""
        leaves = []
        pairs = []

        def walk(node):
            # iterative post-order to survive deep caterpillars
            stack = [(node, False)]
            out = []
            while stack:
                item, done = stack.pop()
                if isinstance(item, (tuple, list)):
                    if len(item) != 2:
                        raise ValueError("internal nodes must have exactly two children")
                    if done:
                        b = out.pop()
                        a = out.pop()
                        pairs.append((a, b))
                        out.append(("i", len(pairs) - 1))
                    else:
                        stack.append((item, True))
                        stack.append((item[1], False))
                        stack.append((item[0], False))
                else:
                    leaves.append(int(item))
                    out.append(("l", int(item)))
            return out[0]

        top = walk(nested)
        if n is None:
            n = len(leaves)
        if sorted(leaves) != list(range(n)):
            raise ValueError("leaf labels must be a permutation of 0..n-1")
        if n < 2:
            raise ValueError("a dendrogram needs at least two leaves")
        size = 2 * n - 1
        parent = np.full(size, NO_NODE, dtype=np.int64)
        left = np.full(size, NO_NODE, dtype=np.int64)
        right = np.full(size, NO_NODE, dtype=np.int64)

        def resolve(ref):
            kind, val = ref
            return val if kind == "l" else n + val

        for idx, (a, b) in enumerate(pairs):
            node = n + idx
            left[node], right[node] = resolve(a), resolve(b)
            parent[left[node]] = node
            parent[right[node]] = node
        return cls(n, parent, left, right, resolve(top))

    def copy(self):
        d = Dendrogram.__new__(Dendrogram)
        d.n = self.n
        d.parent = self.parent.copy()
        d.left = self.left.copy()
        d.right = self.right.copy()
        d.root = self.root
        d.size = self.size.copy()
        d.prob = self.prob.copy()
        d.edge_counts = self.edge_counts.copy()
        return d

    def _refresh_sizes(self):
        self.size[:] = 1
        for node in self.postorder():
            if node >= self.n:
                self.size[node] = self.size[self.left[node]] + self.size[self.right[node]]

    # traversal --------------------------------------------------------

    def internal_nodes(self):
        return range(self.n, 2 * self.n - 1)

    def is_leaf(self, node):
        return node < self.n

    def postorder(self, start=None):
        start = self.root if start is None else start
        out = []
        stack = [start]
        while stack:
            node = stack.pop()
            out.append(node)
            if node >= self.n:
                stack.append(self.left[node])
                stack.append(self.right[node])
        out.reverse()
        return out

    def leaves_under(self, node):
        """Leaf ids under ``node`` in left-to-right order."""
        out = []
        stack = [node]
        while stack:
            x = stack.pop()
            if x < self.n:
                out.append(int(x))
            else:
                stack.append(self.right[x])
                stack.append(self.left[x])
        return out

    def leaf_order(self):
        """Left-to-right leaf order plus each internal node's ``(start, split, stop)``.

        Leaves of internal node ``r`` occupy ``order[start:stop]``; its left
        subtree is ``order[start:split]``.
        """
        order = self.leaves_under(self.root)
        pos = np.empty(self.n, dtype=np.int64)
        pos[order] = np.arange(self.n)
        first = np.empty(2 * self.n - 1, dtype=np.int64)
        first[: self.n] = pos
        for node in self.postorder():
            if node >= self.n:
                first[node] = first[self.left[node]]
        spans = {}
        for r in self.internal_nodes():
            a = int(first[r])
            spans[r] = (a, a + int(self.size[self.left[r]]), a + int(self.size[r]))
        return np.asarray(order, dtype=np.int64), spans

    def depth(self, node):
        d = 0
        while self.parent[node] != NO_NODE:
            node = self.parent[node]
            d += 1
        return d

    def cluster_masks(self):
        """Leaf bitmask (Python int) for every internal node, keyed by node id."""
        masks = {}
        for node in self.postorder():
            if node >= self.n:
                masks[node] = _mask(masks, self.left[node]) | _mask(masks, self.right[node])
        return masks

    def topology_key(self):
        """Hashable key equal for dendrograms with the same unordered topology."""
        return frozenset(self.cluster_masks().values())

    def to_nested(self, with_prob=False):
        built = {}
        for node in self.postorder():
            if node < self.n:
                built[node] = int(node)
            else:
                pair = (built.pop(self.left[node]), built.pop(self.right[node]))
                if with_prob:
                    pair = (pair, float(self.prob[node - self.n]))
                built[node] = pair
        return built[self.root]

    @property
    def has_stats(self):
        return bool(np.all(self.edge_counts >= 0))

    def node_stats(self, r):
        """``(E_r, L_r, R_r, p_r)`` for internal node ``r``."""
        k = r - self.n
        return (
            int(self.edge_counts[k]),
            int(self.size[self.left[r]]),
            int(self.size[self.right[r]]),
            float(self.prob[k]),
        )

    def pair_counts(self):
        """``L_r * R_r`` for every internal node, in internal-index order."""
        idx = np.arange(self.n, 2 * self.n - 1)
        return self.size[self.left[idx]] * self.size[self.right[idx]]

    def validate(self):
        n = self.n
        if self.parent[self.root] != NO_NODE or self.root < n:
            raise ValueError("root must be an internal node without a parent")
        seen = set(self.postorder())
        if len(seen) != 2 * n - 1:
            raise ValueError("tree is not connected")
        for node in range(2 * n - 1):
            if node < n:
                if self.left[node] != NO_NODE or self.right[node] != NO_NODE:
                    raise ValueError(f"leaf {node} has children")
            else:
                for c in (self.left[node], self.right[node]):
                    if self.parent[c] != node:
                        raise ValueError(f"child {c} of {node} has wrong parent link")
        return True

    def __eq__(self, other):
        if not isinstance(other, Dendrogram):
            return NotImplemented
        return self.n == other.n and self._signature() == other._signature()

    def _signature(self):
        # post-order tokens determine an ordered binary tree; flat, so deep trees compare fine
        return [int(x) if x < self.n else -float(self.prob[x - self.n]) - 1.0 for x in self.postorder()]

    def __repr__(self):
        return f"Dendrogram(n={self.n})"


def _mask(masks, node):
    return masks[node] if node in masks else 1 << int(node)


def random_dendrogram(n, seed):
    """Join uniformly chosen pairs of roots from a forest of ``n`` singletons."""
    if n < 2:
        raise ValueError("a dendrogram needs at least two leaves")
    rng = make_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    size = 2 * n - 1
    parent = np.full(size, NO_NODE, dtype=np.int64)
    left = np.full(size, NO_NODE, dtype=np.int64)
    right = np.full(size, NO_NODE, dtype=np.int64)
    roots = list(range(n))
    for node in range(n, size):
        a, b = rng.choice(len(roots), size=2, replace=False)
        ra, rb = roots[a], roots[b]
        left[node], right[node] = ra, rb
        parent[ra] = parent[rb] = node
        for idx in sorted((a, b), reverse=True):
            roots[idx] = roots[-1]
            roots.pop()
        roots.append(node)
    return Dendrogram(n, parent, left, right, size - 1)


def lowest_common_ancestor(d, i, j):
    """Deepest internal node with both ``i`` and ``j`` beneath it."""
    if i == j:
        raise ValueError("lowest common ancestor needs two distinct vertices")
    if not (0 <= i < d.n and 0 <= j < d.n):
        raise ValueError("vertex outside the dendrogram's leaf set")
    di, dj = d.depth(i), d.depth(j)
    parent = d.parent
    while di > dj:
        i = parent[i]
        di -= 1
    while dj > di:
        j = parent[j]
        dj -= 1
    while i != j:
        i = parent[i]
        j = parent[j]
    return int(i)


def compute_stats(d, g):
    """Fill ``E_r`` and ``p_r = E_r / (L_r R_r)`` for every internal node of ``d``."""
    if d.n != g.n:
        raise ValueError(f"dendrogram has {d.n} leaves but graph has {g.n} vertices")
    counts = np.zeros(d.n - 1, dtype=np.int64)
    for i, j in g.edges:
        counts[lowest_common_ancestor(d, i, j) - d.n] += 1
    d.edge_counts = counts
    d.prob = counts / d.pair_counts()
    return d


def entropy(p):
    """Binary entropy in nats with ``h(0) = h(1) = 0``."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    mid = (p > 0) & (p < 1)
    q = p[mid]
    out[mid] = -q * np.log(q) - (1 - q) * np.log1p(-q)
    return out


def log_likelihood(d):
    """Profile log-likelihood ``-sum_r L_r R_r h(p_r)`` at ``p_r = E_r/(L_r R_r)``."""
    if not d.has_stats:
        raise ValueError("dendrogram statistics have not been computed")
    lr = d.pair_counts()
    return float(-np.sum(lr * entropy(d.edge_counts / lr))) + 0.0  # no negative zero


def likelihood_product(d, prob=None):
    """``prod_r p_r**E_r (1 - p_r)**(L_r R_r - E_r)`` evaluated directly in linear space.

    With ``prob=None`` the stored maximum-likelihood probabilities are used.
    Only meaningful for small graphs where the product does not underflow.
    """
    p = d.prob if prob is None else np.asarray(prob, dtype=np.float64)
    lr = d.pair_counts()
    out = 1.0
    for pr, e, tot in zip(p.tolist(), d.edge_counts.tolist(), lr.tolist()):
        # Python's 0.0 ** 0 == 1.0 matches the 0^0 = 1 convention
        out *= pr**e * (1.0 - pr) ** (tot - e)
    return out


def connection_probability(d, i, j):
    return float(d.prob[lowest_common_ancestor(d, i, j) - d.n])


def connection_matrix(d):
    """Dense ``n x n`` matrix of ``p_ij`` (zero diagonal)."""
    order, spans = d.leaf_order()
    P = np.zeros((d.n, d.n))
    for r, (a, c, b) in spans.items():
        p = d.prob[r - d.n]
        P[a:c, c:b] = p
        P[c:b, a:c] = p
    out = np.empty_like(P)
    out[np.ix_(order, order)] = P
    return out


def lca_matrix(d):
    """Dense ``n x n`` matrix of LCA node ids (``-1`` on the diagonal)."""
    order, spans = d.leaf_order()
    M = np.full((d.n, d.n), NO_NODE, dtype=np.int64)
    for r, (a, c, b) in spans.items():
        M[a:c, c:b] = r
        M[c:b, a:c] = r
    out = np.empty_like(M)
    out[np.ix_(order, order)] = M
    return out


# text formats -------------------------------------------------------------

_HEADER = re.compile(r"#HRG\s+n=(\d+)\s+logL=(\S+)\s*$")


def _fmt(p):
    return format(float(p), ".17g")


def serialize(d, log_l=None):
    """Two-line text form: a header with ``n`` and log-likelihood, then the tree.

    Internal nodes are written ``(left,right):p`` and the whole tree is wrapped
    in one extra pair of parentheses, so ``n = 2`` gives ``((0,1):1)``.
    """
    if log_l is None:
        log_l = log_likelihood(d) if d.has_stats else float("nan")
    parts = {}
    for node in d.postorder():
        if node < d.n:
            parts[node] = str(int(node))
        else:
            p = _fmt(d.prob[node - d.n])
            parts[node] = f"({parts.pop(d.left[node])},{parts.pop(d.right[node])}):{p}"
    return f"#HRG n={d.n} logL={_fmt(log_l)}\n({parts[d.root]})\n"


def deserialize(text):
    """Inverse of :func:`serialize`. Returns ``(dendrogram, log_likelihood)``.

    Edge counts are restored as ``round(p * L * R)`` when every probability is
    consistent with an integer count, so fitted trees come back with stats.
    """
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) != 2:
        raise DendrogramFormatError("expected a header line and a tree line")
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise DendrogramFormatError("malformed header", 0)
    n = int(m.group(1))
    log_l = float(m.group(2))
    body = lines[1].strip()
    if len(body) < 2 or body[0] != "(" or body[-1] != ")":
        raise DendrogramFormatError("tree must be wrapped in parentheses", 0)
    nested, probs = _parse_tree(body, 1, len(body) - 1)
    leaves = _count_leaves(nested)
    if leaves != n:
        raise DendrogramFormatError(f"header declares n={n} but tree has {leaves} leaves")
    d = Dendrogram.from_nested(nested, n=n)
    # from_nested numbers internals in post-order, which is the order probs were read
    d.prob = np.asarray(probs, dtype=np.float64)
    lr = d.pair_counts()
    est = np.rint(d.prob * lr)
    if np.all(np.abs(d.prob * lr - est) < 1e-6):
        d.edge_counts = est.astype(np.int64)
    return d, log_l


def _count_leaves(nested):
    total = 0
    stack = [nested]
    while stack:
        x = stack.pop()
        if isinstance(x, tuple):
            stack.extend(x)
        else:
            total += 1
    return total


_NUM = re.compile(r"[-+0-9.eEinfaINFA]+")


def _parse_tree(s, pos, end):
    """Iterative parser for ``(a,b):p`` trees; probabilities returned in post-order."""
    stack = []
    probs = []
    result = None
    i = pos
    while i < end:
        ch = s[i]
        if ch == "(":
            stack.append([])
            i += 1
        elif ch == ",":
            i += 1
        elif ch == ")":
            if not stack or len(stack[-1]) != 2:
                raise DendrogramFormatError("internal node without exactly two children", i)
            if i + 1 >= end or s[i + 1] != ":":
                raise DendrogramFormatError("missing ':' probability annotation", i + 1)
            mm = _NUM.match(s, i + 2)
            if not mm:
                raise DendrogramFormatError("missing probability value", i + 2)
            try:
                probs.append(float(mm.group(0)))
            except ValueError:
                raise DendrogramFormatError("bad probability value", i + 2) from None
            kids = stack.pop()
            node = (kids[0], kids[1])
            i = mm.end()
            if stack:
                stack[-1].append(node)
            else:
                result = node
                if i != end:
                    raise DendrogramFormatError("trailing characters after tree", i)
        elif ch.isdigit():
            j = i
            while j < end and s[j].isdigit():
                j += 1
            if not stack:
                raise DendrogramFormatError("leaf outside any internal node", i)
            stack[-1].append(int(s[i:j]))
            i = j
        else:
            raise DendrogramFormatError(f"unexpected character {ch!r}", i)
    if result is None or stack:
        raise DendrogramFormatError("unbalanced parentheses", end)
    return result, probs


def to_table(d):
    """Rows ``(id, left, right, p)`` for each internal node, ids ``0..n-2``.

    Children that are internal nodes are written as their internal id; leaves
    as ``"v<label>"``.
    """

    def name(c):
        return f"v{int(c)}" if c < d.n else str(int(c - d.n))

    return [
        (int(r - d.n), name(d.left[r]), name(d.right[r]), float(d.prob[r - d.n]))
        for r in d.internal_nodes()
    ]


# oracle -----------------------------------------------------------------


def double_factorial(k):
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def enumerate_dendrograms(n):
    """Every labeled rooted binary tree on ``n`` leaves; there are ``(2n-3)!!``.

    Trees are grown by grafting leaf ``k`` onto every edge (and above the
    root) of each tree on leaves ``0..k-1``.
    """
    if n < 2:
        raise ValueError("need at least two leaves")
    if n > MAX_ENUMERATE:
        raise ValueError(f"enumeration limited to n <= {MAX_ENUMERATE}")
    trees = [(0, 1)]
    for k in range(2, n):
        grown = []
        for t in trees:
            grown.extend(_graft(t, k))
        trees = grown
    return [Dendrogram.from_nested(t, n=n) for t in trees]


def _graft(tree, leaf):
    out = [(tree, leaf)]
    if isinstance(tree, tuple):
        a, b = tree
        out.extend((x, b) for x in _graft(a, leaf))
        out.extend((a, y) for y in _graft(b, leaf))
    return out


# planted models ---------------------------------------------------------


def balanced_dendrogram(n):
    """Dendrogram that halves the vertex range ``0..n-1`` recursively."""
    if n < 2:
        raise ValueError("a dendrogram needs at least two leaves")

    def build(lo, hi):
        if hi - lo == 1:
            return lo
        mid = (lo + hi + 1) // 2
        return (build(lo, mid), build(mid, hi))

    return Dendrogram.from_nested(build(0, n), n=n)


def set_level_probabilities(d, level_probs):
    """Give each internal node the probability for its depth (root is depth 0).

    Nodes deeper than ``len(level_probs) - 1`` use the last entry. Edge counts
    are cleared because the probabilities are no longer fitted values.
    """
    probs = list(level_probs)
    for r in d.internal_nodes():
        d.prob[r - d.n] = probs[min(d.depth(r), len(probs) - 1)]
    d.edge_counts[:] = -1
    return d


def planted_dendrogram(n, level_probs):
    """Balanced hierarchy with per-level connection probabilities."""
    return set_level_probabilities(balanced_dendrogram(n), level_probs)
