"""Compiled inner loops for the dendrogram Markov chain.

Tree arrays follow the arena layout of :mod:`hrgraph.dendrogram`; edge counts
and probabilities are indexed by ``node - n``. A move at non-root internal
node ``r`` with children ``s, t`` and sibling ``u`` swaps ``t`` (variant 1) or
``s`` (variant 2) with ``u``; both variants are involutions.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def pair_term(e, lr):
    """``-lr * h(e / lr)``; zero when the block is empty or full."""
    if e == 0 or e == lr:
        return 0.0
    p = e / lr
    return e * math.log(p) + (lr - e) * math.log1p(-p)


@njit(cache=True)
def count_between(x, y, left, right, size, parent, indptr, indices, n, stack):
    """Number of graph edges with one end under ``x`` and the other under ``y``.

    Leaves under ``x`` are enumerated; a neighbour ``w`` lies under ``y`` iff
    the first ancestor-or-self of ``w`` with at least ``size[y]`` leaves is ``y``
    (leaf counts strictly grow towards the root).
    """
    target = size[y]
    total = 0
    top = 0
    stack[0] = x
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if node >= n:
            stack[top] = left[node]
            stack[top + 1] = right[node]
            top += 2
            continue
        for k in range(indptr[node], indptr[node + 1]):
            w = indices[k]
            while size[w] < target:
                w = parent[w]
            if w == y:
                total += 1
    return total


@njit(cache=True)
def move_delta(r, variant, left, right, size, parent, edge_counts, indptr, indices, n, stack):
    """Return ``(delta_logL, new_E_r, new_E_parent)`` for the proposed move."""
    p = parent[r]
    s = left[r]
    t = right[r]
    u = right[p] if left[p] == r else left[p]
    ns, nt, nu = size[s], size[t], size[u]
    e_st = edge_counts[r - n]
    e_p = edge_counts[p - n]
    # count whichever of E(s,u), E(t,u) is cheaper; the other follows from e_p
    if min(ns, nu) <= min(nt, nu):
        if ns <= nu:
            e_su = count_between(s, u, left, right, size, parent, indptr, indices, n, stack)
        else:
            e_su = count_between(u, s, left, right, size, parent, indptr, indices, n, stack)
        e_tu = e_p - e_su
    else:
        if nt <= nu:
            e_tu = count_between(t, u, left, right, size, parent, indptr, indices, n, stack)
        else:
            e_tu = count_between(u, t, left, right, size, parent, indptr, indices, n, stack)
        e_su = e_p - e_tu
    old = pair_term(e_st, ns * nt) + pair_term(e_p, (ns + nt) * nu)
    if variant == 1:
        new_r = e_su
        new_p = e_st + e_tu
        new = pair_term(new_r, ns * nu) + pair_term(new_p, (ns + nu) * nt)
    else:
        new_r = e_tu
        new_p = e_st + e_su
        new = pair_term(new_r, nu * nt) + pair_term(new_p, (nu + nt) * ns)
    return new - old, new_r, new_p


@njit(cache=True)
def apply_move(r, variant, new_r, new_p, left, right, size, parent, edge_counts, prob, n):
    p = parent[r]
    r_is_left = left[p] == r
    u = right[p] if r_is_left else left[p]
    if variant == 1:
        moved = right[r]
        right[r] = u
    else:
        moved = left[r]
        left[r] = u
    parent[u] = r
    if r_is_left:
        right[p] = moved
    else:
        left[p] = moved
    parent[moved] = p
    size[r] = size[left[r]] + size[right[r]]
    edge_counts[r - n] = new_r
    edge_counts[p - n] = new_p
    prob[r - n] = new_r / (size[left[r]] * size[right[r]])
    prob[p - n] = new_p / (size[left[p]] * size[right[p]])


@njit(cache=True)
def total_log_likelihood(left, right, size, edge_counts, n):
    total = 0.0
    for r in range(n, 2 * n - 1):
        total += pair_term(edge_counts[r - n], size[left[r]] * size[right[r]])
    return total


@njit(cache=True)
def topology_code(left, right, root, n, masks):
    """OR of ``1 << cluster_mask`` over non-root internal nodes (``n <= 6``)."""
    # children always have smaller post-order position, so fill masks recursively
    code = 0
    for r in range(n, 2 * n - 1):
        masks[r] = -1
    for v in range(n):
        masks[v] = 1 << v
    remaining = n - 1
    while remaining > 0:
        for r in range(n, 2 * n - 1):
            if masks[r] < 0 and masks[left[r]] >= 0 and masks[right[r]] >= 0:
                masks[r] = masks[left[r]] | masks[right[r]]
                remaining -= 1
                if r != root:
                    code |= 1 << masks[r]
    return code


@njit(cache=True, nogil=True)
def run_chain(
    nodes, variants, uniforms, log_l,
    left, right, size, parent, edge_counts, prob, root,
    indptr, indices, n,
    trace_every, trace, resync_every, step0, codes, record_codes,
):
    """Run ``len(nodes)`` Metropolis steps with pre-drawn randomness.

    ``trace[k]`` receives the log-likelihood after each ``trace_every`` steps;
    ``codes[k]`` the topology code after every step when ``record_codes``.
    Returns ``(log_l, accepted)``.
    """
    stack = np.empty(2 * n + 2, dtype=np.int64)
    masks = np.empty(2 * n - 1, dtype=np.int64)
    accepted = 0
    nsteps = nodes.shape[0]
    k = 0
    for i in range(nsteps):
        r = nodes[i]
        v = variants[i]
        delta, new_r, new_p = move_delta(
            r, v, left, right, size, parent, edge_counts, indptr, indices, n, stack
        )
        if delta >= 0.0 or uniforms[i] < math.exp(delta):
            apply_move(r, v, new_r, new_p, left, right, size, parent, edge_counts, prob, n)
            log_l += delta
            accepted += 1
        if resync_every > 0 and (step0 + i + 1) % resync_every == 0:
            log_l = total_log_likelihood(left, right, size, edge_counts, n)
        if trace_every > 0 and (i + 1) % trace_every == 0:
            trace[k] = log_l
            k += 1
        if record_codes:
            codes[i] = topology_code(left, right, root, n, masks)
    return log_l, accepted
