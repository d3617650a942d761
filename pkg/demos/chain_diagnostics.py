"""Watch the sampler on a four-vertex path, where every tree can be listed.

Compares visit frequencies with the exact target weights. Thinning leaves
the frequencies alone; it only makes the kept states close to independent,
which a chi-square test on the counts needs.
"""

from collections import Counter

import numpy as np

from hrgraph.dendrogram import compute_stats, enumerate_dendrograms, log_likelihood
from hrgraph.graph import Graph
from hrgraph.mcmc import ChainState, topology_code

path = Graph(4, [(0, 1), (1, 2), (2, 3)])
trees = enumerate_dendrograms(4)
ll = np.array([log_likelihood(compute_stats(t, path)) for t in trees])
target = np.exp(ll - ll.max())
target /= target.sum()
codes = [topology_code(t) for t in trees]

state = ChainState(path, seed=0)
_, visits = state.run(500_000, record_topology=True)
print(f"acceptance rate {state.accepted / state.step_count:.3f}")

for thin in (1, 10, 50):
    kept = visits[thin - 1 :: thin]
    freq = Counter(kept.tolist())
    got = np.array([freq.get(c, 0) for c in codes]) / len(kept)
    print(f"thin {thin:>3}: {len(kept):>7} states, max |freq - target| = {np.abs(got - target).max():.4f}")

# lag-1 autocorrelation of the log-likelihood along the chain
lookup = dict(zip(codes, ll))
series = np.array([lookup[c] for c in visits[:100_000].tolist()])
x = series - series.mean()
print(f"lag-1 autocorrelation of logL: {np.dot(x[:-1], x[1:]) / np.dot(x, x):.3f}")
