"""Fit a planted two-level hierarchy, then read the structure back.

Run with ``python demos/fit_and_consensus.py``. Takes a few seconds.
"""

import numpy as np

from hrgraph.consensus import consensus_tree
from hrgraph.dendrogram import planted_dendrogram
from hrgraph.graph import graph_statistics
from hrgraph.mcmc import SamplerConfig, run_sampler
from hrgraph.resample import resample_graph, resample_report

# 32 vertices: dense blocks of 8 inside sparser blocks of 16
truth = planted_dendrogram(32, [0.02, 0.1, 0.8])
g = resample_graph(truth, seed=11)
print(f"graph: n={g.n} m={g.m}")

samples = run_sampler(g, SamplerConfig(num_samples=200, seed=11))
lls = np.array([s.log_likelihood for s in samples])
print(f"burn-in steps {samples.burnin_steps[0]} ({samples.burnin_reasons[0]})")
print(f"logL of samples: mean {lls.mean():.1f}, best {lls.max():.1f}")

h = consensus_tree(samples.samples)
print("\nconsensus hierarchy (support in brackets):")
print(h.render())

observed = graph_statistics(g)
rep = resample_report(samples.samples, seed=11)
print("statistic        observed   resampled")
for key in ("mean_degree", "clustering", "mean_distance"):
    print(f"{key:<16} {getattr(observed, key):8.3f}   {rep.mean[key]:.3f} +- {rep.stderr[key]:.3f}")
