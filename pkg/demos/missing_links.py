"""Hide a fifth of the edges of a planted graph and try to recover them.

Every method ranks the unobserved pairs; AUC is the chance that a hidden
edge outranks a true non-edge. Run with ``python demos/missing_links.py``.
"""

from hrgraph.dendrogram import planted_dendrogram
from hrgraph.evaluation import ExperimentConfig, run_experiment
from hrgraph.mcmc import SamplerConfig
from hrgraph.prediction import METHODS
from hrgraph.resample import resample_graph

g = resample_graph(planted_dendrogram(64, [0.01, 0.05, 0.4]), seed=3)
config = ExperimentConfig(
    methods=METHODS,
    fractions=(0.8,),
    trials=3,
    sampler=SamplerConfig(num_samples=50),
    seed=3,
)
result = run_experiment(g, config)

print(f"{'method':<18}{'AUC':>8}{'+-':>8}{'top ratio':>12}")
for row in result.aggregate():
    print(f"{row['method']:<18}{row['auc_mean']:8.3f}{row['auc_stderr']:8.3f}{row['ratio_mean']:12.2f}")
