"""Hierarchical random graphs: fitting by MCMC, resampling, consensus trees and link prediction."""

__version__ = "0.1.0"

from .consensus import Hierarchy, consensus_tree
from .dendrogram import (
    Dendrogram,
    compute_stats,
    connection_probability,
    deserialize,
    enumerate_dendrograms,
    log_likelihood,
    lowest_common_ancestor,
    random_dendrogram,
    serialize,
)
from .evaluation import ExperimentConfig, ExperimentResult, auc, run_experiment, top_rank_ratio
from .graph import Graph, graph_statistics, parse_edge_list, read_edge_list, remove_random_edges
from .mcmc import ChainState, SamplerConfig, run_sampler, sample
from .prediction import baseline_scores, hrg_scores, rank_pairs
from .resample import resample_graph, resample_report
