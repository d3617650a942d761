"""Edge-removal experiments, AUC and top-rank ratio, and random-graph controls."""

from __future__ import annotations

import csv
import io
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from .graph import generate_configuration_model, generate_er_graph, power_law_degree_sequence, remove_random_edges
from .mcmc import SamplerConfig, sample
from .prediction import METHODS, rank_pairs, score_pairs
from .rng import derive_seed, make_rng

log = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 0.95)
MC_THRESHOLD = 10_000_000
MC_COMPARISONS = 100_000


def _labels(scored, positives, n=None):
    if n is None:
        n = int(max(scored.j.max(initial=0), max((b for _, b in positives), default=0))) + 1
    keys = scored.i.astype(np.int64) * n + scored.j
    pos = np.array(sorted(min(a, b) * n + max(a, b) for a, b in positives), dtype=np.int64)
    labels = np.isin(keys, pos)
    if labels.sum() != len(pos):
        raise ValueError("every positive pair must be among the scored pairs")
    return labels


def auc_estimate(scored, positives, method="auto", seed=0, comparisons=MC_COMPARISONS,
                 threshold=MC_THRESHOLD):
    """AUC with ties counted one half, returned as ``(value, stderr, exact)``.

    The exact value is the Mann-Whitney statistic from average ranks. Above
    ``threshold`` scored pairs (or with ``method="monte_carlo"``) it is
    estimated from ``comparisons`` random positive/negative draws instead.
    """
    labels = _labels(scored, positives)
    pos = scored.score[labels]
    neg = scored.score[~labels]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("AUC needs at least one positive and one negative pair")
    if method == "auto":
        method = "exact" if len(scored) <= threshold else "monte_carlo"
    if method == "exact":
        ranks = rankdata(scored.score, method="average")
        P, N = len(pos), len(neg)
        u = ranks[labels].sum() - P * (P + 1) / 2.0
        return float(u / (P * N)), 0.0, True
    if method != "monte_carlo":
        raise ValueError(f"unknown AUC method {method!r}")
    rng = make_rng(seed, "auc")
    a = pos[rng.integers(len(pos), size=comparisons)]
    b = neg[rng.integers(len(neg), size=comparisons)]
    wins = (a > b) + 0.5 * (a == b)
    return float(wins.mean()), float(wins.std(ddof=1) / np.sqrt(comparisons)), False


def auc(scored, positives, **kwargs):
    """Probability a random positive outscores a random negative (ties count one half)."""
    return auc_estimate(scored, positives, **kwargs)[0]


def top_rank_ratio(ranked, positives):
    """``1[top pair is positive]`` divided by the positive base rate among scored pairs."""
    if len(ranked) == 0:
        raise ValueError("ranking is empty")
    pos = {(min(a, b), max(a, b)) for a, b in positives}
    if not pos:
        raise ValueError("ratio is undefined without positive pairs")
    top = (int(ranked.i[0]), int(ranked.j[0]))
    return len(ranked) / len(pos) if top in pos else 0.0


@dataclass
class ExperimentConfig:
    methods: tuple = METHODS
    fractions: tuple = DEFAULT_FRACTIONS
    trials: int = 25
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for f in self.fractions:
            if not 0.0 < f <= 1.0:
                raise ValueError("known fractions must lie in (0, 1]")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")

    def to_dict(self):
        out = asdict(self)
        out["methods"] = list(self.methods)
        out["fractions"] = list(self.fractions)
        return out


@dataclass
class ExperimentResult:
    records: list
    config: ExperimentConfig
    skipped: list = field(default_factory=list)

    def aggregate(self):
        """Mean and standard error of AUC and ratio per ``(method, fraction)``."""
        groups = {}
        for rec in self.records:
            groups.setdefault((rec["method"], rec["fraction"]), []).append(rec)
        out = []
        for (method, fraction), recs in sorted(groups.items(), key=lambda kv: (METHODS.index(kv[0][0]), kv[0][1])):
            row = {"method": method, "fraction": fraction, "trials": len(recs)}
            for key in ("auc", "ratio"):
                vals = np.array([r[key] for r in recs])
                row[f"{key}_mean"] = float(vals.mean())
                row[f"{key}_stderr"] = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
            out.append(row)
        return out

    def mean_auc(self, method, fraction=None):
        vals = [r["auc"] for r in self.records
                if r["method"] == method and (fraction is None or r["fraction"] == fraction)]
        return float(np.mean(vals))

    def to_dict(self):
        """JSON-ready form; runtimes are left out so reruns are byte-identical."""
        recs = [{k: v for k, v in r.items() if k != "runtime"} for r in self.records]
        return {
            "config": self.config.to_dict(),
            "aggregate": self.aggregate(),
            "trials": recs,
            "skipped": self.skipped,
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "fraction", "trial", "auc", "ratio", "positives", "universe"])
        for r in self.records:
            w.writerow([r["method"], repr(r["fraction"]), r["trial"], repr(r["auc"]), repr(r["ratio"]),
                        r["positives"], r["universe"]])
        return buf.getvalue()

    def timings_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "fraction", "trial", "runtime_s"])
        for r in self.records:
            w.writerow([r["method"], r["fraction"], r["trial"], f"{r['runtime']:.6f}"])
        return buf.getvalue()


def _run_trial(g, config, fi, fraction, trial):
    seed = config.seed
    observed, removed = remove_random_edges(g, 1.0 - fraction, derive_seed(seed, "remove", fi, trial))
    if not removed:
        return [], (fraction, trial, "no edges removed")
    recs = []
    for method in config.methods:
        t0 = time.perf_counter()
        samples = None
        if method == "hrg":
            scfg = SamplerConfig(**{**asdict(config.sampler), "seed": derive_seed(seed, "hrg", fi, trial)})
            samples = sample(observed, scfg)
        scored = score_pairs(observed, method, samples)
        value = auc(scored, removed)
        ranked = rank_pairs(scored, make_rng(seed, "rank", method, fi, trial))
        ratio = top_rank_ratio(ranked, removed)
        recs.append({
            "method": method,
            "fraction": float(fraction),
            "trial": trial,
            "auc": value,
            "ratio": ratio,
            "positives": len(removed),
            "universe": len(scored),
            "runtime": time.perf_counter() - t0,
        })
    return recs, None


def run_experiment(g, config):
    """Hide ``1 - f`` of the edges, score the rest, and compare against the hidden ones.

    Edge removal for ``(fraction index, trial)`` is shared by all methods;
    each method's randomness comes from its own named stream, so results do
    not depend on thread scheduling.
    """
    jobs = [(fi, f, t) for fi, f in enumerate(config.fractions) for t in range(config.trials)]
    if config.threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=config.threads) as ex:
            outs = list(ex.map(lambda job: _run_trial(g, config, *job), jobs))
    else:
        outs = [_run_trial(g, config, *job) for job in jobs]
    records = []
    skipped = []
    for recs, skip in outs:
        records.extend(recs)
        if skip is not None:
            skipped.append({"fraction": skip[0], "trial": skip[1], "reason": skip[2]})
    if skipped:
        fr = sorted({s["fraction"] for s in skipped})
        warnings.warn(f"{len(skipped)} trials skipped (no edges removed) at known fractions {fr}", stacklevel=2)
    return ExperimentResult(records=records, config=config, skipped=skipped)


# controls -------------------------------------------------------------------


def er_control_graph(seed, n=500, mean_degree=5.0):
    return generate_er_graph(n, mean_degree / (n - 1), derive_seed(seed, "er-control"))


def configuration_control_graph(seed, n=500, alpha=2.5, k_min=2):
    degs = power_law_degree_sequence(n, alpha, derive_seed(seed, "degrees"), k_min=k_min)
    return generate_configuration_model(degs, derive_seed(seed, "config-control"))


PRESETS = {
    "er-control": er_control_graph,
    "config-control": configuration_control_graph,
}
