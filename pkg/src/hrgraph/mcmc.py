"""Markov chain Monte Carlo over dendrograms.

The chain proposes subtree rearrangements at a uniformly chosen non-root
internal node and accepts them with the Metropolis rule, so in equilibrium
dendrograms are visited with probability proportional to their likelihood.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .dendrogram import Dendrogram, compute_stats, log_likelihood, random_dendrogram
from .rng import make_rng

log = logging.getLogger(__name__)

CHUNK = 1 << 16


class Move(NamedTuple):
    node: int
    variant: int  # 1: swap right child with sibling, 2: swap left child with sibling


@dataclass
class PlateauPolicy:
    """Burn-in detector settings.

    The log-likelihood is recorded every ``trace_interval`` steps. Over the
    last ``window`` trace points a least-squares line is fitted; equilibrium
    is declared when the fitted change across the window is at most
    ``slope_tolerance`` residual standard deviations (plus ``abs_tolerance``),
    or when ``cap`` steps have elapsed.
    """

    window: int = 50
    slope_tolerance: float = 1.0
    abs_tolerance: float = 1e-9
    cap: int | None = None


@dataclass
class SamplerConfig:
    """Sampling schedule. ``None`` fields resolve from ``n`` (see :meth:`resolve`)."""

    num_samples: int = 100
    sample_interval: int | None = None
    seed: int = 0
    window: int | None = None
    slope_tolerance: float = 1.0
    burnin_cap: int | None = None
    trace_interval: int | None = None
    chains: int = 1
    resync_every: int = 10_000

    def resolve(self, n):
        """Copy with defaults filled: interval ``n**2``, cap ``200 n**2``, trace every ``n``."""
        out = SamplerConfig(**asdict(self))
        if out.sample_interval is None:
            out.sample_interval = max(1, n * n)
        if out.trace_interval is None:
            out.trace_interval = max(1, n)
        if out.window is None:
            out.window = max(50, n)
        if out.burnin_cap is None:
            out.burnin_cap = 200 * n * n
        out.burnin_cap = max(out.burnin_cap, out.window * out.trace_interval)
        if out.sample_interval < 1 or out.num_samples < 1 or out.chains < 1:
            raise ValueError("sample_interval, num_samples and chains must be >= 1")
        return out

    def policy(self):
        return PlateauPolicy(window=self.window, slope_tolerance=self.slope_tolerance, cap=self.burnin_cap)

    def to_dict(self):
        return asdict(self)


class ChainState:
    """A dendrogram being sampled for one graph, with cached log-likelihood."""

    def __init__(self, graph, dendrogram=None, seed=0, rng=None):
        if graph.n < 2:
            raise ValueError("sampling needs at least two vertices")
        self.graph = graph
        self.rng = rng if rng is not None else make_rng(seed)
        d = dendrogram.copy() if dendrogram is not None else random_dendrogram(graph.n, self.rng)
        compute_stats(d, graph)
        self.dendrogram = d
        self.log_likelihood = log_likelihood(d)
        self.step_count = 0
        self.accepted = 0
        self.resync_every = 10_000
        self._indptr, self._indices = graph.csr()
        self._stack = np.empty(2 * graph.n + 2, dtype=np.int64)
        d = self.dendrogram
        self._candidates = np.array(
            [r for r in d.internal_nodes() if r != d.root], dtype=np.int64
        )

    @property
    def n(self):
        return self.graph.n

    def recompute(self):
        """Log-likelihood recounted from scratch on a copy (does not touch the chain)."""
        d = self.dendrogram.copy()
        compute_stats(d, self.graph)
        return log_likelihood(d)

    def resync(self):
        d = self.dendrogram
        self.log_likelihood = K.total_log_likelihood(d.left, d.right, d.size, d.edge_counts, d.n)

    def snapshot(self):
        return self.dendrogram.copy()

    def _delta(self, move):
        d = self.dendrogram
        return K.move_delta(
            move.node, move.variant, d.left, d.right, d.size, d.parent, d.edge_counts,
            self._indptr, self._indices, d.n, self._stack,
        )

    def apply(self, move):
        """Unconditionally adopt ``move``; returns the log-likelihood change."""
        delta, new_r, new_p = self._delta(move)
        d = self.dendrogram
        K.apply_move(move.node, move.variant, new_r, new_p, d.left, d.right, d.size,
                     d.parent, d.edge_counts, d.prob, d.n)
        self.log_likelihood += delta
        return delta

    def run(self, steps, trace_every=0, record_topology=False):
        """Advance ``steps`` Metropolis steps in compiled chunks.

        Returns the trace (log-likelihood every ``trace_every`` steps) and, when
        ``record_topology`` is set (``n <= 6`` only), the topology code after
        every step (see :func:`topology_code`).
        """
        if self.n < 3:
            self.step_count += steps
            reps = steps // trace_every if trace_every else 0
            codes = np.zeros(steps if record_topology else 0, dtype=np.int64)
            return np.full(reps, self.log_likelihood), codes
        if record_topology and self.n > 6:
            raise ValueError("topology codes are only available for n <= 6")
        d = self.dendrogram
        traces = []
        codes = []
        done = 0
        while done < steps:
            if trace_every:
                k = min(steps - done, max(1, CHUNK // trace_every) * trace_every)
            else:
                k = min(CHUNK, steps - done)
            nodes = self._candidates[self.rng.integers(0, len(self._candidates), size=k)]
            variants = self.rng.integers(1, 3, size=k)
            uniforms = self.rng.random(k)
            trace = np.empty(k // trace_every if trace_every else 0)
            code_buf = np.empty(k if record_topology else 0, dtype=np.int64)
            self.log_likelihood, acc = K.run_chain(
                nodes, variants, uniforms, self.log_likelihood,
                d.left, d.right, d.size, d.parent, d.edge_counts, d.prob, d.root,
                self._indptr, self._indices, d.n,
                trace_every, trace, self.resync_every, self.step_count, code_buf, record_topology,
            )
            self.accepted += acc
            self.step_count += k
            done += k
            traces.append(trace)
            codes.append(code_buf)
        return np.concatenate(traces) if traces else np.empty(0), (
            np.concatenate(codes) if codes else np.empty(0, dtype=np.int64)
        )


def propose_move(state):
    """Uniform non-root internal node and uniform alternate configuration."""
    if state.n < 3:
        raise ValueError("no moves exist for fewer than three leaves")
    node = int(state._candidates[state.rng.integers(len(state._candidates))])
    variant = int(state.rng.integers(1, 3))
    return Move(node, variant)


def delta_log_likelihood(state, move):
    """``log L(D') - log L(D)`` for ``move``, touching only the node and its parent."""
    return float(state._delta(move)[0])


def metropolis_accept(delta, u):
    """Accept uphill moves always and downhill ones with probability ``exp(delta)``."""
    return delta >= 0.0 or u < np.exp(delta)


def step(state):
    """One Metropolis step; returns whether the proposal was accepted."""
    state.step_count += 1
    if state.n < 3:
        return True
    move = propose_move(state)
    delta, new_r, new_p = state._delta(move)
    u = state.rng.random()
    if metropolis_accept(delta, u):
        d = state.dendrogram
        K.apply_move(move.node, move.variant, new_r, new_p, d.left, d.right, d.size,
                     d.parent, d.edge_counts, d.prob, d.n)
        state.log_likelihood += delta
        state.accepted += 1
        return True
    return False


def neighbors(d):
    """All dendrograms one move away from ``d`` (used for ergodicity checks)."""
    out = []
    for r in d.internal_nodes():
        if r == d.root:
            continue
        for variant in (1, 2):
            e = d.copy()
            if e.edge_counts.min() < 0:
                e.edge_counts[:] = 0
            K.apply_move(r, variant, 0, 0, e.left, e.right, e.size, e.parent,
                         e.edge_counts, e.prob, e.n)
            out.append(e)
    return out


def topology_code(d):
    """Python twin of the compiled topology code: OR of ``1 << mask`` over non-root clusters."""
    masks = d.cluster_masks()
    code = 0
    for r, mk in masks.items():
        if r != d.root:
            code |= 1 << mk
    return code


def detect_equilibrium(trace, policy, steps=None):
    """Decide whether the log-likelihood trace has reached a plateau.

    Returns ``(flag, reason)``; the reason is also logged.
    """
    trace = np.asarray(trace, dtype=np.float64)
    if policy.cap is not None and steps is not None and steps >= policy.cap:
        reason = f"hard cap of {policy.cap} steps reached"
        log.info("equilibrium: %s", reason)
        return True, reason
    if len(trace) < policy.window:
        return False, "trace shorter than window"
    y = trace[-policy.window:]
    x = np.arange(policy.window, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    change = abs(slope) * (policy.window - 1)
    noise = float(resid.std())
    if change <= policy.slope_tolerance * noise + policy.abs_tolerance:
        reason = f"plateau: fitted change {change:.4g} within {policy.slope_tolerance:g} x noise {noise:.4g}"
        log.info("equilibrium: %s", reason)
        return True, reason
    return False, f"trending: fitted change {change:.4g} exceeds {policy.slope_tolerance:g} x noise {noise:.4g}"


class Sample(NamedTuple):
    dendrogram: Dendrogram
    log_likelihood: float


@dataclass
class SampleSet:
    samples: list
    config: SamplerConfig
    burnin_steps: list = field(default_factory=list)
    burnin_reasons: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    acceptance: list = field(default_factory=list)

    @property
    def pooled(self):
        return self.config.chains > 1

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]


def burn_in(state, config):
    """Run until the plateau detector fires; returns ``(steps, reason, trace)``."""
    policy = config.policy()
    every = config.trace_interval
    check = max(1, policy.window // 5)
    trace = [state.log_likelihood]
    start = state.step_count
    while True:
        tr, _ = state.run(every * check, trace_every=every)
        trace.extend(tr.tolist())
        elapsed = state.step_count - start
        ok, reason = detect_equilibrium(trace, policy, steps=elapsed)
        if ok:
            return elapsed, reason, np.asarray(trace)


def run_chain(graph, config, chain_index=0):
    cfg = config.resolve(graph.n)
    state = ChainState(graph, rng=make_rng(cfg.seed, "chain", chain_index))
    state.resync_every = cfg.resync_every
    if graph.n < 3:
        d = state.snapshot()
        return [Sample(d, state.log_likelihood) for _ in range(cfg.num_samples)], 0, "trivial", np.array([state.log_likelihood]), 1.0
    steps, reason, trace = burn_in(state, cfg)
    samples = []
    sample_trace = []
    for _ in range(cfg.num_samples):
        tr, _ = state.run(cfg.sample_interval, trace_every=cfg.trace_interval)
        sample_trace.extend(tr.tolist())
        state.resync()
        samples.append(Sample(state.snapshot(), float(state.log_likelihood)))
    acc = state.accepted / max(1, state.step_count)
    return samples, steps, reason, np.concatenate([trace, sample_trace]), acc


def run_sampler(graph, config, threads=1):
    """Burn in, then keep ``num_samples`` snapshots per chain spaced ``sample_interval`` apart."""
    cfg = config.resolve(graph.n)
    if threads > 1 and cfg.chains > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(lambda c: run_chain(graph, cfg, c), range(cfg.chains)))
    else:
        results = [run_chain(graph, cfg, c) for c in range(cfg.chains)]
    out = SampleSet(samples=[], config=cfg)
    for samples, steps, reason, trace, acc in results:
        out.samples.extend(samples)
        out.burnin_steps.append(int(steps))
        out.burnin_reasons.append(reason)
        out.traces.append(trace)
        out.acceptance.append(float(acc))
    return out


def sample(graph, config, threads=1):
    """List of ``(dendrogram, log_likelihood)`` snapshots after burn-in."""
    return run_sampler(graph, config, threads=threads).samples
