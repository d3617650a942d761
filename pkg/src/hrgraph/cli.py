"""Command-line workflows: fit, resample, consensus, predict, evaluate, stats, generate.

Every command writes into a fresh output directory together with a
``manifest.json`` holding the tool version, seeding scheme and the argument
vector (minus the output path), which ``hrgraph rerun`` can replay. Flags can
also be set through ``HRG_<FLAG>`` environment variables, e.g. ``HRG_SEED``.

Exit codes: 0 success, 1 computation error, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .consensus import consensus_tree
from .dendrogram import DendrogramFormatError, deserialize, serialize, to_table
from .evaluation import DEFAULT_FRACTIONS, PRESETS, ExperimentConfig, run_experiment
from .graph import EdgeListError, Graph, generate_configuration_model, generate_er_graph, graph_statistics
from .graph import power_law_degree_sequence, read_edge_list
from .mcmc import SamplerConfig, run_sampler
from .prediction import METHODS, rank_pairs, score_pairs
from .resample import resample_graph, resample_report
from .rng import SCHEME, derive_seed

log = logging.getLogger("hrgraph")

ENV_PREFIX = "HRG_"


class UsageError(Exception):
    pass


# graph and sample-set files ---------------------------------------------------


def write_graph(directory, g):
    """``labels.tsv`` (id, label) plus ``graph.edges`` (id pairs) so ids survive a reload."""
    directory = Path(directory)
    with open(directory / "labels.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id\tlabel\n")
        for i, lab in enumerate(g.labels):
            fh.write(f"{i}\t{lab}\n")
    with open(directory / "graph.edges", "w", encoding="utf-8", newline="\n") as fh:
        for a, b in sorted(g.edges):
            fh.write(f"{a} {b}\n")


def read_graph(directory):
    directory = Path(directory)
    labels = []
    with open(directory / "labels.tsv", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            _, lab = line.rstrip("\n").split("\t", 1)
            labels.append(lab)
    edges = []
    with open(directory / "graph.edges", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                a, b = line.split()
                edges.append((int(a), int(b)))
    return Graph(len(labels), edges, labels)


def write_samples(directory, sset):
    sdir = Path(directory) / "samples"
    sdir.mkdir()
    files = []
    for k, (d, ll) in enumerate(sset.samples):
        name = f"sample_{k:05d}.hrg"
        (sdir / name).write_text(serialize(d, ll), encoding="utf-8")
        files.append({"file": f"samples/{name}", "log_likelihood": ll})
    return files


def read_samples(directory):
    directory = Path(directory)
    man = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    out = []
    for entry in man["samples"]:
        d, ll = deserialize((directory / entry["file"]).read_text(encoding="utf-8"))
        out.append((d, ll))
    return out


def load_source(path):
    """A sample directory (graph + samples) or a bare edge-list file (graph only)."""
    path = Path(path)
    if path.is_dir():
        return read_graph(path), read_samples(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file or directory: {path}")
    return read_edge_list(path), None


# output handling -----------------------------------------------------------------


class OutputDir:
    """Builds outputs in a temporary sibling directory and moves it into place on success."""

    def __init__(self, target, force=False):
        self.target = Path(target)
        self.force = force
        self.tmp = None

    def __enter__(self):
        if self.target.exists() and any(self.target.iterdir()) and not self.force:
            raise UsageError(f"output directory {self.target} is not empty (use --force)")
        self.target.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".hrg-", dir=self.target.parent))
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            shutil.rmtree(self.tmp, ignore_errors=True)
            return False
        if self.target.exists():
            shutil.rmtree(self.target)
        os.replace(self.tmp, self.target)
        return False


def dump_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def manifest(args, extra=None):
    argv = _strip_output(args._argv)
    out = {
        "tool": "hrgraph",
        "version": __version__,
        "rng_scheme": SCHEME,
        "command": args.command,
        "argv": argv,
        "seed": args.seed,
    }
    if extra:
        out.update(extra)
    return out


def _strip_output(argv):
    out = []
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        if a in ("-o", "--out"):
            skip = True
            continue
        if a.startswith("--out=") or a == "--force":
            continue
        out.append(a)
    return out


def _svg(fig, path):
    import matplotlib

    matplotlib.rcParams["svg.hashsalt"] = "hrgraph"
    fig.savefig(path, format="svg", metadata={"Date": None})


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


# commands --------------------------------------------------------------------------


def sampler_config(args):
    return SamplerConfig(
        num_samples=args.samples,
        sample_interval=args.interval,
        seed=args.seed,
        window=args.window,
        burnin_cap=args.burnin_cap,
        chains=args.chains,
    )


def cmd_fit(args):
    g = read_edge_list(args.edges)
    cfg = sampler_config(args)
    sset = run_sampler(g, cfg, threads=args.threads)
    with OutputDir(args.out, args.force) as out:
        write_graph(out, g)
        files = write_samples(out, sset)
        with open(out / "trace.csv", "w", encoding="utf-8", newline="\n") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["chain", "index", "step", "log_likelihood"])
            every = sset.config.trace_interval
            for c, tr in enumerate(sset.traces):
                for k, ll in enumerate(tr.tolist()):
                    w.writerow([c, k, k * every, repr(ll)])
        dump_json(out / "manifest.json", manifest(args, {
            "sampler": sset.config.to_dict(),
            "pooled_chains": sset.pooled,
            "n": g.n,
            "m": g.m,
            "burnin": [{"steps": s, "reason": r, "acceptance": a}
                       for s, r, a in zip(sset.burnin_steps, sset.burnin_reasons, sset.acceptance)],
            "samples": files,
        }))
    best = max(ll for _, ll in sset.samples)
    print(f"{len(sset.samples)} samples written to {args.out}; best log-likelihood {best:.6f}")


def cmd_resample(args):
    g = read_graph(args.samples_dir)
    samples = read_samples(args.samples_dir)
    report = resample_report(samples, args.seed, resamples_per_dendrogram=args.per_dendrogram)
    original = graph_statistics(g)
    with OutputDir(args.out, args.force) as out:
        doc = report.to_dict()
        doc["original"] = original.to_dict()
        dump_json(out / "report.json", doc)
        if args.format in ("csv", "svg"):
            for name, ours, theirs in (
                ("degree", original.degree_histogram, report.degree_histogram),
                ("distance", original.distance_histogram, report.distance_histogram),
            ):
                orig = np.asarray(ours, dtype=float)
                orig = orig / orig.sum() if orig.sum() else orig
                width = max(len(orig), len(theirs))
                with open(out / f"{name}_histogram.csv", "w", encoding="utf-8", newline="\n") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow([name, "original", "resampled"])
                    for k in range(width):
                        a = orig[k] if k < len(orig) else 0.0
                        b = theirs[k] if k < len(theirs) else 0.0
                        w.writerow([k, repr(float(a)), repr(float(b))])
        if args.format == "svg":
            plt = _pyplot()
            fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
            for ax, name, ours, theirs in (
                (axes[0], "degree", original.degree_histogram, report.degree_histogram),
                (axes[1], "distance", original.distance_histogram, report.distance_histogram),
            ):
                orig = np.asarray(ours, dtype=float)
                if orig.sum():
                    orig = orig / orig.sum()
                ax.plot(np.arange(len(orig)), orig, "o-", color="tab:blue", label="original")
                ax.plot(np.arange(len(theirs)), theirs, "s--", color="tab:red", label="resampled")
                ax.set_xlabel(name)
                ax.set_ylabel("fraction")
                ax.legend()
            fig.tight_layout()
            _svg(fig, out / "distributions.svg")
            plt.close(fig)
        dump_json(out / "manifest.json", manifest(args))
    print(json.dumps({"mean": report.mean, "stderr": report.stderr}, sort_keys=True))


def cmd_consensus(args):
    g = read_graph(args.samples_dir)
    samples = read_samples(args.samples_dir)
    tree = consensus_tree(samples, exponent=args.exponent)
    with OutputDir(args.out, args.force) as out:
        (out / "consensus.txt").write_text(tree.to_text(g.labels), encoding="utf-8")
        (out / "consensus_tree.txt").write_text(tree.render(g.labels), encoding="utf-8")
        nodes = [
            {"members": [g.labels[v] for v in range(g.n) if node.cluster >> v & 1],
             "support": node.support, "mean_probability": node.mean_prob}
            for node in sorted(tree.nodes(), key=lambda x: (-bin(x.cluster).count("1"), x.cluster))
        ]
        dump_json(out / "consensus.json", {"n": g.n, "exponent": args.exponent, "clusters": nodes})
        dump_json(out / "manifest.json", manifest(args))
    sys.stdout.write(tree.render(g.labels))


def cmd_predict(args):
    g, samples = load_source(args.source)
    if args.method == "hrg" and samples is None:
        raise UsageError("the hrg method needs a sample directory produced by 'fit'")
    scored = score_pairs(g, args.method, samples)
    ranked = rank_pairs(scored, derive_seed(args.seed, "rank", args.method), top_k=args.top_k)
    with OutputDir(args.out, args.force) as out:
        with open(out / "predictions.csv", "w", encoding="utf-8", newline="\n") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i_label", "j_label", "method", "score", "rank"])
            for k, (i, j, s) in enumerate(ranked, start=1):
                w.writerow([g.labels[i], g.labels[j], args.method, repr(float(s)), k])
        dump_json(out / "manifest.json", manifest(args, {"pairs": len(ranked)}))
    print(f"{len(ranked)} scored pairs written to {args.out}")


def cmd_evaluate(args):
    if args.preset:
        if args.preset not in PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
        g = PRESETS[args.preset](args.seed)
    elif args.edges:
        g = read_edge_list(args.edges)
    else:
        raise UsageError("evaluate needs an edge list or --preset")
    config = ExperimentConfig(
        methods=tuple(args.methods),
        fractions=tuple(args.fractions),
        trials=args.trials,
        sampler=sampler_config(args),
        seed=args.seed,
        threads=args.threads,
    )
    result = run_experiment(g, config)
    with OutputDir(args.out, args.force) as out:
        dump_json(out / "result.json", result.to_dict())
        if args.format in ("csv", "svg"):
            (out / "result.csv").write_text(result.to_csv(), encoding="utf-8")
        (out / "timings.csv").write_text(result.timings_csv(), encoding="utf-8")
        if args.format == "svg":
            plt = _pyplot()
            agg = result.aggregate()
            for key, fname, ylabel in (("auc", "auc.svg", "AUC"), ("ratio", "ratio.svg", "top-rank ratio")):
                fig, ax = plt.subplots(figsize=(5, 4))
                for method in config.methods:
                    rows = [r for r in agg if r["method"] == method]
                    if not rows:
                        continue
                    ax.errorbar([r["fraction"] for r in rows], [r[f"{key}_mean"] for r in rows],
                                yerr=[r[f"{key}_stderr"] for r in rows], marker="o", label=method, capsize=2)
                if key == "auc":
                    ax.axhline(0.5, color="grey", ls=":")
                ax.set_xlabel("fraction of edges observed")
                ax.set_ylabel(ylabel)
                ax.legend(fontsize=8)
                fig.tight_layout()
                _svg(fig, out / fname)
                plt.close(fig)
        dump_json(out / "manifest.json", manifest(args, {"n": g.n, "m": g.m}))
    lines = ["method            fraction  trials  auc_mean  auc_se   ratio_mean"]
    for r in result.aggregate():
        lines.append(f"{r['method']:<17} {r['fraction']:<8.3f}  {r['trials']:<6d}  "
                     f"{r['auc_mean']:.4f}    {r['auc_stderr']:.4f}   {r['ratio_mean']:.3f}")
    print("\n".join(lines))


def cmd_stats(args):
    g = read_edge_list(args.edges)
    st = graph_statistics(g)
    doc = st.to_dict()
    doc["n"] = g.n
    doc["m"] = g.m
    if args.out:
        with OutputDir(args.out, args.force) as out:
            dump_json(out / "stats.json", doc)
            if args.format in ("csv", "svg"):
                for name in ("degree_histogram", "distance_histogram"):
                    with open(out / f"{name}.csv", "w", encoding="utf-8", newline="\n") as fh:
                        w = csv.writer(fh, lineterminator="\n")
                        w.writerow(["value", "count"])
                        for k, c in enumerate(doc[name]):
                            w.writerow([k, c])
            dump_json(out / "manifest.json", manifest(args))
    print(json.dumps(doc, indent=2, sort_keys=True))


def cmd_generate(args):
    if args.model == "er":
        if args.n is None or args.p is None:
            raise UsageError("generate er needs --n and --p")
        g = generate_er_graph(args.n, args.p, derive_seed(args.seed, "generate", "er"))
    elif args.model == "config":
        if args.degrees:
            degs = [int(x) for x in Path(args.degrees).read_text(encoding="utf-8").split()]
        elif args.n is not None:
            degs = power_law_degree_sequence(args.n, args.alpha, derive_seed(args.seed, "degrees"), k_min=args.k_min)
        else:
            raise UsageError("generate config needs --degrees FILE or --n")
        g = generate_configuration_model(degs, derive_seed(args.seed, "generate", "config"))
    else:
        if not args.dendrogram:
            raise UsageError("generate planted needs --dendrogram FILE")
        d, _ = deserialize(Path(args.dendrogram).read_text(encoding="utf-8"))
        g = resample_graph(d, derive_seed(args.seed, "generate", "planted"))
    with OutputDir(args.out, args.force) as out:
        write_graph(out, g)
        dump_json(out / "manifest.json", manifest(args, {"n": g.n, "m": g.m}))
    print(f"graph with n={g.n}, m={g.m} written to {args.out}")


def cmd_export(args):
    d, ll = deserialize(Path(args.dendrogram).read_text(encoding="utf-8"))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "left", "right", "p"])
    for row in to_table(d):
        w.writerow([row[0], row[1], row[2], repr(row[3])])
    sys.stdout.write(buf.getvalue())


def cmd_rerun(args):
    man = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    argv = list(man["argv"]) + ["--out", args.out] + (["--force"] if args.force else [])
    return main(argv)


# argument parsing ------------------------------------------------------------------


def _env(name, default, cast=str):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return default
    return cast(raw)


def _floats(text):
    return [float(x) for x in text.replace(",", " ").split()]


def _methods(text):
    out = [x for x in text.replace(",", " ").split()]
    for m in out:
        if m not in METHODS:
            raise argparse.ArgumentTypeError(f"unknown method {m!r}")
    return out


def _int_or_none(text):
    return None if text in (None, "", "auto") else int(text)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=_env("SEED", 0, int))
    common.add_argument("--threads", type=int, default=_env("THREADS", os.cpu_count() or 1, int))
    common.add_argument("--format", choices=("json", "csv", "svg"), default=_env("FORMAT", "json"))
    common.add_argument("-o", "--out", default=None, help="output directory")
    common.add_argument("--force", action="store_true", help="replace a non-empty output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    sampler = argparse.ArgumentParser(add_help=False)
    sampler.add_argument("--samples", type=int, default=_env("SAMPLES", 100, int))
    sampler.add_argument("--interval", type=_int_or_none, default=_env("INTERVAL", None, _int_or_none),
                         help="steps between samples (default n^2)")
    sampler.add_argument("--burnin-cap", type=_int_or_none, default=_env("BURNIN_CAP", None, _int_or_none),
                         help="maximum burn-in steps (default 200 n^2)")
    sampler.add_argument("--window", type=_int_or_none, default=_env("WINDOW", None, _int_or_none),
                         help="plateau window in trace points (default max(50, n))")
    sampler.add_argument("--chains", type=int, default=_env("CHAINS", 1, int))

    p = argparse.ArgumentParser(prog="hrgraph", description="Hierarchical random graph inference and link prediction.")
    p.add_argument("--version", action="version", version=f"hrgraph {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", parents=[common, sampler], help="sample dendrograms for an edge list")
    f.add_argument("edges")

    r = sub.add_parser("resample", parents=[common], help="statistics of graphs resampled from a fit")
    r.add_argument("samples_dir")
    r.add_argument("--per-dendrogram", type=int, default=1)

    c = sub.add_parser("consensus", parents=[common], help="majority-rule consensus dendrogram")
    c.add_argument("samples_dir")
    c.add_argument("--exponent", type=float, default=2.0, help="weight samples by L**exponent")

    pr = sub.add_parser("predict", parents=[common], help="rank candidate missing links")
    pr.add_argument("source", help="sample directory (any method) or edge list (baselines)")
    pr.add_argument("--method", choices=METHODS, default="hrg")
    pr.add_argument("--top-k", type=int, default=None)

    e = sub.add_parser("evaluate", parents=[common, sampler], help="edge-removal prediction experiment")
    e.add_argument("edges", nargs="?")
    e.add_argument("--preset", default=None, help=f"one of {sorted(PRESETS)}")
    e.add_argument("--fractions", type=_floats, default=_env("FRACTIONS", list(DEFAULT_FRACTIONS), _floats))
    e.add_argument("--trials", type=int, default=_env("TRIALS", 25, int))
    e.add_argument("--methods", type=_methods, default=_env("METHODS", list(METHODS), _methods))

    s = sub.add_parser("stats", parents=[common], help="network statistics of an edge list")
    s.add_argument("edges")

    gsub = sub.add_parser("generate", parents=[common], help="generate a random graph")
    gsub.add_argument("model", choices=("er", "config", "planted"))
    gsub.add_argument("--n", type=int)
    gsub.add_argument("--p", type=float)
    gsub.add_argument("--alpha", type=float, default=2.5)
    gsub.add_argument("--k-min", type=int, default=2)
    gsub.add_argument("--degrees", help="file of whitespace-separated degrees")
    gsub.add_argument("--dendrogram", help="dendrogram file for the planted model")

    x = sub.add_parser("export", help="tabular form of a dendrogram file")
    x.add_argument("dendrogram")

    rr = sub.add_parser("rerun", help="replay the command recorded in a manifest")
    rr.add_argument("manifest")
    rr.add_argument("-o", "--out", required=True)
    rr.add_argument("--force", action="store_true")
    return p


COMMANDS = {
    "fit": cmd_fit,
    "resample": cmd_resample,
    "consensus": cmd_consensus,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "stats": cmd_stats,
    "generate": cmd_generate,
    "export": cmd_export,
    "rerun": cmd_rerun,
}

NEEDS_OUT = {"fit", "resample", "consensus", "predict", "evaluate", "generate"}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = argv
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in NEEDS_OUT and not args.out:
        parser.error(f"{args.command} needs -o/--out")
    try:
        rc = COMMANDS[args.command](args)
        return rc or 0
    except (UsageError, FileNotFoundError, IsADirectoryError, PermissionError,
            EdgeListError, DendrogramFormatError) as exc:
        print(f"hrgraph: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"hrgraph: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"hrgraph: computation failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
