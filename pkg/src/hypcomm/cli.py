"""Command line entry point: ``hypcomm embed | detect | classify | eval | plot``."""

import logging
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import classify as clf
from . import io
from .gaussian import DegenerateClusterError
from .geometry import ConvergenceError
from .graph import GraphParseError, load_edge_list, read_label_tokens, token_label_matrix
from .metrics import MatchingError, MetricsReport, conductance, nmi, precision_at_n
from .mixture import MixtureModel, em_fit, kmeans_fit
from .plot import render_svg
from .trainer import TrainConfig, train

log = logging.getLogger("hypcomm")


class InputError(click.ClickException):
    """Bad input file or arguments; exits with status 2."""

    exit_code = 2


def _need(path):
    if path is not None and not Path(path).exists():
        raise InputError(f"no such input: {path}")
    return path


def _run(fn):
    """Map library errors onto the documented exit codes."""
    try:
        return fn()
    except click.ClickException:
        raise
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from None
    except (GraphParseError, io.FormatError, MatchingError) as exc:
        raise InputError(str(exc)) from None
    except (ConvergenceError, DegenerateClusterError, FloatingPointError, clf.TrainingError) as exc:
        raise click.ClickException(str(exc)) from None


def _set_threads(threads):
    if threads is None:
        return
    if threads < 1:
        raise InputError("--threads must be >= 1")
    import numba

    numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))


def _labels_for(tokens, labels_path):
    """Label matrix aligned with ``tokens`` plus the community names."""
    return token_label_matrix(tokens, read_label_tokens(labels_path))


@click.group()
@click.option("-v", "--verbose", count=True, help="More logging (repeatable).")
def main(verbose):
    """Hyperbolic community embeddings on the Poincaré ball."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("edges", type=click.Path(dir_okay=False))
@click.option("-o", "--output", type=click.Path(file_okay=False), default=".", show_default=True,
              help="Directory for embeddings.csv, mixture.json and manifest.json.")
@click.option("--dim", default=2, show_default=True, type=int)
@click.option("--epochs", default=30, show_default=True, type=int)
@click.option("--warmup", default=10, show_default=True, type=int, help="Epochs trained without the community loss.")
@click.option("--alpha", default=1.0, show_default=True, type=float)
@click.option("--beta", default=1.0, show_default=True, type=float)
@click.option("--gamma", default=0.1, show_default=True, type=float)
@click.option("--lr", default=1e-2, show_default=True, type=float)
@click.option("--walks", default=10, show_default=True, type=int, help="Walks per node.")
@click.option("--walk-len", default=80, show_default=True, type=int)
@click.option("--window", default=5, show_default=True, type=int)
@click.option("--negatives", default=5, show_default=True, type=int)
@click.option("--k", "K", default=2, show_default=True, type=int, help="Number of communities.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--batch", default=None, type=int, help="Accumulate this many samples per update.")
@click.option("--threads", default=None, type=int)
def embed(edges, output, threads, **flags):
    """Train embeddings and a K-component mixture on an edge list."""
    _set_threads(threads)
    _need(edges)
    cfg = TrainConfig(
        dim=flags["dim"], alpha=flags["alpha"], beta=flags["beta"], gamma=flags["gamma"], lr=flags["lr"],
        epochs=flags["epochs"], warmup_epochs=flags["warmup"], walks_per_node=flags["walks"],
        walk_length=flags["walk_len"], window=flags["window"], negatives=flags["negatives"], K=flags["K"],
        batch_size=flags["batch"], seed=flags["seed"],
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise InputError(str(exc)) from None

    def work():
        t0 = time.perf_counter()
        g = load_edge_list(edges)
        if g.n_nodes < cfg.K:
            raise InputError(f"--k {cfg.K} exceeds the number of nodes ({g.n_nodes})")
        result = train(g, cfg)
        out = Path(output)
        out.mkdir(parents=True, exist_ok=True)
        io.write_embeddings(out / "embeddings.csv", g.tokens, result.embeddings.phi)
        (out / "mixture.json").write_text(result.model.to_json() + "\n", encoding="utf-8")
        io.write_manifest(
            out / "manifest.json",
            command="embed",
            inputs={"edges": str(edges)},
            config=result.config,
            seed=cfg.seed,
            epochs=len(result.history),
            final_losses=result.final_losses,
            timings={"total_seconds": time.perf_counter() - t0,
                     "epoch_seconds": [h["seconds"] for h in result.history]},
        )
        click.echo(f"wrote {out / 'embeddings.csv'} ({g.n_nodes} nodes, dim {cfg.dim})")

    _run(work)


@main.command()
@click.argument("embeddings", type=click.Path(dir_okay=False))
@click.option("--k", "K", required=True, type=int)
@click.option("--method", type=click.Choice(["em", "kmeans"]), default="em", show_default=True)
@click.option("--labels", type=click.Path(dir_okay=False), help="Ground-truth communities for scoring.")
@click.option("--edges", type=click.Path(dir_okay=False), help="Edge list, needed for conductance.")
@click.option("--matching", type=click.Choice(["auto", "exhaustive", "greedy"]), default="auto", show_default=True)
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Write node_token,community rows here.")
@click.option("--mixture-out", type=click.Path(dir_okay=False), help="Write the fitted mixture (em only).")
@click.option("--report", type=click.Path(dir_okay=False), help="Write the metrics as JSON.")
@click.option("--seed", default=0, show_default=True, type=int)
def detect(embeddings, K, method, labels, edges, matching, output, mixture_out, report, seed):
    """Unsupervised communities from embeddings (Riemannian EM or K-means)."""
    for p in (embeddings, labels, edges):
        _need(p)

    def work():
        tokens, points = io.read_embeddings(embeddings)
        if not 1 <= K <= len(points):
            raise InputError(f"--k must be between 1 and the number of nodes ({len(points)})")
        model = None
        if method == "em":
            fit = em_fit(points, K, seed=seed)
            model, assign = fit.model, fit.resp.argmax(axis=1)
        else:
            assign = kmeans_fit(points, K, seed=seed).labels
        rep = _score(tokens, assign, K, labels, edges, matching)
        if output:
            io.write_assignments(output, tokens, assign)
        if mixture_out and model is not None:
            Path(mixture_out).write_text(model.to_json() + "\n", encoding="utf-8")
        _emit(rep, report, ("Precision@1", "Conductance", "NMI"))

    _run(work)


def _score(tokens, assign, K, labels, edges, matching):
    rep = MetricsReport()
    if labels:
        y, _ = _labels_for(tokens, labels)
        mode = matching
        if mode == "auto":
            mode = "exhaustive" if max(K, y.shape[1]) <= 8 else "greedy"
        rep.add("Precision@1", precision_at_n(assign, y, mode))
        if y.sum(axis=1).max() == 1:
            value, flag = nmi(assign, y.argmax(axis=1), with_flag=True)
            rep.add("NMI", value)
            if flag:
                rep.flags.append("NMI degenerate (single cluster)")
    if edges:
        g = load_edge_list(edges)
        index = {t: i for i, t in enumerate(tokens)}
        missing = [t for t in g.tokens if t not in index]
        if missing:
            raise InputError(f"edge list node {missing[0]!r} has no embedding")
        c = conductance(g, assign[[index[t] for t in g.tokens]], K)
        rep.add("Conductance", c.value)
        if c.degenerate:
            rep.flags.append(f"conductance degenerate for clusters {list(c.degenerate)}")
    return rep


def _emit(rep, report_path, order=None):
    if order:
        click.echo(" / ".join(order))
        click.echo(" / ".join(f"{rep.values[k][0]:.4f}" if k in rep.values else "n/a" for k in order))
    else:
        click.echo(rep.table())
    for flag in rep.flags:
        click.echo(f"! {flag}")
    if report_path:
        Path(report_path).write_text(rep.to_json() + "\n", encoding="utf-8")


@main.command(name="classify")
@click.argument("embeddings", type=click.Path(dir_okay=False))
@click.argument("labels", type=click.Path(dir_okay=False))
@click.option("--method", type=click.Choice(sorted(clf.CLASSIFIERS)), default="kmeans", show_default=True)
@click.option("--folds", default=5, show_default=True, type=int)
@click.option("--runs", default=1, show_default=True, type=int, help="Repeat the CV with seeds seed..seed+runs-1.")
@click.option("--topn", default=None, help="Comma-separated n values (default 1, or 1,3,5 when multi-label).")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--report", type=click.Path(dir_okay=False), help="Write the metrics as JSON.")
def classify_cmd(embeddings, labels, method, folds, runs, topn, seed, report):
    """k-fold supervised Precision@n of a classifier on fixed embeddings."""
    _need(embeddings)
    _need(labels)
    try:
        ns = None if topn is None else tuple(int(v) for v in topn.split(","))
    except ValueError:
        raise InputError(f"--topn must be comma-separated integers, got {topn!r}") from None
    if ns is not None and min(ns) < 1:
        raise InputError("--topn values must be >= 1")
    if folds < 2 or runs < 1:
        raise InputError("--folds must be >= 2 and --runs >= 1")

    def work():
        tokens, points = io.read_embeddings(embeddings)
        y, _ = _labels_for(tokens, labels)
        chosen = ns or ((1,) if y.sum(axis=1).max() == 1 else (1, 3, 5))
        rep = MetricsReport()
        for r in range(runs):
            part = clf.cross_validate(points, y, method, folds, chosen, seed=seed + r)
            for name, vals in part.values.items():
                for v in vals:
                    rep.add(name, v)
        _emit(rep, report)

    _run(work)


@main.command(name="eval")
@click.argument("assignments", type=click.Path(dir_okay=False))
@click.option("--labels", type=click.Path(dir_okay=False))
@click.option("--edges", type=click.Path(dir_okay=False))
@click.option("--matching", type=click.Choice(["auto", "exhaustive", "greedy"]), default="auto", show_default=True)
@click.option("--report", type=click.Path(dir_okay=False))
def eval_cmd(assignments, labels, edges, matching, report):
    """Score a saved node_token,community assignment file."""
    for p in (assignments, labels, edges):
        _need(p)
    if not (labels or edges):
        raise InputError("give --labels and/or --edges")

    def work():
        tokens, assign = io.read_assignments(assignments)
        K = int(assign.max()) + 1
        _emit(_score(tokens, assign, K, labels, edges, matching), report, ("Precision@1", "Conductance", "NMI"))

    _run(work)


@main.command()
@click.argument("embeddings", type=click.Path(dir_okay=False))
@click.option("--labels", type=click.Path(dir_okay=False), help="Color nodes by their first community.")
@click.option("--mixture", type=click.Path(dir_okay=False), help="Mixture JSON: means and sigma circles.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default="embeddings.svg", show_default=True)
def plot(embeddings, labels, mixture, output):
    """Draw 2-D embeddings in the Poincaré disc as SVG."""
    for p in (embeddings, labels, mixture):
        _need(p)

    def work():
        tokens, points = io.read_embeddings(embeddings)
        if points.shape[1] != 2:
            raise InputError(f"embeddings have dim {points.shape[1]}; plotting needs dim 2 (retrain with --dim 2)")
        lab = None
        if labels:
            y, _ = _labels_for(tokens, labels)
            lab = np.where(y.any(axis=1), y.argmax(axis=1), -1)
        model = MixtureModel.from_json(Path(mixture).read_text(encoding="utf-8")) if mixture else None
        Path(output).write_text(render_svg(points, lab, model), encoding="utf-8")
        click.echo(f"wrote {output}")

    _run(work)


if __name__ == "__main__":
    sys.exit(main())
