"""Command-line entry points for the whole pipeline.

Subcommands: synth, train, eval, query, project, serve. Exit codes:
0 success, 2 input or validation problem, 3 numeric failure during training,
4 environment problem (e.g. port already bound).

Report-producing commands also render a matplotlib figure next to their
delimited output (loss curve beside the training report, scatter beside the
projection CSV).
"""

from __future__ import annotations

import csv
import json
import socket
import sys
from pathlib import Path

import click
import numpy as np

from .config import format_provenance, resolve_config
from .datastore import (
    DatasetFormat,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .errors import ChronorankError, TrainingDivergedError
from .evaluation import build_index, evaluate
from .figures import save_loss_curve, save_projection_scatter
from .index import RetrievalIndex, projection_points
from .model import (
    TrainingConfig,
    forward,
    init_model,
    load_model,
    save_model,
)
from .ranking import LossConfig, RelevanceKind, RelevanceSpec
from .relevance import build_matrix, load_matrix, save_matrix
from .service import create_app, state_from_config

EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_ENVIRONMENT = 4


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _dataset_format(path: str) -> DatasetFormat:
    return (
        DatasetFormat.JSON_LINES
        if str(path).endswith((".jsonl", ".ndjson"))
        else DatasetFormat.CSV_FEATURES
    )


@click.group()
def main():
    """Date-ordered document embeddings: train, retrieve, estimate, serve."""


@main.command()
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="CSV output path.")
@click.option("--spec", "spec_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--year-lo", default=1900, show_default=True)
@click.option("--year-hi", default=1999, show_default=True)
@click.option("--docs-per-year", default=20, show_default=True)
@click.option("--feature-dim", default=32, show_default=True)
@click.option("--noise-sigma", default=0.1, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synth(out, spec_file, year_lo, year_hi, docs_per_year, feature_dim, noise_sigma, seed):
    """Generate the synthetic year-coded benchmark dataset."""
    try:
        if spec_file:
            spec = SyntheticSpec.from_json(json.loads(Path(spec_file).read_text()))
        else:
            spec = SyntheticSpec(year_lo, year_hi, docs_per_year, feature_dim, noise_sigma, seed)
        records = generate_synthetic(spec)
        out_path = Path(out)
        save_dataset(records, out_path, DatasetFormat.CSV_FEATURES)
        echo_path = out_path.with_suffix(out_path.suffix + ".spec.json")
        echo_path.write_text(json.dumps(spec.to_json(), indent=2, sort_keys=True) + "\n")
    except (ChronorankError, ValueError, KeyError, OSError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    click.echo(f"wrote {len(records)} records to {out} (spec echo: {echo_path})")


# maps the train flags onto the shared config fields they override
_TRAIN_CONFIG_FLAGS = {
    "tau": "temperature",
    "eta": "learning_rate",
    "batch_size": "batch_size",
    "seed": "seed",
    "init_seed": "init_seed",
    "embedding_dim": "embedding_dim",
    "activation": "activation",
    "iters": "iterations",
}


def _resolve_train_config(ctx, config_path, data_dir, values):
    """flags > env > config file > defaults, tracked per field for --verbose."""
    flags = {"data_dir": data_dir}
    for flag, field in _TRAIN_CONFIG_FLAGS.items():
        if ctx.get_parameter_source(flag) == click.core.ParameterSource.COMMANDLINE:
            flags[field] = values[flag]
    if ctx.get_parameter_source("hidden_dims") == click.core.ParameterSource.COMMANDLINE:
        flags["hidden_dims"] = list(values["hidden_dims"])
    return resolve_config(config_path, flags)


@main.command()
@click.pass_context
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "checkpoint_out", required=True, type=click.Path(dir_okay=False))
@click.option("--report", "report_out", type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Shared config file; explicit flags win over its fields.")
@click.option("--data-dir", default=None, help="Base directory for relative config paths.")
@click.option("--matrix", "matrix_file", type=click.Path(exists=True, dir_okay=False),
              help="Load a (possibly edited) relevance matrix instead of building one.")
@click.option("--matrix-spec", type=click.Choice(["thresholded", "log"]), default="thresholded",
              show_default=True)
@click.option("--gamma", default=10.0, show_default=True,
              help="Window in years for the thresholded relevance.")
@click.option("--matrix-out", type=click.Path(dir_okay=False),
              help="Also save the relevance matrix used for training.")
@click.option("--iters", type=int, default=None, help="Training iterations.")
@click.option("--epochs", type=int, default=None,
              help="Alternative to --iters: full passes over the data.")
@click.option("--tau", default=0.01, show_default=True, help="Sigmoid temperature.")
@click.option("--eta", default=0.5, show_default=True, help="Learning rate (ascent step).")
@click.option("--batch-size", default=32, show_default=True)
@click.option("--hidden", "hidden_dims", multiple=True, type=int,
              help="Hidden layer width; repeat for depth. Default: one layer of 64.")
@click.option("--embedding-dim", default=16, show_default=True)
@click.option("--activation", type=click.Choice(["relu", "tanh"]), default="relu",
              show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--init-seed", default=0, show_default=True)
@click.option("--eval-data", type=click.Path(exists=True, dir_okay=False),
              help="Optional held-out data for the report's final evaluation snapshot.")
@click.option("--index-out", type=click.Path(dir_okay=False),
              help="Also write the trained index snapshot of the training data.")
@click.option("--verbose", is_flag=True)
def train(ctx, data, checkpoint_out, report_out, config_path, data_dir, matrix_file,
          matrix_spec, gamma, matrix_out, iters, epochs, tau, eta, batch_size,
          hidden_dims, embedding_dim, activation, seed, init_seed, eval_data,
          index_out, verbose):
    """Train the projection model by smooth-nDCG ascent and write a checkpoint."""
    from .model import train as run_training

    try:
        resolved, provenance = _resolve_train_config(
            ctx, config_path, data_dir,
            {"tau": tau, "eta": eta, "batch_size": batch_size, "seed": seed,
             "init_seed": init_seed, "embedding_dim": embedding_dim,
             "activation": activation, "iters": iters, "hidden_dims": hidden_dims},
        )
        if verbose:
            click.echo(format_provenance(resolved, provenance))

        records = load_dataset(data, _dataset_format(data)).records
        labeled = [r for r in records if r.year is not None]
        if not labeled:
            raise ChronorankError("dataset has no labeled records")

        if matrix_file:
            matrix = load_matrix(matrix_file)
        else:
            years = sorted({int(r.year) for r in labeled})
            spec = (
                RelevanceSpec(RelevanceKind.THRESHOLDED, gamma)
                if matrix_spec == "thresholded"
                else RelevanceSpec(RelevanceKind.LOG_SCALED)
            )
            matrix = build_matrix(years, spec)
        if matrix_out:
            save_matrix(matrix, matrix_out)

        iterations = resolved["iterations"] if iters is None and config_path else iters
        if iterations is None:
            iterations = (epochs or 1) * max(1, len(labeled) // resolved["batch_size"])
        feature_dim = labeled[0].features.size
        dims = [feature_dim] + list(resolved["hidden_dims"] or [64]) + [resolved["embedding_dim"]]
        model = init_model(dims, resolved["activation"], seed=resolved["init_seed"])
        tcfg = TrainingConfig(
            learning_rate=resolved["learning_rate"],
            batch_size=resolved["batch_size"],
            max_iterations=iterations,
            seed=resolved["seed"],
        )
        lcfg = LossConfig(temperature=resolved["temperature"])
    except (ChronorankError, ValueError, OSError) as exc:
        _fail(str(exc), EXIT_VALIDATION)

    report_path = Path(report_out) if report_out else Path(checkpoint_out).with_suffix(".report.json")
    try:
        trained, report = run_training(model, labeled, matrix, tcfg, lcfg)
    except TrainingDivergedError as exc:
        doc = exc.report.to_json()
        doc["failed_iteration"] = exc.iteration
        report_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        _fail(f"non-finite loss at iteration {exc.iteration} (report: {report_path})", EXIT_NUMERIC)

    if eval_data or index_out:
        index = build_index(trained, labeled)
        if index_out:
            index.save(index_out)
        if eval_data:
            held_out = load_dataset(eval_data, _dataset_format(eval_data)).records
            report.final_eval = evaluate(trained, index, held_out)._asdict()

    save_model(trained, checkpoint_out)
    report_path.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    figure_path = save_loss_curve(report.losses, report_path.with_suffix(".png"))
    click.echo(
        f"checkpoint: {checkpoint_out}\nreport: {report_path}\nloss curve: {figure_path}"
    )


@main.command("eval")
@click.option("--data", type=click.Path(exists=True, dir_okay=False),
              help="Labeled dataset to split and evaluate.")
@click.option("--train-data", type=click.Path(exists=True, dir_okay=False),
              help="Explicit train split (use with --test-data).")
@click.option("--test-data", type=click.Path(exists=True, dir_okay=False))
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--k", default=10, show_default=True, help="Neighbors for year estimation.")
@click.option("--test-fraction", default=0.2, show_default=True)
@click.option("--split-seed", default=0, show_default=True)
def eval_command(data, train_data, test_data, checkpoint, k, test_fraction, split_seed):
    """Index the train split, evaluate the test split, print metrics JSON."""
    try:
        if (data is None) == (train_data is None or test_data is None):
            raise ChronorankError("pass either --data, or both --train-data and --test-data")
        model = load_model(checkpoint)
        if data is not None:
            records = load_dataset(data, _dataset_format(data)).records
            split = split_dataset(records, test_fraction, split_seed)
            train_records, test_records = split.train, split.test
        else:
            train_records = load_dataset(train_data, _dataset_format(train_data)).records
            test_records = load_dataset(test_data, _dataset_format(test_data)).records
        index = build_index(model, train_records)
        metrics = evaluate(model, index, test_records, k=k)
    except (ChronorankError, ValueError, OSError) as exc:
        _fail(str(exc), EXIT_VALIDATION)
    click.echo(json.dumps({"mae": metrics.mae, "map": metrics.map, "n": metrics.n_queries}))


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--index", "index_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--features-file", required=True, type=click.Path(exists=True, dir_okay=False),
              help="File holding one comma-separated feature row.")
@click.option("--top-k", default=10, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Emit JSON instead of a table.")
def query(checkpoint, index_file, features_file, top_k, as_json):
    """Embed a feature vector and print the ranked labeled hits."""
    try:
        model = load_model(checkpoint)
        index = RetrievalIndex.load(index_file)
        line = next(
            (ln for ln in Path(features_file).read_text().splitlines() if ln.strip()), None
        )
        if line is None:
            raise ChronorankError(f"{features_file} holds no feature row")
        features = np.asarray([float(v) for v in line.split(",")])
        embedding = forward(model, features)[0]
        hits = index.query(embedding, top_k=top_k)
        estimate = index.estimate_year(embedding, k=min(top_k, len(index)))
    except (ChronorankError, ValueError, OSError) as exc:
        _fail(str(exc), EXIT_VALIDATION)

    if as_json:
        click.echo(
            json.dumps(
                {
                    "hits": [hit._asdict() for hit in hits],
                    "estimated_year": estimate.predicted_year,
                }
            )
        )
        return
    click.echo(f"{'rank':>4}  {'doc_id':<24} {'year':>6} {'similarity':>11}")
    for rank, hit in enumerate(hits, start=1):
        click.echo(f"{rank:>4}  {hit.doc_id:<24} {hit.year:>6} {hit.similarity:>11.6f}")
    click.echo(f"estimated year: {estimate.predicted_year:.2f}")


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--index", "index_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def project(checkpoint, index_file, out):
    """Write per-year cluster-center 2-D coordinates (CSV + scatter PNG)."""
    try:
        load_model(checkpoint)  # validates the checkpoint pairs with the index
        index = RetrievalIndex.load(index_file)
        points, excluded = projection_points(index)
    except (ChronorankError, ValueError, OSError) as exc:
        _fail(str(exc), EXIT_VALIDATION)

    out_path = Path(out)
    with out_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["year", "x", "y"])
        for year, x, y in points:
            writer.writerow([year, repr(x), repr(y)])
    figure_path = save_projection_scatter(points, out_path.with_suffix(".png"))
    if excluded:
        click.echo(f"excluded years (degenerate centers): {excluded}", err=True)
    click.echo(f"projection: {out_path}\nscatter: {figure_path}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--data-dir", default=None)
@click.option("--verbose", is_flag=True)
def serve(config_path, host, port, data_dir, verbose):
    """Run the human-in-the-loop HTTP service until terminated."""
    import uvicorn

    try:
        config, provenance = resolve_config(
            config_path, {"host": host, "port": port, "data_dir": data_dir}
        )
        if verbose:
            click.echo(format_provenance(config, provenance))
        state = state_from_config(config)
    except (ChronorankError, ValueError, OSError) as exc:
        _fail(str(exc), EXIT_VALIDATION)

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((config["host"], config["port"]))
    except OSError as exc:
        _fail(f"cannot bind {config['host']}:{config['port']}: {exc}", EXIT_ENVIRONMENT)
    finally:
        probe.close()

    app = create_app(state)
    uvicorn.run(app, host=config["host"], port=config["port"], log_level="warning")


if __name__ == "__main__":
    main()
