"""Command-line entry point.

Every subcommand is a thin adapter over the library: it parses arguments,
validates paths, calls the module operation, and writes exactly the
declared outputs.  Failures print one machine-readable line
(``error:<category>: message``) and exit 1; usage problems exit 2.
Seeds default to a fixed constant so repeated CI runs are reproducible.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import clustering, proposals, report as report_mod
from .dataset import load_dataset, merge_datasets, save_dataset, validate_dataset
from .errors import PredkitError
from .metrics import evaluate
from .predictions import load_predictions
from .service.state import DEFAULT_LEASE_TTL, CampaignService

DEFAULT_SEED = 0


def _fail(category: str, message: str) -> None:
    click.echo(f"error:{category}: {message}", err=True)
    sys.exit(1)


def handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except PredkitError as exc:
            _fail(exc.category, str(exc))
        except OSError as exc:
            _fail("io", str(exc))

    return wrapper


def _parse_int_list(value: str, what: str) -> list[int]:
    try:
        return [int(part) for part in value.split(",") if part.strip() != ""]
    except ValueError:
        raise click.BadParameter(f"{what} must be a comma-separated list of integers") from None


def _resolve_predicate(dataset, predicate: str) -> int:
    if predicate.isdigit():
        pid = int(predicate)
        if not 0 <= pid < dataset.categories.num_predicates:
            _fail("unknown-predicate", f"predicate id {pid} out of range")
        return pid
    try:
        return dataset.categories.predicate_id(predicate)
    except KeyError:
        _fail("unknown-predicate", f"unknown predicate name {predicate!r}")


@click.group()
@click.version_option(package_name="predkit")
def main() -> None:
    """Rare-predicate evaluation metrics and annotation pipeline tools."""


@main.command()
@click.argument("dataset_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@handle_errors
def validate(dataset_path: Path) -> None:
    """Check an annotation file against every dataset invariant."""
    from .dataset import parse_dataset

    dataset = parse_dataset(dataset_path.read_bytes(), check=False)
    report = validate_dataset(dataset)
    for issue in report:
        click.echo(str(issue))
    if not report.ok:
        _fail("invalid-dataset", f"{len(report)} violation(s) in {dataset_path}")
    click.echo(
        f"OK: {len(dataset.images)} images, "
        f"{dataset.num_relations()} relations, no violations"
    )


@main.command()
@click.argument("base", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("addition", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False, path_type=Path))
@handle_errors
def merge(base: Path, addition: Path, output: Path) -> None:
    """Append one annotation file to another (categories must match)."""
    merged = merge_datasets(load_dataset(base), load_dataset(addition))
    save_dataset(merged, output)
    click.echo(
        f"merged {len(merged.images)} images, {merged.num_relations()} relations -> {output}"
    )


@main.command()
@click.option("--campaign", type=click.Path(exists=True, file_okay=False, path_type=Path),
              envvar="PREDKIT_CAMPAIGN_DIR", help="Campaign directory to export from.")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Annotation file to re-export canonically.")
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--training", type=click.Path(dir_okay=False, path_type=Path),
              help="Also write a positives-only base-schema file for retraining.")
@handle_errors
def export(campaign: Path | None, input_path: Path | None, output: Path, training: Path | None) -> None:
    """Export campaign annotations (or canonicalize an annotation file)."""
    if (campaign is None) == (input_path is None):
        raise click.UsageError("exactly one of --campaign or --input is required")
    if campaign is not None:
        service = CampaignService.open(campaign, fsync=False)
        dataset = service.export_annotations()
        save_dataset(dataset, output)
        if training is not None:
            save_dataset(service.export_training(), training, include_extensions=False)
            click.echo(f"training export -> {training}")
    else:
        if training is not None:
            raise click.UsageError("--training requires --campaign")
        dataset = load_dataset(input_path)
        save_dataset(dataset, output)
    click.echo(
        f"exported {len(dataset.images)} images, {dataset.num_relations()} relations -> {output}"
    )


@main.command()
@click.option("--features", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("-k", "--num-clusters", default=clustering.DEFAULT_NUM_CLUSTERS, show_default=True)
@click.option("--seed", default=DEFAULT_SEED, show_default=True)
@click.option("--max-iters", default=300, show_default=True)
@click.option("--tol", default=1e-6, show_default=True)
@click.option("--exclude", default="", help="Comma-separated cluster ids to exclude.")
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False, path_type=Path))
@handle_errors
def cluster(features: Path, num_clusters: int, seed: int, max_iters: int, tol: float,
            exclude: str, output: Path) -> None:
    """Group images into diversity clusters with seeded k-Means."""
    matrix = clustering.load_features(features)
    model = clustering.kmeans(matrix, k=num_clusters, seed=seed, max_iters=max_iters, tol=tol)
    if exclude:
        model = model.with_exclusions(set(_parse_int_list(exclude, "--exclude")))
    clustering.save_cluster_model(model, output)
    sizes = np.bincount(list(model.assignments.values()), minlength=model.num_clusters)
    click.echo(
        f"k={model.num_clusters} clusters over {len(model.assignments)} images, "
        f"final SSE {model.sse_history[-1]:.4f}, sizes min/max {sizes.min()}/{sizes.max()} "
        f"-> {output}"
    )


@main.command()
@click.option("--train", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--threshold", default=proposals.DEFAULT_COOCCURRENCE_THRESHOLD, show_default=True,
              help="Minimum pair count; combinations below it are noise.")
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False, path_type=Path))
@handle_errors
def stats(train: Path, threshold: int, output: Path) -> None:
    """Count subject-predicate / predicate-object pairs in a training set."""
    dataset = load_dataset(train)
    counts = proposals.build_cooccurrence(dataset, threshold=threshold)
    proposals.save_cooccurrence(counts, output)
    click.echo(
        f"{len(counts.sp_counts)} subject-predicate and {len(counts.po_counts)} "
        f"predicate-object pairs (threshold {threshold}) -> {output}"
    )


@main.command()
@click.option("--dataset", "dataset_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--preds", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--predicate", required=True, help="Predicate name or id to build a queue for.")
@click.option("--stats", "stats_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--clusters", "clusters_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="JSON config with excluded_clusters and per_cluster_quota.")
@click.option("--quota", type=int, default=None,
              help="Max proposals per cluster (overrides the config; default 100).")
@click.option("--probabilities", is_flag=True,
              help="Prediction tensors hold softmax probabilities, not logits; "
                   "convert via log before ratio ranking.")
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False, path_type=Path))
@handle_errors
def rank(dataset_path: Path, preds: Path, predicate: str, stats_path: Path,
         clusters_path: Path, config_path: Path | None, quota: int | None,
         probabilities: bool, output: Path) -> None:
    """Rank relation candidates for one predicate into a proposal queue."""
    dataset = load_dataset(dataset_path)
    predicate_id = _resolve_predicate(dataset, predicate)
    clusters = clustering.load_cluster_model(clusters_path)
    config = json.loads(config_path.read_text()) if config_path else {}
    excluded = set(config.get("excluded_clusters", []))
    if excluded:
        clusters = clusters.with_exclusions(clusters.excluded_clusters | excluded)
    if quota is None:
        quota = int(config.get("per_cluster_quota", 100))
    prediction_set = load_predictions(preds)
    if probabilities:
        prediction_set = _probabilities_to_logits(prediction_set)
    queue = proposals.build_proposal_queue(
        dataset=dataset,
        preds=prediction_set,
        predicate_id=predicate_id,
        stats=proposals.load_cooccurrence(stats_path),
        clusters=clusters,
        per_cluster_quota=quota,
    )
    proposals.save_proposals(queue, output)
    name = dataset.categories.predicate_name(predicate_id)
    click.echo(f"{len(queue)} proposals for {name!r} -> {output}")


def _probabilities_to_logits(prediction_set):
    """Log-transform probability tensors so the exp(logit gap) ratio applies.

    Probabilities of exactly 0 are clamped to the smallest positive float:
    proposal scoring requires finite logits.
    """
    from .predictions import PredictionMatrix, PredictionSet

    tiny = np.finfo(np.float64).tiny
    matrices = {
        image_id: PredictionMatrix(
            image_id=image_id,
            pairs=m.pairs,
            scores=np.log(np.maximum(m.scores, tiny)),
            no_relation=np.log(np.maximum(m.no_relation, tiny)),
        )
        for image_id, m in prediction_set.matrices.items()
    }
    return PredictionSet(num_predicates=prediction_set.num_predicates, matrices=matrices)


def _evaluate_options(func):
    options = [
        click.option("--gt", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
                     help="Annotation file with positive and negative triplets."),
        click.option("--preds", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path)),
        click.option("--k", "k_list", default="20,50", show_default=True,
                     help="Comma-separated k values for Recall@k."),
        click.option("--graph-constraint/--no-graph-constraint", default=True, show_default=True),
        click.option("--strict/--lenient", "strict", default=True, show_default=True,
                     help="Fail on annotated pairs without prediction rows, or score them at -inf."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@main.command(name="evaluate")
@_evaluate_options
@click.option("--format", "output_format", type=click.Choice(["table", "structured"]),
              default="table", show_default=True)
@handle_errors
def evaluate_cmd(gt: Path, preds: Path, k_list: str, graph_constraint: bool,
                 strict: bool, output_format: str) -> None:
    """Per-predicate metric report (P-AUC, PDD, PDO, R@k) on stdout."""
    result = evaluate(
        load_dataset(gt),
        load_predictions(preds),
        ks=_parse_int_list(k_list, "--k"),
        graph_constraint=graph_constraint,
        strict=strict,
    )
    if output_format == "structured":
        click.echo(json.dumps(report_mod.report_to_dict(result), indent=2))
    else:
        click.echo(report_mod.format_table(result), nl=False)


@main.command(name="report")
@_evaluate_options
@click.option("-o", "--outdir", required=True, type=click.Path(file_okay=False, path_type=Path))
@handle_errors
def report_cmd(gt: Path, preds: Path, k_list: str, graph_constraint: bool,
               strict: bool, outdir: Path) -> None:
    """Write the metric report plus rendered figures to a directory."""
    result = evaluate(
        load_dataset(gt),
        load_predictions(preds),
        ks=_parse_int_list(k_list, "--k"),
        graph_constraint=graph_constraint,
        strict=strict,
    )
    written = report_mod.write_report_files(result, outdir)
    click.echo(report_mod.format_table(result), nl=False)
    click.echo(f"report files -> {written['table']}, {written['csv']}, {written['json']}")
    for figure in written["figures"]:
        click.echo(f"figure -> {figure}")


@main.command()
@click.option("--campaign", required=True, envvar="PREDKIT_CAMPAIGN_DIR",
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8210, show_default=True)
@click.option("--lease-ttl", default=DEFAULT_LEASE_TTL, show_default=True,
              help="Seconds before an unanswered proposal returns to the queue.")
@click.option("--images-dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--ui-dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@handle_errors
def serve(campaign: Path, host: str, port: int, lease_ttl: float,
          images_dir: Path | None, ui_dir: Path | None) -> None:
    """Serve the annotation API (and UI, if built) for a campaign directory."""
    import uvicorn

    from .service.app import create_app

    service = CampaignService.open(campaign, lease_ttl=lease_ttl)
    app = create_app(service, images_dir=images_dir, ui_dir=ui_dir)
    click.echo(f"serving campaign {campaign} on http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
