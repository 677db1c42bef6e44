"""Operator entry point: neuron ingest | train | eval | serve | search | synth.

Exit codes are part of the contract: 0 ok, 2 bad input, 3 upstream
(solver) failure, 4 storage failure, 5 configuration or fingerprint
mismatch.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from . import evaluation, reporting
from .config import build_clients, load_run_config
from .errors import (
    ClientError,
    ConfigError,
    CorruptSnapshot,
    DatasetError,
    DuplicateProblem,
    EmptyDataset,
    EmptyText,
    FingerprintMismatch,
    NeuronError,
    NotFound,
    SolverUnavailable,
    StorageFailure,
    StoreMissing,
    Ungradable,
    VersionMismatch,
)
from .service import create_app
from .store import MemoryStore

EXIT_INPUT = 2
EXIT_UPSTREAM = 3
EXIT_STORAGE = 4
EXIT_CONFIG = 5

DEFAULT_ADDR = "127.0.0.1:8080"
ADDR_ENV = "NEURON_ADDR"


def _exit_code(err: NeuronError) -> int:
    if isinstance(err, (SolverUnavailable, ClientError)):
        return EXIT_UPSTREAM
    if isinstance(err, StorageFailure):
        return EXIT_STORAGE
    if isinstance(err, (ConfigError, FingerprintMismatch, VersionMismatch, StoreMissing, CorruptSnapshot)):
        return EXIT_CONFIG
    if isinstance(err, (DatasetError, EmptyDataset, EmptyText, Ungradable, DuplicateProblem, NotFound)):
        return EXIT_INPUT
    return EXIT_INPUT


def _fail(err: NeuronError) -> None:
    click.echo(f"error: {err}", err=True)
    sys.exit(_exit_code(err))


def _snippet(text: str, n: int = 60) -> str:
    flat = " ".join(text.split())
    return flat if len(flat) <= n else flat[: n - 3] + "..."


@click.group()
def main() -> None:
    """Experiential memory for language-model problem solving."""


@main.command()
@click.argument("file", type=click.Path())
@click.option("--format", "form", type=click.Choice(["auto", "gsm8k", "plain"]), default="auto", show_default=True)
def ingest(file: str, form: str) -> None:
    """Validate a JSONL dataset and summarize it."""
    try:
        dataset = evaluation.load_dataset_jsonl(file, form)
    except NeuronError as err:
        _fail(err)
        return
    marker_count = 0
    for raw in Path(file).read_text(encoding="utf-8").splitlines():
        if raw.strip() and "####" in raw:
            marker_count += 1
    if marker_count == 0:
        detected = "plain"
    elif marker_count >= len(dataset):
        detected = "marker"
    else:
        detected = "mixed"
    sample = dataset[0]
    click.echo(f"{len(dataset)} problems")
    click.echo(f"gold-answer form: {detected}")
    click.echo(f"sample: {sample.id}: {_snippet(sample.problem)} -> {sample.gold_answer}")


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["auto", "human", "auto-then-human"]), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
def train(data_path: str, store_dir: str, mode: str | None, config_path: str | None, seed: int | None) -> None:
    """Populate memory from the training half of a dataset."""
    try:
        cfg = load_run_config(config_path, overrides={"loop_mode": mode, "seed": seed})
        dataset = evaluation.load_dataset_jsonl(data_path)
        train_set, _ = evaluation.split(dataset, 0.5, cfg.seed)
        solver, refiner = build_clients(cfg, dataset)
        if solver is None:
            raise ConfigError(f"client kind {cfg.client_kind!r} cannot build a solver here")
        with MemoryStore(cfg.embedder_config(), store_dir, create=True) as store:
            stats = evaluation.train_memory(train_set, store, cfg.loop_config(), solver, refiner)
            store.compact()
    except NeuronError as err:
        _fail(err)
        return
    click.echo(f"trained on {len(train_set)} problems")
    for status in sorted(stats):
        click.echo(f"  {status:<16} {stats[status]}")
    click.echo(f"  {'total':<16} {sum(stats.values())}")


@main.command(name="eval")
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--store", "store_dir", type=click.Path(), default=None)
@click.option("--arm", type=click.Choice(["baseline", "augmented", "both"]), default="both", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Report directory [default: <store>/reports]")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
def eval_cmd(
    data_path: str,
    store_dir: str | None,
    arm: str,
    out_dir: str | None,
    config_path: str | None,
    seed: int | None,
) -> None:
    """Run baseline and/or augmented arms on the held-out half."""
    try:
        cfg = load_run_config(config_path, overrides={"seed": seed})
        dataset = evaluation.load_dataset_jsonl(data_path)
        _, test_set = evaluation.split(dataset, 0.5, cfg.seed)
        solver, _ = build_clients(cfg, dataset)
        if solver is None:
            raise ConfigError(f"client kind {cfg.client_kind!r} cannot build a solver here")

        out = Path(out_dir) if out_dir else Path(store_dir or ".") / "reports"
        out.mkdir(parents=True, exist_ok=True)

        baseline_report = None
        augmented_report = None
        if arm in ("baseline", "both"):
            baseline_report = evaluation.run_arm(test_set, solver)
            reporting.write_report_json(baseline_report, out / "report_baseline.json")
            reporting.render_arm_figure(baseline_report, out / "figure_baseline.png")
        if arm in ("augmented", "both"):
            if store_dir is None:
                raise StoreMissing("augmented arm needs --store")
            with MemoryStore(cfg.embedder_config(), store_dir, create=False) as store:
                augmented_report = evaluation.run_arm(test_set, solver, store)
            reporting.write_report_json(augmented_report, out / "report_augmented.json")
            reporting.render_arm_figure(augmented_report, out / "figure_augmented.png")
        reporting.write_items_csv(
            [r for r in (baseline_report, augmented_report) if r is not None],
            out / "items.csv",
        )
        if baseline_report is not None and augmented_report is not None:
            cmp = evaluation.compare(baseline_report, augmented_report)
            reporting.write_comparison_json(cmp, out / "comparison.json")
            reporting.render_comparison_figure(cmp, out / "comparison.png")
    except NeuronError as err:
        _fail(err)
        return
    if baseline_report is not None and augmented_report is not None:
        click.echo(
            f"baseline={baseline_report.accuracy:.3f} "
            f"augmented={augmented_report.accuracy:.3f} "
            f"delta={cmp.delta_points:+.1f}pp"
        )
    elif baseline_report is not None:
        click.echo(f"baseline={baseline_report.accuracy:.3f}")
    else:
        click.echo(f"augmented={augmented_report.accuracy:.3f}")


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--addr", default=None, help=f"host:port [default: ${ADDR_ENV} or {DEFAULT_ADDR}]")
@click.option("--data", "data_path", type=click.Path(), default=None, help="Dataset for an oracle-backed solver")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--cors", "cors_origin", default=None, help="Allowed console origin (use * in dev)")
def serve(
    store_dir: str,
    addr: str | None,
    data_path: str | None,
    config_path: str | None,
    cors_origin: str | None,
) -> None:
    """Run the HTTP API for the review console."""
    import uvicorn

    try:
        cfg = load_run_config(config_path)
        dataset = evaluation.load_dataset_jsonl(data_path) if data_path else None
        store = MemoryStore(cfg.embedder_config(), store_dir, create=False)
        solver, _ = build_clients(cfg, dataset)
    except NeuronError as err:
        _fail(err)
        return
    addr = addr or os.environ.get(ADDR_ENV) or DEFAULT_ADDR
    host, _, port = addr.partition(":")
    app = create_app(
        store,
        solver,
        cors_origin=cors_origin,
        last_eval_path=Path(store_dir) / "reports" / "comparison.json",
    )
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080), log_level="warning")


@main.command()
@click.argument("query")
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("-k", "top_k", type=int, default=3, show_default=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
def search(query: str, store_dir: str, top_k: int, config_path: str | None) -> None:
    """Similarity-search memory from the terminal."""
    try:
        cfg = load_run_config(config_path)
        with MemoryStore(cfg.embedder_config(), store_dir, create=False) as store:
            results = store.search(store.embed_text(query), top_k)
            rows = [(r, store.get(r.record_id)) for r in results]
    except NeuronError as err:
        _fail(err)
        return
    if not rows:
        click.echo("no results")
        return
    for result, record in rows:
        click.echo(f"{result.rank:>2}  {result.score:.4f}  {record.status:<15} {_snippet(record.problem)}")


@main.command()
@click.option("--n", "n_problems", type=int, default=400, show_default=True)
@click.option("--families", "n_families", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def synth(n_problems: int, n_families: int, seed: int, out_path: str) -> None:
    """Generate a synthetic templated math dataset."""
    from .synthetic import generate_dataset

    dataset = generate_dataset(n_problems, n_families, seed)
    evaluation.write_dataset_jsonl(dataset, out_path)
    click.echo(f"wrote {len(dataset)} problems to {out_path}")


if __name__ == "__main__":
    main()
