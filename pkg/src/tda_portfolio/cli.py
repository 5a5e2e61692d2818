"""Command-line interface.

Subcommands mirror the pipeline stages (`ingest`, `embed`, `cluster`,
`backtest`), with `run` executing everything in one pass, `compare`
ranking summary records, `synth` writing the bundled synthetic fixtures
and `init-config` emitting a documented default configuration. Staged
commands hand data to each other through CSV artifacts in the output
directory; floats are serialized losslessly so staged and single-pass
runs agree bit for bit.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .cluster import read_partition_csv, sector_partition, write_partition_csv
from .config import ConfigError, DEFAULT_CONFIG_TEXT, apply_overrides, load_config
from .marketdata import load_sectors, read_matrix_csv, write_matrix_csv
from .persistence import write_diagram_csv
from .pipeline import (
    PipelineError,
    backtest_stage,
    cluster_stage,
    compare,
    embed_stage,
    ingest_stage,
    run_pipeline,
    select_stage,
    vector_stage,
    write_comparison_csv,
    write_cumulative_csv,
    write_selection_csv,
    _vectorize_params,
    _write_json,
)
from .portfolio import annual_risk, backtest_summary, equal_weight_series, portfolio_sharpe, write_backtest_csv
from .synthetic import three_regime_market, two_regime_sinusoids, write_fixture
from .vectorize import read_embeddings_csv, write_embeddings_csv

logger = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser, config_required: bool = True):
    parser.add_argument("--config", required=config_required, help="YAML run configuration")
    parser.add_argument(
        "--method",
        choices=["stats", "pl1", "pl2", "pi1", "pi2", "sectors"],
        help="override embedding.method",
    )
    parser.add_argument(
        "--clustering", choices=["kmeans", "agglomerative"], help="override clustering.algorithm"
    )
    parser.add_argument("--seed", type=int, help="override clustering.seed")
    parser.add_argument("--workers", type=int, help="override worker count")
    parser.add_argument("--out", help="override output directory")
    parser.add_argument("--verbose", action="store_true", help="info-level logging")


def _load(args):
    cfg = load_config(args.config)
    cfg = apply_overrides(
        cfg,
        method=args.method,
        algorithm=args.clustering,
        seed=args.seed,
        workers=args.workers,
        out_dir=args.out,
    )
    from .config import validate

    return validate(cfg)


def _out_dir(cfg) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise PipelineError(path.stem, f"missing {path}; run `{producer}` first")
    return path


def cmd_ingest(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    train, test, report = ingest_stage(cfg)
    write_matrix_csv(train, out / "train_returns.csv")
    write_matrix_csv(test, out / "test_returns.csv")
    _write_json(
        out / "ingest_report.json",
        {
            "tickers": list(train.tickers),
            "dropped": {t: r for t, r in report.dropped},
            "filled_cells": {t: n for t, n in report.filled_cells},
            "train_days": train.n_days,
            "test_days": test.n_days,
        },
    )
    print(f"ingested {train.n_tickers} tickers ({len(report.dropped)} dropped) -> {out}")
    return 0


def cmd_embed(args) -> int:
    cfg = _load(args)
    if cfg.embedding.method == "SECTORS":
        raise PipelineError("embed", "method sectors has no embedding stage; run `cluster`")
    out = _out_dir(cfg)
    train = read_matrix_csv(_require(out / "train_returns.csv", "ingest"))
    diagrams, per_ticker, dropped = embed_stage(train, cfg.embedding, cfg.workers)
    tickers, matrix = vector_stage(diagrams, cfg.embedding)
    write_embeddings_csv(out / "embeddings.csv", tickers, matrix, _vectorize_params(cfg.embedding))
    diagram_dir = out / "diagrams"
    diagram_dir.mkdir(exist_ok=True)
    for ticker in tickers:
        write_diagram_csv(diagrams[ticker], diagram_dir / f"{ticker}.csv")
    _write_json(out / "embedding_report.json", {"per_ticker": per_ticker, "dropped": dropped})
    print(f"embedded {len(tickers)} tickers with {cfg.embedding.method} -> {out / 'embeddings.csv'}")
    return 0


def cmd_cluster(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    if cfg.embedding.method == "SECTORS":
        train = read_matrix_csv(_require(out / "train_returns.csv", "ingest"))
        partition = sector_partition(load_sectors(cfg.data.sectors, train.tickers))
    else:
        tickers, matrix = read_embeddings_csv(_require(out / "embeddings.csv", "embed"))
        partition = cluster_stage(tickers, matrix, cfg.clustering)
    write_partition_csv(partition, out / "partition.csv")
    print(f"partitioned {len(partition.assignments)} tickers into k={partition.k} -> {out / 'partition.csv'}")
    return 0


def cmd_backtest(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    train = read_matrix_csv(_require(out / "train_returns.csv", "ingest"))
    test = read_matrix_csv(_require(out / "test_returns.csv", "ingest"))
    partition = read_partition_csv(_require(out / "partition.csv", "cluster"))
    universe = [t for t in train.tickers if t in partition.assignments]
    universe_train = train.restrict(universe)
    selection = select_stage(partition, universe_train, cfg.portfolio.per_cluster)
    result = backtest_stage(universe_train, test, list(selection.tickers), cfg.portfolio)

    clustering_label = partition.method
    summary = backtest_summary(
        result, method=cfg.embedding.method, clustering=clustering_label, n_stocks=len(selection.tickers)
    )
    ew = equal_weight_series(test)
    summary["equal_weight_risk"] = annual_risk(ew)
    summary["equal_weight_sharpe"] = portfolio_sharpe(ew)

    write_selection_csv(out / "selection.csv", selection, partition)
    write_backtest_csv(result, out / "backtest.csv")
    write_cumulative_csv(out / "cumulative.csv", result)
    _write_json(out / "summary.json", summary)
    text, _ = compare([summary])
    print(text)
    return 0


def cmd_run(args) -> int:
    cfg = _load(args)
    summary = run_pipeline(cfg)
    text, _ = compare([summary])
    print(text)
    return 0


def cmd_compare(args) -> int:
    summaries = []
    for path in args.summaries:
        with open(path, encoding="utf-8") as fh:
            summaries.append(json.load(fh))
    text, annotated = compare(summaries)
    print(text)
    if args.out:
        write_comparison_csv(args.out, annotated)
        print(f"wrote {args.out}")
    return 0


def cmd_synth(args) -> int:
    if args.fixture == "two-regime":
        market = two_regime_sinusoids() if args.seed is None else two_regime_sinusoids(seed=args.seed)
    else:
        market = three_regime_market() if args.seed is None else three_regime_market(seed=args.seed)
    paths = write_fixture(market, args.out)
    split = market.split
    print(f"wrote {paths['prices']}, {paths['sectors']}, {paths['labels']}")
    print(
        "suggested periods: "
        f"train {split.train_start} .. {split.train_end}, test {split.test_start} .. {split.test_end}"
    )
    return 0


def cmd_init_config(args) -> int:
    if args.out:
        Path(args.out).write_text(DEFAULT_CONFIG_TEXT, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(DEFAULT_CONFIG_TEXT)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tda-portfolio",
        description="Cluster stocks by topological signatures of delay embeddings "
        "and backtest a minimum-variance portfolio built from the clusters.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, help_text in [
        ("ingest", cmd_ingest, "load prices, compute returns, write train/test matrices"),
        ("embed", cmd_embed, "delay-embed train series and write embedding vectors"),
        ("cluster", cmd_cluster, "partition stocks from embeddings (or sector labels)"),
        ("backtest", cmd_backtest, "select stocks per cluster and run the rolling backtest"),
        ("run", cmd_run, "full pipeline in one pass"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("compare", help="rank summary records by risk")
    p.add_argument("summaries", nargs="+", help="summary.json files")
    p.add_argument("--out", help="write comparison CSV here")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("synth", help="write a bundled synthetic fixture")
    p.add_argument("--fixture", choices=["two-regime", "three-regime"], default="two-regime")
    p.add_argument("--out", default="data", help="output directory")
    p.add_argument("--seed", type=int, help="override the fixture seed")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("init-config", help="emit a documented default config")
    p.add_argument("--out", help="write here instead of stdout")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_init_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except (PipelineError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
