"""End-to-end pipeline: ingest -> embed -> cluster -> select -> backtest.

Each stage is a plain function so the CLI can run them separately against
staged CSV artifacts or all at once in memory. Stage failures surface as
PipelineError with the stage name (and ticker, for per-stock work) in the
message. All artifacts are deterministic; wall-clock timings go to an
opt-in sidecar so reruns stay byte-identical.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import Partition, agglomerative, kmeans, sector_partition, standardize, write_partition_csv
from .config import EmbeddingConfig, RunConfig
from .marketdata import PeriodSplit, PriceMatrix, compute_returns, ingest_prices, load_sectors, split
from .persistence import PersistenceDiagram, SimplexBudgetError, vr_diagram, write_diagram_csv
from .portfolio import (
    BacktestResult,
    annual_risk,
    backtest,
    backtest_summary,
    equal_weight_series,
    portfolio_sharpe,
    select_stocks,
    write_backtest_csv,
)
from .takens import EmbeddingParams, SeriesTooShortError, embed, select_delay, select_dimension
from .vectorize import VectorizeParams, embedding_matrix, write_embeddings_csv

logger = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def _vectorize_params(e: EmbeddingConfig) -> VectorizeParams:
    return VectorizeParams(
        method=e.method,
        landscape_layers=e.landscape_layers,
        landscape_samples=e.landscape_samples,
        image_resolution=e.image_resolution,
        sigma_scale=e.sigma_scale,
        global_grid=e.global_grid,
    )


def ingest_stage(cfg: RunConfig):
    try:
        # no date_range here: the return on train_start needs the price row
        # just before it, so windowing is left entirely to split()
        prices, report = ingest_prices(cfg.data.prices)
        returns = compute_returns(prices)
        periods = PeriodSplit(
            train_start=cfg.periods.train_start,
            train_end=cfg.periods.train_end,
            test_start=cfg.periods.test_start,
            test_end=cfg.periods.test_end,
        )
        train, test = split(returns, periods)
    except (OSError, ValueError) as exc:
        raise PipelineError("ingest", str(exc)) from exc
    logger.info(
        "ingest: %d tickers, %d train days, %d test days (%d dropped)",
        train.n_tickers, train.n_days, test.n_days, len(report.dropped),
    )
    return train, test, report


def _embed_one(payload):
    """Per-stock takens + persistence work; runs in worker processes."""
    ticker, series, e = payload
    series = np.asarray(series, dtype=float)
    try:
        tau = select_delay(series, tau_max=e["tau_max"], bins=e["bins"])
        dim = select_dimension(
            series, tau, dim_max=e["dim_max"], threshold=e["fnn_threshold"], r_tol=e["r_tol"]
        )
        params = EmbeddingParams(tau=tau, dim=dim, stride=e["stride"])
        cloud = embed(series, params, ticker=ticker)
        if not cloud.has_min_points():
            return ("drop", ticker, f"only {len(cloud)} delay vectors for dim {dim}")
        diagram = vr_diagram(cloud, max_homology_dim=e["max_homology_dim"], budget=e["budget"])
    except SeriesTooShortError as exc:
        return ("drop", ticker, str(exc))
    except SimplexBudgetError as exc:
        return ("error", ticker, str(exc))
    return ("ok", ticker, params, len(cloud), diagram)


def embed_stage(train: PriceMatrix, e: EmbeddingConfig, workers: int = 1):
    """Delay-embed every train series and compute its persistence diagram.

    Returns (diagrams, per_ticker_params, dropped). Tickers whose series
    cannot support an embedding are dropped with a recorded reason; real
    failures (budget blowups) propagate.
    """
    cfg = {
        "tau_max": e.tau_max,
        "bins": e.bins,
        "dim_max": e.dim_max,
        "fnn_threshold": e.fnn_threshold,
        "r_tol": e.r_tol,
        "stride": e.stride,
        "max_homology_dim": e.max_homology_dim,
        "budget": e.budget,
    }
    payloads = [(t, train.column(t), cfg) for t in train.tickers]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_embed_one, payloads, chunksize=1))
    else:
        results = [_embed_one(p) for p in payloads]

    diagrams: dict[str, PersistenceDiagram] = {}
    per_ticker: dict[str, dict] = {}
    dropped: dict[str, str] = {}
    for result in results:
        kind, ticker = result[0], result[1]
        if kind == "ok":
            _, _, params, n_points, diagram = result
            diagrams[ticker] = diagram
            per_ticker[ticker] = {
                "tau": params.tau,
                "dim": params.dim,
                "stride": params.stride,
                "points": n_points,
            }
        elif kind == "drop":
            dropped[ticker] = result[2]
            logger.warning("embed: dropping %s: %s", ticker, result[2])
        else:
            raise PipelineError("embed", f"ticker {ticker}: {result[2]}")
    if not diagrams:
        raise PipelineError("embed", "no tickers survived embedding")
    return diagrams, per_ticker, dropped


def vector_stage(diagrams: dict, e: EmbeddingConfig):
    try:
        tickers, matrix = embedding_matrix(
            diagrams, _vectorize_params(e), h2_available=e.max_homology_dim >= 2
        )
    except ValueError as exc:
        raise PipelineError("vectorize", str(exc)) from exc
    return tickers, matrix


def cluster_stage(tickers, matrix, clustering) -> Partition:
    X = standardize(matrix) if clustering.standardize else np.asarray(matrix, dtype=float)
    try:
        if clustering.algorithm == "kmeans":
            return kmeans(list(tickers), X, k=clustering.k, seed=clustering.seed, restarts=clustering.restarts)
        return agglomerative(list(tickers), X, k=clustering.k, linkage=clustering.linkage)
    except ValueError as exc:
        raise PipelineError("cluster", str(exc)) from exc


def select_stage(partition: Partition, train: PriceMatrix, per_cluster: int):
    try:
        return select_stocks(partition, train, per_cluster=per_cluster)
    except ValueError as exc:
        raise PipelineError("select", str(exc)) from exc


def backtest_stage(train: PriceMatrix, test: PriceMatrix, tickers, portfolio_cfg) -> BacktestResult:
    try:
        test_sel = test.restrict(tickers)
        train_sel = train.restrict(tickers)
        return backtest(
            test_sel, train_sel, window=portfolio_cfg.window, lookback=portfolio_cfg.lookback
        )
    except ValueError as exc:
        raise PipelineError("backtest", str(exc)) from exc


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_selection_csv(path, selection, partition: Partition) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ticker", "cluster", "train_sharpe"])
        for ticker in selection.tickers:
            writer.writerow(
                [ticker, partition.assignments[ticker], f"{selection.sharpes[ticker]:.17g}"]
            )


def write_cumulative_csv(path, result: BacktestResult) -> None:
    """Cumulative growth of 1 unit invested at the start of the test period."""
    import csv

    growth = np.cumprod(1.0 + result.y)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "growth"])
        for d, g in zip(result.dates, growth):
            writer.writerow([d.isoformat(), f"{g:.17g}"])


def run_pipeline(cfg: RunConfig, out_dir=None) -> dict:
    """Execute the full pipeline, write artifacts, return the summary record."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}

    def timed(stage, fn, *args, **kwargs):
        start = time.perf_counter()
        result = fn(*args, **kwargs)
        timings[stage] = time.perf_counter() - start
        logger.info("stage %s: %.2fs", stage, timings[stage])
        return result

    train, test, report = timed("ingest", ingest_stage, cfg)

    per_ticker: dict[str, dict] = {}
    embed_dropped: dict[str, str] = {}
    if cfg.embedding.method == "SECTORS":
        try:
            sectors = load_sectors(cfg.data.sectors, train.tickers)
        except (OSError, ValueError) as exc:
            raise PipelineError("cluster", str(exc)) from exc
        partition = sector_partition(sectors)
        timings["embed"] = timings["vectorize"] = 0.0
        clustering_label = "sectors"
        universe_train = train
    else:
        diagrams, per_ticker, embed_dropped = timed(
            "embed", embed_stage, train, cfg.embedding, cfg.workers
        )
        tickers, matrix = timed("vectorize", vector_stage, diagrams, cfg.embedding)
        write_embeddings_csv(out / "embeddings.csv", tickers, matrix, _vectorize_params(cfg.embedding))
        diagram_dir = out / "diagrams"
        diagram_dir.mkdir(exist_ok=True)
        for ticker in tickers:
            write_diagram_csv(diagrams[ticker], diagram_dir / f"{ticker}.csv")
        partition = timed("cluster", cluster_stage, tickers, matrix, cfg.clustering)
        universe_train = train.restrict(tickers)
        clustering_label = cfg.clustering.algorithm
        if cfg.clustering.algorithm == "agglomerative":
            clustering_label = f"agglomerative-{cfg.clustering.linkage}"
    write_partition_csv(partition, out / "partition.csv")

    selection = timed("select", select_stage, partition, universe_train, cfg.portfolio.per_cluster)
    result = timed(
        "backtest", backtest_stage, universe_train, test, list(selection.tickers), cfg.portfolio
    )

    ew = equal_weight_series(test)
    summary = backtest_summary(
        result,
        method=cfg.embedding.method,
        clustering=clustering_label,
        n_stocks=len(selection.tickers),
    )
    summary["equal_weight_risk"] = annual_risk(ew)
    summary["equal_weight_sharpe"] = portfolio_sharpe(ew)

    write_selection_csv(out / "selection.csv", selection, partition)
    write_backtest_csv(result, out / "backtest.csv")
    write_cumulative_csv(out / "cumulative.csv", result)
    _write_json(out / "summary.json", summary)

    manifest = {
        "artifact_version": __version__,
        "config": cfg.to_dict(),
        "universe": {
            "tickers": list(train.tickers),
            "dropped_ingest": {t: r for t, r in report.dropped},
            "filled_cells": {t: n for t, n in report.filled_cells},
            "train_days": train.n_days,
            "test_days": test.n_days,
        },
        "embedding": {"per_ticker": per_ticker, "dropped": embed_dropped},
        "clustering": {
            "method": partition.method,
            "k": partition.k,
            "sizes": partition.sizes(),
        },
        "selection": {
            "tickers": list(selection.tickers),
            "sharpes": {t: selection.sharpes[t] for t in selection.tickers},
            "realized_size": len(selection.tickers),
        },
        "backtest": {
            "rebalances": len(result.rebalance_dates),
            "window": cfg.portfolio.window,
            "lookback": cfg.portfolio.lookback,
        },
        "stages": sorted(timings),
        "timings_file": "timings.json" if cfg.emit_timings else None,
    }
    _write_json(out / "manifest.json", manifest)
    if cfg.emit_timings:
        _write_json(out / "timings.json", {k: round(v, 6) for k, v in timings.items()})
    return summary


SUMMARY_COLUMNS = ("method", "clustering", "risk", "sharpe", "n_stocks", "rebalances")


def compare(summaries: list[dict]) -> tuple[str, list[dict]]:
    """Rank summary records by risk; returns (text table, annotated rows)."""
    if not summaries:
        raise ValueError("need at least one summary")
    rows = sorted(summaries, key=lambda s: (s["risk"], s["method"]))
    best_risk = min(s["risk"] for s in rows)
    best_sharpe = max(s["sharpe"] for s in rows)
    annotated = []
    for s in rows:
        row = {k: s.get(k) for k in SUMMARY_COLUMNS}
        row["best_risk"] = s["risk"] == best_risk
        row["best_sharpe"] = s["sharpe"] == best_sharpe
        annotated.append(row)

    header = f"{'method':<8} {'clustering':<22} {'risk':>8} {'sharpe':>8} {'stocks':>6} {'rebal':>5}  flags"
    lines = [header, "-" * len(header)]
    for row in annotated:
        flags = "".join(["R" if row["best_risk"] else "", "S" if row["best_sharpe"] else ""])
        lines.append(
            f"{row['method']:<8} {row['clustering']:<22} {row['risk']:>8.4f} "
            f"{row['sharpe']:>8.4f} {row['n_stocks']:>6d} {row['rebalances']:>5d}  {flags}"
        )
    return "\n".join(lines), annotated


def write_comparison_csv(path, annotated: list[dict]) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(SUMMARY_COLUMNS) + ["best_risk", "best_sharpe"])
        for row in annotated:
            writer.writerow(
                [row["method"], row["clustering"], f"{row['risk']:.17g}", f"{row['sharpe']:.17g}",
                 row["n_stocks"], row["rebalances"], row["best_risk"], row["best_sharpe"]]
            )
