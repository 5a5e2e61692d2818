"""Stage functions and the end-to-end run."""

import dataclasses
import filecmp
import json
from pathlib import Path

import numpy as np
import pytest

from tda_portfolio.config import from_dict, validate
from tda_portfolio.pipeline import (
    PipelineError,
    backtest_stage,
    cluster_stage,
    compare,
    embed_stage,
    ingest_stage,
    run_pipeline,
    vector_stage,
    write_comparison_csv,
)
from tda_portfolio.portfolio import backtest


EXPECTED_ARTIFACTS = {
    "embeddings.csv",
    "partition.csv",
    "selection.csv",
    "backtest.csv",
    "cumulative.csv",
    "summary.json",
    "manifest.json",
}


def test_run_pipeline_writes_all_artifacts(small_config, tmp_path):
    out = tmp_path / "run"
    summary = run_pipeline(small_config, out_dir=out)
    names = {p.name for p in out.iterdir() if p.is_file()}
    assert EXPECTED_ARTIFACTS <= names
    assert "timings.json" not in names  # opt-in only
    manifest = json.loads((out / "manifest.json").read_text())
    diagrams = sorted(p.name for p in (out / "diagrams").iterdir())
    assert len(diagrams) == len(manifest["universe"]["tickers"])
    for key in ("method", "clustering", "risk", "sharpe", "n_stocks",
                "rebalances", "equal_weight_risk", "equal_weight_sharpe"):
        assert key in summary
    assert summary["method"] == "PI1"
    assert json.loads((out / "summary.json").read_text()) == summary


def test_run_pipeline_reruns_byte_identical(small_config, tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    run_pipeline(small_config, out_dir=out_a)
    run_pipeline(small_config, out_dir=out_b)
    files_a = sorted(p.relative_to(out_a) for p in out_a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(out_b) for p in out_b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert filecmp.cmp(out_a / rel, out_b / rel, shallow=False), rel


def test_timings_sidecar_is_opt_in(small_config, tmp_path):
    cfg = dataclasses.replace(small_config, emit_timings=True)
    out = tmp_path / "timed"
    run_pipeline(cfg, out_dir=out)
    timings = json.loads((out / "timings.json").read_text())
    assert set(timings) == {"ingest", "embed", "vectorize", "cluster", "select", "backtest"}
    assert all(v >= 0 for v in timings.values())


def test_sector_partition_path(small_config, tmp_path):
    cfg = dataclasses.replace(
        small_config,
        embedding=dataclasses.replace(small_config.embedding, method="SECTORS"),
    )
    out = tmp_path / "sectors"
    summary = run_pipeline(cfg, out_dir=out)
    assert summary["method"] == "SECTORS"
    assert summary["clustering"] == "sectors"
    assert not (out / "embeddings.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["clustering"]["method"] == "sectors"
    assert manifest["clustering"]["k"] == 2  # Technology + Utilities


def test_ingest_stage_wraps_errors():
    cfg = validate(
        from_dict({"data": {"prices": "does/not/exist.csv"}}), check_files=False
    )
    with pytest.raises(PipelineError, match=r"\[ingest\]"):
        ingest_stage(cfg)


def test_embed_stage_raises_when_everything_drops(small_config):
    train, _, _ = ingest_stage(small_config)
    # 30 days cannot support a tau search up to 20
    short = train.__class__(train.tickers, train.dates[:30], train.values[:30])
    with pytest.raises(PipelineError, match="no tickers survived"):
        embed_stage(short, small_config.embedding)


def test_embed_stage_worker_pool_matches_serial(small_config):
    train, _, _ = ingest_stage(small_config)
    serial, per_serial, _ = embed_stage(train, small_config.embedding, workers=1)
    pooled, per_pooled, _ = embed_stage(train, small_config.embedding, workers=2)
    assert per_serial == per_pooled
    assert set(serial) == set(pooled)
    for ticker in serial:
        assert serial[ticker].bars == pooled[ticker].bars


def test_vector_and_cluster_stage_errors(small_config):
    with pytest.raises(PipelineError, match=r"\[vectorize\]"):
        vector_stage({}, small_config.embedding)
    clustering = dataclasses.replace(small_config.clustering, k=500)
    with pytest.raises(PipelineError, match=r"\[cluster\]"):
        cluster_stage(["A", "B"], np.eye(2), clustering)


def test_backtest_stage_restricts_to_selection(small_config):
    train, test, _ = ingest_stage(small_config)
    chosen = list(train.tickers[:3])
    staged = backtest_stage(train, test, chosen, small_config.portfolio)
    direct = backtest(
        test.restrict(chosen),
        train.restrict(chosen),
        window=small_config.portfolio.window,
        lookback=small_config.portfolio.lookback,
    )
    assert np.array_equal(staged.y, direct.y)
    assert staged.rebalance_dates == direct.rebalance_dates


def test_compare_ranks_by_risk(tmp_path):
    summaries = [
        {"method": "PI1", "clustering": "kmeans", "risk": 0.12, "sharpe": 0.5,
         "n_stocks": 10, "rebalances": 12},
        {"method": "STATS", "clustering": "kmeans", "risk": 0.10, "sharpe": 0.3,
         "n_stocks": 10, "rebalances": 12},
    ]
    text, annotated = compare(summaries)
    assert annotated[0]["method"] == "STATS"
    assert annotated[0]["best_risk"] and not annotated[0]["best_sharpe"]
    assert annotated[1]["best_sharpe"]
    assert "STATS" in text.splitlines()[2]  # best risk listed first
    out = tmp_path / "cmp.csv"
    write_comparison_csv(out, annotated)
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("method,clustering,risk")
    assert len(lines) == 3
    with pytest.raises(ValueError):
        compare([])
