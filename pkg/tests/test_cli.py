"""Command-line interface: staged commands, one-pass run, utilities."""

import filecmp
import json

import pytest

from tda_portfolio.cli import main
from tda_portfolio.config import DEFAULT_CONFIG_TEXT


def test_init_config(tmp_path, capsys):
    path = tmp_path / "run.yaml"
    assert main(["init-config", "--out", str(path)]) == 0
    assert path.read_text() == DEFAULT_CONFIG_TEXT
    assert main(["init-config"]) == 0
    assert DEFAULT_CONFIG_TEXT in capsys.readouterr().out


def test_synth_writes_fixture(tmp_path, capsys):
    assert main(["synth", "--fixture", "two-regime", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "suggested periods" in out
    for name in ("prices.csv", "sectors.csv", "labels.csv"):
        assert (tmp_path / name).exists()


def test_staged_flow_matches_one_pass(small_market, tmp_path, capsys):
    config = str(small_market["config_path"])
    staged = tmp_path / "staged"
    onepass = tmp_path / "onepass"

    for command in ("ingest", "embed", "cluster", "backtest"):
        assert main([command, "--config", config, "--out", str(staged)]) == 0
    assert main(["run", "--config", config, "--out", str(onepass)]) == 0
    capsys.readouterr()

    # staged artifacts pass through CSV; agreement must still be bit-exact
    for name in ("partition.csv", "selection.csv", "backtest.csv", "cumulative.csv", "embeddings.csv"):
        assert filecmp.cmp(staged / name, onepass / name, shallow=False), name
    staged_summary = json.loads((staged / "summary.json").read_text())
    onepass_summary = json.loads((onepass / "summary.json").read_text())
    assert staged_summary == onepass_summary


def test_staged_commands_demand_their_inputs(small_market, tmp_path, capsys):
    config = str(small_market["config_path"])
    empty = tmp_path / "empty"
    assert main(["cluster", "--config", config, "--out", str(empty)]) == 1
    err = capsys.readouterr().err
    assert "run `embed` first" in err
    assert main(["backtest", "--config", config, "--out", str(empty)]) == 1
    assert "run `ingest` first" in capsys.readouterr().err


def test_run_with_method_override(small_market, tmp_path, capsys):
    config = str(small_market["config_path"])
    out = tmp_path / "stats"
    assert main(["run", "--config", config, "--method", "stats", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["method"] == "STATS"
    assert "STATS" in capsys.readouterr().out


def test_compare_command(small_market, tmp_path, capsys):
    config = str(small_market["config_path"])
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["run", "--config", config, "--out", str(out_a)]) == 0
    assert main(["run", "--config", config, "--method", "stats", "--out", str(out_b)]) == 0
    capsys.readouterr()
    table = tmp_path / "comparison.csv"
    code = main(
        ["compare", str(out_a / "summary.json"), str(out_b / "summary.json"), "--out", str(table)]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "method" in out and "flags" in out
    assert table.exists()
    rows = table.read_text().strip().splitlines()
    assert len(rows) == 3


def test_bad_config_is_a_clean_error(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("clustering:\n  algorithm: dbscan\n")
    assert main(["run", "--config", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err


def test_missing_price_file_is_a_clean_error(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("data:\n  prices: nowhere.csv\n")
    assert main(["ingest", "--config", str(cfg)]) == 1
    assert "not found" in capsys.readouterr().err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert "tda-portfolio" in capsys.readouterr().out
