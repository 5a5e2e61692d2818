"""Shared fixtures: a small synthetic market with a ready-made config."""

import pytest
import yaml

from tda_portfolio.config import load_config
from tda_portfolio.synthetic import two_regime_sinusoids, write_fixture


@pytest.fixture(scope="session")
def small_market(tmp_path_factory):
    """8-ticker two-regime market written to disk, with its run config.

    Stride 5 keeps the delay-vector clouds tiny so pipeline and CLI tests
    run in milliseconds.
    """
    root = tmp_path_factory.mktemp("smallmarket")
    market = two_regime_sinusoids(n_tickers=8, length=260)
    paths = write_fixture(market, root)
    s = market.split
    raw = {
        "data": {"prices": paths["prices"], "sectors": paths["sectors"]},
        "periods": {
            "train_start": s.train_start.isoformat(),
            "train_end": s.train_end.isoformat(),
            "test_start": s.test_start.isoformat(),
            "test_end": s.test_end.isoformat(),
        },
        "embedding": {
            "method": "PI1",
            "stride": 5,
            "sigma_scale": 0.2,
            "image_resolution": 10,
        },
        "clustering": {"k": 2, "seed": 42},
        "portfolio": {"per_cluster": 2},
        "out_dir": str(root / "runs" / "latest"),
    }
    config_path = root / "run.yaml"
    config_path.write_text(yaml.safe_dump(raw, sort_keys=False))
    return {"root": root, "market": market, "config_path": config_path, "raw": raw}


@pytest.fixture()
def small_config(small_market):
    return load_config(small_market["config_path"])
