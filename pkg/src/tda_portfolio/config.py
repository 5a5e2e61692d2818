"""Run configuration: YAML parsing, validation, default generation.

Every tunable the pipeline uses lives here so a config file plus the code
version pins a run completely. Unknown keys are rejected (typo guard).
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import date

import yaml

METHODS = ("STATS", "PL1", "PL2", "PI1", "PI2", "SECTORS")
ALGORITHMS = ("kmeans", "agglomerative")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataConfig:
    prices: str = "data/prices.csv"
    sectors: str | None = None


@dataclass(frozen=True)
class PeriodConfig:
    train_start: date = date(2012, 1, 1)
    train_end: date = date(2013, 12, 31)
    test_start: date = date(2014, 1, 1)
    test_end: date = date(2017, 12, 31)


@dataclass(frozen=True)
class EmbeddingConfig:
    method: str = "PI1"
    tau_max: int = 20
    bins: int = 16
    dim_max: int = 10
    fnn_threshold: float = 0.01
    r_tol: float = 15.0
    stride: int = 1
    max_homology_dim: int = 1  # 2 turns on H2 (needed by PL2/PI2)
    budget: int = 5_000_000
    landscape_layers: int = 5
    landscape_samples: int = 100
    image_resolution: int = 20
    sigma_scale: float = 0.05
    global_grid: bool = True


@dataclass(frozen=True)
class ClusteringConfig:
    algorithm: str = "kmeans"
    linkage: str = "ward"
    k: int = 11
    seed: int = 42
    restarts: int = 10
    standardize: bool = True


@dataclass(frozen=True)
class PortfolioConfig:
    window: int = 21
    lookback: int = 126
    per_cluster: int = 2


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    periods: PeriodConfig = field(default_factory=PeriodConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    portfolio: PortfolioConfig = field(default_factory=PortfolioConfig)
    out_dir: str = "runs/latest"
    workers: int = 1
    emit_timings: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("train_start", "train_end", "test_start", "test_end"):
            d["periods"][key] = d["periods"][key].isoformat()
        return d


def _check(condition, message):
    if not condition:
        raise ConfigError(message)


def validate(cfg: RunConfig, check_files: bool = True) -> RunConfig:
    e, c, p = cfg.embedding, cfg.clustering, cfg.portfolio
    _check(e.method in METHODS, f"embedding.method must be one of {METHODS}, got {e.method!r}")
    if e.method in ("PL2", "PI2"):
        _check(
            e.max_homology_dim >= 2,
            f"embedding.method {e.method} needs H2; set embedding.max_homology_dim: 2",
        )
    _check(e.max_homology_dim in (1, 2), "embedding.max_homology_dim must be 1 or 2")
    _check(e.tau_max >= 1, "embedding.tau_max must be >= 1")
    _check(e.bins >= 2, "embedding.bins must be >= 2")
    _check(e.dim_max >= 2, "embedding.dim_max must be >= 2")
    _check(0 < e.fnn_threshold < 1, "embedding.fnn_threshold must be in (0, 1)")
    _check(e.r_tol > 0, "embedding.r_tol must be positive")
    _check(e.stride >= 1, "embedding.stride must be >= 1")
    _check(e.budget > 0, "embedding.budget must be positive")
    _check(e.landscape_layers >= 1, "embedding.landscape_layers must be >= 1")
    _check(e.landscape_samples >= 2, "embedding.landscape_samples must be >= 2")
    _check(e.image_resolution >= 1, "embedding.image_resolution must be >= 1")
    _check(e.sigma_scale > 0, "embedding.sigma_scale must be positive")
    _check(c.algorithm in ALGORITHMS, f"clustering.algorithm must be one of {ALGORITHMS}")
    _check(c.linkage in ("ward", "average", "complete"), "clustering.linkage invalid")
    _check(c.k >= 1, "clustering.k must be >= 1")
    _check(c.seed >= 0, "clustering.seed must be >= 0")
    _check(c.restarts >= 1, "clustering.restarts must be >= 1")
    _check(p.window >= 1, "portfolio.window must be >= 1")
    _check(p.lookback >= 2, "portfolio.lookback must be >= 2")
    _check(p.per_cluster >= 1, "portfolio.per_cluster must be >= 1")
    _check(cfg.workers >= 1, "workers must be >= 1")
    _check(
        cfg.periods.train_start <= cfg.periods.train_end,
        "periods.train_start must not exceed periods.train_end",
    )
    _check(
        cfg.periods.test_start <= cfg.periods.test_end,
        "periods.test_start must not exceed periods.test_end",
    )
    _check(
        cfg.periods.train_end < cfg.periods.test_start,
        "train period must end before the test period starts",
    )
    if e.method == "SECTORS":
        _check(cfg.data.sectors, "embedding.method sectors requires data.sectors")
    if check_files:
        _check(os.path.exists(cfg.data.prices), f"price file not found: {cfg.data.prices}")
        if cfg.data.sectors:
            _check(os.path.exists(cfg.data.sectors), f"sector file not found: {cfg.data.sectors}")
    return cfg


def _build(cls, raw: dict, context: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"unknown {context} keys: {sorted(unknown)}")
    return cls(**raw)


def _coerce_date(value, key):
    if isinstance(value, date):
        return value
    try:
        return date.fromisoformat(str(value))
    except ValueError as exc:
        raise ConfigError(f"periods.{key}: not a date: {value!r}") from exc


def from_dict(raw: dict) -> RunConfig:
    raw = dict(raw or {})
    sections = {"data", "periods", "embedding", "clustering", "portfolio", "out_dir", "workers", "emit_timings"}
    unknown = set(raw) - sections
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    periods_raw = dict(raw.get("periods") or {})
    for key in list(periods_raw):
        periods_raw[key] = _coerce_date(periods_raw[key], key)

    embedding_raw = dict(raw.get("embedding") or {})
    if "method" in embedding_raw:
        embedding_raw["method"] = str(embedding_raw["method"]).upper()

    return RunConfig(
        data=_build(DataConfig, dict(raw.get("data") or {}), "data"),
        periods=_build(PeriodConfig, periods_raw, "periods"),
        embedding=_build(EmbeddingConfig, embedding_raw, "embedding"),
        clustering=_build(ClusteringConfig, dict(raw.get("clustering") or {}), "clustering"),
        portfolio=_build(PortfolioConfig, dict(raw.get("portfolio") or {}), "portfolio"),
        out_dir=str(raw.get("out_dir", RunConfig.out_dir)),
        workers=int(raw.get("workers", RunConfig.workers)),
        emit_timings=bool(raw.get("emit_timings", RunConfig.emit_timings)),
    )


def load_config(path, check_files: bool = True) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return validate(from_dict(raw), check_files=check_files)


def apply_overrides(
    cfg: RunConfig,
    method: str | None = None,
    algorithm: str | None = None,
    seed: int | None = None,
    workers: int | None = None,
    out_dir: str | None = None,
) -> RunConfig:
    if method is not None:
        cfg = replace(cfg, embedding=replace(cfg.embedding, method=method.upper()))
    if algorithm is not None:
        cfg = replace(cfg, clustering=replace(cfg.clustering, algorithm=algorithm))
    if seed is not None:
        cfg = replace(cfg, clustering=replace(cfg.clustering, seed=seed))
    if workers is not None:
        cfg = replace(cfg, workers=workers)
    if out_dir is not None:
        cfg = replace(cfg, out_dir=out_dir)
    return cfg


DEFAULT_CONFIG_TEXT = """\
# tda-portfolio run configuration
data:
  prices: data/prices.csv        # long-format CSV: date,ticker,close
  sectors: null                  # ticker,sector CSV; required for method=sectors
periods:                         # applied to the daily returns matrix
  train_start: 2012-01-01
  train_end: 2013-12-31
  test_start: 2014-01-01
  test_end: 2017-12-31
embedding:
  method: PI1                    # stats | pl1 | pl2 | pi1 | pi2 | sectors
  tau_max: 20                    # delay search range (trading days)
  bins: 16                       # mutual-information histogram bins
  dim_max: 10                    # false-nearest-neighbor search cap
  fnn_threshold: 0.01
  r_tol: 15.0
  stride: 1                      # subsample delay vectors to cut VR cost
  max_homology_dim: 1            # 2 enables H2 (required by pl2/pi2)
  budget: 5000000                # hard cap on simplex count
  landscape_layers: 5
  landscape_samples: 100
  image_resolution: 20
  sigma_scale: 0.05              # image kernel width = scale * max persistence
  global_grid: true              # share grid bounds across the universe
clustering:
  algorithm: kmeans              # kmeans | agglomerative
  linkage: ward                  # ward | average | complete
  k: 11                          # one cluster per economic sector
  seed: 42
  restarts: 10
  standardize: true              # z-score embedding columns before clustering
portfolio:
  window: 21                     # rebalance every 21 trading days
  lookback: 126                  # covariance estimation window
  per_cluster: 2                 # stocks picked per cluster by train Sharpe
out_dir: runs/latest
workers: 1
emit_timings: false              # wall-clock sidecar breaks byte-identical reruns
"""
