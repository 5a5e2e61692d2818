"""Deterministic synthetic market fixtures.

Return series are built first (sinusoidal regime signal + noise, plus a
common per-regime factor for the market fixture), then compounded into
price paths starting at 100. Regenerating with the default seeds is
bit-reproducible, which is how the shipped fixtures are defined.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .marketdata import PeriodSplit, PriceMatrix

TWO_REGIME_SEED = 20120
THREE_REGIME_SEED = 20463

_FIXTURE_START = date(2012, 1, 2)


@dataclass(frozen=True)
class SyntheticMarket:
    prices: PriceMatrix
    regimes: dict[str, int]  # generating regime label per ticker
    sectors: dict[str, str]
    split: PeriodSplit


def _weekdays(start: date, count: int) -> tuple[date, ...]:
    days = []
    d = start
    while len(days) < count:
        if d.weekday() < 5:
            days.append(d)
        d += timedelta(days=1)
    return tuple(days)


def _compound(returns: np.ndarray, start_price: float = 100.0) -> np.ndarray:
    """(T, n) returns -> (T+1, n) strictly positive price paths."""
    growth = np.cumprod(1.0 + returns, axis=0)
    return np.vstack([np.full((1, returns.shape[1]), start_price), start_price * growth])


def _market(
    periods: tuple[int, ...],
    group_sizes: tuple[int, ...],
    sector_names: tuple[str, ...],
    length: int,
    amplitudes: tuple[float, ...],
    noise_scale: float,
    market_vol: float,
    beta_range: tuple[float, float],
    regime_vol: float,
    idio_range: tuple[float, float],
    drift_max: float,
    phase_jitter: float | None,
    train_days: int,
    seed: int,
    prefix: str,
) -> SyntheticMarket:
    rng = np.random.default_rng(seed)
    n = sum(group_sizes)
    n_groups = len(group_sizes)
    tickers = [f"{prefix}{i:02d}" for i in range(n)]
    regimes: dict[str, int] = {}
    sectors: dict[str, str] = {}

    t = np.arange(1, length + 1, dtype=float)
    returns = np.empty((length, n))
    market = rng.normal(0.0, market_vol, size=length) if market_vol > 0 else None
    factors = rng.normal(0.0, regime_vol, size=(length, n_groups)) if regime_vol > 0 else None
    # phase_jitter None: phases iid uniform, so same-regime sinusoids mostly
    # cancel in an equal-weight average; with a jitter the regime sinusoid
    # behaves like a shared cyclical factor instead
    base_phases = rng.uniform(0.0, 2.0 * math.pi, size=n_groups) if phase_jitter is not None else None

    col = 0
    for g, size in enumerate(group_sizes):
        period = periods[g]
        amplitude = amplitudes[g]
        for _ in range(size):
            ticker = tickers[col]
            regimes[ticker] = g
            sectors[ticker] = sector_names[g]
            if base_phases is None:
                phase = rng.uniform(0.0, 2.0 * math.pi)
            else:
                phase = base_phases[g] + rng.uniform(-phase_jitter, phase_jitter)
            series = amplitude * np.sin(2.0 * math.pi * t / period + phase)
            if noise_scale > 0:
                series = series + noise_scale * amplitude * rng.normal(size=length)
            if market is not None:
                beta = rng.uniform(*beta_range)
                series = series + beta * market
            if factors is not None:
                series = series + factors[:, g]
            lo, hi = idio_range
            if hi > 0:
                sigma_i = math.exp(rng.uniform(math.log(max(lo, 1e-8)), math.log(hi)))
                series = series + sigma_i * rng.normal(size=length)
            if drift_max > 0:
                series = series + rng.uniform(0.0, drift_max)
            returns[:, col] = series
            col += 1

    dates = _weekdays(_FIXTURE_START, length + 1)
    prices = PriceMatrix(tuple(tickers), dates, _compound(returns))
    return_dates = dates[1:]
    split = PeriodSplit(
        train_start=return_dates[0],
        train_end=return_dates[train_days - 1],
        test_start=return_dates[train_days],
        test_end=return_dates[-1],
    )
    return SyntheticMarket(prices, regimes, sectors, split)


def two_regime_sinusoids(
    n_tickers: int = 40,
    length: int = 500,
    periods: tuple[int, int] = (20, 50),
    amplitude: float = 0.01,
    noise: float = 0.2,
    seed: int = TWO_REGIME_SEED,
) -> SyntheticMarket:
    """40 noisy sinusoidal return series in two period regimes.

    noise is relative to the amplitude: sigma = noise * amplitude.
    """
    half = n_tickers // 2
    return _market(
        periods=periods,
        group_sizes=(half, n_tickers - half),
        sector_names=("Technology", "Utilities"),
        length=length,
        amplitudes=(amplitude, amplitude),
        noise_scale=noise,
        market_vol=0.0,
        beta_range=(1.0, 1.0),
        regime_vol=0.0,
        idio_range=(0.0, 0.0),
        drift_max=0.0,
        phase_jitter=None,
        train_days=length - 100,
        seed=seed,
        prefix="SYN",
    )


def three_regime_market(
    n_tickers: int = 60,
    length: int = 756,
    periods: tuple[int, int, int] = (15, 35, 70),
    seed: int = THREE_REGIME_SEED,
) -> SyntheticMarket:
    """60-stock market with three latent cyclical regimes.

    Every stock loads on one market-wide factor (beta 0.5..1.5) plus a small
    per-regime factor. Regime sinusoids share a base phase within the regime
    (jitter 0.5 rad), so they act as common cyclical factors that an
    equal-weight average cannot cancel, while regime amplitudes rise with
    the period (0.6%, 1.4%, 2.4%). Idiosyncratic noise is kept small
    (log-uniform 0.1%..0.3%) and each stock gets a small positive drift, so
    Sharpe-based selection and minimum-variance weighting both have
    something to work with.
    """
    third = n_tickers // 3
    return _market(
        periods=periods,
        group_sizes=(third, third, n_tickers - 2 * third),
        sector_names=("Technology", "Utilities", "Energy"),
        length=length,
        amplitudes=(0.006, 0.014, 0.024),
        noise_scale=0.2,
        market_vol=0.003,
        beta_range=(0.5, 1.5),
        regime_vol=0.0015,
        idio_range=(0.001, 0.003),
        drift_max=0.0008,
        phase_jitter=0.5,
        train_days=504,
        seed=seed,
        prefix="MKT",
    )


def write_fixture(market: SyntheticMarket, out_dir) -> dict[str, str]:
    """Write prices/sectors/regime-labels CSVs; returns the path map."""
    from pathlib import Path

    from .marketdata import write_prices_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "prices": str(out / "prices.csv"),
        "sectors": str(out / "sectors.csv"),
        "labels": str(out / "labels.csv"),
    }
    write_prices_csv(market.prices, paths["prices"])
    with open(paths["sectors"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ticker", "sector"])
        for ticker in market.prices.tickers:
            writer.writerow([ticker, market.sectors[ticker]])
    with open(paths["labels"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ticker", "regime"])
        for ticker in market.prices.tickers:
            writer.writerow([ticker, market.regimes[ticker]])
    return paths
