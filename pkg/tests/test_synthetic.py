"""Synthetic market fixtures: determinism, labels, structure."""

import numpy as np
import pytest

from tda_portfolio.marketdata import compute_returns, ingest_prices, load_sectors, split
from tda_portfolio.synthetic import (
    three_regime_market,
    two_regime_sinusoids,
    write_fixture,
)


def test_two_regime_fixture_shape_and_balance():
    market = two_regime_sinusoids()
    assert market.prices.n_tickers == 40
    # length counts return days; prices carry one extra anchor row
    assert market.prices.n_days == 501
    counts = np.bincount(list(market.regimes.values()))
    assert counts.tolist() == [20, 20]
    assert set(market.regimes) == set(market.prices.tickers)
    assert np.all(market.prices.values > 0)


def test_two_regime_fixture_is_deterministic():
    a = two_regime_sinusoids()
    b = two_regime_sinusoids()
    assert a.prices.dates == b.prices.dates
    assert np.array_equal(a.prices.values, b.prices.values)
    assert a.regimes == b.regimes
    c = two_regime_sinusoids(seed=1)
    assert not np.array_equal(a.prices.values, c.prices.values)


def test_two_regime_returns_carry_the_stated_periods():
    market = two_regime_sinusoids()
    returns = compute_returns(market.prices)
    by_regime = {0: [], 1: []}
    for ticker, regime in market.regimes.items():
        by_regime[regime].append(ticker)
    # the dominant discrete-Fourier frequency of a clean regime-mean series
    # must sit at the generating period
    for regime, period in ((0, 20), (1, 50)):
        cols = [returns.column(t) for t in by_regime[regime]]
        spectrum = None
        for col in cols:
            mag = np.abs(np.fft.rfft(col - col.mean()))
            spectrum = mag if spectrum is None else spectrum + mag
        freqs = np.fft.rfftfreq(len(cols[0]))
        peak = freqs[1:][int(np.argmax(spectrum[1:]))]
        assert peak == pytest.approx(1.0 / period, rel=0.05)


def test_three_regime_fixture_structure():
    market = three_regime_market()
    assert market.prices.n_tickers == 60
    counts = np.bincount(list(market.regimes.values()))
    assert counts.tolist() == [20, 20, 20]
    assert set(market.sectors.values()) <= {"Technology", "Utilities", "Energy"}
    # split boundaries partition the return dates with no overlap
    returns = compute_returns(market.prices)
    train, test = split(returns, market.split)
    assert train.n_days + test.n_days == returns.n_days
    assert max(train.dates) < min(test.dates)
    assert (train.n_days, test.n_days) == (504, 252)


def test_three_regime_fixture_is_deterministic():
    a = three_regime_market()
    b = three_regime_market()
    assert np.array_equal(a.prices.values, b.prices.values)
    assert a.regimes == b.regimes
    assert a.sectors == b.sectors


def test_write_fixture_round_trips(tmp_path):
    market = two_regime_sinusoids(n_tickers=6, length=120)
    paths = write_fixture(market, tmp_path)
    prices, report = ingest_prices(paths["prices"])
    assert report.dropped == ()
    assert prices.tickers == market.prices.tickers
    assert np.allclose(prices.values, market.prices.values, rtol=0, atol=0)
    sectors = load_sectors(paths["sectors"], prices.tickers)
    assert sectors.sector(prices.tickers[0]) == market.sectors[prices.tickers[0]]
    labels = (tmp_path / "labels.csv").read_text().strip().splitlines()
    assert labels[0] == "ticker,regime"
    assert len(labels) == 1 + market.prices.n_tickers
