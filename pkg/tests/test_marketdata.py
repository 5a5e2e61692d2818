"""Price ingestion, alignment, returns and period splitting."""

from datetime import date, timedelta

import numpy as np
import pytest

from tda_portfolio.marketdata import (
    MarketDataError,
    PeriodSplit,
    PriceMatrix,
    compute_returns,
    ingest_prices,
    load_sectors,
    read_matrix_csv,
    split,
    write_matrix_csv,
    write_prices_csv,
)


def weekdays(start, count):
    out = []
    d = start
    while len(out) < count:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def write_long_csv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date,ticker,close\n")
        for day, ticker, close in rows:
            fh.write(f"{day.isoformat()},{ticker},{close}\n")


def test_full_coverage_keeps_all_dates(tmp_path):
    days = weekdays(date(2012, 1, 2), 60)
    rows = [(d, t, 100 + i) for i, d in enumerate(days) for t in ("AAA", "BBB", "CCC")]
    path = tmp_path / "p.csv"
    write_long_csv(path, rows)
    matrix, report = ingest_prices(path, (days[0], days[-1]))
    assert matrix.tickers == ("AAA", "BBB", "CCC")
    assert matrix.dates == tuple(days)
    assert report.dropped == ()
    assert report.filled_cells == ()


def test_sparse_ticker_dropped_and_reported(tmp_path):
    days = weekdays(date(2012, 1, 2), 100)
    rows = [(d, "FULL", 50.0) for d in days]
    rows += [(d, "HOLEY", 70.0) for d in days[:90]]  # missing 10% of dates
    path = tmp_path / "p.csv"
    write_long_csv(path, rows)
    matrix, report = ingest_prices(path, (days[0], days[-1]))
    assert matrix.tickers == ("FULL",)
    assert [t for t, _ in report.dropped] == ["HOLEY"]
    assert "missing" in report.dropped[0][1]


def test_interior_gap_forward_filled(tmp_path):
    days = weekdays(date(2012, 1, 2), 40)
    rows = [(d, "AAA", float(i + 1)) for i, d in enumerate(days)]
    rows += [(d, "GAP", 10.0 + i) for i, d in enumerate(days) if i != 7]
    path = tmp_path / "p.csv"
    write_long_csv(path, rows)
    matrix, report = ingest_prices(path, (days[0], days[-1]))
    assert matrix.column("GAP")[7] == matrix.column("GAP")[6]
    assert dict(report.filled_cells) == {"GAP": 1}


def test_leading_gap_back_filled(tmp_path):
    days = weekdays(date(2012, 1, 2), 40)
    rows = [(d, "AAA", float(i + 1)) for i, d in enumerate(days)]
    rows += [(d, "LATE", 33.0) for d in days[1:]]
    path = tmp_path / "p.csv"
    write_long_csv(path, rows)
    matrix, _ = ingest_prices(path, (days[0], days[-1]))
    assert matrix.column("LATE")[0] == 33.0


def test_duplicate_observation_rejected(tmp_path):
    d = date(2012, 1, 3)
    path = tmp_path / "p.csv"
    write_long_csv(path, [(d, "AAA", 1.0), (d, "AAA", 2.0)])
    with pytest.raises(MarketDataError, match="duplicate"):
        ingest_prices(path, (d, d))


def test_malformed_row_reports_line_number(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("date,ticker,close\n2012-01-03,AAA,1.0\nnot-a-date,AAA,1.0\n")
    with pytest.raises(MarketDataError, match="3"):
        ingest_prices(path, (date(2012, 1, 1), date(2012, 12, 31)))


def test_date_range_filters_rows(tmp_path):
    days = weekdays(date(2012, 1, 2), 30)
    path = tmp_path / "p.csv"
    write_long_csv(path, [(d, "AAA", 5.0) for d in days])
    matrix, _ = ingest_prices(path, (days[10], days[19]))
    assert matrix.dates == tuple(days[10:20])
    # open endpoints keep everything
    full, _ = ingest_prices(path)
    assert full.dates == tuple(days)


def test_returns_match_direct_formula():
    days = weekdays(date(2012, 1, 2), 3)
    prices = PriceMatrix(("A",), tuple(days), np.array([[100.0], [110.0], [99.0]]))
    r = compute_returns(prices)
    assert r.values[:, 0] == pytest.approx([0.10, -0.10])
    assert r.dates == tuple(days[1:])


def test_returns_constant_prices_are_zero():
    days = weekdays(date(2012, 1, 2), 3)
    prices = PriceMatrix(("A",), tuple(days), np.full((3, 1), 50.0))
    assert np.all(compute_returns(prices).values == 0.0)


def test_returns_cross_check_against_difference_quotient():
    rng = np.random.default_rng(11)
    days = weekdays(date(2012, 1, 2), 200)
    vals = 100.0 * np.exp(np.cumsum(rng.normal(0, 0.02, size=(200, 4)), axis=0))
    prices = PriceMatrix(("A", "B", "C", "D"), tuple(days), vals)
    ours = compute_returns(prices).values
    oracle = (vals[1:] - vals[:-1]) / vals[:-1]
    assert np.allclose(ours, oracle, rtol=1e-12, atol=1e-15)


def test_returns_reject_degenerate_inputs():
    days = weekdays(date(2012, 1, 2), 2)
    bad = PriceMatrix(("A",), tuple(days), np.array([[1.0], [-2.0]]))
    with pytest.raises(MarketDataError, match="nonpositive"):
        compute_returns(bad)
    short = PriceMatrix(("A",), (days[0],), np.array([[1.0]]))
    with pytest.raises(MarketDataError, match="2 days"):
        compute_returns(short)


def test_split_partitions_rows_exactly():
    days = weekdays(date(2012, 1, 2), 50)
    returns = PriceMatrix(("A", "B"), tuple(days), np.zeros((50, 2)))
    periods = PeriodSplit(days[0], days[29], days[30], days[-1])
    train, test = split(returns, periods)
    assert train.n_days + test.n_days == 50
    assert max(train.dates) < min(test.dates)
    assert train.tickers == test.tickers == ("A", "B")


def test_split_degenerate_ranges_rejected():
    days = weekdays(date(2012, 1, 2), 10)
    with pytest.raises(MarketDataError):
        PeriodSplit(days[0], days[5], days[5], days[-1])
    returns = PriceMatrix(("A",), tuple(days), np.zeros((10, 1)))
    far = PeriodSplit(date(2031, 1, 1), date(2031, 6, 1), date(2031, 6, 2), date(2031, 12, 31))
    with pytest.raises(MarketDataError, match="empty train"):
        split(returns, far)


def test_sector_map_loads_and_validates(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("ticker,sector\nAAA,Technology\nBBB,Utilities\n")
    sectors = load_sectors(path, ["AAA", "BBB"])
    assert sectors.sector("AAA") == "Technology"
    assert sectors.distinct_sectors() == ("Technology", "Utilities")
    with pytest.raises(MarketDataError):
        load_sectors(path, ["AAA", "MISSING"])
    bad = tmp_path / "bad.csv"
    bad.write_text("ticker,sector\nAAA,Startups\n")
    with pytest.raises(MarketDataError, match="Startups"):
        load_sectors(bad, ["AAA"])


def test_price_and_matrix_csv_round_trips(tmp_path):
    rng = np.random.default_rng(3)
    days = weekdays(date(2012, 1, 2), 25)
    vals = 100.0 * np.exp(rng.normal(0, 0.3, size=(25, 3)))
    matrix = PriceMatrix(("A", "B", "C"), tuple(days), vals)

    long_path = tmp_path / "long.csv"
    write_prices_csv(matrix, long_path)
    back, _ = ingest_prices(long_path, (days[0], days[-1]))
    assert back.tickers == matrix.tickers
    assert np.array_equal(back.values, matrix.values)

    wide_path = tmp_path / "wide.csv"
    write_matrix_csv(matrix, wide_path)
    again = read_matrix_csv(wide_path)
    assert again.dates == matrix.dates
    assert np.array_equal(again.values, matrix.values)
