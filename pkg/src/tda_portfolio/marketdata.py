"""Loading, aligning, splitting and serializing daily stock price data.

Input price files are long CSVs with header ``date,ticker,close`` (ISO-8601
dates, decimal point, UTF-8). Sector files are ``ticker,sector`` CSVs. A
benchmark index series may ride along in the price file under the reserved
ticker ``__INDEX__``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import date

import numpy as np

logger = logging.getLogger(__name__)

INDEX_TICKER = "__INDEX__"

#: GICS-style sector labels accepted by load_sectors.
CANONICAL_SECTORS = frozenset(
    {
        "Healthcare",
        "Industrials",
        "Consumer Cyclical",
        "Technology",
        "Consumer Defensive",
        "Utilities",
        "Financial",
        "Basic Materials",
        "Real Estate",
        "Energy",
        "Communication Services",
    }
)

#: Tickers missing more than this fraction of calendar dates are dropped.
MAX_MISSING_FRACTION = 0.05

#: A date belongs to the trading calendar if at least this fraction of
#: tickers has an observation on it.
CALENDAR_COVERAGE = 0.5


class MarketDataError(ValueError):
    """Malformed input files or data insufficient to build a matrix."""


@dataclass(frozen=True)
class PriceMatrix:
    """Aligned daily values (prices or returns) for a stock universe.

    ``values[t, i]`` belongs to ``dates[t]`` and ``tickers[i]``. Dates are
    strictly increasing and every cell is populated.
    """

    tickers: tuple[str, ...]
    dates: tuple[date, ...]
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2:
            raise MarketDataError("values must be a 2-D matrix")
        if vals.shape != (len(self.dates), len(self.tickers)):
            raise MarketDataError(
                f"shape {vals.shape} does not match {len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        if len(set(self.tickers)) != len(self.tickers):
            raise MarketDataError("duplicate tickers")
        for a, b in zip(self.dates, self.dates[1:]):
            if a >= b:
                raise MarketDataError(f"dates not strictly increasing at {a} -> {b}")
        if not np.all(np.isfinite(vals)):
            raise MarketDataError("non-finite cells after alignment")

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)

    def column(self, ticker: str) -> np.ndarray:
        return self.values[:, self.tickers.index(ticker)]

    def restrict(self, tickers) -> "PriceMatrix":
        """Submatrix over the given tickers, in the given order."""
        idx = [self.tickers.index(t) for t in tickers]
        return PriceMatrix(tuple(tickers), self.dates, self.values[:, idx])

    def drop_ticker(self, ticker: str) -> "PriceMatrix":
        keep = [t for t in self.tickers if t != ticker]
        return self.restrict(keep)


@dataclass(frozen=True)
class PeriodSplit:
    """Train/test date ranges; the train range must end before test starts."""

    train_start: date
    train_end: date
    test_start: date
    test_end: date

    def __post_init__(self):
        if self.train_start > self.train_end:
            raise MarketDataError("train_start after train_end")
        if self.test_start > self.test_end:
            raise MarketDataError("test_start after test_end")
        if self.train_end >= self.test_start:
            raise MarketDataError("train period must end strictly before test period starts")


@dataclass(frozen=True)
class SectorMap:
    """Ticker to sector label mapping over a fixed universe."""

    labels: dict[str, str]

    def __post_init__(self):
        bad = sorted(set(self.labels.values()) - CANONICAL_SECTORS)
        if bad:
            raise MarketDataError(f"unknown sector labels: {bad}")

    def sector(self, ticker: str) -> str:
        return self.labels[ticker]

    def distinct_sectors(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels.values())))


@dataclass(frozen=True)
class DropReport:
    """What the alignment step removed or repaired."""

    dropped: tuple[tuple[str, str], ...]  # (ticker, reason)
    filled_cells: tuple[tuple[str, int], ...]  # (ticker, cell count)


def _parse_price_rows(path):
    """Yield (line_no, date, ticker, close) from a date,ticker,close CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MarketDataError(f"{path}: empty file") from None
        if [h.strip() for h in header] != ["date", "ticker", "close"]:
            raise MarketDataError(f"{path}: expected header 'date,ticker,close', got {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise MarketDataError(f"{path}:{line_no}: expected 3 fields, got {len(row)}")
            raw_date, ticker, raw_close = (f.strip() for f in row)
            try:
                day = date.fromisoformat(raw_date)
            except ValueError:
                raise MarketDataError(f"{path}:{line_no}: bad date {raw_date!r}") from None
            if not ticker:
                raise MarketDataError(f"{path}:{line_no}: empty ticker")
            try:
                close = float(raw_close)
            except ValueError:
                raise MarketDataError(f"{path}:{line_no}: bad close {raw_close!r}") from None
            if not np.isfinite(close) or close <= 0:
                raise MarketDataError(f"{path}:{line_no}: close must be a positive number, got {raw_close}")
            yield line_no, day, ticker, close


def ingest_prices(
    path, date_range: tuple[date | None, date | None] = (None, None)
) -> tuple[PriceMatrix, DropReport]:
    """Load and align a price CSV; returns the matrix plus a drop report.

    date_range endpoints are inclusive; None leaves that side unbounded.
    The trading calendar is the set of dates on which at least half the raw
    tickers have an observation. Tickers missing more than 5% of calendar
    dates are dropped; remaining gaps are forward-filled (back-filled for a
    leading gap).
    """
    start, end = date_range
    if start is not None and end is not None and start > end:
        raise MarketDataError(f"empty date range {start}..{end}")

    per_ticker: dict[str, dict[date, float]] = {}
    for line_no, day, ticker, close in _parse_price_rows(path):
        if (start is not None and day < start) or (end is not None and day > end):
            continue
        cells = per_ticker.setdefault(ticker, {})
        if day in cells:
            raise MarketDataError(f"{path}:{line_no}: duplicate observation for {ticker} on {day}")
        cells[day] = close

    if not per_ticker:
        raise MarketDataError(
            f"{path}: no rows inside {start or 'open'}..{end or 'open'}"
        )

    tickers = sorted(per_ticker)
    date_counts: dict[date, int] = {}
    for cells in per_ticker.values():
        for day in cells:
            date_counts[day] = date_counts.get(day, 0) + 1
    min_coverage = CALENDAR_COVERAGE * len(tickers)
    calendar = sorted(d for d, c in date_counts.items() if c >= min_coverage)
    if not calendar:
        raise MarketDataError(f"{path}: no dates reach {CALENDAR_COVERAGE:.0%} ticker coverage")

    dropped = []
    filled = []
    kept = []
    columns = []
    for ticker in tickers:
        cells = per_ticker[ticker]
        present = [d in cells for d in calendar]
        missing = present.count(False)
        if missing > MAX_MISSING_FRACTION * len(calendar):
            reason = f"missing {missing}/{len(calendar)} calendar dates"
            dropped.append((ticker, reason))
            logger.warning("dropping %s: %s", ticker, reason)
            continue
        col = np.array([cells.get(d, np.nan) for d in calendar])
        if missing:
            col = _forward_fill(col)
            filled.append((ticker, missing))
            logger.info("filled %d gap(s) for %s", missing, ticker)
        kept.append(ticker)
        columns.append(col)

    if not kept:
        raise MarketDataError(f"{path}: no tickers survive the missing-data threshold")

    matrix = PriceMatrix(tuple(kept), tuple(calendar), np.column_stack(columns))
    return matrix, DropReport(tuple(dropped), tuple(filled))


def load_prices(path, date_range: tuple[date, date]) -> PriceMatrix:
    """Load a date,ticker,close CSV restricted to date_range; see ingest_prices."""
    matrix, _ = ingest_prices(path, date_range)
    return matrix


def _forward_fill(col: np.ndarray) -> np.ndarray:
    out = col.copy()
    last = np.nan
    for i, v in enumerate(out):
        if np.isnan(v):
            out[i] = last
        else:
            last = v
    # leading gap: back-fill from the first observation
    if np.isnan(out[0]):
        first = out[~np.isnan(out)][0]
        i = 0
        while i < len(out) and np.isnan(out[i]):
            out[i] = first
            i += 1
    return out


def compute_returns(prices: PriceMatrix) -> PriceMatrix:
    """Daily percentage returns r[t] = p[t]/p[t-1] - 1; one row shorter."""
    if prices.n_days < 2:
        raise MarketDataError("need at least 2 days of prices to compute returns")
    if np.any(prices.values <= 0):
        raise MarketDataError("nonpositive price encountered")
    vals = prices.values
    returns = vals[1:] / vals[:-1] - 1.0
    return PriceMatrix(prices.tickers, prices.dates[1:], returns)


def split(returns: PriceMatrix, periods: PeriodSplit) -> tuple[PriceMatrix, PriceMatrix]:
    """Row-disjoint train/test submatrices over the same tickers."""
    days = returns.dates
    if periods.train_start < days[0] or periods.test_end > days[-1]:
        logger.warning(
            "split range %s..%s extends past matrix range %s..%s",
            periods.train_start, periods.test_end, days[0], days[-1],
        )
    train_rows = [i for i, d in enumerate(days) if periods.train_start <= d <= periods.train_end]
    test_rows = [i for i, d in enumerate(days) if periods.test_start <= d <= periods.test_end]
    if not train_rows:
        raise MarketDataError("empty train slice")
    if not test_rows:
        raise MarketDataError("empty test slice")
    train = PriceMatrix(returns.tickers, tuple(days[i] for i in train_rows), returns.values[train_rows])
    test = PriceMatrix(returns.tickers, tuple(days[i] for i in test_rows), returns.values[test_rows])
    assert max(train.dates) < min(test.dates), "train/test leakage"
    return train, test


def load_sectors(path, tickers) -> SectorMap:
    """Read a ticker,sector CSV and return a complete map for `tickers`."""
    table: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["ticker", "sector"]:
            raise MarketDataError(f"{path}: expected header 'ticker,sector', got {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise MarketDataError(f"{path}:{line_no}: expected 2 fields, got {len(row)}")
            ticker, sector = row[0].strip(), row[1].strip()
            if sector not in CANONICAL_SECTORS:
                raise MarketDataError(f"{path}:{line_no}: unknown sector label {sector!r}")
            table[ticker] = sector
    missing = [t for t in tickers if t not in table]
    if missing:
        raise MarketDataError(f"{path}: no sector for ticker(s) {missing}")
    return SectorMap({t: table[t] for t in tickers})


def write_prices_csv(matrix: PriceMatrix, path) -> None:
    """Serialize to the long date,ticker,close format with round-trip precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "ticker", "close"])
        for t, day in enumerate(matrix.dates):
            for i, ticker in enumerate(matrix.tickers):
                writer.writerow([day.isoformat(), ticker, f"{matrix.values[t, i]:.17g}"])


def write_matrix_csv(matrix: PriceMatrix, path) -> None:
    """Wide CSV (date, then one column per ticker); used for stage handoff."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", *matrix.tickers])
        for t, day in enumerate(matrix.dates):
            writer.writerow([day.isoformat(), *(f"{v:.17g}" for v in matrix.values[t])])


def read_matrix_csv(path) -> PriceMatrix:
    """Inverse of write_matrix_csv."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "date" or len(header) < 2:
            raise MarketDataError(f"{path}: not a wide matrix CSV")
        tickers = tuple(header[1:])
        dates = []
        rows = []
        for row in reader:
            if not row:
                continue
            dates.append(date.fromisoformat(row[0]))
            rows.append([float(v) for v in row[1:]])
    return PriceMatrix(tickers, tuple(dates), np.array(rows))
