"""Stock selection, long-only minimum-variance weights, rolling backtest.

Selection takes the top stocks per cluster by train-period Sharpe ratio.
Weights solve min w'Cw subject to sum(w)=1, w>=0 with a primal active-set
method (exact equality solves on the free set, ratio-test removals,
dual-feasibility additions). The backtest rebalances every `window`
trading days, estimating the covariance on the trailing `lookback` days
strictly before each rebalance date.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from .marketdata import PriceMatrix

logger = logging.getLogger(__name__)

TRADING_DAYS_PER_YEAR = 252
DEFAULT_WINDOW = 21  # one month of trading days
DEFAULT_LOOKBACK = 126

KKT_TOL = 1e-8
_RIDGE = 1e-10


class DegenerateSeriesError(ValueError):
    """DEGENERATE_SERIES: zero-variance return series has no Sharpe ratio."""


@dataclass(frozen=True)
class SelectionResult:
    """Per-cluster top picks with their train Sharpe ratios."""

    tickers: tuple[str, ...]
    sharpes: dict[str, float]
    per_cluster: int

    def __post_init__(self):
        if len(set(self.tickers)) != len(self.tickers):
            raise ValueError("duplicate tickers selected")


@dataclass(frozen=True)
class WeightVector:
    weights: dict[str, float]

    def __post_init__(self):
        vals = np.array(list(self.weights.values()), dtype=float)
        if vals.size == 0:
            raise ValueError("empty weight vector")
        if np.any(vals < -1e-12):
            raise ValueError(f"negative weight {vals.min()}")
        if abs(vals.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {vals.sum()}, not 1")

    def as_array(self, tickers) -> np.ndarray:
        return np.array([self.weights[t] for t in tickers], dtype=float)


@dataclass(frozen=True)
class BacktestResult:
    dates: tuple[date, ...]
    y: np.ndarray  # daily portfolio returns
    rebalance_dates: tuple[date, ...]
    weights: tuple[WeightVector, ...]
    annual_risk: float
    sharpe: float

    @property
    def n_days(self) -> int:
        return len(self.dates)


def stock_sharpe(returns) -> float:
    """Daily Sharpe ratio at zero risk-free rate: mean over population std."""
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise ValueError("need at least 2 returns")
    std = float(r.std())
    if std == 0.0:
        raise DegenerateSeriesError("DEGENERATE_SERIES: constant return series")
    return float(r.mean()) / std


def select_stocks(partition, train_returns: PriceMatrix, per_cluster: int = 2) -> SelectionResult:
    """Top `per_cluster` stocks per cluster by train Sharpe, ties alphabetical.

    Zero-variance tickers are skipped; clusters with fewer members than
    `per_cluster` contribute everything they have.
    """
    missing = [t for t in train_returns.tickers if t not in partition.assignments]
    if missing:
        raise ValueError(f"partition does not cover tickers {missing}")
    if per_cluster < 1:
        raise ValueError("per_cluster must be >= 1")

    sharpes: dict[str, float] = {}
    for ticker in train_returns.tickers:
        try:
            sharpes[ticker] = stock_sharpe(train_returns.column(ticker))
        except DegenerateSeriesError:
            logger.warning("skipping %s: constant train returns", ticker)

    chosen: list[str] = []
    for cid in range(partition.k):
        members = [t for t in partition.members(cid) if t in sharpes and t in train_returns.tickers]
        members.sort(key=lambda t: (-sharpes[t], t))
        picked = members[:per_cluster]
        if 0 < len(picked) < per_cluster:
            logger.info("cluster %d has only %d eligible stocks", cid, len(picked))
        chosen.extend(picked)
    if not chosen:
        raise ValueError("no eligible stocks after skipping degenerate series")
    return SelectionResult(tuple(chosen), {t: sharpes[t] for t in chosen}, per_cluster)


def covariance(values: np.ndarray) -> np.ndarray:
    """Population covariance of a (T, n) window of daily returns."""
    X = np.asarray(values, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    T, n = X.shape
    if T < 2:
        raise ValueError(f"covariance window of {T} days is too short")
    if T < n:
        logger.warning("covariance window (%d days) shorter than asset count (%d)", T, n)
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / T
    return (cov + cov.T) / 2.0


def _solve_on_support(cov: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Minimize x'Cx with sum(x)=1 over the support coordinates (sign-free)."""
    sub = cov[np.ix_(support, support)]
    ones = np.ones(len(support))
    try:
        x = np.linalg.solve(sub, ones)
    except np.linalg.LinAlgError:
        x = None
    if x is None or not np.all(np.isfinite(x)):
        sub = sub + _RIDGE * np.eye(len(support))
        try:
            x = np.linalg.solve(sub, ones)
        except np.linalg.LinAlgError:
            x = np.linalg.lstsq(sub, ones, rcond=None)[0]
    total = x.sum()
    if total == 0.0 or not np.isfinite(total):
        raise RuntimeError("singular covariance support; cannot normalize")
    return x / total


def kkt_residual(cov: np.ndarray, w: np.ndarray, active_tol: float = 1e-10) -> float:
    """Max violation of the KKT system for min w'Cw, sum(w)=1, w>=0."""
    grad = cov @ w
    lam_half = float(w @ grad)  # = lambda/2 at the optimum
    active = w > active_tol
    res = abs(float(w.sum()) - 1.0)
    res = max(res, float(max(0.0, -(w.min()))))
    if np.any(active):
        res = max(res, float(np.max(np.abs(grad[active] - lam_half))))
    if np.any(~active):
        res = max(res, float(max(0.0, np.max(lam_half - grad[~active]))))
    return res


def min_variance_array(cov: np.ndarray, max_iter: int | None = None) -> np.ndarray:
    """Long-only minimum-variance weights for a covariance matrix.

    Primal active-set iteration; finishes with a KKT check and a guarantee
    that no single-asset portfolio beats the returned weights.
    """
    C = np.asarray(cov, dtype=float)
    n = C.shape[0]
    if C.shape != (n, n) or n < 1:
        raise ValueError("covariance must be square and non-empty")
    if not np.all(np.isfinite(C)):
        raise ValueError("non-finite covariance entries")
    if np.max(np.abs(C - C.T)) > 1e-12 * max(1.0, float(np.max(np.abs(C)))):
        raise ValueError("covariance not symmetric")
    if n == 1:
        return np.ones(1)

    if max_iter is None:
        max_iter = 50 * n + 100
    w = np.full(n, 1.0 / n)
    free = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        idx = np.nonzero(free)[0]
        target = np.zeros(n)
        target[idx] = _solve_on_support(C, idx)
        if np.all(target[idx] >= -1e-14):
            w = np.maximum(target, 0.0)
            w /= w.sum()
            grad = C @ w
            lam_half = float(w @ grad)
            blocked = ~free
            if not np.any(blocked):
                break
            viol = lam_half - grad
            viol[free] = -np.inf
            worst = int(np.argmax(viol))
            if viol[worst] <= 1e-12:
                break
            free[worst] = True
        else:
            # step toward the equality solution until a coordinate hits zero
            step = target - w
            shrink = idx[step[idx] < 0]
            alphas = -w[shrink] / step[shrink]
            alpha = float(np.min(alphas))
            alpha = min(max(alpha, 0.0), 1.0)
            w = w + alpha * step
            hit = shrink[np.argmin(alphas)]
            w[hit] = 0.0
            free[hit] = False
            w = np.maximum(w, 0.0)
            w /= w.sum()
    else:
        raise RuntimeError("active-set iteration failed to converge")

    res = kkt_residual(C, w)
    if res >= KKT_TOL:
        raise RuntimeError(f"KKT residual {res:.3e} exceeds {KKT_TOL}")

    # no single-asset portfolio may beat the solution; swap in the best
    # basis vector on a floating-point hair, abort on a real gap
    obj = float(w @ C @ w)
    best_single = int(np.argmin(np.diag(C)))
    single_obj = float(C[best_single, best_single])
    if obj > single_obj:
        gap = obj - single_obj
        if gap > 1e-9 * max(1.0, single_obj):
            raise RuntimeError(f"solver output beaten by a basis vector by {gap:.3e}")
        logger.warning("replacing near-optimal weights with basis vector %d", best_single)
        w = np.zeros(n)
        w[best_single] = 1.0
    return w


def min_variance_weights(cov: np.ndarray, tickers) -> WeightVector:
    w = min_variance_array(cov)
    return WeightVector({t: float(x) for t, x in zip(tickers, w)})


def annual_risk(y) -> float:
    """Annualized volatility: population std times sqrt(252)."""
    r = np.asarray(y, dtype=float)
    if r.size < 2:
        raise ValueError("need at least 2 returns")
    return float(r.std() * math.sqrt(TRADING_DAYS_PER_YEAR))


def portfolio_sharpe(y) -> float:
    r = np.asarray(y, dtype=float)
    if r.size < 2:
        raise ValueError("need at least 2 returns")
    std = float(r.std())
    if std == 0.0:
        logger.warning("constant portfolio series; reporting Sharpe 0")
        return 0.0
    return float(r.mean()) / std


def backtest(
    test_returns: PriceMatrix,
    history_returns: PriceMatrix | None = None,
    window: int = DEFAULT_WINDOW,
    lookback: int = DEFAULT_LOOKBACK,
) -> BacktestResult:
    """Monthly-rebalanced minimum-variance backtest over the test period.

    history_returns (the train tail) is prepended so the first rebalance,
    at test day 0, has a full `lookback` of strictly-prior data. Weights
    are held fixed between rebalances.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if lookback < 2:
        raise ValueError("lookback must be >= 2")
    if test_returns.n_days <= window:
        raise ValueError(f"test period of {test_returns.n_days} days needs more than one {window}-day window")

    tickers = test_returns.tickers
    if history_returns is not None:
        if history_returns.tickers != tickers:
            raise ValueError("history and test tickers differ")
        if max(history_returns.dates) >= min(test_returns.dates):
            raise ValueError("history overlaps the test period")
        combined = np.vstack([history_returns.values, test_returns.values])
        all_dates = history_returns.dates + test_returns.dates
        offset = history_returns.n_days
    else:
        combined = test_returns.values
        all_dates = test_returns.dates
        offset = 0
    if offset < lookback:
        raise ValueError(f"insufficient history: have {offset} days, lookback needs {lookback}")

    n_test = test_returns.n_days
    y = np.empty(n_test)
    rebalance_dates: list[date] = []
    weight_vectors: list[WeightVector] = []
    for start in range(0, n_test, window):
        pos = offset + start
        window_values = combined[pos - lookback : pos]
        window_dates = all_dates[pos - lookback : pos]
        rebalance_date = test_returns.dates[start]
        assert max(window_dates) < rebalance_date, "look-ahead in covariance window"
        wv = min_variance_weights(covariance(window_values), tickers)
        rebalance_dates.append(rebalance_date)
        weight_vectors.append(wv)
        w = wv.as_array(tickers)
        stop = min(start + window, n_test)
        y[start:stop] = test_returns.values[start:stop] @ w

    return BacktestResult(
        dates=test_returns.dates,
        y=y,
        rebalance_dates=tuple(rebalance_dates),
        weights=tuple(weight_vectors),
        annual_risk=annual_risk(y),
        sharpe=portfolio_sharpe(y),
    )


def equal_weight_series(returns: PriceMatrix) -> np.ndarray:
    """Daily returns of the 1/n portfolio over all columns."""
    return returns.values.mean(axis=1)


def write_backtest_csv(result: BacktestResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "portfolio_return"])
        for d, r in zip(result.dates, result.y):
            writer.writerow([d.isoformat(), f"{r:.17g}"])


def backtest_summary(result: BacktestResult, method: str, clustering: str, n_stocks: int) -> dict:
    return {
        "method": method,
        "clustering": clustering,
        "risk": result.annual_risk,
        "sharpe": result.sharpe,
        "n_stocks": n_stocks,
        "rebalances": len(result.rebalance_dates),
    }
