"""Time-delay embedding of scalar series into point clouds.

The delay tau comes from the first significant minimum of the delayed
mutual information curve; the dimension from the Kennel false-nearest-
neighbor ratio test.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

logger = logging.getLogger(__name__)

DEFAULT_BINS = 16
DEFAULT_R_TOL = 15.0
DEFAULT_FNN_THRESHOLD = 0.01
DEFAULT_DIM_MAX = 10


class SeriesTooShortError(ValueError):
    """The series cannot support the requested embedding or estimate."""


@dataclass(frozen=True)
class EmbeddingParams:
    """Delay-embedding hyperparameters: lag, dimension and point stride."""

    tau: int
    dim: int
    stride: int = 1

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError(f"tau must be >= 1, got {self.tau}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")

    @property
    def window(self) -> int:
        """Span of one embedded point in series samples."""
        return (self.dim - 1) * self.tau


@dataclass(frozen=True)
class PointCloud:
    """Delay-embedding points (rows) for one source series."""

    points: np.ndarray
    source_ticker: str
    params: EmbeddingParams

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")

    def __len__(self) -> int:
        return self.points.shape[0]

    def has_min_points(self) -> bool:
        """Whether the cloud is large enough for nontrivial homology (M >= d+2)."""
        return len(self) >= self.params.dim + 2


def _pair_histogram(x: np.ndarray, tau: int, bins: int) -> np.ndarray:
    """Joint counts of (x_t, x_{t+tau}) on a bins x bins grid over the series range."""
    lo, hi = float(x.min()), float(x.max())
    joint, _, _ = np.histogram2d(x[:-tau], x[tau:], bins=bins, range=[[lo, hi], [lo, hi]])
    return joint


def delayed_mutual_information(series, tau: int, bins: int = DEFAULT_BINS) -> float:
    """Histogram estimate (nats) of MI between the series and its tau-lagged copy.

    Both marginals are binned with equal-width bins over the full series
    range, so reversing the pairing transposes the joint histogram and
    leaves the estimate unchanged. A constant series has zero range and is
    defined to carry zero information.
    """
    x = np.asarray(series, dtype=float)
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    if x.size <= tau:
        raise SeriesTooShortError(f"series length {x.size} must exceed tau={tau}")
    if x.max() == x.min():
        logger.warning("constant series: mutual information defined as 0")
        return 0.0
    joint = _pair_histogram(x, tau, bins)
    joint = joint / joint.sum()
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / np.outer(px, py)[nz])))
    return max(mi, 0.0)


def _mi_noise_floor(n_pairs: int, bins: int) -> float:
    # Miller-Madow bias scale of the histogram MI estimator; curve features
    # smaller than this are treated as estimator noise, not structure.
    return (bins - 1) ** 2 / (2.0 * n_pairs)


def select_delay(series, tau_max: int, bins: int = DEFAULT_BINS) -> int:
    """Smallest tau at a significant local minimum of the MI curve.

    Minima must clear the estimator noise floor on both sides; without one,
    falls back to the argmin of the curve, counting every tau within the
    noise floor of the minimum as tied and taking the smallest.
    """
    x = np.asarray(series, dtype=float)
    if tau_max < 1:
        raise ValueError(f"tau_max must be >= 1, got {tau_max}")
    if tau_max >= x.size / 4:
        raise SeriesTooShortError(f"tau_max={tau_max} too large for series of length {x.size}")
    mi = np.array([delayed_mutual_information(x, t, bins) for t in range(1, tau_max + 1)])
    tol = _mi_noise_floor(x.size - tau_max, bins)
    for i in range(1, len(mi) - 1):
        if mi[i] < mi[i - 1] - tol and mi[i] < mi[i + 1] - tol:
            return i + 1
    tied = np.nonzero(mi <= mi.min() + tol)[0]
    tau = int(tied[0]) + 1
    logger.warning("no significant local minimum in MI curve; falling back to argmin tau=%d", tau)
    return tau


def _delay_matrix(x: np.ndarray, tau: int, dim: int, stride: int = 1) -> np.ndarray:
    span = (dim - 1) * tau
    if x.size < span + 1:
        raise SeriesTooShortError(
            f"series length {x.size} too short for dim={dim}, tau={tau} (needs {span + 1})"
        )
    n = (x.size - span - 1) // stride + 1
    starts = np.arange(n) * stride
    return x[starts[:, None] + np.arange(dim)[None, :] * tau]


def false_nearest_neighbors(series, tau: int, dim: int, r_tol: float = DEFAULT_R_TOL) -> float:
    """Kennel ratio test: fraction of dim-space nearest neighbors that
    separate by more than r_tol when the (dim+1)-th coordinate is added.

    Pairs at exactly zero distance cannot be ratio-tested and are excluded;
    the fraction is over the remaining valid pairs.
    """
    x = np.asarray(series, dtype=float)
    emb_hi = _delay_matrix(x, tau, dim + 1)
    m = emb_hi.shape[0]
    if m < 10:
        raise SeriesTooShortError(f"only {m} embedded points at dim={dim + 1}; need at least 10")
    base = _delay_matrix(x, tau, dim)[:m]
    dist, idx = cKDTree(base).query(base, k=2)
    nn_dist = dist[:, 1]
    nn_idx = idx[:, 1]
    valid = nn_dist > 0.0
    if not np.any(valid):
        logger.warning("all nearest-neighbor distances are zero; FNN fraction defined as 0")
        return 0.0
    new_coord = emb_hi[:, -1]
    separation = np.abs(new_coord - new_coord[nn_idx])
    # multiplicative form of the ratio test; near-revisits of a periodic
    # orbit have fp-noise on both sides of the ratio, so a separation below
    # 1e-9 of the series range cannot count as evidence of a false neighbor
    floor = 1e-9 * float(np.ptp(x))
    false = (separation[valid] > r_tol * nn_dist[valid]) & (separation[valid] > floor)
    return float(np.count_nonzero(false)) / float(np.count_nonzero(valid))


def select_dimension(
    series,
    tau: int,
    dim_max: int = DEFAULT_DIM_MAX,
    threshold: float = DEFAULT_FNN_THRESHOLD,
    r_tol: float = DEFAULT_R_TOL,
) -> int:
    """Smallest dimension with FNN fraction below threshold, else dim_max."""
    if dim_max < 2:
        raise ValueError(f"dim_max must be >= 2, got {dim_max}")
    for dim in range(1, dim_max + 1):
        if false_nearest_neighbors(series, tau, dim, r_tol) < threshold:
            return dim
    logger.warning("FNN fraction never fell below %g; capping dimension at %d", threshold, dim_max)
    return dim_max


def embed(series, params: EmbeddingParams, ticker: str = "") -> PointCloud:
    """Delay-embed a series: point k is [x_sk, x_sk+tau, ..., x_sk+(d-1)tau].

    Yields floor((L - (d-1)*tau - 1)/s) + 1 points; every coordinate is a
    series sample, never an interpolation.
    """
    x = np.asarray(series, dtype=float)
    pts = _delay_matrix(x, params.tau, params.dim, params.stride)
    cloud = PointCloud(points=pts, source_ticker=ticker, params=params)
    if not cloud.has_min_points():
        logger.warning(
            "%s: only %d embedded points at dim=%d; homology will be trivial",
            ticker or "series", len(cloud), params.dim,
        )
    return cloud
