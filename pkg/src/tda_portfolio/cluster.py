"""Clustering of stock embedding vectors and partition utilities.

K-Means (k-means++ with restarts) and agglomerative clustering
(Lance-Williams updates for ward/average/complete linkage) are written
out explicitly so that tie-breaking and the iteration-level inertia
guarantee are pinned down; library implementations serve as test oracles
only. Also provides the economic-sector baseline partition and the
adjusted Rand index used to compare partitions.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

LINKAGES = ("ward", "average", "complete")

DEFAULT_K = 11  # one cluster per economic sector
DEFAULT_SEED = 42
DEFAULT_RESTARTS = 10

MAX_LLOYD_ITER = 300
CENTROID_TOL = 1e-8
# relative slack when asserting the inertia sequence never increases
_INERTIA_SLACK = 1e-9


@dataclass(frozen=True)
class Partition:
    """Assignment of every ticker to a cluster id in [0, k)."""

    assignments: dict[str, int]
    k: int
    method: str

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        for ticker, cid in self.assignments.items():
            if not 0 <= cid < self.k:
                raise ValueError(f"cluster id {cid} for {ticker} outside [0, {self.k})")

    @property
    def tickers(self) -> list[str]:
        return sorted(self.assignments)

    def labels_for(self, tickers) -> np.ndarray:
        return np.array([self.assignments[t] for t in tickers], dtype=int)

    def members(self, cluster_id: int) -> list[str]:
        return sorted(t for t, c in self.assignments.items() if c == cluster_id)

    def sizes(self) -> list[int]:
        counts = [0] * self.k
        for cid in self.assignments.values():
            counts[cid] += 1
        return counts


def standardize(matrix: np.ndarray) -> np.ndarray:
    """Per-column zero mean / unit variance; constant columns map to zero."""
    X = np.asarray(matrix, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return (X - mean) / std


def _plus_plus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass at existing centers; any uncovered point works
            candidates = np.nonzero(d2 == 0.0)[0]
            centers[c] = X[candidates[int(rng.integers(candidates.size))]]
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
            centers[c] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[c]) ** 2, axis=1))
    return centers


def kmeans_run(X: np.ndarray, k: int, rng: np.random.Generator):
    """Single seeded Lloyd run; returns (labels, centroids, inertia, history)."""
    n = X.shape[0]
    centers = _plus_plus_init(X, k, rng)
    prev_inertia = math.inf
    history: list[float] = []
    labels = np.zeros(n, dtype=int)
    for _ in range(MAX_LLOYD_ITER):
        d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d2, axis=1)
        point_d2 = d2[np.arange(n), labels]

        for cid in range(k):
            if not np.any(labels == cid):
                far = int(np.argmax(point_d2))
                centers[cid] = X[far]
                labels[far] = cid
                point_d2[far] = 0.0

        inertia = float(point_d2.sum())
        assert inertia <= prev_inertia * (1.0 + _INERTIA_SLACK) + 1e-12, (
            f"inertia increased: {prev_inertia} -> {inertia}"
        )
        history.append(inertia)
        prev_inertia = inertia

        new_centers = centers.copy()
        for cid in range(k):
            mask = labels == cid
            if np.any(mask):
                new_centers[cid] = X[mask].mean(axis=0)
        shift = float(np.sqrt(np.sum((new_centers - centers) ** 2, axis=1)).max())
        centers = new_centers
        if shift < CENTROID_TOL:
            break
    d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    return labels, centers, inertia, history


def kmeans(
    tickers: list[str],
    matrix: np.ndarray,
    k: int = DEFAULT_K,
    seed: int = DEFAULT_SEED,
    restarts: int = DEFAULT_RESTARTS,
) -> Partition:
    """Best-of-restarts K-Means partition; fully determined by `seed`."""
    X = np.asarray(matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(tickers):
        raise ValueError("matrix rows must align with tickers")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite embedding entries")
    distinct = np.unique(X, axis=0).shape[0]
    if k > distinct:
        raise ValueError(f"k={k} exceeds the {distinct} distinct embedding rows")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")

    best = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        labels, _, inertia, _ = kmeans_run(X, k, rng)
        if best is None or inertia < best[1]:
            best = (labels, inertia)
    labels = best[0]
    sizes = np.bincount(labels, minlength=k)
    if np.any(sizes == 0):
        raise RuntimeError("K-Means produced an empty cluster")
    return Partition({t: int(c) for t, c in zip(tickers, labels)}, k=k, method="kmeans")


def agglomerative(
    tickers: list[str],
    matrix: np.ndarray,
    k: int = DEFAULT_K,
    linkage: str = "ward",
) -> Partition:
    """Bottom-up hierarchical clustering cut at k clusters.

    Ties in the merge choice go to the lexicographically smallest active
    pair. Ward updates run on squared Euclidean distances; average and
    complete on raw distances.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    X = np.asarray(matrix, dtype=float)
    n = X.shape[0]
    if n != len(tickers):
        raise ValueError("matrix rows must align with tickers")
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")

    diff = X[:, None, :] - X[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    D = d2 if linkage == "ward" else np.sqrt(d2)
    np.fill_diagonal(D, np.inf)
    sizes = np.ones(n)
    members: list[list[int] | None] = [[i] for i in range(n)]

    for _ in range(n - k):
        flat = int(np.argmin(D))  # row-major first hit = smallest (i, j)
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        ni, nj = sizes[i], sizes[j]
        others = [m for m in range(n) if members[m] is not None and m not in (i, j)]
        for m in others:
            nm = sizes[m]
            if linkage == "ward":
                new = ((ni + nm) * D[i, m] + (nj + nm) * D[j, m] - nm * D[i, j]) / (ni + nj + nm)
            elif linkage == "average":
                new = (ni * D[i, m] + nj * D[j, m]) / (ni + nj)
            else:
                new = max(D[i, m], D[j, m])
            D[i, m] = D[m, i] = new
        members[i] = members[i] + members[j]
        members[j] = None
        sizes[i] = ni + nj
        D[j, :] = np.inf
        D[:, j] = np.inf

    clusters = sorted((m for m in members if m is not None), key=min)
    assignments: dict[str, int] = {}
    for cid, group in enumerate(clusters):
        for idx in group:
            assignments[tickers[idx]] = cid
    return Partition(assignments, k=k, method=f"agglomerative-{linkage}")


def sector_partition(sectors) -> Partition:
    """One cluster per distinct sector label, ids in sorted label order."""
    labels = sectors.labels if hasattr(sectors, "labels") else dict(sectors)
    if not labels:
        raise ValueError("empty sector map")
    distinct = sorted(set(labels.values()))
    index = {name: i for i, name in enumerate(distinct)}
    return Partition({t: index[s] for t, s in labels.items()}, k=len(distinct), method="sectors")


def _comb2(x) -> float:
    return float(x) * (float(x) - 1.0) / 2.0


def adjusted_rand_index(a: Partition, b: Partition) -> float:
    """ARI from the pair-counting contingency table.

    Degenerate case: when both partitions are trivial the expected and
    maximal indices coincide; identical partitions score 1.0 then.
    """
    if set(a.assignments) != set(b.assignments):
        raise ValueError("partitions cover different ticker sets")
    tickers = sorted(a.assignments)
    n = len(tickers)
    table = np.zeros((a.k, b.k))
    for t in tickers:
        table[a.assignments[t], b.assignments[t]] += 1

    sum_cells = sum(_comb2(v) for v in table.reshape(-1))
    sum_rows = sum(_comb2(v) for v in table.sum(axis=1))
    sum_cols = sum(_comb2(v) for v in table.sum(axis=0))
    total = _comb2(n)
    if total == 0:
        return 1.0
    expected = sum_rows * sum_cols / total
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        same = all(
            (a.assignments[s] == a.assignments[t]) == (b.assignments[s] == b.assignments[t])
            for idx, s in enumerate(tickers)
            for t in tickers[idx + 1 :]
        )
        return 1.0 if same else 0.0
    return float((sum_cells - expected) / (max_index - expected))


def write_partition_csv(partition: Partition, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ticker", "cluster", "method"])
        for ticker in partition.tickers:
            writer.writerow([ticker, partition.assignments[ticker], partition.method])


def read_partition_csv(path) -> Partition:
    assignments: dict[str, int] = {}
    method = ""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["ticker", "cluster", "method"]:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for row in reader:
            if not row:
                continue
            assignments[row[0]] = int(row[1])
            method = row[2]
    if not assignments:
        raise ValueError(f"{path}: empty partition")
    return Partition(assignments, k=max(assignments.values()) + 1, method=method)
