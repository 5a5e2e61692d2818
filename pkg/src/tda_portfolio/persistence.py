"""Vietoris-Rips persistence barcodes via boundary-matrix reduction over Z/2.

A simplex enters the filtration at its diameter (max pairwise distance
among its vertices). Homology is reported for dimensions strictly below
the maximum simplex dimension; classes alive at the radius cutoff get an
infinite death. The reduction processes one boundary matrix per simplex
dimension, highest first, with the clearing optimization; columns are
Python ints used as GF(2) bit vectors.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_SIMPLEX_BUDGET = 5_000_000


class SimplexBudgetError(RuntimeError):
    """Raised when a filtration would exceed the simplex budget."""


class Simplex(NamedTuple):
    """Vertex index tuple (strictly increasing) with its filtration value."""

    vertices: tuple[int, ...]
    value: float

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1


@dataclass(frozen=True)
class Filtration:
    """All simplices of a VR complex, sorted by (value, dimension, vertices)."""

    n_points: int
    simplices: tuple[Simplex, ...]
    max_dim: int


@dataclass(frozen=True)
class PersistenceDiagram:
    """Multiset of (birth, death, homology dim) bars; death may be inf."""

    bars: tuple[tuple[float, float, int], ...]

    def __post_init__(self):
        for birth, death, dim in self.bars:
            if not (birth <= death):
                raise ValueError(f"bar with birth {birth} > death {death}")
            if dim < 0:
                raise ValueError(f"negative homology dimension {dim}")
        object.__setattr__(self, "bars", tuple(sorted(self.bars, key=lambda b: (b[2], b[0], b[1]))))

    def of_dim(self, dim: int) -> tuple[tuple[float, float], ...]:
        return tuple((b, d) for b, d, p in self.bars if p == dim)

    def finite(self, dim: int) -> np.ndarray:
        """Finite (birth, death) pairs of one dimension as a (k, 2) array."""
        pairs = [(b, d) for b, d, p in self.bars if p == dim and math.isfinite(d)]
        return np.array(pairs, dtype=float).reshape(-1, 2)

    def infinite(self, dim: int) -> tuple[float, ...]:
        return tuple(b for b, d, p in self.bars if p == dim and math.isinf(d))

    def max_dim(self) -> int:
        return max((p for _, _, p in self.bars), default=0)


def pairwise_distances(points) -> np.ndarray:
    """Euclidean distance matrix, exactly symmetric by mirroring the upper triangle."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("empty point cloud")
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite coordinates")
    diff = pts[:, None, :] - pts[None, :, :]
    dm = np.sqrt(np.sum(diff * diff, axis=-1))
    upper = np.triu(dm, 1)
    return upper + upper.T


def enclosing_radius(dist: np.ndarray) -> float:
    """min over points of the max distance to any other point.

    Beyond this radius the VR complex is a cone and acyclic, so it is the
    natural filtration cutoff.
    """
    return float(np.min(np.max(dist, axis=1)))


def build_filtration(
    dist: np.ndarray,
    max_dim: int,
    max_radius: float,
    budget: int = DEFAULT_SIMPLEX_BUDGET,
) -> Filtration:
    """Enumerate all simplices of dimension <= max_dim with diameter <= max_radius."""
    dm = np.asarray(dist, dtype=float)
    n = dm.shape[0]
    if dm.shape != (n, n):
        raise ValueError("distance matrix must be square")
    if max_dim not in (1, 2, 3):
        raise ValueError(f"max_dim must be 1, 2 or 3, got {max_dim}")
    if not max_radius > 0:
        raise ValueError(f"max_radius must be positive, got {max_radius}")

    def check_budget(count):
        if count > budget:
            raise SimplexBudgetError(
                f"filtration exceeds the simplex budget ({count} > {budget}); "
                "use a larger embedding stride or a smaller max_radius"
            )

    simplices: list[Simplex] = [Simplex((i,), 0.0) for i in range(n)]
    count = n
    check_budget(count)

    adj = dm <= max_radius
    np.fill_diagonal(adj, False)
    iu, ju = np.nonzero(np.triu(adj, 1))
    count += iu.size
    check_budget(count)
    edges = list(zip(iu.tolist(), ju.tolist()))
    for i, j in edges:
        simplices.append(Simplex((i, j), float(dm[i, j])))

    triangles: list[tuple[int, int, int]] = []
    if max_dim >= 2:
        indices = np.arange(n)
        for i, j in edges:
            ks = indices[(indices > j) & adj[i] & adj[j]]
            if ks.size == 0:
                continue
            count += ks.size
            check_budget(count)
            dij = dm[i, j]
            values = np.maximum(dij, np.maximum(dm[i, ks], dm[j, ks]))
            for k, v in zip(ks.tolist(), values.tolist()):
                triangles.append((i, j, k))
                simplices.append(Simplex((i, j, k), v))

    if max_dim >= 3:
        indices = np.arange(n)
        for i, j, k in triangles:
            ls = indices[(indices > k) & adj[i] & adj[j] & adj[k]]
            if ls.size == 0:
                continue
            count += ls.size
            check_budget(count)
            base = max(dm[i, j], dm[i, k], dm[j, k])
            values = np.maximum(base, np.maximum(dm[i, ls], np.maximum(dm[j, ls], dm[k, ls])))
            for l, v in zip(ls.tolist(), values.tolist()):
                simplices.append(Simplex((i, j, k, l), v))

    simplices.sort(key=lambda s: (s.value, len(s.vertices), s.vertices))
    return Filtration(n_points=n, simplices=tuple(simplices), max_dim=max_dim)


def _faces(vertices: tuple[int, ...]):
    for drop in range(len(vertices)):
        yield vertices[:drop] + vertices[drop + 1 :]


def reduce(filtration: Filtration) -> PersistenceDiagram:
    """Persistence pairing of a filtration; bars for dims < filtration.max_dim.

    Zero-length bars are discarded. Classes never killed within the
    filtration get death = inf.
    """
    by_dim: list[list[Simplex]] = [[] for _ in range(filtration.max_dim + 1)]
    for s in filtration.simplices:
        by_dim[s.dim].append(s)

    bars: list[tuple[float, float, int]] = []
    # positions (within their dimension) of simplices already paired as a
    # homology-class birth by the round one dimension up
    paired_positive: list[set[int]] = [set() for _ in range(filtration.max_dim + 1)]

    for p in range(filtration.max_dim, 0, -1):
        cols = by_dim[p]
        rows = by_dim[p - 1]
        row_index = {s.vertices: i for i, s in enumerate(rows)}
        cleared = paired_positive[p]
        pivot_to_col: dict[int, int] = {}
        pivot_to_j: dict[int, int] = {}
        for j, simplex in enumerate(cols):
            if j in cleared:
                continue  # known positive; its column would reduce to zero
            col = 0
            for face in _faces(simplex.vertices):
                col |= 1 << row_index[face]
            while col:
                piv = col.bit_length() - 1
                other = pivot_to_col.get(piv)
                if other is None:
                    break
                col ^= other
            if col:
                piv = col.bit_length() - 1
                pivot_to_col[piv] = col
                pivot_to_j[piv] = j
                paired_positive[p - 1].add(piv)
                birth = rows[piv].value
                death = simplex.value
                if birth != death:
                    bars.append((birth, death, p - 1))
            elif p < filtration.max_dim:
                # positive simplex not killed by any higher column: essential
                bars.append((simplex.value, math.inf, p))

    for i, vertex in enumerate(by_dim[0]):
        if i not in paired_positive[0]:
            bars.append((vertex.value, math.inf, 0))

    return PersistenceDiagram(tuple(bars))


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def h0_mst(dist: np.ndarray) -> PersistenceDiagram:
    """Dimension-0 barcode from Kruskal's MST: one (0, w) bar per tree edge.

    Matches reduce()'s dim-0 output exactly (zero-weight edges give
    zero-length bars and are discarded there too).
    """
    dm = np.asarray(dist, dtype=float)
    n = dm.shape[0]
    if n < 1:
        raise ValueError("need at least one point")
    iu, ju = np.triu_indices(n, 1)
    order = np.lexsort((ju, iu, dm[iu, ju]))
    uf = _UnionFind(n)
    bars: list[tuple[float, float, int]] = []
    accepted = 0
    for e in order:
        if accepted == n - 1:
            break
        i, j = int(iu[e]), int(ju[e])
        if uf.union(i, j):
            accepted += 1
            w = float(dm[i, j])
            if w != 0.0:
                bars.append((0.0, w, 0))
    bars.append((0.0, math.inf, 0))
    return PersistenceDiagram(tuple(bars))


def vr_diagram(
    points,
    max_homology_dim: int = 1,
    max_radius: float | None = None,
    budget: int = DEFAULT_SIMPLEX_BUDGET,
) -> PersistenceDiagram:
    """Full VR pipeline for a point cloud: distances, filtration, reduction.

    max_radius defaults to the enclosing radius of the cloud.
    """
    if max_homology_dim not in (1, 2):
        raise ValueError(f"max_homology_dim must be 1 or 2, got {max_homology_dim}")
    pts = getattr(points, "points", points)
    dm = pairwise_distances(pts)
    if max_radius is None:
        max_radius = enclosing_radius(dm)
        if max_radius == 0.0:
            max_radius = 1.0  # all points coincide; any positive cutoff works
    filtration = build_filtration(dm, max_dim=max_homology_dim + 1, max_radius=max_radius, budget=budget)
    return reduce(filtration)


def write_diagram_csv(diagram: PersistenceDiagram, path) -> None:
    """Serialize as dim,birth,death rows with 'inf' for infinite deaths."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dim", "birth", "death"])
        for birth, death, dim in diagram.bars:
            death_str = "inf" if math.isinf(death) else f"{death:.17g}"
            writer.writerow([dim, f"{birth:.17g}", death_str])


def read_diagram_csv(path) -> PersistenceDiagram:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["dim", "birth", "death"]:
            raise ValueError(f"{path}: expected header dim,birth,death, got {header!r}")
        bars = []
        for row in reader:
            if not row:
                continue
            dim, birth, death = int(row[0]), float(row[1]), float(row[2])
            bars.append((birth, death, dim))
    return PersistenceDiagram(tuple(bars))
