"""Fixed-length embedding vectors from persistence diagrams.

Three families: bar statistics (STATS), persistence landscapes (PL1/PL2)
and persistence images (PI1/PI2), where the digit is the homology
dimension read from the diagram. Landscapes and images can run on a
per-diagram grid or on a shared grid pooled over a universe of diagrams;
the shared grid is what makes vectors comparable across stocks.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .persistence import PersistenceDiagram

logger = logging.getLogger(__name__)

METHODS = ("STATS", "PL1", "PL2", "PI1", "PI2")

STATS_LENGTH = 20  # 4 slots for H0 + 8 each for H1, H2


@dataclass(frozen=True)
class VectorizeParams:
    method: str
    landscape_layers: int = 5
    landscape_samples: int = 100
    image_resolution: int = 20
    sigma_scale: float = 0.05  # sigma = sigma_scale * max persistence
    global_grid: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.landscape_layers < 1:
            raise ValueError("landscape_layers must be >= 1")
        if self.landscape_samples < 2:
            raise ValueError("landscape_samples must be >= 2")
        if self.image_resolution < 1:
            raise ValueError("image_resolution must be >= 1")
        if not self.sigma_scale > 0:
            raise ValueError("sigma_scale must be positive")

    @property
    def homology_dim(self) -> int:
        """Homology dimension the method reads; 0 stands for all-dims STATS."""
        return 0 if self.method == "STATS" else int(self.method[-1])

    @property
    def vector_length(self) -> int:
        if self.method == "STATS":
            return STATS_LENGTH
        if self.method.startswith("PL"):
            return self.landscape_layers * self.landscape_samples
        return self.image_resolution**2


@dataclass(frozen=True)
class GridBounds:
    """Pooled diagram extents for one homology dimension.

    t_min/t_max bound the landscape grid; b_max/p_max bound the image grid
    and normalize the image weight. Zero-persistence bars never contribute.
    """

    t_min: float = 0.0
    t_max: float = 1.0
    b_max: float = 0.0
    p_max: float = 0.0
    empty: bool = True


def _finite_positive(diagram: PersistenceDiagram, dim: int) -> np.ndarray:
    """Finite bars of one dimension with strictly positive persistence, (k,2)."""
    bars = diagram.finite(dim)
    if bars.size == 0:
        return bars
    return bars[bars[:, 1] > bars[:, 0]]


def diagram_bounds(diagram: PersistenceDiagram, dim: int) -> GridBounds:
    bars = _finite_positive(diagram, dim)
    if bars.size == 0:
        return GridBounds()
    births = bars[:, 0]
    deaths = bars[:, 1]
    return GridBounds(
        t_min=float(births.min()),
        t_max=float(deaths.max()),
        b_max=float(births.max()),
        p_max=float((deaths - births).max()),
        empty=False,
    )


def pool_bounds(bounds: list[GridBounds]) -> GridBounds:
    """Associative max/min-reduction of per-diagram bounds."""
    live = [b for b in bounds if not b.empty]
    if not live:
        return GridBounds()
    return GridBounds(
        t_min=min(b.t_min for b in live),
        t_max=max(b.t_max for b in live),
        b_max=max(b.b_max for b in live),
        p_max=max(b.p_max for b in live),
        empty=False,
    )


def bar_statistics(diagram: PersistenceDiagram) -> np.ndarray:
    """20-slot summary across H0..H2, infinite bars excluded.

    H0 contributes (mean, sum, std, max) of bar lengths; H1 and H2 each add
    (mean, sum, std, max, last birth, longest-bar birth, longest-bar death,
    bar count). Empty diagrams contribute zeros; std is population std.
    """
    out = []
    for dim in (0, 1, 2):
        bars = diagram.finite(dim)
        if bars.size == 0:
            out.extend([0.0] * (4 if dim == 0 else 8))
            continue
        lengths = bars[:, 1] - bars[:, 0]
        block = [
            float(lengths.mean()),
            float(lengths.sum()),
            float(lengths.std()),
            float(lengths.max()),
        ]
        if dim >= 1:
            longest = int(np.argmax(lengths))  # first occurrence; bars arrive sorted
            block.extend(
                [
                    float(bars[:, 0].max()),
                    float(bars[longest, 0]),
                    float(bars[longest, 1]),
                    float(len(bars)),
                ]
            )
        out.extend(block)
    return np.array(out, dtype=float)


def landscape(
    diagram: PersistenceDiagram,
    dim: int,
    layers: int = 5,
    samples: int = 100,
    t_range: tuple[float, float] | None = None,
) -> np.ndarray:
    """Persistence landscape sampled on a uniform grid, flattened layer-major.

    lambda_k(t) is the k-th largest tent value min(t-b, d-t)+ over the
    finite bars of the chosen dimension. The grid spans [min birth,
    max death] of those bars unless t_range overrides it.
    """
    if dim not in (1, 2):
        raise ValueError(f"landscape dim must be 1 or 2, got {dim}")
    bars = _finite_positive(diagram, dim)
    if t_range is None:
        if bars.size == 0:
            t_range = (0.0, 1.0)
        else:
            t_range = (float(bars[:, 0].min()), float(bars[:, 1].max()))
    grid = np.linspace(t_range[0], t_range[1], samples)
    values = np.zeros((layers, samples))
    if bars.size:
        tents = np.minimum(grid[None, :] - bars[:, 0:1], bars[:, 1:2] - grid[None, :])
        np.maximum(tents, 0.0, out=tents)
        tents = np.sort(tents, axis=0)[::-1]
        top = min(layers, tents.shape[0])
        values[:top] = tents[:top]
    return values.reshape(-1)


def persistence_image(
    diagram: PersistenceDiagram,
    dim: int,
    resolution: int = 20,
    sigma: float | None = None,
    bounds: GridBounds | None = None,
) -> np.ndarray:
    """Persistence image: weighted Gaussian surface rasterized over
    (birth, persistence) space, flattened row-major (persistence rows,
    birth columns).

    Each finite bar (b, d) becomes a Gaussian at (b, p=d-b) weighted by
    p/p_max; pixel value is the surface at the pixel center times pixel
    area. The grid spans [0, b_max] x [0, p_max] padded by 3 sigma on all
    sides. With no bounds/sigma given both derive from this diagram
    (sigma = 0.05 * p_max).
    """
    if dim not in (1, 2):
        raise ValueError(f"persistence_image dim must be 1 or 2, got {dim}")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    bars = _finite_positive(diagram, dim)
    if bounds is None:
        bounds = diagram_bounds(diagram, dim)
    if bounds.empty or bounds.p_max <= 0:
        return np.zeros(resolution * resolution)
    if sigma is None:
        sigma = 0.05 * bounds.p_max
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if bars.size == 0:
        return np.zeros(resolution * resolution)

    pad = 3.0 * sigma
    x_lo, x_hi = -pad, bounds.b_max + pad
    y_lo, y_hi = -pad, bounds.p_max + pad
    dx = (x_hi - x_lo) / resolution
    dy = (y_hi - y_lo) / resolution
    xs = x_lo + dx * (np.arange(resolution) + 0.5)
    ys = y_lo + dy * (np.arange(resolution) + 0.5)

    births = bars[:, 0]
    pers = bars[:, 1] - bars[:, 0]
    weights = pers / bounds.p_max

    # separable Gaussian: outer product of per-axis kernels, summed over bars
    gx = np.exp(-((xs[None, :] - births[:, None]) ** 2) / (2.0 * sigma * sigma))
    gy = np.exp(-((ys[None, :] - pers[:, None]) ** 2) / (2.0 * sigma * sigma))
    norm = 1.0 / (2.0 * math.pi * sigma * sigma)
    surface = np.einsum("b,by,bx->yx", weights * norm, gy, gx)
    return (surface * (dx * dy)).reshape(-1)


def embed_stock(
    diagram: PersistenceDiagram,
    params: VectorizeParams,
    bounds: GridBounds | None = None,
    sigma: float | None = None,
    h2_available: bool = True,
) -> np.ndarray:
    """One stock's embedding vector for the configured method.

    bounds/sigma carry the pooled (universe-wide) grid when global_grid is
    on; per-diagram grids are the fallback for standalone use.
    """
    method = params.method
    if method in ("PL2", "PI2") and not h2_available:
        raise ValueError(f"method {method} needs H2 bars but H2 was not computed")
    if method == "STATS":
        return bar_statistics(diagram)
    dim = params.homology_dim
    if method.startswith("PL"):
        t_range = None
        if bounds is not None and not bounds.empty:
            t_range = (bounds.t_min, bounds.t_max)
        return landscape(
            diagram, dim, layers=params.landscape_layers, samples=params.landscape_samples, t_range=t_range
        )
    return persistence_image(
        diagram, dim, resolution=params.image_resolution, sigma=sigma, bounds=bounds
    )


def embedding_matrix(
    diagrams: dict[str, PersistenceDiagram],
    params: VectorizeParams,
    h2_available: bool = True,
) -> tuple[list[str], np.ndarray]:
    """Embed a universe of stocks into one matrix, row per ticker (sorted).

    In global-grid mode a first pass pools grid bounds over every diagram,
    then each stock is vectorized against the shared grid with a shared
    sigma = sigma_scale * pooled p_max.
    """
    tickers = sorted(diagrams)
    if not tickers:
        raise ValueError("no diagrams to embed")
    bounds = None
    sigma = None
    if params.global_grid and params.method != "STATS":
        dim = params.homology_dim
        bounds = pool_bounds([diagram_bounds(diagrams[t], dim) for t in tickers])
        if params.method.startswith("PI") and not bounds.empty and bounds.p_max > 0:
            sigma = params.sigma_scale * bounds.p_max
    rows = [
        embed_stock(diagrams[t], params, bounds=bounds, sigma=sigma, h2_available=h2_available)
        for t in tickers
    ]
    matrix = np.vstack(rows)
    if matrix.shape != (len(tickers), params.vector_length):
        raise AssertionError(f"embedding matrix shape {matrix.shape} off contract")
    return tickers, matrix


def write_embeddings_csv(path, tickers: list[str], matrix: np.ndarray, params: VectorizeParams) -> None:
    """Row-per-ticker CSV with a leading comment line recording the method."""
    meta = (
        f"# method={params.method} layers={params.landscape_layers} "
        f"samples={params.landscape_samples} resolution={params.image_resolution} "
        f"sigma_scale={params.sigma_scale:.17g} global_grid={params.global_grid}"
    )
    width = len(str(max(matrix.shape[1] - 1, 0)))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(meta + "\n")
        writer = csv.writer(fh)
        writer.writerow(["ticker"] + [f"x{i:0{width}d}" for i in range(matrix.shape[1])])
        for ticker, row in zip(tickers, matrix):
            writer.writerow([ticker] + [f"{v:.17g}" for v in row])


def read_embeddings_csv(path) -> tuple[list[str], np.ndarray]:
    tickers = []
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValueError(f"{path}: missing metadata line")
        reader = csv.reader(fh)
        next(reader, None)  # column header
        for row in reader:
            if not row:
                continue
            tickers.append(row[0])
            rows.append([float(v) for v in row[1:]])
    return tickers, np.array(rows, dtype=float)
