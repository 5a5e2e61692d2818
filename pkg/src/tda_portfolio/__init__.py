"""Topology-driven stock clustering and minimum-variance portfolio backtesting."""

__version__ = "0.1.0"

from .cluster import Partition, adjusted_rand_index, agglomerative, kmeans, sector_partition
from .marketdata import PeriodSplit, PriceMatrix, SectorMap, compute_returns, load_prices, load_sectors, split
from .persistence import PersistenceDiagram, vr_diagram
from .portfolio import backtest, min_variance_weights, select_stocks, stock_sharpe
from .takens import EmbeddingParams, PointCloud, embed, select_delay, select_dimension
from .vectorize import VectorizeParams, bar_statistics, embedding_matrix, landscape, persistence_image

__all__ = [
    "EmbeddingParams",
    "Partition",
    "PeriodSplit",
    "PersistenceDiagram",
    "PointCloud",
    "PriceMatrix",
    "SectorMap",
    "VectorizeParams",
    "adjusted_rand_index",
    "agglomerative",
    "backtest",
    "bar_statistics",
    "compute_returns",
    "embed",
    "embedding_matrix",
    "kmeans",
    "landscape",
    "load_prices",
    "load_sectors",
    "min_variance_weights",
    "persistence_image",
    "sector_partition",
    "select_delay",
    "select_dimension",
    "select_stocks",
    "split",
    "stock_sharpe",
    "vr_diagram",
]
