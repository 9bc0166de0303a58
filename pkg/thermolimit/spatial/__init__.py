"""Nearest-neighbor distances and per-cell statistics X₀, X₁, X′_p."""

from .index import CellIndex, build_index, locate_nucleus, nearest_neighbor_distance, pair_distances
from .models import CellStatistics, CellStatisticsTable, NeighborResult
from .oracle import brute_force_cell_statistics, brute_force_deltas
from .statistics import (
    all_cell_statistics,
    cell_statistics,
    cell_table,
    truncation_bound_holds,
    window_cells,
)

__all__ = [
    "CellIndex",
    "CellStatistics",
    "CellStatisticsTable",
    "NeighborResult",
    "all_cell_statistics",
    "brute_force_cell_statistics",
    "brute_force_deltas",
    "build_index",
    "cell_statistics",
    "cell_table",
    "locate_nucleus",
    "nearest_neighbor_distance",
    "pair_distances",
    "truncation_bound_holds",
    "window_cells",
]
