"""Result types for nearest-neighbor and per-cell statistics."""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

# (p, ε) key of a truncated statistic X′_p(ε)
TruncationKey = Tuple[float, float]


@dataclass(frozen=True)
class NeighborResult:
    """Nearest-neighbor distance of one nucleus.

    Attributes:
        delta: δ, the distance to the nearest other sampled nucleus.
        neighbor: Index of that nucleus.
        truncated: True when a nucleus outside the sampled region could
            be closer (δ is then an upper bound).
    """
    delta: float
    neighbor: int
    truncated: bool


@dataclass
class CellStatistics:
    """X₀, X₁ and X′_p(ε) of one lattice cell.

    Attributes:
        cell: Cell index j.
        x0: Number of nuclei in the cell.
        x1: Σ 1/δ over them (0 for an empty cell).
        xp: X′_p(ε) = Σ min(δ, ε)^(-p), keyed by (p, ε).
        deltas: δ of each nucleus in the cell.
        truncated: True if any of those δ is margin-limited.
    """
    cell: Tuple[int, int, int]
    x0: int
    x1: float
    xp: Dict[TruncationKey, float] = field(default_factory=dict)
    deltas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    truncated: bool = False


@dataclass
class CellStatisticsTable:
    """Statistics of every window cell, as parallel arrays in cell order."""
    cells: np.ndarray
    x0: np.ndarray
    x1: np.ndarray
    xp: Dict[TruncationKey, np.ndarray]
    charge: np.ndarray
    truncated: np.ndarray

    def __len__(self) -> int:
        return int(self.cells.shape[0])

    def row(self, i: int) -> CellStatistics:
        return CellStatistics(
            cell=tuple(int(v) for v in self.cells[i]),
            x0=int(self.x0[i]),
            x1=float(self.x1[i]),
            xp={k: float(v[i]) for k, v in self.xp.items()},
            truncated=bool(self.truncated[i]),
        )
