"""Per-cell statistics X₀, X₁ and X′_p(ε).

For a window cell j (site point inside the window):

    X₀ = #{nuclei in cell j}
    X₁ = Σ 1/δ            over those nuclei (0 if none)
    X′_p(ε) = Σ min(δ, ε)^(-p)

Key functions:
    cell_statistics: One cell.
    all_cell_statistics: Every window cell at once, in cell order.
    truncation_bound_holds: Per-cell check of X′₂(ε) ≤ (X₀/ε + X₁)².
    cell_table: CSV-ready table i,j,k,X0,X1,Xp2,flag.
"""

from typing import Iterable, Optional, Sequence

import numpy as np
import structlog

from ..config import get_config
from ..exceptions import SpatialIndexError
from ..tables import Column, Table
from .index import CellIndex
from .models import CellStatistics, CellStatisticsTable

logger = structlog.get_logger("thermolimit.stats")


def _defaults(eps: Optional[float], p_list: Optional[Iterable[float]]):
    cfg = get_config()
    eps = cfg.truncation_epsilon if eps is None else float(eps)
    if not eps > 0:
        raise SpatialIndexError("truncation radius must be > 0", eps=eps)
    p_list = cfg.p_list if p_list is None else list(p_list)
    return eps, [float(p) for p in p_list]


def window_cells(index: CellIndex) -> np.ndarray:
    """Cells whose site lies in the window, lexicographic."""
    return index.lattice.sites_in_box(index.config.window)


def cell_statistics(
    index: CellIndex,
    j,
    eps: Optional[float] = None,
    p_list: Optional[Iterable[float]] = None,
) -> CellStatistics:
    """Statistics of cell ``j``.

    Raises:
        SpatialIndexError: if cell j lies outside the window.
    """
    eps, p_list = _defaults(eps, p_list)
    j = np.asarray(j, dtype=np.int64).reshape(3)
    if not index.config.window.contains(index.lattice.positions(j))[0]:
        raise SpatialIndexError(
            "cell lies in the margin region; its nearest-neighbor distances are biased",
            cell=tuple(int(v) for v in j),
        )
    members = index.bucket(j)
    if members.size == 0:
        return CellStatistics(
            cell=tuple(int(v) for v in j),
            x0=0,
            x1=0.0,
            xp={(p, eps): 0.0 for p in p_list},
        )
    d = index.deltas[members]
    return CellStatistics(
        cell=tuple(int(v) for v in j),
        x0=int(members.size),
        x1=float(np.sum(1.0 / d)),
        xp={(p, eps): float(np.sum(np.minimum(d, eps) ** -p)) for p in p_list},
        deltas=d,
        truncated=bool(np.any(index.truncated[members])),
    )


def all_cell_statistics(
    index: CellIndex,
    eps: Optional[float] = None,
    p_list: Optional[Iterable[float]] = None,
    cells: Optional[np.ndarray] = None,
) -> CellStatisticsTable:
    """Statistics of every window cell (or of ``cells``), in the given order.

    Each nucleus contributes to its own cell only, so the per-cell sums are
    independent and accumulated with one ``bincount`` pass in nucleus order.
    """
    eps, p_list = _defaults(eps, p_list)
    if cells is None:
        cells = window_cells(index)
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 3)
    m = cells.shape[0]

    x0 = np.zeros(m, dtype=np.int64)
    x1 = np.zeros(m)
    charge = np.zeros(m)
    truncated = np.zeros(m, dtype=bool)
    xp = {(p, eps): np.zeros(m) for p in p_list}
    if m == 0 or len(index) == 0:
        return CellStatisticsTable(cells, x0, x1, xp, charge, truncated)

    lo = cells.min(axis=0)
    shape = cells.max(axis=0) - lo + 1
    lookup = np.full(int(np.prod(shape)), -1, dtype=np.int64)
    lookup[np.ravel_multi_index((cells - lo).T, tuple(shape))] = np.arange(m)

    local = index.cells - lo
    inside = np.all((local >= 0) & (local < shape), axis=1)
    slot = np.full(len(index), -1, dtype=np.int64)
    slot[inside] = lookup[np.ravel_multi_index(local[inside].T, tuple(shape))]
    hit = slot >= 0
    owner = slot[hit]

    x0 = np.bincount(owner, minlength=m).astype(np.int64)
    charge = np.bincount(owner, weights=index.config.charges[hit], minlength=m)
    if np.any(x0 > 0):
        d = index.deltas[hit]
        x1 = np.bincount(owner, weights=1.0 / d, minlength=m)
        for p in p_list:
            xp[(p, eps)] = np.bincount(owner, weights=np.minimum(d, eps) ** -p, minlength=m)
        truncated = np.bincount(owner, weights=index.truncated[hit], minlength=m) > 0

    logger.debug(
        "cell_statistics_computed",
        cells=m,
        nuclei=int(x0.sum()),
        flagged=int(truncated.sum()),
        eps=eps,
    )
    return CellStatisticsTable(cells, x0, x1, xp, charge, truncated)


def truncation_bound_holds(table: CellStatisticsTable, eps: float) -> np.ndarray:
    """Per-cell X′₂(ε) ≤ (X₀/ε + X₁)², from (δ′)⁻¹ ≤ ε⁻¹ + δ⁻¹."""
    key = (2.0, float(eps))
    if key not in table.xp:
        raise SpatialIndexError("X'_2 was not computed at this truncation radius", eps=eps)
    rhs = (table.x0 / eps + table.x1) ** 2
    return table.xp[key] <= rhs * (1.0 + 1e-12)


CELL_COLUMNS: Sequence[Column] = (
    Column("i"),
    Column("j"),
    Column("k"),
    Column("X0", "count"),
    Column("X1", "1/length"),
    Column("Xp2", "1/length^2"),
    Column("flag"),
)


def cell_table(table: CellStatisticsTable, eps: float, name: str = "cell_statistics") -> Table:
    """One row per cell: i,j,k,X0,X1,Xp2,flag."""
    key = (2.0, float(eps))
    if key not in table.xp:
        raise SpatialIndexError("X'_2 was not computed at this truncation radius", eps=eps)
    out = Table(name, list(CELL_COLUMNS))
    for r in range(len(table)):
        i, j, k = table.cells[r]
        out.add(i, j, k, table.x0[r], table.x1[r], table.xp[key][r], table.truncated[r])
    return out
