"""O(n²) reference computations used to validate the cell-list index."""

from typing import Iterable, Optional

import numpy as np

from ..exceptions import SpatialIndexError
from ..nuclei.models import NuclearConfiguration
from .index import pair_distances
from .models import CellStatistics

# Rows of the distance matrix evaluated at once
ORACLE_CHUNK = 512


def brute_force_deltas(config: NuclearConfiguration) -> np.ndarray:
    """δ of every nucleus by scanning all pairs."""
    n = len(config)
    if n < 2:
        raise SpatialIndexError("nearest-neighbor distance is undefined with fewer than 2 nuclei",
                                nuclei=n)
    basis = config.lattice.matrix
    sites, disp = config.sites, config.displacements
    out = np.empty(n)
    for start in range(0, n, ORACLE_CHUNK):
        rows = np.arange(start, min(n, start + ORACLE_CHUNK))
        d = pair_distances(
            sites[rows][:, None, :], disp[rows][:, None, :],
            sites[None, :, :], disp[None, :, :], basis,
        )
        d[np.arange(rows.size), rows] = np.inf
        out[rows] = d.min(axis=1)
    return out


def brute_force_cell_statistics(
    config: NuclearConfiguration,
    cell,
    eps: float,
    p_list: Iterable[float] = (1.0, 2.0),
    deltas: Optional[np.ndarray] = None,
) -> CellStatistics:
    """Recompute X₀, X₁, X′_p(ε) of one cell from scratch.

    Membership uses the Cartesian position directly.
    """
    if deltas is None:
        deltas = brute_force_deltas(config)
    members = np.all(config.lattice.cell_of(config.positions) == np.asarray(cell), axis=1)
    d = deltas[members]
    return CellStatistics(
        cell=tuple(int(v) for v in cell),
        x0=int(d.size),
        x1=float(np.sum(1.0 / d)),
        xp={(float(p), float(eps)): float(np.sum(np.minimum(d, eps) ** -float(p)))
            for p in p_list},
        deltas=d,
    )
