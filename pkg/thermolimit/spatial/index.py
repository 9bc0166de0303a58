"""Cell-list spatial index over a nuclear configuration.

Nuclei are bucketed by the lattice cell that contains them. Buckets live
in a dense grid padded to the largest occupancy, so a shell of cells can
be gathered for many query nuclei at once. Nearest neighbors are found by
scanning Chebyshev rings of cells outward until the best distance found
is no larger than the distance any farther ring could offer.

Key classes:
    CellIndex: Immutable index with cached nearest-neighbor distances.

Key functions:
    build_index: Construct a CellIndex.
    nearest_neighbor_distance: δ of one nucleus.
    pair_distances: Shift-exact distance kernel shared with the oracle.
"""

import itertools
import threading
from typing import Dict, Optional, Tuple

import numpy as np
import structlog

from ..exceptions import SpatialIndexError
from ..nuclei.models import NuclearConfiguration
from .models import NeighborResult

logger = structlog.get_logger("thermolimit.stats")

# Query nuclei processed per vectorized block
QUERY_BLOCK = 4096

# Relative slack on the ring stopping rule
RING_SLACK = 1e-9


def pair_distances(
    sites_a: np.ndarray,
    disp_a: np.ndarray,
    sites_b: np.ndarray,
    disp_b: np.ndarray,
    basis: np.ndarray,
) -> np.ndarray:
    """|R_a - R_b| computed as (j_a - j_b)·B + (r_a - r_b).

    Broadcasting over leading axes. Integer site differences make the
    result invariant under lattice shifts bit for bit.
    """
    steps = (sites_a - sites_b).astype(float)
    # elementwise products keep the arithmetic identical for any array shape
    diff = (
        steps[..., 0:1] * basis[0]
        + steps[..., 1:2] * basis[1]
        + steps[..., 2:3] * basis[2]
        + (disp_a - disp_b)
    )
    sq = diff * diff
    return np.sqrt(sq[..., 0] + sq[..., 1] + sq[..., 2])


def _ring_offsets(r: int) -> np.ndarray:
    """Offsets at Chebyshev distance exactly r, lexicographic."""
    if r == 0:
        return np.zeros((1, 3), dtype=np.int64)
    rng = range(-r, r + 1)
    offs = np.array(list(itertools.product(rng, rng, rng)), dtype=np.int64)
    return offs[np.abs(offs).max(axis=1) == r]


class CellIndex:
    """Bucket grid keyed by lattice cell.

    Attributes:
        config: The indexed configuration.
        cells: (n, 3) cell of each nucleus.
        origin: Smallest occupied cell index (grid corner).
        shape: Grid extent in cells.
    """

    def __init__(self, config: NuclearConfiguration):
        self.config = config
        self.lattice = config.lattice
        self._basis = config.lattice.matrix
        self._sites = config.sites
        self._disp = config.displacements
        self.cells = config.cells()
        n = len(config)

        if n == 0:
            self.origin = np.zeros(3, dtype=np.int64)
            self.shape = np.zeros(3, dtype=np.int64)
            self._members = np.zeros((0, 0, 0, 0), dtype=np.int64)
        else:
            self.origin = self.cells.min(axis=0)
            self.shape = self.cells.max(axis=0) - self.origin + 1
            flat = np.ravel_multi_index((self.cells - self.origin).T, tuple(self.shape))
            order = np.argsort(flat, kind="stable")
            counts = np.bincount(flat, minlength=int(np.prod(self.shape)))
            starts = np.cumsum(counts) - counts
            rank = np.arange(n) - starts[flat[order]]
            members = np.full((counts.size, int(counts.max())), -1, dtype=np.int64)
            members[flat[order], rank] = order
            self._members = members.reshape(*self.shape, -1)

        self._gap = config.sampled_region.distance_to_boundary(config.positions)
        self._lock = threading.Lock()
        self._deltas: Optional[np.ndarray] = None
        self._neighbors: Optional[np.ndarray] = None
        self._truncated: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.config)

    @property
    def buckets(self) -> Dict[Tuple[int, int, int], np.ndarray]:
        """Nonempty buckets: cell -> nucleus indices."""
        out: Dict[Tuple[int, int, int], np.ndarray] = {}
        if len(self) == 0:
            return out
        grid = self._members.reshape(-1, self._members.shape[-1])
        for flat, row in enumerate(grid):
            row = row[row >= 0]
            if row.size:
                local = np.unravel_index(flat, tuple(self.shape))
                cell = tuple(int(o + v) for o, v in zip(self.origin, local))
                out[cell] = np.sort(row)
        return out

    def bucket(self, cell) -> np.ndarray:
        """Nucleus indices in one cell (empty if none)."""
        local = np.asarray(cell, dtype=np.int64) - self.origin
        if len(self) == 0 or np.any(local < 0) or np.any(local >= self.shape):
            return np.zeros(0, dtype=np.int64)
        row = self._members[tuple(local)]
        return np.sort(row[row >= 0])

    # ------------------------------------------------------------------
    # Nearest-neighbor search
    # ------------------------------------------------------------------

    def _search(self, queries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        best = np.full(queries.shape[0], np.inf)
        arg = np.full(queries.shape[0], -1, dtype=np.int64)
        spacing = self.lattice.face_spacing
        max_ring = int(self.shape.max())
        active = np.arange(queries.shape[0])

        for r in range(max_ring + 1):
            offs = _ring_offsets(r)
            q = queries[active]
            nb = self.cells[q][:, None, :] + offs[None, :, :] - self.origin
            valid = np.all((nb >= 0) & (nb < self.shape), axis=2)
            nb = np.where(valid[..., None], nb, 0)
            cand = self._members[nb[..., 0], nb[..., 1], nb[..., 2]]
            cand = np.where(valid[..., None], cand, -1).reshape(q.shape[0], -1)
            usable = (cand >= 0) & (cand != q[:, None])
            safe = np.where(usable, cand, 0)
            d = pair_distances(
                self._sites[q][:, None, :],
                self._disp[q][:, None, :],
                self._sites[safe],
                self._disp[safe],
                self._basis,
            )
            d = np.where(usable, d, np.inf)
            pos = d.argmin(axis=1)
            dmin = d[np.arange(q.shape[0]), pos]
            better = dmin < best[active]
            best[active[better]] = dmin[better]
            arg[active[better]] = cand[np.arange(q.shape[0]), pos][better]

            bound = r * spacing * (1.0 - RING_SLACK)
            active = active[~(best[active] <= bound)]
            if active.size == 0:
                break
        return best, arg

    def _compute_all(self) -> None:
        n = len(self)
        if n < 2:
            raise SpatialIndexError(
                "nearest-neighbor distance is undefined with fewer than 2 nuclei", nuclei=n
            )
        deltas = np.empty(n)
        neighbors = np.empty(n, dtype=np.int64)
        for start in range(0, n, QUERY_BLOCK):
            block = np.arange(start, min(n, start + QUERY_BLOCK))
            deltas[block], neighbors[block] = self._search(block)
        truncated = deltas > self._gap
        logger.debug(
            "nearest_neighbors_computed",
            nuclei=n,
            truncated=int(truncated.sum()),
            min_delta=float(deltas.min()),
        )
        self._deltas, self._neighbors, self._truncated = deltas, neighbors, truncated

    def _ensure(self) -> None:
        if self._deltas is None:
            with self._lock:
                if self._deltas is None:
                    self._compute_all()

    @property
    def deltas(self) -> np.ndarray:
        """δ of every nucleus (computed once, then cached)."""
        self._ensure()
        return self._deltas

    @property
    def neighbors(self) -> np.ndarray:
        self._ensure()
        return self._neighbors

    @property
    def truncated(self) -> np.ndarray:
        """True where δ may be margin-limited."""
        self._ensure()
        return self._truncated

    def query(self, nucleus: int) -> NeighborResult:
        """Nearest neighbor of one indexed nucleus (no caching needed)."""
        if len(self) < 2:
            raise SpatialIndexError(
                "nearest-neighbor distance is undefined with fewer than 2 nuclei",
                nuclei=len(self),
            )
        if not 0 <= nucleus < len(self):
            raise SpatialIndexError("nucleus is not part of the indexed configuration",
                                    nucleus=nucleus)
        if self._deltas is not None:
            return NeighborResult(
                float(self._deltas[nucleus]),
                int(self._neighbors[nucleus]),
                bool(self._truncated[nucleus]),
            )
        best, arg = self._search(np.array([nucleus]))
        return NeighborResult(float(best[0]), int(arg[0]), bool(best[0] > self._gap[nucleus]))


def build_index(config: NuclearConfiguration) -> CellIndex:
    """Index all nuclei of ``config``, margin included."""
    index = CellIndex(config)
    logger.debug("index_built", nuclei=len(index), grid=index.shape)
    return index


def locate_nucleus(index: CellIndex, position, charge: Optional[float] = None) -> int:
    """Index of the nucleus at ``position`` (and ``charge``, if given).

    Raises:
        SpatialIndexError: if no such nucleus is indexed.
    """
    position = np.asarray(position, dtype=float).reshape(3)
    cell = index.lattice.cell_of(position)[0]
    positions = index.config.positions
    for off in _ring_offsets(0).tolist() + _ring_offsets(1).tolist():
        for i in index.bucket(cell + np.asarray(off)):
            if np.array_equal(positions[i], position) and (
                charge is None or index.config.charges[i] == charge
            ):
                return int(i)
    raise SpatialIndexError("nucleus does not belong to the indexed configuration",
                            position=tuple(position))


def nearest_neighbor_distance(index: CellIndex, nucleus) -> NeighborResult:
    """δ of a nucleus given by index or by (position, charge).

    Raises:
        SpatialIndexError: fewer than two nuclei, or unknown nucleus.
    """
    if isinstance(nucleus, (int, np.integer)):
        return index.query(int(nucleus))
    position, charge = nucleus
    return index.query(locate_nucleus(index, position, charge))
