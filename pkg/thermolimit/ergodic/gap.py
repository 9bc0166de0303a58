"""Simplex-tiling lower bound of the proxy energy, evaluated as a diagnostic.

For a group element g = (R, τ) the tiles are T_j = RℓΔ + τ + jB. A nucleus
of K ∩ D belongs to every tile containing it, and the proxy energy of the
piece D ∩ T_j is built from the nuclei of that piece: the kinetic
surrogate of each member plus the ordered collar pairs inside the piece,
where the collar is measured from ∂(D ∩ T_j).
"""

from typing import Optional, Tuple

import numpy as np
import structlog

from ..config import get_config
from ..electrostatics.screening import domain_nuclei, nucleus_deltas, trial_energy
from ..exceptions import ErgodicError
from ..geometry.models import TilingSpec
from ..geometry.shapes import Simplex
from ..geometry.tiling import GROUP_CHUNK, sample_group_elements
from ..moments.estimators import summarize
from ..nuclei.models import NuclearConfiguration
from ..parallel import run_ordered
from ..resource_guard import resolve_threads
from ..spatial.index import build_index, pair_distances
from .models import GapReport

logger = structlog.get_logger("thermolimit.ergodic")

MIN_GAP_SAMPLES = 500


def tile_memberships(
    positions: np.ndarray,
    rotation: np.ndarray,
    translation: np.ndarray,
    tile: Simplex,
    lattice,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(member row, tile index j, depth in the tile) of every point-in-tile pair."""
    if positions.shape[0] == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, np.zeros((0, 3), dtype=np.int64), np.zeros(0)
    rotated = tile.vertex_array @ rotation.T
    f_vert = lattice.fractional(rotated)
    f_x = lattice.fractional(positions - translation)
    lo = np.ceil(f_x - f_vert.max(axis=0)).astype(np.int64)
    hi = np.floor(f_x - f_vert.min(axis=0)).astype(np.int64)
    span = int((hi - lo).max()) + 1
    offsets = np.stack(np.meshgrid(*(np.arange(span),) * 3, indexing="ij"),
                       axis=-1).reshape(-1, 3)

    j = lo[:, None, :] + offsets[None, :, :]
    valid = np.all(j <= hi[:, None, :], axis=2)
    rows = np.broadcast_to(np.arange(positions.shape[0])[:, None], valid.shape)[valid]
    j = j[valid]
    local = (positions[rows] - translation - j @ lattice.matrix) @ rotation
    planes = tile.plane_distances(local).max(axis=1)
    inside = planes < 0
    return rows[inside], j[inside], -planes[inside]


def _grouped_pair_sum(keys: np.ndarray, rows: np.ndarray, config: NuclearConfiguration,
                      nuclei: np.ndarray) -> float:
    """Σ over ordered pairs of distinct rows sharing a key of zz′/(r(1 + r²))."""
    if rows.size < 2:
        return 0.0
    order = np.lexsort(keys.T[::-1])
    keys, rows = keys[order], rows[order]
    sites = config.sites[nuclei]
    disp = config.displacements[nuclei]
    z = config.charges[nuclei]
    basis = config.lattice.matrix
    total = 0.0
    for k in range(1, rows.size):
        same = np.all(keys[k:] == keys[:-k], axis=1)
        if not same.any():
            break
        a, b = rows[:-k][same], rows[k:][same]
        r = pair_distances(sites[a], disp[a], sites[b], disp[b], basis)
        total += float(np.sum(z[a] * z[b] / (r * (1.0 + r * r))))
    return 2.0 * total


def graf_schenker_gap(
    config: NuclearConfiguration,
    shape,
    tiling: Optional[TilingSpec] = None,
    n_g: int = MIN_GAP_SAMPLES,
    seed: int = 0,
    c_gs: float = 1.0,
    cone_epsilon: float = 0.5,
    c_kin: float = 1.0,
    threads: Optional[int] = None,
) -> GapReport:
    """lhs - rhs of the tiling inequality for the proxy energy F = kinetic + boundary.

    lhs = F(ω, D)
    rhs = (1 - C/ℓ) (|W|/|ℓΔ|) E_g Σ_j F(ω, D ∩ T_j) - (C/ℓ)(#(K ∩ D) + |D|)

    No sign is asserted: the inequality is a statement about the quantum
    free energy, and the proxy only mirrors its structure.
    """
    if n_g < MIN_GAP_SAMPLES:
        raise ErgodicError(f"the gap diagnostic needs at least {MIN_GAP_SAMPLES} group samples",
                           n_g=n_g)
    if c_gs < 0:
        raise ErgodicError("c_gs must be >= 0", c_gs=c_gs)
    tiling = tiling or TilingSpec()
    lattice = config.lattice
    volume = float(shape.volume)
    nuclei, depth_d = domain_nuclei(config, shape)
    index = build_index(config) if len(config) >= 2 else None

    if nuclei.size:
        lhs = trial_energy(config, shape, cone_epsilon, c_kin, seed, breakdown=False).total
        delta_prime = np.minimum(nucleus_deltas(config, nuclei, index), cone_epsilon)
        kinetic = c_kin * config.charges[nuclei] ** (5.0 / 3.0) / delta_prime ** 2
    else:
        lhs = 0.0
        kinetic = np.zeros(0)
    positions = config.positions[nuclei]
    tile = Simplex(vertices=tuple(tuple(float(v) for v in row) for row in tiling.scaled_vertices))
    rotations, translations = sample_group_elements(n_g, tiling.scale, "cell-translation",
                                                     seed, lattice)

    def _chunk(start: int) -> np.ndarray:
        stop = min(n_g, start + GROUP_CHUNK)
        out = np.zeros(stop - start)
        for g in range(start, stop):
            rows, keys, depth_t = tile_memberships(positions, rotations[g], translations[g],
                                                   tile, lattice)
            collar = np.minimum(depth_d[rows], depth_t) <= cone_epsilon
            out[g - start] = kinetic[rows].sum() + _grouped_pair_sum(
                keys[collar], rows[collar], config, nuclei)
        return out

    starts = list(range(0, n_g, GROUP_CHUNK))
    per_g = np.concatenate(run_ordered(_chunk, starts, resolve_threads(threads)))
    mean, stderr, _, _ = summarize(per_g, get_config().confidence_level)
    density = lattice.cell_volume / tiling.scaled_volume
    factor = c_gs / tiling.scale
    rhs = (1.0 - factor) * density * mean - factor * (nuclei.size + volume)
    report = GapReport(
        scale=tiling.scale,
        c_gs=float(c_gs),
        lhs=float(lhs),
        rhs=float(rhs),
        gap=float(lhs - rhs),
        tiled_mean=float(density * mean),
        tiled_stderr=float(density * stderr),
        nuclei_in_domain=int(nuclei.size),
        domain_volume=volume,
        group_samples=int(n_g),
        seed=int(seed),
    )
    logger.info("gap_diagnostic", scale=tiling.scale, lhs=report.lhs, rhs=report.rhs,
                gap=report.gap, seed=seed)
    return report
