"""Screened trial state of the nuclei inside a domain.

Each nucleus (R, z) of K ∩ D gets a uniform cloud of charge -z and radius
δ′/8, where δ′ = min(δ, ε). Nuclei at depth at least ε carry the cloud on
top (no field outside by Newton's theorem); the others are dipoles whose
cloud sits δ′/4 away, toward the nearest point of the ε-eroded domain.

All distances between nuclei go through ``pair_distances`` and domain
membership through ``shape_signed_distance``, so every term is exactly
invariant under translating the configuration and D by a lattice vector.

Key functions:
    domain_nuclei: Nuclei inside D with their depths.
    build_screening: One ScreeningCloud per nucleus of K ∩ D.
    trial_energy: Kinetic surrogate, boundary dipole sum, attraction term.
    lieb_yau_term: (Z²/8) Σ 1/δ over K ∩ D.
"""

from typing import List, Optional, Tuple

import numpy as np
import structlog
from scipy.spatial import cKDTree

from ..exceptions import ElectrostaticsError, GeometryError, ScreeningError, UnsupportedShapeError
from ..geometry.regularity import fibonacci_directions
from ..geometry.shapes import shape_signed_distance
from ..geometry.tiling import sample_group_elements
from ..nuclei.models import NuclearConfiguration
from ..spatial.index import CellIndex, build_index, pair_distances
from .models import EnergyBreakdown, ScreeningCloud, TrialEnergyReport

logger = structlog.get_logger("thermolimit.electrostatics")

# Rows of the collar pair sum evaluated per block
PAIR_BLOCK = 512
FALLBACK_DIRECTIONS = 482


def domain_nuclei(config: NuclearConfiguration, shape) -> Tuple[np.ndarray, np.ndarray]:
    """(indices, depths d(R, ∂D)) of the nuclei of the configuration inside D."""
    if len(config) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    sd = shape_signed_distance(shape, config.sites, config.displacements, config.lattice)
    idx = np.nonzero(sd < 0)[0]
    return idx, -sd[idx]


def nucleus_deltas(config: NuclearConfiguration, idx: np.ndarray,
                   index: Optional[CellIndex]) -> np.ndarray:
    if len(config) < 2:
        return np.full(idx.shape[0], np.inf)
    index = index or build_index(config)
    return index.deltas[idx]


def _fallback_direction(shape, position: np.ndarray, step: float, radius: float,
                        codebook: np.ndarray) -> Optional[np.ndarray]:
    """First codebook direction, ranked by alignment with the inward normal, that fits."""
    h = 1e-6
    grad = np.array([
        shape.signed_distance(position + h * e)[0] - shape.signed_distance(position - h * e)[0]
        for e in np.eye(3)
    ])
    ranked = codebook[np.argsort(codebook @ grad)]
    centres = position + step * ranked
    ok = -shape.signed_distance(centres) >= radius
    hits = np.nonzero(ok)[0]
    return ranked[hits[0]] if hits.size else None


def build_screening(
    config: NuclearConfiguration,
    shape,
    cone_epsilon: float,
    seed: int = 0,
    index: Optional[CellIndex] = None,
) -> List[ScreeningCloud]:
    """Screening clouds of the nuclei of K ∩ D, in nucleus order.

    ``seed`` orients the fallback direction codebook used when a shape has
    no closed-form eroded domain or the eroded-point direction does not
    keep the cloud inside D.

    Raises:
        ScreeningError: no direction keeps a dipole cloud inside D, or two
            clouds overlap.
    """
    if not cone_epsilon > 0:
        raise ElectrostaticsError("cone_epsilon must be > 0", cone_epsilon=cone_epsilon)
    idx, depth = domain_nuclei(config, shape)
    if idx.size == 0:
        return []
    delta_prime = np.minimum(nucleus_deltas(config, idx, index), cone_epsilon)
    radius = delta_prime / 8.0
    step = delta_prime / 4.0
    positions = config.positions[idx]
    charges = config.charges[idx]
    on_top = depth > cone_epsilon

    centres = positions.copy()
    directions = np.full((idx.size, 3), np.nan)
    offset = np.nonzero(~on_top)[0]
    if offset.size:
        pts = positions[offset]
        try:
            target = shape.nearest_eroded_point(pts, cone_epsilon)
            axis = target - pts
        except (UnsupportedShapeError, GeometryError):
            axis = np.zeros_like(pts)
        norm = np.linalg.norm(axis, axis=1, keepdims=True)
        unit = np.where(norm > 0, axis / np.where(norm > 0, norm, 1.0), np.nan)
        cand = pts + step[offset, None] * unit
        fits = np.isfinite(unit).all(axis=1)
        fits[fits] = -shape.signed_distance(cand[fits]) >= radius[offset][fits]

        codebook = None
        for k in np.nonzero(~fits)[0]:
            if codebook is None:
                rot, _ = sample_group_elements(1, 1.0, "cell-translation", seed)
                codebook = fibonacci_directions(FALLBACK_DIRECTIONS) @ rot[0].T
            i = offset[k]
            found = _fallback_direction(shape, positions[i], step[i], radius[i], codebook)
            if found is None:
                logger.error("screening_failed", nucleus=int(idx[i]), depth=float(depth[i]))
                raise ScreeningError(
                    "no direction keeps the screening cloud inside the domain",
                    nucleus=int(idx[i]),
                    position=tuple(float(v) for v in positions[i]),
                )
            unit[k] = found
        centres[offset] = pts + step[offset, None] * unit
        directions[offset] = unit

    tree = cKDTree(centres)
    for a, b in tree.query_pairs(2.0 * float(radius.max()), output_type="ndarray"):
        if np.linalg.norm(centres[a] - centres[b]) <= radius[a] + radius[b]:
            raise ScreeningError("screening clouds overlap", nucleus=int(idx[a]),
                                 position=tuple(float(v) for v in positions[a]))

    clouds = [
        ScreeningCloud(
            nucleus=int(idx[i]),
            position=tuple(float(v) for v in positions[i]),
            z=float(charges[i]),
            centre=tuple(float(v) for v in centres[i]),
            radius=float(radius[i]),
            delta_prime=float(delta_prime[i]),
            depth=float(depth[i]),
            placement="on_top" if on_top[i] else "cone_offset",
            direction=None if on_top[i] else tuple(float(v) for v in directions[i]),
        )
        for i in range(idx.size)
    ]
    logger.debug("screening_built", clouds=len(clouds), dipoles=int(offset.size))
    return clouds


def collar_pair_sums(config: NuclearConfiguration, collar: np.ndarray) -> np.ndarray:
    """Σ_{R′ ≠ R} zz′ / (r (1 + r²)) over collar nuclei R′, for each collar nucleus R."""
    sites = config.sites[collar]
    disp = config.displacements[collar]
    z = config.charges[collar]
    basis = config.lattice.matrix
    out = np.zeros(collar.size)
    for start in range(0, collar.size, PAIR_BLOCK):
        rows = slice(start, start + PAIR_BLOCK)
        r = pair_distances(sites[rows, None, :], disp[rows, None, :],
                           sites[None, :, :], disp[None, :, :], basis)
        diag = np.arange(r.shape[0])
        r[diag, diag + start] = np.inf
        kernel = 1.0 / (r * (1.0 + r * r))
        out[rows] = z[rows] * (kernel @ z)
    return out


def trial_energy(
    config: NuclearConfiguration,
    shape,
    cone_epsilon: float,
    c_kin: float = 1.0,
    seed: int = 0,
    breakdown: bool = True,
) -> TrialEnergyReport:
    """Terms of the screened trial-state energy of K ∩ D.

    kinetic  = c_kin Σ_{K∩D} z^{5/3} / δ′²
    boundary = Σ over ordered pairs R ≠ R′ of K ∩ D with d(·, ∂D) ≤ ε of
               zz′ / (|R - R′| (1 + |R - R′|²))
    """
    if c_kin < 0:
        raise ElectrostaticsError("c_kin must be >= 0", c_kin=c_kin)
    index = build_index(config) if len(config) >= 2 else None
    clouds = build_screening(config, shape, cone_epsilon, seed, index=index)
    volume = float(shape.volume)
    if not clouds:
        return TrialEnergyReport(
            kinetic=0.0, boundary=0.0, attraction_term=0.0,
            cone_epsilon=cone_epsilon, c_kin=c_kin, nuclei_in_domain=0,
            collar_nuclei=0, on_top=0, cone_offset=0, domain_volume=volume,
            lieb_yau=0.0,
            breakdown=EnergyBreakdown(np.zeros((0, 3), dtype=np.int64), np.zeros(0),
                                      np.zeros(0), np.zeros(0)) if breakdown else None,
        )

    idx = np.array([c.nucleus for c in clouds], dtype=np.int64)
    z = config.charges[idx]
    dp = np.array([c.delta_prime for c in clouds])
    depth = np.array([c.depth for c in clouds])
    collar_mask = depth <= cone_epsilon

    kinetic = c_kin * z ** (5.0 / 3.0) / dp ** 2
    boundary = np.zeros(idx.size)
    boundary[collar_mask] = collar_pair_sums(config, idx[collar_mask])
    attraction = np.where(collar_mask, z * z / dp, 0.0)

    lieb_yau = None
    if np.all(z == z[0]):
        lieb_yau = float(z[0] ** 2 / 8.0 * np.sum(1.0 / nucleus_deltas(config, idx, index)))

    table = None
    if breakdown:
        cells, inverse = np.unique(config.cells()[idx], axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        table = EnergyBreakdown(
            cells=cells,
            kinetic=np.bincount(inverse, weights=kinetic, minlength=cells.shape[0]),
            boundary=np.bincount(inverse, weights=boundary, minlength=cells.shape[0]),
            attraction=np.bincount(inverse, weights=attraction, minlength=cells.shape[0]),
        )

    n_top = sum(c.placement == "on_top" for c in clouds)
    report = TrialEnergyReport(
        kinetic=float(kinetic.sum()),
        boundary=float(boundary.sum()),
        attraction_term=float(attraction.sum()),
        cone_epsilon=float(cone_epsilon),
        c_kin=float(c_kin),
        nuclei_in_domain=int(idx.size),
        collar_nuclei=int(collar_mask.sum()),
        on_top=int(n_top),
        cone_offset=int(idx.size - n_top),
        domain_volume=volume,
        lieb_yau=lieb_yau,
        breakdown=table,
    )
    logger.debug("trial_energy", nuclei=report.nuclei_in_domain, kinetic=report.kinetic,
                 boundary=report.boundary)
    return report


def lieb_yau_term(
    config: NuclearConfiguration,
    shape,
    Z: Optional[float] = None,
    index: Optional[CellIndex] = None,
) -> float:
    """(Z²/8) Σ_{(R,z) ∈ K∩D} 1/δ_{R,z}.

    Raises:
        ElectrostaticsError: the nuclei inside D do not all carry charge Z.
    """
    idx, _ = domain_nuclei(config, shape)
    if idx.size == 0:
        return 0.0
    z = config.charges[idx]
    if Z is None:
        Z = float(z[0])
    if not np.all(z == Z):
        raise ElectrostaticsError("the Lieb-Yau term needs equal charges",
                                  charges=sorted(set(z.tolist()))[:5])
    return float(Z * Z / 8.0 * np.sum(1.0 / nucleus_deltas(config, idx, index)))
