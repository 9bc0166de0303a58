"""Sampling of finite configurations from stationary nuclear models.

Key functions:
    sample_configuration: i.i.d. perturbed lattice on window ⊕ margin.
    shift_configuration: K(τ_k ω) = K(ω) - k.
    poisson_configuration: Homogeneous Poisson field with i.i.d. marks.
    realize: Dispatch on a ModelSpec.
"""

from typing import Optional, Sequence

import numpy as np
import structlog
from scipy import stats

from .. import rng
from ..exceptions import LatticeError, SamplingError
from .laws import draw_charges, draw_displacements
from .models import Box, LatticeSpec, ModelSpec, NuclearConfiguration

logger = structlog.get_logger("thermolimit.sampling")


def _canonical(sites: np.ndarray, *arrays: np.ndarray):
    order = np.lexsort(sites.T[::-1])
    return (sites[order],) + tuple(a[order] for a in arrays)


def _duplicate_rows(positions: np.ndarray) -> np.ndarray:
    """Indices of rows that repeat an earlier row."""
    if positions.shape[0] < 2:
        return np.zeros(0, dtype=np.int64)
    _, first, counts = np.unique(positions, axis=0, return_index=True, return_counts=True)
    if np.all(counts == 1):
        return np.zeros(0, dtype=np.int64)
    keep = np.zeros(positions.shape[0], dtype=bool)
    keep[first] = True
    return np.nonzero(~keep)[0]


def sample_configuration(
    lattice: LatticeSpec,
    displacement,
    charge,
    window: Box,
    margin: Optional[float] = None,
    seed: int = 0,
    offset: Sequence[int] = (0, 0, 0),
    model: Optional[ModelSpec] = None,
) -> NuclearConfiguration:
    """Sample the i.i.d. perturbed lattice on ``window`` ⊕ ``margin``.

    One nucleus is drawn per site j whose support ball meets the sampled
    region; it sits at j + r_j with charge z_j. Randomness is keyed by
    (seed, j + offset), so ``offset=k`` samples the shifted realization
    τ_k ω directly.

    Args:
        lattice: Lattice and cell.
        displacement: Displacement law ν.
        charge: Charge law.
        window: Observation window (must be nondegenerate).
        margin: Extra sampled layer; defaults to the law's cutoff.
        seed: Master seed.
        offset: Site-key offset in lattice coordinates.
        model: Descriptor to record; built from the laws when omitted.

    Raises:
        SamplingError: degenerate window, negative margin, or a margin
            below the tail cutoff of an unbounded law.
    """
    if window.is_degenerate:
        raise SamplingError("window is degenerate", window=window.model_dump())
    cutoff = displacement.support_radius(lattice)
    if margin is None:
        margin = cutoff
    if margin < 0:
        raise SamplingError("margin must be >= 0", margin=margin)
    if not displacement.is_bounded and margin < cutoff:
        raise SamplingError(
            "margin is smaller than the tail cutoff of an unbounded displacement law; "
            "nuclei displaced from outside the sampled region would be missed",
            margin=margin,
            cutoff=cutoff,
        )

    region = window.expand(margin)
    sites = lattice.sites_near_box(region, cutoff)
    offset_arr = np.asarray(offset, dtype=np.int64).reshape(3)
    keys = rng.site_keys(seed, sites + offset_arr)

    displacements = draw_displacements(displacement, lattice, keys)
    charges = draw_charges(charge, keys)
    positions = lattice.positions(sites) + displacements
    keep = region.contains(positions) & (charges > 0)
    sites, displacements, charges = sites[keep], displacements[keep], charges[keep]
    keys = keys[keep]

    dup = _duplicate_rows(lattice.positions(sites) + displacements)
    if dup.size:
        logger.warning("duplicate_positions_resampled", count=int(dup.size), seed=seed)
        redraw = draw_displacements(displacement, lattice, keys[dup], attempt=1)
        displacements[dup] = redraw
        positions = lattice.positions(sites) + displacements
        inside = region.contains(positions)
        if not np.all(inside[dup]) or _duplicate_rows(positions).size:
            raise SamplingError("duplicate nucleus positions persist after resampling", seed=seed)

    if model is None:
        model = ModelSpec(kind="lattice", lattice=lattice, displacement=displacement, charge=charge)

    logger.debug(
        "configuration_sampled",
        model="lattice",
        nuclei=int(charges.shape[0]),
        margin=margin,
        seed=seed,
    )
    return NuclearConfiguration(
        sites=sites,
        displacements=displacements,
        charges=charges,
        window=window,
        margin=float(margin),
        lattice=lattice,
        seed=int(seed),
        model=model,
        offset=tuple(int(v) for v in offset_arr),
        tail_cutoff=float(cutoff),
    )


def shift_configuration(config: NuclearConfiguration, k) -> NuclearConfiguration:
    """Translate every nucleus and the window by -k.

    ``k`` is a Cartesian lattice vector. Site labels move by the integer
    coordinates of k, so shifting by k and then -k restores the input
    bit for bit.

    Raises:
        LatticeError: if k is not a lattice vector.
    """
    k = np.asarray(k, dtype=float).reshape(3)
    try:
        kc = config.lattice.lattice_coordinates(k)
    except LatticeError:
        logger.error("shift_rejected", vector=k)
        raise
    return NuclearConfiguration(
        sites=config.sites - kc,
        displacements=config.displacements.copy(),
        charges=config.charges.copy(),
        window=config.window.translate(-k),
        margin=config.margin,
        lattice=config.lattice,
        seed=config.seed,
        model=config.model,
        offset=tuple(int(v) for v in np.asarray(config.offset) + kc),
        tail_cutoff=config.tail_cutoff,
    )


def poisson_configuration(
    intensity: float,
    charge,
    window: Box,
    margin: float = 0.0,
    seed: int = 0,
    lattice: Optional[LatticeSpec] = None,
    offset: Sequence[int] = (0, 0, 0),
) -> NuclearConfiguration:
    """Homogeneous Poisson field of the given intensity on window ⊕ margin.

    The field is built cell by cell: cell j receives Poisson(λ|W|) points,
    uniform in the cell, with counts and positions keyed by (seed, j). The
    restriction to the sampled region is then a Poisson field, and the
    construction keeps lattice shifts exact as for the perturbed lattice.

    Raises:
        SamplingError: non-positive intensity or negative margin.
    """
    if not intensity > 0:
        raise SamplingError("intensity must be > 0", intensity=intensity)
    if margin < 0:
        raise SamplingError("margin must be >= 0", margin=margin)
    lattice = lattice or LatticeSpec()
    model = ModelSpec(kind="poisson", lattice=lattice, charge=charge, intensity=intensity)
    offset_arr = np.asarray(offset, dtype=np.int64).reshape(3)
    region = window.expand(margin)

    empty = NuclearConfiguration(
        sites=np.zeros((0, 3), dtype=np.int64),
        displacements=np.zeros((0, 3)),
        charges=np.zeros(0),
        window=window,
        margin=float(margin),
        lattice=lattice,
        seed=int(seed),
        model=model,
        offset=tuple(int(v) for v in offset_arr),
    )
    if region.is_degenerate:
        return empty

    cells = lattice.sites_near_box(region, lattice.cell_circumradius)
    cell_keys = rng.site_keys(seed, cells + offset_arr)
    u = rng.keyed_uniforms(cell_keys, rng.STREAM_POISSON_COUNT, np.array([0]))[:, 0]
    counts = stats.poisson.ppf(u, intensity * lattice.cell_volume).astype(np.int64)
    if counts.sum() == 0:
        return empty

    owner = np.repeat(np.arange(cells.shape[0]), counts)
    within = np.arange(owner.shape[0]) - np.repeat(np.cumsum(counts) - counts, counts)
    point_keys = cell_keys[owner]
    counters = 3 * within[:, None] + np.arange(3)[None, :]
    frac = rng.keyed_uniforms(point_keys, rng.STREAM_POISSON_POSITION, counters) - 0.5
    sites = cells[owner]
    displacements = frac @ lattice.matrix
    charges = draw_charges(charge, point_keys, counters=within)

    keep = region.contains(lattice.positions(sites) + displacements) & (charges > 0)
    sites, displacements, charges = _canonical(
        sites[keep], displacements[keep], charges[keep]
    )
    logger.debug("configuration_sampled", model="poisson", nuclei=int(charges.shape[0]), seed=seed)
    return NuclearConfiguration(
        sites=sites,
        displacements=displacements,
        charges=charges,
        window=window,
        margin=float(margin),
        lattice=lattice,
        seed=int(seed),
        model=model,
        offset=tuple(int(v) for v in offset_arr),
    )


def realize(
    model: ModelSpec,
    window: Box,
    seed: int,
    margin: Optional[float] = None,
    offset: Sequence[int] = (0, 0, 0),
) -> NuclearConfiguration:
    """Sample ``model`` on ``window``.

    Poisson fields get a default margin of two cells; lattice models use
    the displacement cutoff.
    """
    if model.kind == "poisson":
        return poisson_configuration(
            float(model.intensity),
            model.charge,
            window,
            margin=2.0 * model.lattice.cell_diameter if margin is None else margin,
            seed=seed,
            lattice=model.lattice,
            offset=offset,
        )
    return sample_configuration(
        model.lattice,
        model.displacement,
        model.charge,
        window,
        margin=margin,
        seed=seed,
        offset=offset,
        model=model,
    )
