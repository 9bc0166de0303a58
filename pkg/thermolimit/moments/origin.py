"""Replica sampling around the origin cell.

Each replica is an independent realization ω restricted to the block of
sites with Chebyshev radius ``neighborhood`` around the origin (a 9³ block
by default). δ of the nuclei landing in cell 0 and of the site-0 nucleus
are computed against every other nucleus of the block.

Replicas are processed in vectorized batches; batches may run on worker
threads, and are always concatenated in replica order.
"""

import itertools
from typing import List, Optional

import numpy as np
import structlog

from .. import rng
from ..config import get_config
from ..nuclei.laws import draw_charges, draw_displacements
from ..nuclei.models import Box, ModelSpec
from ..nuclei.sampler import poisson_configuration
from ..parallel import run_ordered
from ..resource_guard import resolve_threads
from ..spatial.index import build_index, pair_distances
from .models import OriginSample

logger = structlog.get_logger("thermolimit.moments")

# Label of the replica stream shared by all origin-cell estimators
ORIGIN_STREAM = "origin"


def origin_block(neighborhood: int) -> np.ndarray:
    """Sites with |j|∞ ≤ neighborhood, lexicographic."""
    r = range(-neighborhood, neighborhood + 1)
    return np.array(list(itertools.product(r, r, r)), dtype=np.int64)


def _lattice_batch(model: ModelSpec, seeds: np.ndarray, neighborhood: int) -> OriginSample:
    lattice = model.lattice
    block = origin_block(neighborhood)
    centre = int(np.nonzero(np.all(block == 0, axis=1))[0][0])
    b, m = seeds.shape[0], block.shape[0]

    keys = rng.site_keys(np.repeat(seeds, m), np.tile(block, (b, 1)))
    disp = draw_displacements(model.displacement, lattice, keys).reshape(b, m, 3)
    charges = draw_charges(model.charge, keys).reshape(b, m)
    present = charges > 0
    cells = block[None, :, :] + lattice.cell_of(disp.reshape(-1, 3)).reshape(b, m, 3)
    in_origin = present & np.all(cells == 0, axis=2)

    wanted = in_origin.copy()
    wanted[:, centre] |= present[:, centre]
    rep, site = np.nonzero(wanted)
    d = pair_distances(
        block[site][:, None, :],
        disp[rep, site][:, None, :],
        block[None, :, :],
        disp[rep],
        lattice.matrix,
    )
    d[np.arange(rep.size), site] = np.inf
    d = np.where(present[rep], d, np.inf)
    delta = d.min(axis=1)

    sel = in_origin[rep, site]
    delta0 = np.full(b, np.nan)
    at_centre = site == centre
    delta0[rep[at_centre]] = delta[at_centre]
    return OriginSample(
        replicas=b,
        owner=rep[sel],
        deltas=delta[sel],
        charges=charges[rep[sel], site[sel]],
        delta0=delta0,
        neighborhood=neighborhood,
    )


def _field_batch(model: ModelSpec, seeds: np.ndarray, neighborhood: int) -> OriginSample:
    lattice = model.lattice
    corners = np.array(list(itertools.product((-0.5, 0.5), repeat=3))) @ lattice.matrix
    cell_box = Box(lo=tuple(corners.min(axis=0)), hi=tuple(corners.max(axis=0)))
    margin = neighborhood * lattice.face_spacing

    owners: List[np.ndarray] = []
    deltas: List[np.ndarray] = []
    charges: List[np.ndarray] = []
    delta0 = np.full(seeds.shape[0], np.nan)
    for r, seed in enumerate(seeds):
        config = poisson_configuration(
            float(model.intensity), model.charge, cell_box,
            margin=margin, seed=int(seed), lattice=lattice,
        )
        if len(config) == 0:
            continue
        dist0 = np.linalg.norm(config.positions, axis=1)
        delta0[r] = float(dist0.min())
        members = np.nonzero(np.all(config.cells() == 0, axis=1))[0]
        if members.size == 0:
            continue
        index = build_index(config)
        owners.append(np.full(members.size, r, dtype=np.int64))
        deltas.append(index.deltas[members])
        charges.append(config.charges[members])

    def _join(parts, dtype):
        return np.concatenate(parts) if parts else np.zeros(0, dtype=dtype)

    return OriginSample(
        replicas=int(seeds.shape[0]),
        owner=_join(owners, np.int64),
        deltas=_join(deltas, float),
        charges=_join(charges, float),
        delta0=delta0,
        neighborhood=neighborhood,
    )


def origin_statistics(
    model: ModelSpec, seeds: np.ndarray, neighborhood: Optional[int] = None
) -> OriginSample:
    """One replica per seed, in seed order."""
    if neighborhood is None:
        neighborhood = get_config().origin_neighborhood
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1)
    if model.kind == "poisson":
        return _field_batch(model, seeds, neighborhood)
    return _lattice_batch(model, seeds, neighborhood)


def sample_origin(
    model: ModelSpec,
    replicas: int,
    seed: int,
    neighborhood: Optional[int] = None,
    threads: Optional[int] = None,
    start: int = 0,
) -> OriginSample:
    """Replicas ``start .. start+replicas-1`` of the origin stream of ``seed``.

    The result does not depend on ``threads`` or on the batch size: replica
    r always uses the r-th seed of the stream.
    """
    cfg = get_config()
    if neighborhood is None:
        neighborhood = cfg.origin_neighborhood
    seeds = rng.replica_seeds(seed, ORIGIN_STREAM, replicas, start=start)
    batch = cfg.batch_size
    batches = [seeds[i:i + batch] for i in range(0, replicas, batch)]
    parts = run_ordered(
        lambda s: origin_statistics(model, s, neighborhood),
        batches,
        resolve_threads(threads),
    )
    sample = OriginSample.concatenate(parts)
    logger.info(
        "origin_replicas_sampled",
        model=model.kind,
        replicas=replicas,
        start=start,
        neighborhood=neighborhood,
        batches=len(batches),
    )
    return sample
