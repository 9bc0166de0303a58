"""Site-keyed draws from displacement and charge laws.

Every function takes per-site 64-bit keys (see ``rng.site_keys``) so the
draw for a site is the same whichever window or batch it is computed in.

Key functions:
    draw_displacements: One displacement r_j per key.
    draw_charges: One charge z_j per key (0 marks a vacancy).
"""

from typing import Optional

import numpy as np
import structlog

from .. import rng
from ..exceptions import SamplingError
from .models import (
    CompactInCell,
    ConstantCharge,
    GaussianIsotropic,
    LatticeSpec,
    Mixture,
    PointMass,
    UniformBall,
    UniformIntervalCharge,
    VacancyCharge,
)

logger = structlog.get_logger("thermolimit.sampling")

# Rounds of redraws for Gaussian displacements beyond the cutoff
MAX_TAIL_REDRAWS = 64


def _draw(law, lattice: LatticeSpec, keys: np.ndarray, stream: int) -> np.ndarray:
    n = keys.shape[0]
    if isinstance(law, PointMass):
        return np.zeros((n, 3))

    if isinstance(law, GaussianIsotropic):
        cutoff = law.support_radius(lattice)
        out = law.sigma * rng.site_normals(keys, stream, 3)
        bad = np.nonzero(np.linalg.norm(out, axis=1) > cutoff)[0]
        attempt = 1
        while bad.size and attempt <= MAX_TAIL_REDRAWS:
            redraw = law.sigma * rng.site_normals(keys[bad], stream, 3, attempt=attempt)
            out[bad] = redraw
            bad = bad[np.linalg.norm(redraw, axis=1) > cutoff]
            attempt += 1
        if bad.size:
            raise SamplingError(
                "gaussian displacement exceeded the tail cutoff after redraws",
                cutoff=cutoff,
                sites=int(bad.size),
            )
        return out

    if isinstance(law, UniformBall):
        direction = rng.site_normals(keys, stream, 3)
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        u = rng.keyed_uniforms(keys, stream, np.array([6]))[:, 0]
        return direction * (law.radius * np.cbrt(u))[:, None]

    if isinstance(law, CompactInCell):
        lo = np.asarray(law.lo, dtype=float)
        hi = np.asarray(law.hi, dtype=float)
        u = rng.keyed_uniforms(keys, stream, np.arange(3))
        return (lo + (hi - lo) * u) @ lattice.matrix

    if isinstance(law, Mixture):
        pick = rng.keyed_uniforms(keys, stream + rng.STREAM_MIXTURE, np.array([0]))[:, 0]
        cumulative = np.cumsum([c.weight for c in law.components])
        component = np.minimum(
            np.searchsorted(cumulative, pick, side="right"), len(law.components) - 1
        )
        out = np.zeros((n, 3))
        for k, comp in enumerate(law.components):
            idx = np.nonzero(component == k)[0]
            if idx.size:
                out[idx] = _draw(comp.law, lattice, keys[idx], stream + 16 * (k + 1))
        return out

    raise SamplingError(f"unknown displacement law {type(law).__name__}")


def draw_displacements(
    law, lattice: LatticeSpec, keys: np.ndarray, attempt: int = 0
) -> np.ndarray:
    """Displacements r_j, shape (n, 3).

    Args:
        law: A displacement law model.
        lattice: Needed for laws given in lattice coordinates.
        keys: Site keys, shape (n,).
        attempt: Redraw round; distinct rounds give independent draws.
    """
    stream = rng.STREAM_DISPLACEMENT + rng.ATTEMPT_STRIDE * attempt
    return _draw(law, lattice, np.asarray(keys, dtype=np.uint64), stream)


def draw_charges(law, keys: np.ndarray, counters: Optional[np.ndarray] = None) -> np.ndarray:
    """Charges z_j, shape (n,). Zero marks a vacancy.

    ``counters`` (aligned with ``keys``) separates several marks drawn
    under one key, as for the points of a Poisson cell.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    n = keys.shape[0]
    if counters is None:
        counters = np.zeros(n, dtype=np.int64)
    u = rng.keyed_uniforms(keys, rng.STREAM_CHARGE, np.asarray(counters).reshape(-1, 1))[:, 0]

    if isinstance(law, ConstantCharge):
        return np.full(n, law.z)
    if isinstance(law, UniformIntervalCharge):
        return law.z_min + (law.z_max - law.z_min) * u
    if isinstance(law, VacancyCharge):
        return np.where(u < law.p_vac, 0.0, law.z)
    raise SamplingError(f"unknown charge law {type(law).__name__}")
