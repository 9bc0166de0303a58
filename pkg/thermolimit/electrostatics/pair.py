"""Classical pair energies of point charges.

Pair sums run over the condensed distance vector of
``scipy.spatial.distance.pdist`` (pairs i < j in row-major order).

Key functions:
    coulomb_energy, yukawa_energy, yukawa_comparison_deficit
    dipole_interaction: Interaction of two screened nuclei.
    cloud_interaction: The same, for two ScreeningCloud records.
    dipole_bound_audit, yukawa_deficit_audit: Randomized inequality checks.
"""

from typing import Tuple

import numpy as np
import structlog
from scipy.spatial.distance import pdist

from .. import rng
from ..exceptions import ElectrostaticsError
from .models import DipoleAudit, PointCharge, ScreeningCloud, YukawaAudit

logger = structlog.get_logger("thermolimit.electrostatics")

# |Dip| ≤ DIPOLE_BOUND zz′/|R - R′| for admissible offsets
DIPOLE_BOUND = 6.0


def _unpack(charges) -> Tuple[np.ndarray, np.ndarray]:
    """(positions (n, 3), charges (n,)) from PointCharges or a (positions, q) pair."""
    if isinstance(charges, tuple) and len(charges) == 2 and not isinstance(charges[0], PointCharge):
        pos = np.asarray(charges[0], dtype=float).reshape(-1, 3)
        q = np.asarray(charges[1], dtype=float).reshape(-1)
    else:
        items = list(charges)
        pos = np.array([c.position for c in items], dtype=float).reshape(-1, 3)
        q = np.array([c.charge for c in items], dtype=float)
    if pos.shape[0] != q.shape[0]:
        raise ElectrostaticsError("positions and charges differ in length",
                                  positions=pos.shape[0], charges=q.shape[0])
    if not np.all(np.isfinite(pos)):
        raise ElectrostaticsError("charge positions must be finite")
    return pos, q


def _pairs(pos: np.ndarray, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    d = pdist(pos)
    if d.size and d.min() == 0.0:
        raise ElectrostaticsError("coincident charge positions")
    i, j = np.triu_indices(q.shape[0], k=1)
    return d, q[i] * q[j]


def coulomb_energy(charges) -> float:
    """Σ_{i<j} q_i q_j / |y_i - y_j|.

    Raises:
        ElectrostaticsError: coincident positions.
    """
    d, qq = _pairs(*_unpack(charges))
    return float(np.sum(qq / d))


def yukawa_energy(charges, mass: float = 1.0) -> float:
    """Σ_{i<j} q_i q_j e^{-m r} / r."""
    if mass < 0:
        raise ElectrostaticsError("Yukawa mass must be >= 0", mass=mass)
    d, qq = _pairs(*_unpack(charges))
    return float(np.sum(qq * np.exp(-mass * d) / d))


def yukawa_comparison_deficit(charges, mass: float = 1.0) -> float:
    """Σ_{i≠j} q_i q_j (1 - e^{-m r}) / r + m Σ q_i², which is never negative.

    The kernel (1 - e^{-m r})/r is positive definite with value m at r = 0.
    """
    pos, q = _unpack(charges)
    d, qq = _pairs(pos, q)
    pair = 2.0 * np.sum(qq * (-np.expm1(-mass * d)) / d)
    return float(pair + mass * np.sum(q * q))


# ---------------------------------------------------------------------------
# Dipoles
# ---------------------------------------------------------------------------

def dipole_interaction(
    R, z: float, X, R2, z2: float, X2,
    radius: float,
    radius2: float,
) -> float:
    """Interaction of nucleus z at R screened by a cloud at X with another such pair.

    Dip = zz′/|R-R′| + zz′/|X-X′| - zz′/|X-R′| - zz′/|X′-R|, exact for
    non-overlapping spherically symmetric clouds of radii ``radius`` and
    ``radius2`` that do not contain the other nucleus.

    Raises:
        ElectrostaticsError: a negative radius, overlapping clouds or a
            cloud containing the other nucleus.
    """
    if radius < 0 or radius2 < 0:
        raise ElectrostaticsError("cloud radii must be >= 0", radii=(radius, radius2))
    R, X, R2, X2 = (np.asarray(v, dtype=float).reshape(3) for v in (R, X, R2, X2))
    d_rr = float(np.linalg.norm(R - R2))
    d_xx = float(np.linalg.norm(X - X2))
    d_xr = float(np.linalg.norm(X - R2))
    d_rx = float(np.linalg.norm(X2 - R))
    if d_xx <= radius + radius2 or d_rr == 0.0:
        raise ElectrostaticsError("screening clouds overlap", distance=d_xx,
                                  radii=(radius, radius2))
    if d_xr <= radius or d_rx <= radius2:
        raise ElectrostaticsError("a screening cloud contains the other nucleus")
    zz = z * z2
    return zz / d_rr + zz / d_xx - zz / d_xr - zz / d_rx


def cloud_interaction(cloud: ScreeningCloud, other: ScreeningCloud) -> float:
    """``dipole_interaction`` of two screened nuclei, radii taken from the clouds."""
    return dipole_interaction(cloud.position, cloud.z, cloud.centre,
                              other.position, other.z, other.centre,
                              cloud.radius, other.radius)


def _dipole_batch(R, X, R2, X2, zz) -> np.ndarray:
    n = np.linalg.norm
    return zz * (1 / n(R - R2, axis=1) + 1 / n(X - X2, axis=1)
                 - 1 / n(X - R2, axis=1) - 1 / n(X2 - R, axis=1))


def _in_ball(gen: np.random.Generator, n: int, radius: float) -> np.ndarray:
    v = gen.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * (radius * gen.random(n) ** (1.0 / 3.0))[:, None]


def dipole_bound_audit(
    n_pairs: int,
    seed: int,
    cone_epsilon: float = 1.0,
    r_range: Tuple[float, float] = (2.0, 50.0),
    z_range: Tuple[float, float] = (0.5, 3.0),
) -> DipoleAudit:
    """Random admissible pairs: offsets ≤ ε/4, separation r uniform in ``r_range``.

    Counts violations of |Dip| ≤ 6zz′/r and reports the largest value of
    |Dip| r (1 + r²) / (zz′), which stays bounded because Dip decays like r⁻³.
    """
    if r_range[0] < cone_epsilon:
        raise ElectrostaticsError("separations must exceed the offsets", r_range=r_range)
    gen = rng.generator(seed, "dipole-audit")
    r = gen.uniform(*r_range, n_pairs)
    axis = gen.standard_normal((n_pairs, 3))
    axis /= np.linalg.norm(axis, axis=1, keepdims=True)
    R = np.zeros((n_pairs, 3))
    R2 = r[:, None] * axis
    X = R + _in_ball(gen, n_pairs, cone_epsilon / 4.0)
    X2 = R2 + _in_ball(gen, n_pairs, cone_epsilon / 4.0)
    zz = gen.uniform(*z_range, n_pairs) * gen.uniform(*z_range, n_pairs)

    dip = np.abs(_dipole_batch(R, X, R2, X2, zz))
    bound_ratio = dip / (DIPOLE_BOUND * zz / r)
    decay_ratio = dip * r * (1.0 + r * r) / zz
    audit = DipoleAudit(
        pairs=int(n_pairs),
        violations=int(np.sum(bound_ratio > 1.0)),
        max_bound_ratio=float(bound_ratio.max()),
        max_decay_ratio=float(decay_ratio.max()),
        cone_epsilon=float(cone_epsilon),
        seed=int(seed),
    )
    logger.info("dipole_audit", pairs=n_pairs, violations=audit.violations,
                max_decay_ratio=audit.max_decay_ratio)
    return audit


def random_charge_system(
    gen: np.random.Generator,
    n: int,
    charge_bound: float = 2.0,
    box_side: float = 4.0,
    min_separation: float = 1e-3,
) -> Tuple[np.ndarray, np.ndarray]:
    """n charges uniform in [-bound, bound] at positions with a minimum separation."""
    for _ in range(100):
        pos = gen.random((n, 3)) * box_side
        if n < 2 or pdist(pos).min() >= min_separation:
            return pos, gen.uniform(-charge_bound, charge_bound, n)
    raise ElectrostaticsError("could not place charges with the requested separation",
                              n=n, min_separation=min_separation)


def yukawa_deficit_audit(
    n_systems: int,
    seed: int,
    max_charges: int = 50,
    charge_bound: float = 2.0,
    min_separation: float = 1e-3,
    mass: float = 1.0,
) -> YukawaAudit:
    """Evaluate the comparison deficit on random systems of 1..max_charges charges."""
    gen = rng.generator(seed, "yukawa-audit")
    deficits = np.empty(n_systems)
    for s in range(n_systems):
        n = int(gen.integers(1, max_charges + 1))
        pos, q = random_charge_system(gen, n, charge_bound, min_separation=min_separation)
        deficits[s] = yukawa_comparison_deficit((pos, q), mass)
    # roundoff allowance relative to the diagonal term
    violations = int(np.sum(deficits < -1e-10 * max_charges * charge_bound ** 2))
    audit = YukawaAudit(
        systems=int(n_systems),
        violations=violations,
        min_deficit=float(deficits.min()) if n_systems else 0.0,
        mass=float(mass),
        seed=int(seed),
    )
    logger.info("yukawa_audit", systems=n_systems, violations=violations,
                min_deficit=audit.min_deficit)
    return audit
