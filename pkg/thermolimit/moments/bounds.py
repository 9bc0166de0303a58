"""Deterministic cell-mass series and the moment inequalities built on them.

ν(W − j) is the probability that the nucleus of site j lands in the
origin cell. Gaussian laws on diagonal lattices factor into per-axis
normal-CDF differences (evaluated in log space, so far tails do not
underflow); uniform balls use midpoint quadrature; compact-in-cell laws
put all their mass in one cell; mixtures combine linearly.

Key functions:
    cell_masses: ν(W − j) on a block of sites with a tail mass bound.
    x0_norm_series: Σ_j ν(W − j)^(1/p) with a certified tail bound.
    check_X0_norm_bound: ‖X₀‖_p ≤ Σ_j ν(W − j)^(1/p).
    check_X1_implies_X0: E X₀^p ≤ 1 + diam(W)^p E X₁^p.
    x0_tail_lower_bound: P(X₀ ≥ n) ≥ product of the n largest cell masses.
    x1_integrability_series: Σ_{j≠0} ‖ν‖_{L∞(W + B_η − j)}^(1/p).
    pair_small_ball_probability: P(|R_j − R_0| < ε) for two Gaussian sites.
"""

import itertools
from typing import Dict, Optional, Tuple

import numpy as np
import structlog
from scipy import special, stats

from ..exceptions import EstimationError
from ..nuclei.models import (
    CompactInCell,
    GaussianIsotropic,
    LatticeSpec,
    Mixture,
    ModelSpec,
    PointMass,
    UniformBall,
)
from .estimators import MIN_REPLICAS, summarize
from .models import BoundReport, CellMasses, Statistic
from .origin import sample_origin

logger = structlog.get_logger("thermolimit.moments")

# Relative size of the last term kept in a Gaussian series
SERIES_TOLERANCE = 1e-17
# Midpoints per axis for uniform-ball quadrature
QUADRATURE_POINTS = 96
# Relative tail above which a series is reported as a lower bound only
RHS_TOLERANCE = 1e-9


def _require_diagonal(lattice: LatticeSpec, what: str) -> np.ndarray:
    if not lattice.is_diagonal:
        raise EstimationError(f"{what} is only available for diagonal lattices")
    return np.diag(lattice.matrix).copy()


def _gaussian_log_masses(sigma: float, a: float, k: np.ndarray) -> np.ndarray:
    """log P(r_d ∈ [(k − ½)a, (k + ½)a)) for r_d ~ N(0, σ²)."""
    k = np.abs(np.asarray(k, dtype=float))
    upper = special.log_ndtr(-(k - 0.5) * a / sigma)
    lower = special.log_ndtr(-(k + 0.5) * a / sigma)
    with np.errstate(divide="ignore"):
        far = upper + np.log1p(-np.exp(lower - upper))
    centre = np.log(np.clip(1.0 - 2.0 * special.ndtr(-0.5 * a / sigma), 1e-300, None))
    return np.where(k == 0, centre, far)


def _gaussian_axis_series(sigma: float, a: float, p: float) -> Tuple[float, float, int]:
    """(Σ_k m(k)^(1/p) over |k| ≤ K, bound on the rest, K) on one axis."""
    total = float(np.exp(_gaussian_log_masses(sigma, a, np.array([0]))[0] / p))
    prev = total
    k = 0
    while True:
        k += 1
        term = float(np.exp(_gaussian_log_masses(sigma, a, np.array([k]))[0] / p))
        total += 2.0 * term
        if term <= SERIES_TOLERANCE * total and k >= 2:
            q = term / prev if prev > 0 else 0.0
            tail = 2.0 * term * q / (1.0 - q) if q < 1 else float("inf")
            return total, tail, k
        prev = term


def _block(radius: int) -> np.ndarray:
    r = range(-radius, radius + 1)
    return np.array(list(itertools.product(r, r, r)), dtype=np.int64)


def _law_masses(law, lattice: LatticeSpec, radius: int) -> Tuple[Dict[tuple, float], float, bool]:
    """Masses keyed by the cell k that the displacement lands in."""
    if isinstance(law, PointMass):
        return {(0, 0, 0): 1.0}, 0.0, True

    if isinstance(law, CompactInCell):
        return {(0, 0, 0): 1.0}, 0.0, True

    if isinstance(law, GaussianIsotropic):
        sides = _require_diagonal(lattice, "Gaussian cell masses")
        ks = np.arange(-radius, radius + 1)
        per_axis = [np.exp(_gaussian_log_masses(law.sigma, a, ks)) for a in sides]
        grid = np.einsum("i,j,k->ijk", *per_axis)
        masses = {tuple(int(v) for v in site): float(grid[tuple(site + radius)])
                  for site in _block(radius)}
        tail = max(0.0, 1.0 - float(np.prod([m.sum() for m in per_axis])))
        return masses, tail, True

    if isinstance(law, UniformBall):
        h = 2.0 * law.radius / QUADRATURE_POINTS
        axis = -law.radius + h * (np.arange(QUADRATURE_POINTS) + 0.5)
        pts = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
        pts = pts[np.linalg.norm(pts, axis=1) <= law.radius]
        cells, counts = np.unique(lattice.cell_of(pts), axis=0, return_counts=True)
        masses = {tuple(int(v) for v in c): float(n) / pts.shape[0]
                  for c, n in zip(cells, counts)}
        return masses, 0.0, False

    if isinstance(law, Mixture):
        out: Dict[tuple, float] = {}
        tail, exact = 0.0, True
        for comp in law.components:
            masses, t, e = _law_masses(comp.law, lattice, radius)
            for key, value in masses.items():
                out[key] = out.get(key, 0.0) + comp.weight * value
            tail += comp.weight * t
            exact = exact and e
        return out, tail, exact

    raise EstimationError(f"no cell masses for law {type(law).__name__}")


def _default_radius(law, lattice: LatticeSpec) -> int:
    reach = law.support_radius(lattice) + lattice.cell_circumradius
    return int(np.ceil(reach / lattice.face_spacing)) + 1


def cell_masses(law, lattice: Optional[LatticeSpec] = None,
                radius: Optional[int] = None) -> CellMasses:
    """ν(W − j) for the sites of a block of Chebyshev radius ``radius``.

    Rows are keyed by the cell k = −j that the displacement lands in (the
    series below are symmetric in j, so only the multiset matters).
    """
    lattice = lattice or LatticeSpec()
    radius = _default_radius(law, lattice) if radius is None else int(radius)
    masses, tail, exact = _law_masses(law, lattice, radius)
    keys = sorted(masses)
    return CellMasses(
        sites=np.array(keys, dtype=np.int64).reshape(-1, 3),
        masses=np.array([masses[k] for k in keys]),
        tail_mass=tail,
        exact=exact,
    )


def x0_norm_series(law, lattice: Optional[LatticeSpec] = None,
                   p: float = 1.0) -> Tuple[float, float, bool]:
    """(Σ_j ν(W − j)^(1/p), upper bound on the omitted tail, exact)."""
    lattice = lattice or LatticeSpec()
    if p < 1:
        raise EstimationError("the cell-mass series needs p >= 1", p=p)

    if isinstance(law, GaussianIsotropic):
        sides = _require_diagonal(lattice, "the Gaussian cell-mass series")
        parts = [_gaussian_axis_series(law.sigma, a, p) for a in sides]
        value = float(np.prod([s for s, _, _ in parts]))
        upper = float(np.prod([s + t for s, t, _ in parts]))
        return value, upper - value, True

    if isinstance(law, Mixture):
        radius = _default_radius(law, lattice)
        tail = 0.0
        for comp in law.components:
            if isinstance(comp.law, GaussianIsotropic):
                sides = _require_diagonal(lattice, "the Gaussian cell-mass series")
                inside = [np.exp(_gaussian_log_masses(comp.law.sigma, a,
                                                      np.arange(-radius, radius + 1)) / p).sum()
                          for a in sides]
                full = [s + t for s, t, _ in
                        (_gaussian_axis_series(comp.law.sigma, a, p) for a in sides)]
                tail += comp.weight ** (1.0 / p) * max(0.0, float(np.prod(full) - np.prod(inside)))
        masses = cell_masses(law, lattice, radius)
        return float(np.sum(masses.masses ** (1.0 / p))), tail, masses.exact

    masses = cell_masses(law, lattice)
    return float(np.sum(masses.masses ** (1.0 / p))), 0.0, masses.exact


def x0_tail_lower_bound(law, lattice: Optional[LatticeSpec] = None, n: int = 2) -> float:
    """Lower bound on P(X₀ ≥ n): the n likeliest sites all land in cell 0.

    Positive for every n when ν has unbounded support, which rules out
    X₀ ∈ L^∞; zero for n ≥ 2 when the support lies inside W.
    """
    if n < 1:
        raise EstimationError("n must be >= 1", n=n)
    masses = cell_masses(law, lattice).largest(n)
    if masses.size < n:
        return 0.0
    return float(np.prod(masses))


def _sup_density(law, lattice: LatticeSpec, dist_cell: np.ndarray, gaps: np.ndarray, eta: float):
    """sup of the density of ν over (cell −j) ⊕ B_η, vectorized over sites."""
    if isinstance(law, PointMass):
        return np.full(dist_cell.shape, np.inf)
    if isinstance(law, GaussianIsotropic):
        d = np.clip(dist_cell - eta, 0.0, None)
        return (2 * np.pi * law.sigma ** 2) ** -1.5 * np.exp(-0.5 * (d / law.sigma) ** 2)
    if isinstance(law, UniformBall):
        vol = 4.0 / 3.0 * np.pi * law.radius ** 3
        return np.where(dist_cell < law.radius + eta, 1.0 / vol, 0.0)
    if isinstance(law, CompactInCell):
        sides = np.diag(lattice.matrix)
        lo, hi = np.asarray(law.lo) * sides, np.asarray(law.hi) * sides
        vol = float(np.prod(hi - lo))
        # gaps holds the per-axis interval (cell −j) in columns [lo, hi]
        sep = np.clip(np.maximum(gaps[..., 0] - hi, lo - gaps[..., 1]), 0.0, None)
        return np.where(np.linalg.norm(sep, axis=-1) < eta, 1.0 / vol, 0.0)
    if isinstance(law, Mixture):
        return sum(c.weight * _sup_density(c.law, lattice, dist_cell, gaps, eta)
                   for c in law.components)
    raise EstimationError(f"no density bound for law {type(law).__name__}")


def x1_integrability_series(
    law, lattice: Optional[LatticeSpec] = None, p: float = 2.0, eta: float = 0.25
) -> Tuple[float, float]:
    """(Σ_{j≠0} ‖ν‖_{L∞(W + B_η − j)}^(1/p), tail bound).

    A finite value certifies X₁ ∈ L^p for 1 ≤ p < 3. Point masses have no
    density and give infinity.
    """
    lattice = lattice or LatticeSpec()
    sides = _require_diagonal(lattice, "the X1 integrability series")
    if not eta > 0:
        raise EstimationError("eta must be > 0", eta=eta)

    def shell_sum(r: int) -> float:
        block = _block(r)
        shell = block[np.abs(block).max(axis=1) == r] if r > 0 else block[:0]
        centre = -shell * sides
        intervals = np.stack([centre - sides / 2, centre + sides / 2], axis=-1)
        gaps = np.clip(np.abs(centre) - sides / 2, 0.0, None)
        dist = np.linalg.norm(gaps, axis=1)
        sup = _sup_density(law, lattice, dist, intervals, eta)
        return float(np.sum(sup ** (1.0 / p)))

    bounded = law.is_bounded
    limit = int(np.ceil((law.support_radius(lattice) + eta) / sides.min())) + 2
    total, prev, r = 0.0, 0.0, 0
    while True:
        r += 1
        s = shell_sum(r)
        total += s
        if not np.isfinite(total):
            return float("inf"), 0.0
        if bounded and r >= limit:
            return total, 0.0
        if not bounded and r >= 3 and s <= SERIES_TOLERANCE * max(total, 1e-300):
            q = s / prev if prev > 0 else 0.0
            return total, (s * q / (1.0 - q) if q < 1 else float("inf"))
        prev = s


def pair_small_ball_probability(sigma: float, separation: float, eps) -> np.ndarray:
    """P(|j + r_j − r_0| < ε) for two sites at distance ``separation``.

    r_j − r_0 ~ N(0, 2σ² I), so the squared distance over 2σ² is a
    noncentral χ² with 3 degrees of freedom.
    """
    eps = np.asarray(eps, dtype=float)
    scale = 2.0 * sigma ** 2
    return stats.ncx2.cdf(eps ** 2 / scale, 3, separation ** 2 / scale)


def check_X0_norm_bound(
    model: ModelSpec,
    p: float,
    replicas: int,
    seed: int,
    threads: Optional[int] = None,
    neighborhood: Optional[int] = None,
) -> BoundReport:
    """‖X₀‖_{L^p} (Monte Carlo) against Σ_j ν(W − j)^(1/p) (deterministic)."""
    if model.kind != "lattice":
        raise EstimationError("the cell-mass series applies to perturbed lattices only")
    if replicas < MIN_REPLICAS:
        raise EstimationError(f"at least {MIN_REPLICAS} replicas are required", replicas=replicas)

    rhs, tail, exact = x0_norm_series(model.displacement, model.lattice, p)
    sample = sample_origin(model, replicas, seed, neighborhood=neighborhood, threads=threads)
    x0 = sample.values(Statistic(kind="X0"))
    moment, se, _, _ = summarize(x0 ** p, 0.99)
    lhs = moment ** (1.0 / p)
    lhs_se = se * moment ** (1.0 / p - 1.0) / p if moment > 0 else 0.0
    lower_only = tail > RHS_TOLERANCE * rhs
    report = BoundReport(
        name="X0_norm",
        p=float(p),
        lhs=lhs,
        rhs=rhs,
        lhs_stderr=lhs_se,
        holds=bool(lhs <= rhs + 3.0 * lhs_se),
        rhs_is_lower_bound=bool(lower_only),
        detail={"rhs_tail_bound": tail, "quadrature": float(not exact), "replicas": replicas},
    )
    logger.info("x0_norm_bound", p=p, lhs=lhs, rhs=rhs, holds=report.holds)
    return report


def check_X1_implies_X0(
    model: ModelSpec,
    p: float,
    replicas: int,
    seed: int,
    threads: Optional[int] = None,
    neighborhood: Optional[int] = None,
) -> BoundReport:
    """E X₀^p against 1 + diam(W)^p E X₁^p on the same replicas."""
    if replicas < MIN_REPLICAS:
        raise EstimationError(f"at least {MIN_REPLICAS} replicas are required", replicas=replicas)
    sample = sample_origin(model, replicas, seed, neighborhood=neighborhood, threads=threads)
    diam = model.lattice.cell_diameter
    lhs, lhs_se, _, _ = summarize(sample.values(Statistic(kind="X0")) ** p, 0.99)
    x1, x1_se, _, _ = summarize(sample.values(Statistic(kind="X1")) ** p, 0.99)
    rhs = 1.0 + diam ** p * x1
    rhs_se = diam ** p * x1_se
    combined = float(np.hypot(lhs_se, rhs_se))
    report = BoundReport(
        name="X1_implies_X0",
        p=float(p),
        lhs=lhs,
        rhs=rhs,
        lhs_stderr=lhs_se,
        rhs_stderr=rhs_se,
        holds=bool(lhs <= rhs + 3.0 * combined),
        detail={"diameter": diam, "x1_moment": x1, "replicas": replicas},
    )
    logger.info("x1_implies_x0", p=p, lhs=lhs, rhs=rhs, holds=report.holds)
    return report
