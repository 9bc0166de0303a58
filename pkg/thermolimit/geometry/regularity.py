"""Regular-domain predicates: collar volumes, Fisher a, cone audit, cell cover.

Monte Carlo loops are split into fixed chunks, each drawing from its own
labelled generator of the master seed; chunks may run on worker threads
and are reduced in chunk order, so results never depend on the thread
count.

Key functions:
    collar_volume, collar_profile, fisher_a_estimate
    cone_check: Probabilistic ε-cone audit with failure witnesses.
    regularized_volume: Volume of the union of lattice cells meeting D.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog

from .. import rng
from ..config import get_config
from ..exceptions import GeometryError, UnsupportedShapeError
from ..nuclei.models import Box, LatticeSpec
from ..parallel import run_ordered
from ..resource_guard import resolve_threads
from .models import CollarProfile, ConeReport, ConeWitness, FisherEstimate
from .shapes import Ball, CellUnion, Intersection, Simplex

logger = structlog.get_logger("thermolimit.geometry")

MIN_COLLAR_POINTS = 10_000
MC_CHUNK = 65_536
# Directions tried first, ranked by alignment with the boundary normal
PREFERRED_DIRECTIONS = 16
CONE_POINT_CHUNK = 128


def uniform_in_box(gen: np.random.Generator, box: Box, n: int) -> np.ndarray:
    return box.lo_array + (box.hi_array - box.lo_array) * gen.random((n, 3))


def _chunks(total: int, size: int = MC_CHUNK) -> List[Tuple[int, int]]:
    return [(i, min(size, total - i * size)) for i in range((total + size - 1) // size)]


# ---------------------------------------------------------------------------
# Collar volumes
# ---------------------------------------------------------------------------

def collar_profile(
    shape,
    t_grid: Sequence[float],
    n_mc: int,
    seed: int,
    threads: Optional[int] = None,
) -> CollarProfile:
    """Collar volumes for every t of the grid from one common point sample.

    Points are uniform in the bounding box of D dilated by the largest
    collar width, so the profile is monotone in t.
    """
    grid = [float(t) for t in t_grid]
    if any(t < 0 for t in grid):
        raise GeometryError("collar parameter t must be >= 0", t=grid)
    if n_mc < MIN_COLLAR_POINTS:
        raise GeometryError(f"collar estimates need n_mc >= {MIN_COLLAR_POINTS}", n_mc=n_mc)
    shape.require_exact_exterior("collar_volume")

    volume = shape.volume
    scale = volume ** (1.0 / 3.0)
    widths = np.asarray(grid) * scale
    box = shape.bbox().expand(float(widths.max()) if widths.size else 0.0)

    def _count(chunk: Tuple[int, int]) -> np.ndarray:
        index, size = chunk
        pts = uniform_in_box(rng.generator(seed, "collar", index), box, size)
        d = shape.boundary_distance(pts)
        return (d[:, None] <= widths[None, :]).sum(axis=0)

    hits = np.sum(run_ordered(_count, _chunks(n_mc), resolve_threads(threads)), axis=0)
    frac = hits / n_mc
    volumes = np.where(widths > 0, frac * box.volume, 0.0)
    stderrs = np.where(widths > 0, box.volume * np.sqrt(frac * (1 - frac) / n_mc), 0.0)
    profile = CollarProfile(
        shape=shape.kind,
        domain_volume=volume,
        t=grid,
        volumes=[float(v) for v in volumes],
        stderrs=[float(s) for s in stderrs],
        n_mc=int(n_mc),
        seed=int(seed),
    )
    logger.debug("collar_profile", shape=shape.kind, points=n_mc, t=grid)
    return profile


def collar_volume(shape, t: float, n_mc: int, seed: int, threads: Optional[int] = None) -> float:
    """Monte Carlo estimate of |{x : d(x, ∂D) ≤ |D|^{1/3} t}|.

    Raises:
        GeometryError: t < 0 or n_mc < 10⁴.
        UnsupportedShapeError: shape without exact exterior distances.
    """
    return collar_profile(shape, [t], n_mc, seed, threads).volumes[0]


def fisher_a_estimate(
    shape,
    t_grid: Sequence[float],
    n_mc: int,
    seed: int,
    threads: Optional[int] = None,
) -> FisherEstimate:
    """Smallest a with collar_volume(D, t) ≤ |D|·a·t on the grid (max of ratios)."""
    grid = [float(t) for t in t_grid]
    if not grid or any(not 0 < t <= 0.2 for t in grid):
        raise GeometryError("t grid must lie in (0, 0.2]", t=grid)
    profile = collar_profile(shape, grid, n_mc, seed, threads)
    denom = profile.domain_volume * np.asarray(grid)
    ratios = np.asarray(profile.volumes) / denom
    best = int(np.argmax(ratios))
    estimate = FisherEstimate(
        a=float(ratios[best]),
        stderr=float(profile.stderrs[best] / denom[best]),
        argmax_t=grid[best],
        ratios=[float(r) for r in ratios],
        profile=profile,
    )
    logger.info("fisher_a_estimated", shape=shape.kind, a=estimate.a, stderr=estimate.stderr)
    return estimate


# ---------------------------------------------------------------------------
# Cone audit
# ---------------------------------------------------------------------------

def fibonacci_directions(n: int) -> np.ndarray:
    """n nearly uniform unit vectors (Fibonacci sphere)."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    phi = np.pi * (1.0 + np.sqrt(5.0)) * k
    r = np.sqrt(1.0 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _cone_offsets(directions: np.ndarray, cone_epsilon: float) -> np.ndarray:
    """Sample offsets ρu of the open cone around each direction, (ndir, m, 3)."""
    half_angle = float(np.arccos(np.clip(1.0 - cone_epsilon ** 2, -1.0, 1.0)))
    angles = 0.98 * half_angle * np.array([1.0 / 3.0, 2.0 / 3.0, 1.0])
    azimuths = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)
    radii = cone_epsilon * np.array([0.25, 0.5, 0.75, 0.98])

    helper = np.where(np.abs(directions[:, :1]) > 0.9, [[0.0, 1.0, 0.0]], [[1.0, 0.0, 0.0]])
    a = np.cross(directions, helper)
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    b = np.cross(directions, a)

    units = [directions[:, None, :]]
    for alpha in angles:
        ring = (np.cos(azimuths)[None, :, None] * a[:, None, :]
                + np.sin(azimuths)[None, :, None] * b[:, None, :])
        units.append(np.cos(alpha) * directions[:, None, :] + np.sin(alpha) * ring)
    u = np.concatenate(units, axis=1)
    return (u[:, :, None, :] * radii[None, None, :, None]).reshape(directions.shape[0], -1, 3)


def _gradient(shape, points: np.ndarray, h: float = 1e-6) -> np.ndarray:
    grad = np.empty_like(points)
    for d in range(3):
        step = np.zeros(3)
        step[d] = h
        grad[:, d] = shape.signed_distance(points + step) - shape.signed_distance(points - step)
    norm = np.linalg.norm(grad, axis=1, keepdims=True)
    return grad / np.where(norm > 0, norm, 1.0)


def _cone_fits(shape, points: np.ndarray, inside: bool, offsets: np.ndarray) -> np.ndarray:
    """(m, k) mask: cone k of point m lies in D (inside) or in its complement."""
    if offsets.ndim == 3:
        offsets = offsets[None]
    y = points[:, None, None, :] - offsets
    sd = shape.signed_distance(y.reshape(-1, 3)).reshape(y.shape[:-1])
    ok = sd < 0 if inside else sd >= 0
    return ok.all(axis=-1)


def _eroded_directions(shape, points: np.ndarray, depth: float,
                       fallback: np.ndarray) -> np.ndarray:
    """Axis pointing away from the nearest point of the eroded domain.

    Near edges and corners of polytopes this is the bisector that the
    codebook may resolve too coarsely.
    """
    try:
        target = shape.nearest_eroded_point(points, depth)
    except (UnsupportedShapeError, GeometryError):
        return fallback
    axis = points - target
    norm = np.linalg.norm(axis, axis=1, keepdims=True)
    return np.where(norm > 1e-12, axis / np.where(norm > 0, norm, 1.0), fallback)


def _sample_side(shape, gen: np.random.Generator, box: Box, n: int, inside: bool) -> np.ndarray:
    out: List[np.ndarray] = []
    got, rounds = 0, 0
    while got < n:
        pts = uniform_in_box(gen, box, max(4 * n, 1024))
        sel = pts[shape.contains(pts) == inside]
        out.append(sel)
        got += sel.shape[0]
        rounds += 1
        if rounds > 200:
            raise GeometryError("could not sample points on both sides of the boundary",
                                inside=inside)
    return np.concatenate(out)[:n]


def cone_check(
    shape,
    cone_epsilon: float,
    n_samples: int,
    seed: int,
    max_witnesses: int = 20,
) -> ConeReport:
    """Audit the ε-cone property on sampled points of D and of its complement.

    A point passes when some direction v of a fixed codebook has its finite
    cone {y : (x - y)·v > (1 - ε²)|x - y|, |x - y| < ε} inside the same side
    of ∂D as x, tested on a fixed set of cone points. A failure is a genuine
    witness only up to the codebook resolution; success is statistical.
    """
    if not cone_epsilon > 0:
        raise GeometryError("cone_epsilon must be > 0", cone_epsilon=cone_epsilon)
    codebook = fibonacci_directions(get_config().cone_directions)
    offsets = _cone_offsets(codebook, cone_epsilon)
    gen = rng.generator(seed, "cone")
    box = shape.bbox().expand(cone_epsilon)

    half = n_samples // 2
    witnesses: List[ConeWitness] = []
    failures = 0
    for inside, count in ((True, n_samples - half), (False, half)):
        pts = _sample_side(shape, gen, box, count, inside)
        for start in range(0, pts.shape[0], CONE_POINT_CHUNK):
            chunk = pts[start:start + CONE_POINT_CHUNK]
            normal = _gradient(shape, chunk)
            preferred = normal if inside else -normal
            order = np.argsort(-(preferred @ codebook.T), axis=1)[:, :PREFERRED_DIRECTIONS]
            ok = _cone_fits(shape, chunk, inside, offsets[order]).any(axis=1)
            if inside and not np.all(ok):
                dirs = _eroded_directions(shape, chunk, cone_epsilon, normal)
                offsets = _cone_offsets(dirs, cone_epsilon)[:, None]
                ok |= _cone_fits(shape, chunk, inside, offsets)[:, 0]
            for i in np.nonzero(~ok)[0]:
                x = chunk[i:i + 1]
                found = any(
                    _cone_fits(shape, x, inside, offsets[j:j + 64]).any()
                    for j in range(0, codebook.shape[0], 64)
                )
                if found:
                    continue
                failures += 1
                if len(witnesses) < max_witnesses:
                    witnesses.append(ConeWitness(
                        point=tuple(float(v) for v in x[0]),
                        inside=inside,
                        signed_distance=float(shape.signed_distance(x)[0]),
                    ))

    report = ConeReport(
        passed=failures == 0,
        cone_epsilon=float(cone_epsilon),
        points_checked=int(n_samples),
        directions=int(codebook.shape[0]),
        witnesses=witnesses,
    )
    log = logger.info if report.passed else logger.warning
    log("cone_check", shape=shape.kind, passed=report.passed, failures=failures)
    return report


# ---------------------------------------------------------------------------
# Regularized volume
# ---------------------------------------------------------------------------

def _polytope(shape) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """World vertices, face normals and edge directions of a convex polytope."""
    if isinstance(shape, Simplex):
        local = shape.vertex_array
        normals = shape._faces()[0]
        edges = np.array([local[j] - local[i] for i in range(4) for j in range(i + 1, 4)])
    else:
        local = shape._local_corners()
        normals = np.eye(3)
        edges = np.eye(3)
    rot = shape.transform.matrix
    return shape.transform.to_world(local), normals @ rot.T, edges @ rot.T


def _overlapping_cells(vertices, normals, edges, lo, hi) -> np.ndarray:
    """Strict-overlap SAT between a convex polytope and axis-aligned boxes."""
    axes = [np.eye(3), normals]
    crosses = np.cross(np.eye(3)[:, None, :], edges[None, :, :]).reshape(-1, 3)
    lengths = np.linalg.norm(crosses, axis=1)
    axes.append(crosses[lengths > 1e-12] / lengths[lengths > 1e-12, None])
    axes = np.concatenate(axes)

    proj = vertices @ axes.T
    p_lo, p_hi = proj.min(axis=0), proj.max(axis=0)
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    c = centre @ axes.T
    r = half @ np.abs(axes).T
    return np.all((c - r < p_hi) & (c + r > p_lo), axis=1)


def regularized_volume(shape, lattice: Optional[LatticeSpec] = None) -> float:
    """|∪{W + j : (W + j) ∩ D ≠ ∅}| = (number of meeting cells)·|W|.

    Supported on diagonal lattices. An intersection with empty bounding
    box is the empty domain and gives 0.
    """
    lattice = lattice or LatticeSpec()
    if not lattice.is_diagonal:
        raise UnsupportedShapeError("regularized volume needs a diagonal lattice",
                                    shape=shape.kind)
    if isinstance(shape, Intersection):
        if shape.bbox().is_degenerate:
            return 0.0
        raise UnsupportedShapeError("regularized volume of an intersection", shape=shape.kind)

    h = np.diag(lattice.matrix)
    candidates = lattice.sites_near_box(shape.bbox(), lattice.cell_circumradius)
    lo = (candidates - 0.5) * h
    hi = (candidates + 0.5) * h
    if isinstance(shape, Ball):
        centre = shape.transform.offset
        gap = np.clip(np.maximum(lo - centre, centre - hi), 0.0, None)
        meets = np.linalg.norm(gap, axis=1) < shape.radius
    elif isinstance(shape, CellUnion):
        members = shape.cell_array
        m_lo = (members - 0.5) * shape.spacing
        m_hi = (members + 0.5) * shape.spacing
        meets = np.zeros(candidates.shape[0], dtype=bool)
        for a, b in zip(m_lo, m_hi):
            meets |= np.all((lo < b) & (hi > a), axis=1)
    else:
        meets = _overlapping_cells(*_polytope(shape), lo, hi)

    count = int(meets.sum())
    logger.debug("regularized_volume", shape=shape.kind, cells=count)
    return count * lattice.cell_volume


def regularized_volume_scan(shape, lattice: Optional[LatticeSpec] = None,
                            per_axis: int = 9) -> float:
    """Exhaustive cell scan: a cell meets D when one of its grid points lies in D.

    A slow lower bound on ``regularized_volume`` that converges to it as
    ``per_axis`` grows.
    """
    lattice = lattice or LatticeSpec()
    candidates = lattice.sites_near_box(shape.bbox(), lattice.cell_circumradius)
    frac = (np.arange(per_axis) + 0.5) / per_axis - 0.5
    grid = np.stack(np.meshgrid(frac, frac, frac, indexing="ij"), axis=-1).reshape(-1, 3)
    count = 0
    for site in candidates:
        if shape.contains(lattice.positions(site + grid)).any():
            count += 1
    return count * lattice.cell_volume
