"""Simplex tiling averaged over the Euclidean group.

The rotations of a tiling are uniform on SO(3) (normalized 4-dimensional
Gaussian quaternions) and the translations uniform on the fundamental
cell W, so averaging over g and summing over lattice sites j covers every
point of space exactly |ℓΔ|/|W| times.

Key functions:
    sample_group_element, sample_group_elements, haar_angle_ks
    tiling_volume_identity: |D| against the group-averaged tiling volume.
    classify_cells: Inner (#G) and boundary (#∂G) sites of a domain.
    boundary_scaling: log-log slopes of #G and #∂G over growing domains.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import stats

from .. import rng
from ..exceptions import GeometryError
from ..nuclei.models import Box, LatticeSpec
from ..parallel import run_ordered
from ..resource_guard import resolve_threads
from .models import CellClassification, GroupElement, HaarTest, TilingIdentityReport, TilingSpec
from .regularity import uniform_in_box
from .shapes import Ball, Cuboid, RigidTransform, Simplex, shape_signed_distance

logger = structlog.get_logger("thermolimit.geometry")

MIN_GROUP_SAMPLES = 1000
# Group samples per worker task
GROUP_CHUNK = 64
# Shallowest inner sites checked against sampled poses
AUDIT_SITES = 256


def quaternions_to_matrices(q: np.ndarray) -> np.ndarray:
    """Rotation matrices of unit quaternions (w, x, y, z), shape (n, 3, 3)."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=1),
    ], axis=1)


def random_quaternions(gen: np.random.Generator, n: int) -> np.ndarray:
    q = gen.standard_normal((n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def sample_group_elements(
    n: int,
    scale: float,
    mode: str,
    seed: int,
    lattice: Optional[LatticeSpec] = None,
    box: Optional[Box] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """n group elements as (rotations (n, 3, 3), translations (n, 3))."""
    if scale < 1:
        raise GeometryError("tiling scale must be >= 1", scale=scale)
    gen = rng.generator(seed, "group", mode)
    rotations = quaternions_to_matrices(random_quaternions(gen, n))
    if mode == "cell-translation":
        lattice = lattice or LatticeSpec()
        translations = (gen.random((n, 3)) - 0.5) @ lattice.matrix
    elif mode == "free":
        if box is None:
            raise GeometryError("free translations need a box")
        translations = uniform_in_box(gen, box, n)
    else:
        raise GeometryError("unknown translation mode", mode=mode)
    return rotations, translations


def sample_group_element(
    scale: float,
    mode: str = "cell-translation",
    seed: int = 0,
    lattice: Optional[LatticeSpec] = None,
    box: Optional[Box] = None,
) -> GroupElement:
    """One Haar-uniform rotation with a uniform translation in W or in ``box``."""
    rotations, translations = sample_group_elements(1, scale, mode, seed, lattice, box)
    return GroupElement(
        transform=RigidTransform.from_arrays(rotations[0], translations[0]),
        mode=mode,
    )


def haar_angle_ks(n: int, seed: int, level: float = 0.01) -> HaarTest:
    """KS test of rotation angles θ = 2 arccos|w| against the CDF (θ - sin θ)/π."""
    gen = rng.generator(seed, "group", "haar")
    q = random_quaternions(gen, n)
    theta = 2.0 * np.arccos(np.clip(np.abs(q[:, 0]), 0.0, 1.0))
    result = stats.kstest(theta, lambda t: (t - np.sin(t)) / np.pi)
    mats = quaternions_to_matrices(q)
    mean = mats.mean(axis=0)
    stderr = float(mats.std(axis=0, ddof=1).max() / np.sqrt(n))
    test = HaarTest(
        samples=int(n),
        statistic=float(result.statistic),
        pvalue=float(result.pvalue),
        passed=bool(result.pvalue >= level),
        mean_rotation=tuple(tuple(float(v) for v in row) for row in mean),
        mean_rotation_stderr=stderr,
        seed=int(seed),
        level=level,
    )
    logger.info("haar_angle_ks", samples=n, pvalue=test.pvalue, passed=test.passed)
    return test


# ---------------------------------------------------------------------------
# Partition-of-unity identity
# ---------------------------------------------------------------------------

def uniform_in_simplex(gen: np.random.Generator, simplex: Simplex, scale: float,
                       n: int) -> np.ndarray:
    """Rejection sampling in the bounding box of ℓΔ with a barycentric test."""
    vertices = scale * simplex.vertex_array
    box = Box(lo=tuple(vertices.min(axis=0)), hi=tuple(vertices.max(axis=0)))
    scaled = Simplex(vertices=tuple(tuple(float(v) for v in row) for row in vertices))
    out: List[np.ndarray] = []
    got = 0
    while got < n:
        pts = uniform_in_box(gen, box, 4 * (n - got) + 64)
        pts = pts[scaled.barycentric_inside(pts)]
        out.append(pts)
        got += pts.shape[0]
    return np.concatenate(out)[:n]


def translate_counts(shape, points: np.ndarray, lattice: LatticeSpec) -> np.ndarray:
    """N_D(z) = #{j ∈ Z³ : z + jB ∈ D} for each point z."""
    box = shape.bbox()
    corners = np.array(np.meshgrid(*zip(box.lo, box.hi), indexing="ij")).reshape(3, -1).T
    frac = lattice.fractional(corners)
    f_lo, f_hi = frac.min(axis=0), frac.max(axis=0)
    span = np.ceil(f_hi - f_lo).astype(np.int64) + 2
    grid = np.stack(np.meshgrid(*(np.arange(s) for s in span), indexing="ij"),
                    axis=-1).reshape(-1, 3)

    counts = np.zeros(points.shape[0], dtype=np.int64)
    fz = lattice.fractional(points)
    lo = np.ceil(f_lo - fz).astype(np.int64)
    hi = np.floor(f_hi - fz).astype(np.int64)
    step = max(1, 65_536 // grid.shape[0])
    for start in range(0, points.shape[0], step):
        sl = slice(start, start + step)
        j = lo[sl, None, :] + grid[None, :, :]
        valid = np.all(j <= hi[sl, None, :], axis=2)
        z = points[sl, None, :] + j @ lattice.matrix
        inside = shape.contains(z.reshape(-1, 3)).reshape(valid.shape)
        counts[sl] = (inside & valid).sum(axis=1)
    return counts


def tiling_volume_identity(
    shape,
    tiling: TilingSpec,
    n_g: int,
    n_mc: int,
    seed: int,
    lattice: Optional[LatticeSpec] = None,
    threads: Optional[int] = None,
) -> TilingIdentityReport:
    """Check |D| = |W| E_g Σ_j |D ∩ (gℓΔ + j)| / |ℓΔ| by double Monte Carlo.

    For every group sample g = (R, τ), ``n_mc`` points y uniform in ℓΔ give
    the inner estimate mean N_D(R y + τ); the outer mean runs over g.
    """
    if n_g < MIN_GROUP_SAMPLES:
        raise GeometryError(f"at least {MIN_GROUP_SAMPLES} group samples are required", n_g=n_g)
    if n_mc < 1:
        raise GeometryError("n_mc must be >= 1", n_mc=n_mc)
    lattice = lattice or LatticeSpec()
    rotations, translations = sample_group_elements(n_g, tiling.scale, "cell-translation",
                                                     seed, lattice)

    def _chunk(index: int) -> np.ndarray:
        gen = rng.generator(seed, "tiling-points", index)
        sl = slice(index * GROUP_CHUNK, min(n_g, (index + 1) * GROUP_CHUNK))
        rot, tau = rotations[sl], translations[sl]
        y = uniform_in_simplex(gen, tiling.simplex, tiling.scale, rot.shape[0] * n_mc)
        y = y.reshape(rot.shape[0], n_mc, 3)
        z = np.einsum("gij,gnj->gni", rot, y) + tau[:, None, :]
        counts = translate_counts(shape, z.reshape(-1, 3), lattice)
        return counts.reshape(rot.shape[0], n_mc).mean(axis=1)

    chunks = range((n_g + GROUP_CHUNK - 1) // GROUP_CHUNK)
    per_g = np.concatenate(run_ordered(_chunk, list(chunks), resolve_threads(threads)))
    w = lattice.cell_volume
    rhs = float(w * per_g.mean())
    rhs_stderr = float(w * per_g.std(ddof=1) / np.sqrt(n_g))
    lhs = float(shape.volume)
    if lhs > 0:
        rel = abs(rhs - lhs) / lhs
    else:
        rel = 0.0 if rhs == 0 else float("inf")
    report = TilingIdentityReport(
        lhs=lhs,
        rhs=rhs,
        rhs_stderr=rhs_stderr,
        rel_error=float(rel),
        group_samples=int(n_g),
        points_per_sample=int(n_mc),
        scale=tiling.scale,
        seed=int(seed),
    )
    logger.info("tiling_identity", shape=shape.kind, lhs=lhs, rhs=rhs, rel_error=report.rel_error)
    return report


# ---------------------------------------------------------------------------
# Inner and boundary cells
# ---------------------------------------------------------------------------

def inclusion_radius(tiling: TilingSpec, lattice: LatticeSpec) -> float:
    """Radius of a ball around j containing RℓΔ + τ + j for all R and τ ∈ W."""
    return tiling.scaled_circumradius + lattice.cell_circumradius


def classify_cells(
    shape,
    tiling: TilingSpec,
    seed: int = 0,
    lattice: Optional[LatticeSpec] = None,
    audit_poses: int = 32,
) -> CellClassification:
    """Count inner sites (ball of the inclusion radius inside D) and boundary sites.

    Boundary sites are those whose ball meets ∂D. For convex shapes the
    inner sites closest to the boundary are audited: the vertices of
    sampled poses RℓΔ + τ + j must lie in D.
    """
    shape.require_exact_exterior("classify_cells")
    lattice = lattice or LatticeSpec()
    r = inclusion_radius(tiling, lattice)
    sites = lattice.sites_near_box(shape.bbox(), r)
    sd = shape_signed_distance(shape, sites, np.zeros((sites.shape[0], 3)), lattice)
    inner = sd <= -r
    boundary = np.abs(sd) < r

    violations = 0
    poses = 0
    if audit_poses and isinstance(shape, (Cuboid, Ball, Simplex)) and inner.any():
        inner_idx = np.nonzero(inner)[0]
        shallow = inner_idx[np.argsort(sd[inner_idx])[::-1][:AUDIT_SITES]]
        rot, tau = sample_group_elements(audit_poses, tiling.scale, "cell-translation",
                                         seed, lattice)
        verts = np.einsum("gij,vj->gvi", rot, tiling.scaled_vertices) + tau[:, None, :]
        centres = lattice.positions(sites[shallow])
        pts = centres[:, None, None, :] + verts[None]
        ok = shape.contains(pts.reshape(-1, 3)).reshape(pts.shape[:-1]).all(axis=2)
        violations = int((~ok).sum())
        poses = int(ok.size)

    volume = float(shape.volume)
    n_inner = int(inner.sum())
    result = CellClassification(
        inner=n_inner,
        boundary=int(boundary.sum()),
        inner_fraction=n_inner * lattice.cell_volume / volume,
        radius=r,
        domain_volume=volume,
        cell_volume=lattice.cell_volume,
        audit_poses=poses,
        audit_violations=violations,
    )
    if violations:
        logger.warning("classify_cells_audit_failed", shape=shape.kind, violations=violations)
    logger.info("cells_classified", shape=shape.kind, inner=result.inner,
                boundary=result.boundary, fraction=result.inner_fraction)
    return result


def boundary_scaling(
    shapes: Sequence,
    tiling: TilingSpec,
    seed: int = 0,
    lattice: Optional[LatticeSpec] = None,
) -> Tuple[List[CellClassification], float, float]:
    """Classify growing domains; return (classifications, #∂G slope, #G slope) in log |D|."""
    if len(shapes) < 2:
        raise GeometryError("a scaling fit needs at least two domains")
    results = [classify_cells(s, tiling, seed, lattice) for s in shapes]
    log_v = np.log([c.domain_volume for c in results])
    boundary = stats.linregress(log_v, np.log([max(c.boundary, 1) for c in results]))
    inner = stats.linregress(log_v, np.log([max(c.inner, 1) for c in results]))
    return results, float(boundary.slope), float(inner.slope)
