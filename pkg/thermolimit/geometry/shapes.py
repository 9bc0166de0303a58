"""Bounded open domains with closed-form distances.

Every shape is a frozen pydantic model (so it can appear in experiment
specs) placed in space by a rigid transform. Shapes are described in
local coordinates; ``transform`` maps local points to the world.

Signed distance is negative inside. Inside distances are exact for every
variant; ``Intersection`` only has a lower bound outside, and operations
that need exact exterior distances reject it.

Key classes:
    RigidTransform, Cube, Cuboid, Ball, Simplex, CellUnion, Intersection

Key functions:
    regular_tetrahedron: Vertices of the reference simplex.
    closest_point_on_triangle: Vectorized point/triangle projection.
"""

import itertools
from typing import Annotated, ClassVar, List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..exceptions import GeometryError, UnsupportedShapeError
from ..nuclei.models import Box, LatticeSpec

Vec3 = Tuple[float, float, float]
Mat3 = Tuple[Vec3, Vec3, Vec3]

ROTATION_TOLERANCE = 1e-12
_IDENTITY: Mat3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))

# Points per chunk for distance evaluations against many boxes
_CHUNK = 4096


def _norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(v * v, axis=-1))


def check_rotation(matrix) -> np.ndarray:
    """Return ``matrix`` as an array after checking R Rᵀ = I and det R = +1."""
    m = np.asarray(matrix, dtype=float)
    if m.shape != (3, 3):
        raise GeometryError("rotation must be a 3x3 matrix", shape=m.shape)
    residual = float(np.abs(m @ m.T - np.eye(3)).max())
    if residual > ROTATION_TOLERANCE or np.linalg.det(m) <= 0:
        raise GeometryError("rotation is not orthonormal with determinant +1", residual=residual)
    return m


class RigidTransform(BaseModel):
    """x_world = R · x_local + t."""

    model_config = ConfigDict(frozen=True)

    rotation: Mat3 = _IDENTITY
    translation: Vec3 = (0.0, 0.0, 0.0)

    @field_validator("rotation")
    @classmethod
    def _orthonormal(cls, value):
        try:
            check_rotation(value)
        except GeometryError as e:
            raise ValueError(e.message) from e
        return value

    @classmethod
    def from_arrays(cls, rotation: np.ndarray, translation) -> "RigidTransform":
        return cls(
            rotation=tuple(tuple(float(v) for v in row) for row in np.asarray(rotation)),
            translation=tuple(float(v) for v in np.asarray(translation).reshape(3)),
        )

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.rotation, dtype=float)

    @property
    def offset(self) -> np.ndarray:
        return np.asarray(self.translation, dtype=float)

    @property
    def is_identity_rotation(self) -> bool:
        return self.rotation == _IDENTITY

    def to_world(self, local: np.ndarray) -> np.ndarray:
        local = np.asarray(local, dtype=float)
        if self.is_identity_rotation:
            return local + self.offset
        return local @ self.matrix.T + self.offset

    def to_local(self, points: np.ndarray) -> np.ndarray:
        rel = np.asarray(points, dtype=float) - self.offset
        return rel if self.is_identity_rotation else rel @ self.matrix

    def translated(self, vector) -> "RigidTransform":
        return RigidTransform(
            rotation=self.rotation,
            translation=tuple(float(v) for v in self.offset + np.asarray(vector, dtype=float)),
        )


def closest_point_on_triangle(p: np.ndarray, a, b, c) -> np.ndarray:
    """Closest point of triangle abc to each row of ``p`` (Voronoi-region walk)."""
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    ab, ac = b - a, c - a
    ap, bp, cp = p - a, p - b, p - c
    d1, d2 = ap @ ab, ap @ ac
    d3, d4 = bp @ ab, bp @ ac
    d5, d6 = cp @ ab, cp @ ac
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        out = a + ab * (vb / denom)[:, None] + ac * (vc / denom)[:, None]
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        out = np.where(((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0))[:, None],
                       b + (c - b) * w_bc[:, None], out)
        w_ac = d2 / (d2 - d6)
        out = np.where(((vb <= 0) & (d2 >= 0) & (d6 <= 0))[:, None], a + ac * w_ac[:, None], out)
        out = np.where(((d6 >= 0) & (d5 <= d6))[:, None], c, out)
        v_ab = d1 / (d1 - d3)
        out = np.where(((vc <= 0) & (d1 >= 0) & (d3 <= 0))[:, None], a + ab * v_ab[:, None], out)
        out = np.where(((d3 >= 0) & (d4 <= d3))[:, None], b, out)
        out = np.where(((d1 <= 0) & (d2 <= 0))[:, None], a, out)
    return out


def regular_tetrahedron(circumradius: float = 1.0) -> np.ndarray:
    """Regular tetrahedron centered at the origin, vertices on a sphere."""
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    return v * (circumradius / np.sqrt(3.0))


# ---------------------------------------------------------------------------
# Shape variants
# ---------------------------------------------------------------------------

class _Shape(BaseModel):
    model_config = ConfigDict(frozen=True)

    transform: RigidTransform = Field(default_factory=RigidTransform)

    # subclasses: _local_sdf, _local_corners, volume
    exact_exterior: ClassVar[bool] = True

    def local_points(self, points) -> np.ndarray:
        return self.transform.to_local(np.asarray(points, dtype=float).reshape(-1, 3))

    def local_from_sites(self, sites: np.ndarray, displacements: np.ndarray,
                         lattice: LatticeSpec) -> np.ndarray:
        """Local coordinates of j·B + r, anchored at the lattice cell of the translation.

        Integer parts cancel first, so translating nuclei and shape by the
        same lattice vector leaves the result unchanged.
        """
        anchor = lattice.cell_of(self.transform.offset)[0]
        rest = self.transform.offset - lattice.positions(anchor)[0]
        rel = lattice.positions(np.asarray(sites) - anchor) + (displacements - rest)
        return rel if self.transform.is_identity_rotation else rel @ self.transform.matrix

    def _local_sdf(self, local: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _local_corners(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def volume(self) -> float:
        raise NotImplementedError

    def signed_distance(self, points) -> np.ndarray:
        """Negative inside, positive outside."""
        return self._local_sdf(self.local_points(points))

    def signed_distance_local(self, local: np.ndarray) -> np.ndarray:
        return self._local_sdf(np.asarray(local, dtype=float).reshape(-1, 3))

    def boundary_distance(self, points) -> np.ndarray:
        """d(x, ∂D)."""
        return np.abs(self.signed_distance(points))

    def contains(self, points) -> np.ndarray:
        """Membership in the open set."""
        return self.signed_distance(points) < 0

    def bbox(self) -> Box:
        world = self.transform.to_world(self._local_corners())
        return Box(lo=tuple(world.min(axis=0)), hi=tuple(world.max(axis=0)))

    def nearest_eroded_point(self, points, depth: float) -> np.ndarray:
        """Nearest point of {x ∈ D : d(x, ∂D) ≥ depth}."""
        raise UnsupportedShapeError(
            "no closed-form eroded domain for this shape", shape=getattr(self, "kind", None)
        )

    def translated(self, vector):
        return self.model_copy(update={"transform": self.transform.translated(vector)})

    def require_exact_exterior(self, operation: str) -> None:
        if not self.exact_exterior:
            raise UnsupportedShapeError(
                f"{operation} needs exact exterior distances", shape=self.kind
            )


def _box_sdf(local: np.ndarray, sides: np.ndarray) -> np.ndarray:
    q = np.maximum(-local, local - sides)
    outside = _norm(np.clip(q, 0.0, None))
    inside = np.minimum(q.max(axis=-1), 0.0)
    return outside + inside


class Cuboid(_Shape):
    """Box (0, a) × (0, b) × (0, c) in local coordinates."""

    kind: Literal["cuboid"] = "cuboid"
    sides: Vec3

    @field_validator("sides")
    @classmethod
    def _positive(cls, value):
        if min(value) <= 0:
            raise ValueError("cuboid sides must be > 0")
        return value

    @property
    def side_array(self) -> np.ndarray:
        return np.asarray(self.sides, dtype=float)

    @property
    def volume(self) -> float:
        return float(np.prod(self.side_array))

    def _local_sdf(self, local):
        return _box_sdf(local, self.side_array)

    def _local_corners(self):
        return np.array(list(itertools.product(*[(0.0, s) for s in self.sides])))

    def nearest_eroded_point(self, points, depth):
        s = self.side_array
        if np.any(s < 2 * depth):
            raise GeometryError("eroded box is empty", depth=depth)
        local = self.local_points(points)
        return self.transform.to_world(np.clip(local, depth, s - depth))


class Cube(Cuboid):
    """Cube (0, L)³ in local coordinates."""

    kind: Literal["cube"] = "cube"
    sides: Vec3 = (1.0, 1.0, 1.0)
    side: float = Field(..., gt=0)

    @model_validator(mode="before")
    @classmethod
    def _sides_from_side(cls, data):
        if isinstance(data, dict) and "side" in data:
            data = dict(data)
            data["sides"] = (float(data["side"]),) * 3
        return data


class Ball(_Shape):
    """Open ball of radius R centered at the local origin."""

    kind: Literal["ball"] = "ball"
    radius: float = Field(..., gt=0)

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * np.pi * self.radius ** 3

    def _local_sdf(self, local):
        return _norm(local) - self.radius

    def _local_corners(self):
        r = self.radius
        return np.array(list(itertools.product((-r, r), repeat=3)))

    def bbox(self) -> Box:
        c = self.transform.offset
        return Box(lo=tuple(c - self.radius), hi=tuple(c + self.radius))

    def nearest_eroded_point(self, points, depth):
        keep = self.radius - depth
        if keep < 0:
            raise GeometryError("eroded ball is empty", depth=depth)
        local = self.local_points(points)
        norm = _norm(local)
        scale = np.where(norm > keep, keep / np.where(norm > 0, norm, 1.0), 1.0)
        return self.transform.to_world(local * scale[:, None])


class Simplex(_Shape):
    """Open tetrahedron with the given local vertices."""

    kind: Literal["simplex"] = "simplex"
    vertices: Tuple[Vec3, Vec3, Vec3, Vec3]

    @model_validator(mode="after")
    def _nondegenerate(self) -> "Simplex":
        if self.volume <= 1e-12:
            raise ValueError("simplex is degenerate")
        return self

    @classmethod
    def regular(cls, circumradius: float = 1.0, **kwargs) -> "Simplex":
        v = regular_tetrahedron(circumradius)
        return cls(vertices=tuple(tuple(float(x) for x in row) for row in v), **kwargs)

    @property
    def vertex_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @property
    def volume(self) -> float:
        v = self.vertex_array
        return abs(float(np.linalg.det(v[1:] - v[0]))) / 6.0

    @property
    def circumradius(self) -> float:
        v = self.vertex_array
        a = 2.0 * (v[1:] - v[0])
        b = np.sum(v[1:] ** 2 - v[0] ** 2, axis=1)
        centre = np.linalg.solve(a, b)
        return float(_norm(v - centre).max())

    def _faces(self):
        """Outward unit normals, plane offsets and face areas (face i omits vertex i)."""
        v = self.vertex_array
        normals, offsets, areas = [], [], []
        for i in range(4):
            a, b, c = (v[k] for k in range(4) if k != i)
            n = np.cross(b - a, c - a)
            area = 0.5 * float(_norm(n))
            n = n / (2.0 * area)
            if np.dot(n, v[i] - a) > 0:
                n = -n
            normals.append(n)
            offsets.append(float(np.dot(n, a)))
            areas.append(area)
        return np.array(normals), np.array(offsets), np.array(areas)

    @property
    def inradius(self) -> float:
        _, _, areas = self._faces()
        return 3.0 * self.volume / float(areas.sum())

    @property
    def incenter(self) -> np.ndarray:
        _, _, areas = self._faces()
        return (areas[:, None] * self.vertex_array).sum(axis=0) / areas.sum()

    def plane_distances(self, local: np.ndarray) -> np.ndarray:
        normals, offsets, _ = self._faces()
        return local @ normals.T - offsets

    def barycentric_inside(self, local: np.ndarray) -> np.ndarray:
        """Strict point-in-simplex test by barycentric coordinates."""
        v = self.vertex_array
        lam = np.linalg.solve((v[1:] - v[0]).T, (local - v[0]).T).T
        return np.all(lam > 0, axis=1) & (lam.sum(axis=1) < 1)

    def _triangle_distance(self, local: np.ndarray, vertices: np.ndarray) -> np.ndarray:
        best = np.full(local.shape[0], np.inf)
        for i in range(4):
            a, b, c = (vertices[k] for k in range(4) if k != i)
            best = np.minimum(best, _norm(local - closest_point_on_triangle(local, a, b, c)))
        return best

    def _local_sdf(self, local):
        planes = self.plane_distances(local)
        inside = planes.max(axis=1)
        out = inside.copy()
        outside = inside >= 0
        if np.any(outside):
            out[outside] = self._triangle_distance(local[outside], self.vertex_array)
        return out

    def _local_corners(self):
        return self.vertex_array

    def nearest_eroded_point(self, points, depth):
        r = self.inradius
        if depth > r:
            raise GeometryError("eroded simplex is empty", depth=depth)
        centre = self.incenter
        shrunk = centre + (self.vertex_array - centre) * ((r - depth) / r)
        local = self.local_points(points)
        out = local.copy()
        inner = Simplex(vertices=tuple(tuple(float(x) for x in row) for row in shrunk))
        outside = inner._local_sdf(local) > 0
        if np.any(outside):
            pts = local[outside]
            best = np.full(pts.shape[0], np.inf)
            nearest = pts.copy()
            for i in range(4):
                a, b, c = (shrunk[k] for k in range(4) if k != i)
                cand = closest_point_on_triangle(pts, a, b, c)
                d = _norm(pts - cand)
                better = d < best
                best[better] = d[better]
                nearest[better] = cand[better]
            out[outside] = nearest
        return self.transform.to_world(out)


class CellUnion(_Shape):
    """Interior of a union of lattice cells W + j (diagonal lattices)."""

    kind: Literal["cell_union"] = "cell_union"
    cells: List[Tuple[int, int, int]] = Field(..., min_length=1)
    lattice: LatticeSpec = Field(default_factory=LatticeSpec)

    @model_validator(mode="after")
    def _diagonal(self) -> "CellUnion":
        if not self.lattice.is_diagonal:
            raise ValueError("cell unions are supported on diagonal lattices only")
        if not self.transform.is_identity_rotation or any(self.transform.translation):
            raise ValueError("cell unions are placed by their cells, not by a transform")
        return self

    @property
    def cell_array(self) -> np.ndarray:
        return np.unique(np.asarray(self.cells, dtype=np.int64).reshape(-1, 3), axis=0)

    @property
    def spacing(self) -> np.ndarray:
        return np.diag(self.lattice.matrix).copy()

    @property
    def volume(self) -> float:
        return self.cell_array.shape[0] * self.lattice.cell_volume

    def _box_distances(self, local: np.ndarray, cells: np.ndarray) -> np.ndarray:
        """min over cells of the distance to the closed cell box."""
        h = self.spacing
        lo = (cells - 0.5) * h
        hi = (cells + 0.5) * h
        best = np.full(local.shape[0], np.inf)
        for start in range(0, cells.shape[0], 256):
            l, u = lo[start:start + 256], hi[start:start + 256]
            gap = np.maximum(l[None] - local[:, None], local[:, None] - u[None])
            best = np.minimum(best, _norm(np.clip(gap, 0.0, None)).min(axis=1))
        return best

    def _local_sdf(self, local):
        members = self.cell_array
        member_set = {tuple(c) for c in members.tolist()}
        lo, hi = members.min(axis=0) - 1, members.max(axis=0) + 1
        grid = np.array(list(itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi)))))
        holes = np.array([g for g in grid.tolist() if tuple(g) not in member_set]).reshape(-1, 3)

        out = np.empty(local.shape[0])
        for start in range(0, local.shape[0], _CHUNK):
            chunk = local[start:start + _CHUNK]
            outside = self._box_distances(chunk, members)
            # the ring around the bounding box holds the nearest non-member cell
            depth = self._box_distances(chunk, holes)
            out[start:start + _CHUNK] = np.where(outside > 0, outside, -depth)
        return out

    def _local_corners(self):
        h = self.spacing
        members = self.cell_array
        return np.array([(members.min(axis=0) - 0.5) * h, (members.max(axis=0) + 0.5) * h])

    def translated(self, vector):
        k = self.lattice.lattice_coordinates(vector)
        return self.model_copy(update={"cells": [tuple(int(v) for v in c + k)
                                                 for c in self.cell_array]})

    def nearest_eroded_point(self, points, depth):
        if self.cell_array.shape[0] == 1:
            h = self.spacing
            cube = Cuboid(sides=tuple(h), transform=RigidTransform(
                translation=tuple((self.cell_array[0] - 0.5) * h)))
            return cube.nearest_eroded_point(points, depth)
        return super().nearest_eroded_point(points, depth)


class Intersection(_Shape):
    """first ∩ second; inside distances exact, outside a lower bound."""

    kind: Literal["intersection"] = "intersection"
    first: "DomainShape"
    second: "DomainShape"

    exact_exterior: ClassVar[bool] = False

    def signed_distance(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.maximum(self.first.signed_distance(pts), self.second.signed_distance(pts))

    def local_from_sites(self, sites, displacements, lattice):
        raise UnsupportedShapeError("intersections have no local frame", shape=self.kind)

    def signed_distance_sites(self, sites, displacements, lattice) -> np.ndarray:
        return np.maximum(
            shape_signed_distance(self.first, sites, displacements, lattice),
            shape_signed_distance(self.second, sites, displacements, lattice),
        )

    def bbox(self) -> Box:
        a, b = self.first.bbox(), self.second.bbox()
        lo = np.maximum(a.lo_array, b.lo_array)
        hi = np.maximum(np.minimum(a.hi_array, b.hi_array), lo)
        return Box(lo=tuple(lo), hi=tuple(hi))

    @property
    def volume(self) -> float:
        """Midpoint-grid estimate on the common bounding box."""
        box = self.bbox()
        if box.is_degenerate:
            return 0.0
        n = 64
        h = (box.hi_array - box.lo_array) / n
        axes = [box.lo[d] + h[d] * (np.arange(n) + 0.5) for d in range(3)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        return float(self.contains(pts).mean() * box.volume)

    def translated(self, vector):
        return self.model_copy(update={
            "first": self.first.translated(vector),
            "second": self.second.translated(vector),
        })


DomainShape = Annotated[
    Union[Cube, Cuboid, Ball, Simplex, CellUnion, Intersection],
    Field(discriminator="kind"),
]

Intersection.model_rebuild()


def shape_signed_distance(shape, sites: np.ndarray, displacements: np.ndarray,
                          lattice: LatticeSpec) -> np.ndarray:
    """Signed distance of nuclei given as site labels plus displacements.

    Exactly invariant under translating nuclei and shape by a lattice
    vector (for translations representable without rounding).
    """
    if isinstance(shape, Intersection):
        return shape.signed_distance_sites(sites, displacements, lattice)
    if isinstance(shape, CellUnion):
        return shape.signed_distance(lattice.positions(sites) + displacements)
    return shape.signed_distance_local(shape.local_from_sites(sites, displacements, lattice))


def aligned_cube(side: float) -> Cube:
    """Cube made of whole unit cells: (-1/2, side - 1/2)³."""
    return Cube(side=side, transform=RigidTransform(translation=(-0.5, -0.5, -0.5)))
