"""Domain models for random nuclear configurations.

Law and lattice specifications are pydantic models (they are echoed into
experiment specs and run manifests); sampled configurations are plain
dataclasses holding numpy arrays.

Lattice and geometry:
    Box, LatticeSpec

Displacement laws ν (discriminated by ``kind``):
    PointMass, GaussianIsotropic, UniformBall, CompactInCell, Mixture

Charge laws:
    ConstantCharge, UniformIntervalCharge, VacancyCharge

Model and configuration:
    ModelSpec, ConfigurationDescriptor, NuclearConfiguration
"""

import itertools
from dataclasses import dataclass, field
from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..exceptions import LatticeError

Vec3 = Tuple[float, float, float]

# Tolerance for "is this vector an integer combination of the basis"
LATTICE_TOLERANCE = 1e-9


# ---------------------------------------------------------------------------
# Boxes and lattices
# ---------------------------------------------------------------------------

class Box(BaseModel):
    """Axis-aligned half-open box [lo, hi)."""

    model_config = ConfigDict(frozen=True)

    lo: Vec3 = Field(..., description="Lower corner (inclusive)")
    hi: Vec3 = Field(..., description="Upper corner (exclusive)")

    @model_validator(mode="after")
    def _ordered(self) -> "Box":
        if any(h < lo for lo, h in zip(self.lo, self.hi)):
            raise ValueError(f"box upper corner {self.hi} below lower corner {self.lo}")
        return self

    @classmethod
    def cube(cls, lo: float, hi: float) -> "Box":
        return cls(lo=(lo, lo, lo), hi=(hi, hi, hi))

    @property
    def lo_array(self) -> np.ndarray:
        return np.asarray(self.lo, dtype=float)

    @property
    def hi_array(self) -> np.ndarray:
        return np.asarray(self.hi, dtype=float)

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi_array - self.lo_array))

    @property
    def is_degenerate(self) -> bool:
        """True when some side has zero length."""
        return bool(np.any(self.hi_array <= self.lo_array))

    def expand(self, margin: float) -> "Box":
        lo = tuple(float(v) for v in self.lo_array - margin)
        hi = tuple(float(v) for v in self.hi_array + margin)
        return Box(lo=lo, hi=hi)

    def translate(self, vector) -> "Box":
        v = np.asarray(vector, dtype=float)
        return Box(
            lo=tuple(float(x) for x in self.lo_array + v),
            hi=tuple(float(x) for x in self.hi_array + v),
        )

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Half-open membership test for an (n, 3) array."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.all((points >= self.lo_array) & (points < self.hi_array), axis=1)

    def distance_to_boundary(self, points: np.ndarray) -> np.ndarray:
        """Distance from points inside the box to its boundary (0 outside)."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        gaps = np.minimum(points - self.lo_array, self.hi_array - points)
        return np.clip(gaps.min(axis=1), 0.0, None)


class LatticeSpec(BaseModel):
    """Lattice L = B·Z³ with fundamental cell W = B·[-1/2, 1/2)³.

    ``basis`` rows are the three primitive vectors. Site j (integer
    coordinates) sits at ``j @ basis``; cell j is the site plus W.
    """

    model_config = ConfigDict(frozen=True)

    basis: Tuple[Vec3, Vec3, Vec3] = Field(
        default=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
        description="Primitive vectors as rows (length units)",
    )

    @field_validator("basis")
    @classmethod
    def _spans_space(cls, value):
        det = float(np.linalg.det(np.asarray(value, dtype=float)))
        if not np.isfinite(det) or abs(det) < 1e-12:
            raise ValueError("basis vectors must be linearly independent")
        return value

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.basis, dtype=float)

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    @property
    def cell_volume(self) -> float:
        """|W|."""
        return abs(float(np.linalg.det(self.matrix)))

    @property
    def cell_diameter(self) -> float:
        """diam(W): the longest body diagonal of the parallelepiped."""
        signs = np.array([[1, s1, s2] for s1 in (-1, 1) for s2 in (-1, 1)], dtype=float)
        return float(np.linalg.norm(signs @ self.matrix, axis=1).max())

    @property
    def cell_circumradius(self) -> float:
        """Largest distance from a site to a point of its cell."""
        return 0.5 * self.cell_diameter

    @property
    def face_spacing(self) -> float:
        """Smallest distance between opposite faces of W.

        A point and any point two or more cells away along some lattice
        direction are at least this far apart per intermediate cell.
        """
        return float(1.0 / np.linalg.norm(self.inverse, axis=0).max())

    @property
    def shortest_vector(self) -> float:
        """Length of the shortest nonzero j·B with j ∈ {-1, 0, 1}³."""
        j = np.array([v for v in itertools.product((-1, 0, 1), repeat=3) if any(v)], dtype=float)
        return float(np.linalg.norm(j @ self.matrix, axis=1).min())

    @property
    def is_diagonal(self) -> bool:
        m = self.matrix
        return bool(np.all(m == np.diag(np.diag(m))) and np.all(np.diag(m) > 0))

    def positions(self, sites: np.ndarray) -> np.ndarray:
        """Cartesian positions of integer sites (n, 3)."""
        return np.asarray(sites, dtype=float).reshape(-1, 3) @ self.matrix

    def fractional(self, points: np.ndarray) -> np.ndarray:
        """Lattice coordinates of Cartesian points."""
        return np.asarray(points, dtype=float).reshape(-1, 3) @ self.inverse

    def cell_of(self, points: np.ndarray) -> np.ndarray:
        """Index of the half-open cell containing each point."""
        return np.floor(self.fractional(points) + 0.5).astype(np.int64)

    def lattice_coordinates(self, vector) -> np.ndarray:
        """Integer coordinates of a lattice vector.

        Raises:
            LatticeError: if ``vector`` is not in the lattice.
        """
        frac = self.fractional(np.asarray(vector, dtype=float))[0]
        rounded = np.rint(frac)
        if not np.all(np.abs(frac - rounded) <= LATTICE_TOLERANCE):
            raise LatticeError(
                "vector is not a lattice vector", vector=tuple(float(v) for v in vector)
            )
        return rounded.astype(np.int64)

    def sites_near_box(self, box: Box, reach: float) -> np.ndarray:
        """Sites j whose ball B(j, reach) meets the closed box, lexicographic.

        Returns an (n, 3) int64 array.
        """
        lo = box.lo_array - reach
        hi = box.hi_array + reach
        corners = np.array(list(itertools.product(*zip(lo, hi))), dtype=float)
        frac = self.fractional(corners)
        start = np.floor(frac.min(axis=0)).astype(np.int64) - 1
        stop = np.ceil(frac.max(axis=0)).astype(np.int64) + 1
        grids = np.meshgrid(*(np.arange(a, b + 1) for a, b in zip(start, stop)), indexing="ij")
        sites = np.stack([g.ravel() for g in grids], axis=1)
        pos = self.positions(sites)
        nearest = np.clip(pos, box.lo_array, box.hi_array)
        keep = np.linalg.norm(pos - nearest, axis=1) <= reach
        return sites[keep]

    def sites_in_box(self, box: Box) -> np.ndarray:
        """Sites whose position lies in the half-open box, lexicographic."""
        sites = self.sites_near_box(box, 0.0)
        return sites[box.contains(self.positions(sites))]


# ---------------------------------------------------------------------------
# Displacement laws
# ---------------------------------------------------------------------------

class PointMass(BaseModel):
    """ν = δ₀: the unperturbed lattice."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["point_mass"] = "point_mass"

    @property
    def is_bounded(self) -> bool:
        return True

    def support_radius(self, lattice: LatticeSpec) -> float:
        return 0.0


class GaussianIsotropic(BaseModel):
    """Independent harmonic vibrations: r ~ N(0, σ² I), cut at ``tail_sigmas``·σ."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["gaussian"] = "gaussian"
    sigma: float = Field(..., gt=0, description="Per-coordinate standard deviation (length)")
    tail_sigmas: Optional[float] = Field(
        default=None, gt=0, description="Cutoff in units of sigma (default from settings)"
    )

    @property
    def is_bounded(self) -> bool:
        return False

    @property
    def cutoff_sigmas(self) -> float:
        if self.tail_sigmas is not None:
            return self.tail_sigmas
        from ..config import get_config

        return get_config().tail_sigmas

    def support_radius(self, lattice: LatticeSpec) -> float:
        return self.cutoff_sigmas * self.sigma


class UniformBall(BaseModel):
    """r uniform in the ball of radius ρ."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["uniform_ball"] = "uniform_ball"
    radius: float = Field(..., gt=0, description="Ball radius ρ (length)")

    @property
    def is_bounded(self) -> bool:
        return True

    def support_radius(self, lattice: LatticeSpec) -> float:
        return self.radius


class CompactInCell(BaseModel):
    """r uniform on a sub-box of W, given in lattice coordinates."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["compact_in_cell"] = "compact_in_cell"
    lo: Vec3 = Field(default=(-0.25, -0.25, -0.25), description="Sub-box lower corner")
    hi: Vec3 = Field(default=(0.25, 0.25, 0.25), description="Sub-box upper corner")

    @model_validator(mode="after")
    def _inside_cell(self) -> "CompactInCell":
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        if np.any(lo < -0.5) or np.any(hi > 0.5) or np.any(hi <= lo):
            raise ValueError("sub-box must be nonempty and lie inside [-1/2, 1/2)^3")
        return self

    @property
    def is_bounded(self) -> bool:
        return True

    def support_radius(self, lattice: LatticeSpec) -> float:
        corners = np.array(list(itertools.product(*zip(self.lo, self.hi))), dtype=float)
        return float(np.linalg.norm(corners @ lattice.matrix, axis=1).max())

    def gap(self, lattice: LatticeSpec) -> float:
        """Guaranteed distance between nuclei of distinct sites (cubic lattice).

        For a diagonal basis the sub-boxes of neighboring sites are
        separated by ``a_d·(1 - (hi_d - lo_d))`` along axis d.
        """
        if not lattice.is_diagonal:
            raise LatticeError("gap is only computed for diagonal lattices")
        side = np.diag(lattice.matrix)
        width = np.asarray(self.hi) - np.asarray(self.lo)
        return float(np.min(side * (1.0 - width)))


class MixtureComponent(BaseModel):
    """One weighted component of a Mixture law."""

    model_config = ConfigDict(frozen=True)

    weight: float = Field(..., gt=0, le=1)
    law: "DisplacementLaw"


class Mixture(BaseModel):
    """ν = Σ w_k ν_k."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["mixture"] = "mixture"
    components: List[MixtureComponent] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _weights_sum_to_one(self) -> "Mixture":
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {total}, expected 1")
        return self

    @property
    def is_bounded(self) -> bool:
        return all(c.law.is_bounded for c in self.components)

    def support_radius(self, lattice: LatticeSpec) -> float:
        return max(c.law.support_radius(lattice) for c in self.components)


DisplacementLaw = Annotated[
    Union[PointMass, GaussianIsotropic, UniformBall, CompactInCell, Mixture],
    Field(discriminator="kind"),
]

MixtureComponent.model_rebuild()
Mixture.model_rebuild()


# ---------------------------------------------------------------------------
# Charge laws
# ---------------------------------------------------------------------------

class ConstantCharge(BaseModel):
    """Every nucleus carries charge Z."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["constant"] = "constant"
    z: float = Field(..., gt=0)

    @property
    def z_min(self) -> float:
        return self.z

    @property
    def z_max(self) -> float:
        return self.z

    @property
    def mean(self) -> float:
        """E z, vacancies counted as 0."""
        return self.z

    @property
    def occupation(self) -> float:
        """P(z ≠ 0)."""
        return 1.0


class UniformIntervalCharge(BaseModel):
    """z uniform on [Z_min, Z_max]."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["uniform_interval"] = "uniform_interval"
    z_min: float = Field(..., gt=0)
    z_max: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "UniformIntervalCharge":
        if self.z_max < self.z_min:
            raise ValueError("z_max must be >= z_min")
        return self

    @property
    def mean(self) -> float:
        return 0.5 * (self.z_min + self.z_max)

    @property
    def occupation(self) -> float:
        return 1.0


class VacancyCharge(BaseModel):
    """z = 0 (site left empty) with probability p_vac, else Z."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["vacancy"] = "vacancy"
    p_vac: float = Field(..., ge=0, lt=1)
    z: float = Field(..., gt=0)

    @property
    def z_min(self) -> float:
        return self.z

    @property
    def z_max(self) -> float:
        return self.z

    @property
    def mean(self) -> float:
        return (1.0 - self.p_vac) * self.z

    @property
    def occupation(self) -> float:
        return 1.0 - self.p_vac


ChargeLaw = Annotated[
    Union[ConstantCharge, UniformIntervalCharge, VacancyCharge],
    Field(discriminator="kind"),
]


# ---------------------------------------------------------------------------
# Model specification
# ---------------------------------------------------------------------------

class ModelSpec(BaseModel):
    """A stationary nuclear model: i.i.d. perturbed lattice or Poisson field."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["lattice", "poisson"] = "lattice"
    lattice: LatticeSpec = Field(default_factory=LatticeSpec)
    displacement: DisplacementLaw = Field(default_factory=PointMass)
    charge: ChargeLaw = Field(default_factory=lambda: ConstantCharge(z=1.0))
    intensity: Optional[float] = Field(
        default=None, gt=0, description="Poisson intensity (nuclei per unit volume)"
    )

    @model_validator(mode="after")
    def _poisson_needs_intensity(self) -> "ModelSpec":
        if self.kind == "poisson" and self.intensity is None:
            raise ValueError("poisson models need an intensity")
        return self

    @property
    def tail_cutoff(self) -> float:
        """Largest displacement a nucleus can have (0 for Poisson fields)."""
        if self.kind == "poisson":
            return 0.0
        return self.displacement.support_radius(self.lattice)

    @property
    def nuclei_per_cell(self) -> float:
        """E(X₀)."""
        if self.kind == "poisson":
            return float(self.intensity) * self.lattice.cell_volume * self.charge.occupation
        return self.charge.occupation

    @property
    def charge_per_volume(self) -> float:
        """Z_av: expected nuclear charge per unit volume."""
        if self.kind == "poisson":
            return float(self.intensity) * self.charge.mean
        return self.charge.mean / self.lattice.cell_volume


class ConfigurationDescriptor(BaseModel):
    """Serializable description of a sampled configuration."""

    model: ModelSpec
    window: Box
    margin: float = Field(..., ge=0)
    seed: int = Field(..., ge=0)
    offset: Tuple[int, int, int] = (0, 0, 0)
    tail_cutoff: float = Field(..., ge=0)
    n_nuclei: int = Field(..., ge=0)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class NuclearConfiguration:
    """A finite realization of K(ω).

    Positions are stored as integer site labels plus displacements so that
    lattice shifts are exact relabelings.

    Attributes:
        sites: (n, 3) int64 site label of each nucleus.
        displacements: (n, 3) displacement from the site position.
        charges: (n,) positive charges.
        window: The observation window.
        margin: Sampling margin around the window.
        lattice: Lattice metadata.
        seed: Master seed of the realization.
        model: Model that produced it.
        offset: Site-key offset k (the realization is τ_k ω).
        tail_cutoff: Largest displacement the model can produce.
    """
    sites: np.ndarray
    displacements: np.ndarray
    charges: np.ndarray
    window: Box
    margin: float
    lattice: LatticeSpec = field(default_factory=LatticeSpec)
    seed: int = 0
    model: ModelSpec = field(default_factory=ModelSpec)
    offset: Tuple[int, int, int] = (0, 0, 0)
    tail_cutoff: float = 0.0

    def __len__(self) -> int:
        return int(self.charges.shape[0])

    @property
    def positions(self) -> np.ndarray:
        return self.lattice.positions(self.sites) + self.displacements

    @property
    def sampled_region(self) -> Box:
        """window ⊕ margin."""
        return self.window.expand(self.margin)

    @property
    def descriptor(self) -> ConfigurationDescriptor:
        return ConfigurationDescriptor(
            model=self.model,
            window=self.window,
            margin=self.margin,
            seed=self.seed,
            offset=tuple(int(v) for v in self.offset),
            tail_cutoff=self.tail_cutoff,
            n_nuclei=len(self),
        )

    @classmethod
    def from_points(
        cls,
        positions,
        charges,
        window: Box,
        margin: float = 0.0,
        lattice: Optional[LatticeSpec] = None,
        seed: int = 0,
    ) -> "NuclearConfiguration":
        """Wrap explicit points; each is labelled with the cell containing it."""
        lattice = lattice or LatticeSpec()
        positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        charges = np.broadcast_to(np.asarray(charges, dtype=float), (positions.shape[0],)).copy()
        sites = lattice.cell_of(positions)
        displacements = positions - lattice.positions(sites)
        order = np.lexsort(sites.T[::-1])
        return cls(
            sites=sites[order],
            displacements=displacements[order],
            charges=charges[order],
            window=window,
            margin=margin,
            lattice=lattice,
            seed=seed,
        )

    def cells(self) -> np.ndarray:
        """Cell index of each nucleus, computed from the site label.

        ``site + cell_of(displacement)`` is exactly shift-equivariant.
        """
        return self.sites + self.lattice.cell_of(self.displacements)

    def inside(self, region: Optional[Box] = None) -> np.ndarray:
        """Mask of nuclei inside ``region`` (default: the window)."""
        return (region or self.window).contains(self.positions)
