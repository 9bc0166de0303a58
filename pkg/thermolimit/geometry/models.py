"""Group elements, tiling parameters and geometry reports.

Key classes:
    GroupElement: Rotation and translation of R³ ⋊ SO(3).
    TilingSpec: Reference simplex and scale of a simplex tiling.
    CollarProfile, FisherEstimate, ConeReport, TilingIdentityReport,
    CellClassification, HaarTest: Reports.
"""

from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .shapes import RigidTransform, Simplex, Vec3

TranslationMode = Literal["cell-translation", "free"]


class GroupElement(BaseModel):
    """g = (R, τ) acting as x ↦ R x + τ."""

    model_config = ConfigDict(frozen=True)

    transform: RigidTransform
    mode: TranslationMode = "cell-translation"

    @property
    def rotation(self) -> np.ndarray:
        return self.transform.matrix

    @property
    def translation(self) -> np.ndarray:
        return self.transform.offset

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.transform.to_world(points)


class TilingSpec(BaseModel):
    """Tiling of R³ by translates of ℓΔ, averaged over rotations and cell translations."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    scale: float = Field(default=2.0, ge=1.0, description="Scale ℓ of the simplex")
    simplex: Simplex = Field(default_factory=Simplex.regular)

    @property
    def scaled_vertices(self) -> np.ndarray:
        return self.scale * self.simplex.vertex_array

    @property
    def scaled_volume(self) -> float:
        return self.scale ** 3 * self.simplex.volume

    @property
    def scaled_circumradius(self) -> float:
        return self.scale * self.simplex.circumradius


class CollarProfile(BaseModel):
    """Collar volumes |{d(x, ∂D) ≤ |D|^{1/3} t}| on a grid of t."""

    shape: str
    domain_volume: float
    t: List[float]
    volumes: List[float]
    stderrs: List[float]
    n_mc: int
    seed: int


class FisherEstimate(BaseModel):
    """Smallest a with collar(t) ≤ |D| a t over the grid."""

    a: float
    stderr: float
    argmax_t: float
    ratios: List[float]
    profile: CollarProfile


class ConeWitness(BaseModel):
    """A sampled point that admits no cone from the codebook."""

    point: Vec3
    inside: bool
    signed_distance: float


class ConeReport(BaseModel):
    passed: bool
    cone_epsilon: float
    points_checked: int
    directions: int
    witnesses: List[ConeWitness] = Field(default_factory=list)


class TilingIdentityReport(BaseModel):
    """|D| against the group average Σ_j |D ∩ g(ℓΔ + j)| / |ℓΔ|."""

    lhs: float
    rhs: float
    rhs_stderr: float
    rel_error: float
    group_samples: int
    points_per_sample: int
    scale: float
    seed: int


class CellClassification(BaseModel):
    """Inner and boundary lattice sites of a domain for one tiling scale."""

    inner: int
    boundary: int
    inner_fraction: float
    radius: float
    domain_volume: float
    cell_volume: float
    audit_poses: int = 0
    audit_violations: int = 0


class HaarTest(BaseModel):
    """KS test of sampled rotation angles against the Haar angle law."""

    samples: int
    statistic: float
    pvalue: float
    passed: bool
    mean_rotation: Tuple[Vec3, Vec3, Vec3]
    mean_rotation_stderr: float
    seed: int
    level: float = 0.01
    note: Optional[str] = None
