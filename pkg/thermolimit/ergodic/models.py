"""Domain sequences and the series reported by the ergodic experiments.

Key classes:
    DomainSequence: Nested cubes, balls or simplices of growing size.
    ErgodicSeries, NeutralityReport, ScalingSeries, GapReport: Reports.
"""

import math
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import stats

from ..geometry.shapes import Ball, Cube, RigidTransform, Simplex
from ..nuclei.models import Box

Family = Literal["cube", "ball", "simplex"]


class DomainSequence(BaseModel):
    """Nested domains D_1 ⊂ D_2 ⊂ … of one family, all around the origin.

    Cubes are unions of whole lattice cells (side L, sites -⌊L/2⌋ … ),
    balls have radius L/2 and simplices are regular with circumradius L/2.
    ``distortion`` bounds diam(D_n)·|D_n|^{-1/3}; it is recorded when not
    given.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    family: Family = "cube"
    sizes: List[float] = Field(..., min_length=1)
    distortion: Optional[float] = Field(default=None, gt=0)

    @field_validator("sizes")
    @classmethod
    def _increasing(cls, value):
        if any(s <= 0 for s in value) or any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("sizes must be positive and strictly increasing")
        return value

    @model_validator(mode="after")
    def _bounded_distortion(self) -> "DomainSequence":
        if self.distortion is not None:
            worst = max(self.distortion_constants())
            if worst > self.distortion * (1 + 1e-12):
                raise ValueError(
                    f"diam(D)|D|^(-1/3) = {worst:.4g} exceeds the distortion bound "
                    f"{self.distortion}"
                )
        return self

    def shape(self, size: float):
        if self.family == "cube":
            corner = -math.floor(size / 2) - 0.5
            return Cube(side=size, transform=RigidTransform(translation=(corner,) * 3))
        if self.family == "ball":
            return Ball(radius=size / 2.0)
        return Simplex.regular(circumradius=size / 2.0)

    def shapes(self) -> list:
        return [self.shape(s) for s in self.sizes]

    def volumes(self) -> List[float]:
        return [float(s.volume) for s in self.shapes()]

    def diameter(self, size: float) -> float:
        if self.family == "cube":
            return size * math.sqrt(3.0)
        if self.family == "ball":
            return float(size)
        return (size / 2.0) * math.sqrt(8.0 / 3.0)

    def distortion_constants(self) -> List[float]:
        return [self.diameter(s) / v ** (1.0 / 3.0) for s, v in zip(self.sizes, self.volumes())]

    def window(self) -> Box:
        """Sampling window: the bounding box of the largest domain."""
        return self.shape(self.sizes[-1]).bbox()


class ScalingPoint(BaseModel):
    """Cross-replica summary of a per-volume quantity at one size."""

    size: float
    volume: float
    replicas: int
    mean: float
    stderr: float
    l1_deviation: float = Field(..., ge=0)
    l1_stderr: float = Field(default=0.0, ge=0)
    trace: Optional[float] = None
    kinetic: Optional[float] = None
    boundary: Optional[float] = None


class ErgodicSeries(BaseModel):
    """Averages (1/|D_n|) Σ_{k ∈ L∩D_n} X(τ_k ω) over a domain sequence.

    ``trace`` holds the single-realization averages (replica 0);
    ``l1_deviation`` is the cross-replica E|average - reference|.
    """

    statistic: str
    family: Family
    reference: float
    reference_kind: Literal["analytic", "largest-size mean"]
    points: List[ScalingPoint]
    seed: int

    @property
    def l1_errors(self) -> List[float]:
        return [p.l1_deviation for p in self.points]

    def nonincreasing(self, sigmas: float = 2.0) -> bool:
        """L¹ errors do not increase beyond ``sigmas`` combined standard errors."""
        return all(
            b.l1_deviation <= a.l1_deviation + sigmas * math.hypot(a.l1_stderr, b.l1_stderr)
            for a, b in zip(self.points, self.points[1:])
        )


class NeutralityPoint(BaseModel):
    size: float
    volume: float
    replicas: int
    estimate: float
    stderr: float
    lo: float
    hi: float
    per_replica: List[float] = Field(default_factory=list, repr=False)


class NeutralityReport(BaseModel):
    """(1/|D|) Σ_{K∩D} z per size, against Z_av/|W|."""

    reference: float
    cell_volume: float
    level: float
    points: List[NeutralityPoint]
    seed: int

    @property
    def z_av(self) -> float:
        return self.points[-1].estimate * self.cell_volume


class ScalingSeries(BaseModel):
    """Per-volume proxy energy over a domain sequence.

    ``fitted_limit`` extrapolates the two largest sizes assuming a
    |D|^{-1/3} surface correction; ``fluctuation_slope`` is the slope of
    log L¹ deviation against log |D| (None when every deviation is 0);
    ``boundary_slope`` the same slope for the mean boundary term per volume;
    ``expected_fluctuation_slope`` the value predicted from the tail of 1/δ′².
    """

    points: List[ScalingPoint]
    fitted_limit: float
    kinetic_limit: float
    boundary_limit: float
    fluctuation_slope: Optional[float] = None
    fluctuation_slope_stderr: Optional[float] = None
    expected_fluctuation_slope: Optional[float] = None
    boundary_slope: Optional[float] = None
    cone_epsilon: float
    c_kin: float
    seed: int
    fisher: List[float] = Field(default_factory=list)


class GapReport(BaseModel):
    """lhs - rhs of the tiling inequality for the proxy energy (a diagnostic)."""

    scale: float
    c_gs: float
    lhs: float
    rhs: float
    gap: float
    tiled_mean: float
    tiled_stderr: float
    nuclei_in_domain: int
    domain_volume: float
    group_samples: int
    seed: int


def richardson_limit(volumes: List[float], values: List[float]) -> float:
    """Limit of f(V) = f + a V^{-1/3} through the two largest sizes."""
    if len(values) == 1:
        return float(values[0])
    s1, s2 = volumes[-2] ** (-1.0 / 3.0), volumes[-1] ** (-1.0 / 3.0)
    m1, m2 = values[-2], values[-1]
    return float((m2 * s1 - m1 * s2) / (s1 - s2))


def log_slope(volumes: List[float], values: List[float]):
    """(slope, stderr) of log values against log volumes; None when undefined."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2 or np.any(v <= 0):
        return None, None
    fit = stats.linregress(np.log(volumes), np.log(v))
    stderr = float(fit.stderr) if len(v) > 2 else None
    return float(fit.slope), stderr
