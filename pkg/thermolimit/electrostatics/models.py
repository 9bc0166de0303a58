"""Charges, screening clouds and energy reports.

Key classes:
    PointCharge: A signed point charge.
    ScreeningCloud: Uniform ball of charge -z neutralizing one nucleus.
    TrialEnergyReport: Terms of the screened trial-state energy, with a
        per-cell breakdown.
    DipoleAudit, YukawaAudit: Reports of the randomized inequality checks.
"""

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

Placement = Literal["on_top", "cone_offset"]


class PointCharge(BaseModel):
    model_config = ConfigDict(frozen=True)

    position: Tuple[float, float, float]
    charge: float

    @field_validator("position")
    @classmethod
    def _finite(cls, value):
        if not all(math.isfinite(v) for v in value):
            raise ValueError("charge position must be finite")
        return value


class ScreeningCloud(BaseModel):
    """Screening cloud of one nucleus.

    The cloud is a uniform ball of charge ``-z`` and radius δ′/8 centered on
    the nucleus (``on_top``, depth strictly above ε) or δ′/4 away from it
    toward the interior of the domain (``cone_offset``, depth at most ε).
    """

    model_config = ConfigDict(frozen=True)

    nucleus: int = Field(..., description="Index of the nucleus in the configuration")
    position: Tuple[float, float, float]
    z: float
    centre: Tuple[float, float, float]
    radius: float = Field(..., gt=0)
    delta_prime: float = Field(..., gt=0)
    depth: float
    placement: Placement
    direction: Optional[Tuple[float, float, float]] = None

    @property
    def charge(self) -> float:
        return -self.z

    @property
    def offset(self) -> float:
        return float(np.linalg.norm(np.subtract(self.centre, self.position)))


@dataclass
class EnergyBreakdown:
    """Per-cell terms; rows are the cells of the nuclei of K ∩ D, lexicographic."""
    cells: np.ndarray
    kinetic: np.ndarray
    boundary: np.ndarray
    attraction: np.ndarray

    def __len__(self) -> int:
        return int(self.cells.shape[0])


@dataclass
class TrialEnergyReport:
    """Terms of the screened trial-state energy of K ∩ D.

    Attributes:
        kinetic: c_kin Σ z^{5/3} / δ′².
        boundary: Σ over ordered pairs in the collar of zz′ / (r (1 + r²)).
        attraction_term: Σ over collar nuclei of z² / δ′.
        lieb_yau: (Z²/8) Σ 1/δ when charges are constant, else None.
    """
    kinetic: float
    boundary: float
    attraction_term: float
    cone_epsilon: float
    c_kin: float
    nuclei_in_domain: int
    collar_nuclei: int
    on_top: int
    cone_offset: int
    domain_volume: float
    lieb_yau: Optional[float] = None
    breakdown: Optional[EnergyBreakdown] = field(default=None, repr=False)

    @property
    def total(self) -> float:
        """The classical proxy energy: kinetic plus boundary."""
        return self.kinetic + self.boundary

    @property
    def per_volume(self) -> float:
        return self.total / self.domain_volume

    def summary(self) -> dict:
        return {
            "kinetic": self.kinetic,
            "boundary": self.boundary,
            "attraction_term": self.attraction_term,
            "lieb_yau": self.lieb_yau,
            "total": self.total,
            "cone_epsilon": self.cone_epsilon,
            "c_kin": self.c_kin,
            "nuclei_in_domain": self.nuclei_in_domain,
            "collar_nuclei": self.collar_nuclei,
            "on_top": self.on_top,
            "cone_offset": self.cone_offset,
        }


class DipoleAudit(BaseModel):
    pairs: int
    violations: int
    max_bound_ratio: float = Field(..., description="max |Dip| / (6 zz′/r)")
    max_decay_ratio: float = Field(..., description="max |Dip| r (1 + r²) / (zz′)")
    cone_epsilon: float
    seed: int


class YukawaAudit(BaseModel):
    systems: int
    violations: int
    min_deficit: float
    mass: float
    seed: int
