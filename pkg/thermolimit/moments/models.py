"""Report models for Monte Carlo moment and tail estimation.

Key classes:
    Statistic: Which per-cell or per-nucleus quantity is estimated.
    OriginSample: Raw per-replica draws around the origin cell.
    MomentEstimate, TailFit, BoundReport, StabilityReport: Reports.
"""

import re
from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

StatisticKind = Literal["X0", "X1", "Xp", "delta_at_origin", "inverse_delta", "charge"]

_XP_PATTERN = re.compile(r"^Xp\(\s*([0-9.eE+-]+)\s*,\s*([0-9.eE+-]+)\s*\)$")


class Statistic(BaseModel):
    """A statistic of a configuration around one cell.

    ``X0``, ``X1``, ``Xp`` and ``charge`` are sums over the nuclei of the
    cell; ``delta_at_origin`` is δ of the nucleus emitted by site 0 and
    ``inverse_delta`` its reciprocal.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: StatisticKind
    p: float = Field(default=2.0, gt=0, description="Exponent of X'_p (kind Xp only)")
    eps: Optional[float] = Field(default=None, gt=0, description="Truncation radius of X'_p")

    @classmethod
    def parse(cls, value: Any) -> "Statistic":
        """Accept a Statistic, a mapping, or text such as ``X1`` or ``Xp(2, 0.5)``."""
        if isinstance(value, Statistic):
            return value
        if isinstance(value, dict):
            return cls.model_validate(value)
        text = str(value).strip()
        match = _XP_PATTERN.match(text)
        if match:
            return cls(kind="Xp", p=float(match.group(1)), eps=float(match.group(2)))
        return cls(kind=text)

    @property
    def label(self) -> str:
        if self.kind == "Xp":
            return f"Xp({self.p:g},{self.truncation:g})"
        return self.kind

    @property
    def truncation(self) -> float:
        if self.eps is not None:
            return self.eps
        from ..config import get_config

        return get_config().truncation_epsilon

    @property
    def per_nucleus(self) -> bool:
        return self.kind in ("delta_at_origin", "inverse_delta")


@dataclass
class OriginSample:
    """Replicas of the configuration around the origin cell.

    Attributes:
        replicas: Number of replicas.
        owner: Replica of each nucleus found in the origin cell.
        deltas: δ of those nuclei.
        charges: Their charges.
        delta0: δ of the site-0 nucleus per replica (nan when vacant).
        neighborhood: Chebyshev radius of the sampled block of sites.
    """
    replicas: int
    owner: np.ndarray
    deltas: np.ndarray
    charges: np.ndarray
    delta0: np.ndarray
    neighborhood: int

    @classmethod
    def concatenate(cls, parts: List["OriginSample"]) -> "OriginSample":
        offsets = np.cumsum([0] + [p.replicas for p in parts[:-1]])
        return cls(
            replicas=int(sum(p.replicas for p in parts)),
            owner=np.concatenate([p.owner + o for p, o in zip(parts, offsets)]),
            deltas=np.concatenate([p.deltas for p in parts]),
            charges=np.concatenate([p.charges for p in parts]),
            delta0=np.concatenate([p.delta0 for p in parts]),
            neighborhood=parts[0].neighborhood,
        )

    def values(self, statistic: Statistic) -> np.ndarray:
        """Per-replica values of ``statistic`` (empty cells give 0)."""
        n = self.replicas
        if statistic.kind == "X0":
            return np.bincount(self.owner, minlength=n).astype(float)
        if statistic.kind == "X1":
            return np.bincount(self.owner, weights=1.0 / self.deltas, minlength=n)
        if statistic.kind == "Xp":
            w = np.minimum(self.deltas, statistic.truncation) ** -statistic.p
            return np.bincount(self.owner, weights=w, minlength=n)
        if statistic.kind == "charge":
            return np.bincount(self.owner, weights=self.charges, minlength=n)
        if statistic.kind == "delta_at_origin":
            return self.delta0.copy()
        return 1.0 / self.delta0


class SeedManifest(BaseModel):
    """Where the replicas of an estimate came from."""

    master_seed: int
    stream: str
    replicas: int
    neighborhood: int
    tail_cutoff: float


class MomentEstimate(BaseModel):
    """Monte Carlo estimate of E(statistic^p) with a CLT interval."""

    statistic: str
    exponent: float
    replicas: int
    mean: float
    stderr: float = Field(..., ge=0)
    level: float
    lo: float
    hi: float
    seeds: SeedManifest

    @property
    def ci_width(self) -> float:
        return self.hi - self.lo

    def covers(self, value: float) -> bool:
        return self.lo <= value <= self.hi


class TailFit(BaseModel):
    """Log-log regression of tail or small-ball probabilities.

    For ``mode == "exceedance"`` the probabilities are P(X > t) and are
    nonincreasing in t; for ``"small_ball"`` they are P(X < t) and are
    nondecreasing.
    """

    statistic: str
    mode: Literal["exceedance", "small_ball"]
    thresholds: List[float]
    probabilities: List[float]
    hits: List[int]
    replicas: int
    slope: Optional[float] = None
    slope_stderr: Optional[float] = None
    intercept: Optional[float] = None
    r_squared: Optional[float] = None
    used_points: int = 0
    degenerate: bool = False
    warnings: List[str] = Field(default_factory=list)
    seeds: Optional[SeedManifest] = None


class BoundReport(BaseModel):
    """Both sides of a moment inequality lhs ≤ rhs."""

    name: str
    p: float
    lhs: float
    rhs: float
    lhs_stderr: float = 0.0
    rhs_stderr: float = 0.0
    holds: bool
    rhs_is_lower_bound: bool = False
    detail: Dict[str, float] = Field(default_factory=dict)


class StabilityReport(BaseModel):
    """Running estimates of one moment over nested replica prefixes."""

    statistic: str
    exponent: float
    replica_grid: List[int]
    means: List[float]
    ci_widths: List[float]
    shrink: float
    expected_shrink: float
    stable: bool


@dataclass
class CellMasses:
    """ν(W − j) over a block of sites.

    Attributes:
        sites: (m, 3) site labels j.
        masses: ν(W − j) for each.
        tail_mass: Upper bound on the mass outside the block.
        exact: False when masses come from quadrature.
    """
    sites: np.ndarray
    masses: np.ndarray
    tail_mass: float = 0.0
    exact: bool = True

    def largest(self, n: int) -> np.ndarray:
        return np.sort(self.masses)[::-1][:n]

