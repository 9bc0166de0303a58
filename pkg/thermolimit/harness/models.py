"""Experiment specs and run manifests.

Key classes:
    ExperimentSpec: Strict description of one experiment run.
    ReplicaSeeds: The derived per-replica seeds of a labelled stream.
    RunManifest: What was run, with which seeds, and what it wrote.

Key functions:
    validate_spec: Every schema and precondition violation of a spec.
"""

from typing import Any, Dict, List, Literal, Optional, Tuple, get_args

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..ergodic.gap import MIN_GAP_SAMPLES
from ..ergodic.models import DomainSequence
from ..geometry.shapes import DomainShape
from ..geometry.tiling import MIN_GROUP_SAMPLES as MIN_TILING_SAMPLES
from ..moments.estimators import MIN_REPLICAS
from ..moments.models import Statistic
from ..nuclei.models import Box, ModelSpec, VacancyCharge

ExperimentKind = Literal[
    "sample", "stats", "moments", "tails", "geometry",
    "tiling", "energy", "ergodic", "thermo", "gap",
]
EXPERIMENT_KINDS: Tuple[str, ...] = get_args(ExperimentKind)

# Largest collar thickness the Fisher fit accepts
MAX_COLLAR_T = 0.2


class ExperimentSpec(BaseModel):
    """One experiment: what to run, on which model and domain, with which seed.

    Fields a kind does not use are ignored by it; fields it needs are
    checked by :func:`validate_spec`.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ExperimentKind
    seed: int = Field(default=0, ge=0, lt=2 ** 64, description="Master seed")
    out: Optional[str] = Field(default=None, description="Output directory")

    model: ModelSpec = Field(default_factory=ModelSpec)
    window: Optional[Box] = None
    domain: Optional[DomainShape] = None
    sequence: Optional[DomainSequence] = None

    statistics: List[str] = Field(default_factory=lambda: ["X0"], min_length=1)
    exponents: List[float] = Field(default_factory=lambda: [1.0], min_length=1)
    replicas: int = Field(default=1000, ge=1)
    replica_grid: List[int] = Field(default_factory=list)
    thresholds: List[float] = Field(default_factory=list)
    tail_mode: Optional[Literal["exceedance", "small_ball"]] = None
    bounds: bool = Field(default=False, description="Also check the X0 moment inequalities")
    eps: Optional[float] = Field(default=None, gt=0, description="Truncation radius of X'_p")

    t_grid: List[float] = Field(default_factory=lambda: [0.005, 0.01, 0.02], min_length=1)
    n_mc: int = Field(default=20_000, ge=1)
    cone_epsilon: float = Field(default=0.5, gt=0)
    cone_samples: int = Field(default=2000, ge=2)
    scales: List[float] = Field(default_factory=lambda: [2.0], min_length=1)
    n_g: int = Field(default=MIN_TILING_SAMPLES, ge=1, description="Group samples")
    points_per_group: int = Field(default=16, ge=1)

    c_kin: float = Field(default=1.0, ge=0)
    c_gs: float = Field(default=1.0, ge=0)
    neutrality: bool = False

    @field_validator("statistics")
    @classmethod
    def _parse_statistics(cls, value: List[str]) -> List[str]:
        bad = []
        for text in value:
            try:
                Statistic.parse(text)
            except (ValidationError, ValueError):
                bad.append(text)
        if bad:
            raise ValueError(f"unknown statistics {bad}")
        return value

    @field_validator("exponents")
    @classmethod
    def _positive_exponents(cls, value: List[float]) -> List[float]:
        if any(p <= 0 for p in value):
            raise ValueError("exponents must be > 0")
        return value

    @field_validator("scales")
    @classmethod
    def _scales_at_least_one(cls, value: List[float]) -> List[float]:
        if any(s < 1 for s in value):
            raise ValueError("tiling scales must be >= 1")
        return value

    def parsed_statistics(self) -> List[Statistic]:
        return [Statistic.parse(s) for s in self.statistics]


def _format_error(error: dict) -> str:
    loc = ".".join(str(part) for part in error["loc"]) or "<spec>"
    return f"{loc}: {error['msg']}"


def _require(spec: ExperimentSpec, field: str, out: List[str]) -> None:
    if getattr(spec, field) is None:
        out.append(f"{field}: required for a {spec.kind} run")


def check_preconditions(spec: ExperimentSpec) -> List[str]:
    """Kind-specific requirements the schema alone cannot express."""
    out: List[str] = []
    kind = spec.kind
    if kind in ("sample", "stats"):
        _require(spec, "window", out)
    if kind in ("geometry", "tiling", "energy", "gap"):
        _require(spec, "domain", out)
    if kind in ("ergodic", "thermo"):
        _require(spec, "sequence", out)

    if kind in ("moments", "tails", "thermo") and spec.replicas < MIN_REPLICAS:
        out.append(f"replicas: a {kind} run needs at least {MIN_REPLICAS} replicas "
                   f"(got {spec.replicas})")
    if kind == "moments" and spec.replica_grid:
        if len(spec.replica_grid) < 2 or min(spec.replica_grid) < MIN_REPLICAS:
            out.append(f"replica_grid: needs two or more sizes of at least {MIN_REPLICAS}")
    if kind == "ergodic" and spec.replicas < 2:
        out.append("replicas: an ergodic run needs at least 2 replicas")
    if kind == "tails" and not spec.thresholds:
        out.append("thresholds: a tails run needs at least one threshold")
    if kind == "geometry" and any(not 0 < t <= MAX_COLLAR_T for t in spec.t_grid):
        out.append(f"t_grid: collar thicknesses must lie in (0, {MAX_COLLAR_T}]")
    if kind == "tiling" and spec.n_g < MIN_TILING_SAMPLES:
        out.append(f"n_g: the tiling identity needs at least {MIN_TILING_SAMPLES} group samples")
    if kind == "gap" and spec.n_g < MIN_GAP_SAMPLES:
        out.append(f"n_g: the gap diagnostic needs at least {MIN_GAP_SAMPLES} group samples")

    stats = spec.parsed_statistics()
    if kind in ("moments", "tails") and isinstance(spec.model.charge, VacancyCharge):
        per_nucleus = [s.label for s in stats if s.per_nucleus]
        if per_nucleus:
            out.append(f"statistics: {per_nucleus} are undefined for laws with vacancies")
    if kind == "ergodic":
        per_nucleus = [s.label for s in stats if s.per_nucleus]
        if per_nucleus:
            out.append(f"statistics: ergodic averages need per-cell statistics, got {per_nucleus}")
    if kind == "moments" and spec.bounds and spec.model.kind != "lattice":
        out.append("bounds: the X0 moment inequalities apply to perturbed lattices only")
    return out


def validate_spec(data: Any) -> Tuple[Optional[ExperimentSpec], List[str]]:
    """(spec, []) for a valid spec, (None or spec, violations) otherwise.

    Schema errors are all reported at once; precondition checks run only
    when the schema is satisfied.
    """
    if not isinstance(data, dict):
        return None, ["<spec>: expected a mapping"]
    try:
        spec = ExperimentSpec.model_validate(data)
    except ValidationError as exc:
        return None, [_format_error(e) for e in exc.errors()]
    return spec, check_preconditions(spec)


class ReplicaSeeds(BaseModel):
    """Derived seeds of one labelled replica stream.

    ``first`` lists the leading seeds; ``sha256`` covers all ``count`` of
    them as little-endian uint64.
    """

    stream: str
    stream_seed: int
    count: int
    first: List[int]
    sha256: str


class RunManifest(BaseModel):
    """Record of one run; its ``spec`` reproduces the outputs byte for byte."""

    spec: Dict[str, Any]
    version: str
    kind: str
    master_seed: int
    streams: Dict[str, int] = Field(default_factory=dict)
    replica_seeds: List[ReplicaSeeds] = Field(default_factory=list)
    started_at: str
    wall_clock_seconds: float
    threads: int
    outputs: Dict[str, str] = Field(default_factory=dict, description="file -> sha256")
    summary: Dict[str, Any] = Field(default_factory=dict)
    environment: Dict[str, Any] = Field(default_factory=dict)
