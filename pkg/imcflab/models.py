from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

Verdict = Literal["pass", "fail", "hypothesis-not-met"]


# Geometry


class TabulatedSamples(BaseModel):
    """Samples of A and R; derivative samples are all-or-none."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    s: List[float]
    A: List[float]
    R: List[float]
    dA: Optional[List[float]] = None
    d2A: Optional[List[float]] = None
    dR: Optional[List[float]] = None
    d2R: Optional[List[float]] = None

    @model_validator(mode="after")
    def check_lengths(self) -> "TabulatedSamples":
        if not (len(self.s) == len(self.A) == len(self.R)):
            raise ValueError("tabulated s, A, R must have equal lengths")
        if len(self.s) < 8:
            raise ValueError("tabulated metric needs at least 8 samples")
        given = [getattr(self, k) for k in ("dA", "d2A", "dR", "d2R")]
        if any(g is not None for g in given):
            if any(g is None or len(g) != len(self.s) for g in given):
                raise ValueError("derivative samples need all of dA, d2A, dR, d2R, one per knot")
        return self

    def derivatives(self) -> Optional[Dict[str, List[float]]]:
        if self.dA is None:
            return None
        return {"dA": self.dA, "d2A": self.d2A, "dR": self.dR, "d2R": self.d2R}


class GluedSource(BaseModel):
    model_config = ConfigDict(extra="forbid")

    inner: "MetricConfig"
    transition_radius: float = Field(gt=0.0)
    cap_scale: float = Field(gt=0.0)


class MetricConfig(BaseModel):
    """Metric document: exactly one of a preset (with params), samples or a glued cap."""

    model_config = ConfigDict(extra="forbid")

    preset: Optional[str] = None
    params: Dict[str, float] = Field(default_factory=dict)
    tabulated: Optional[TabulatedSamples] = None
    glued: Optional[GluedSource] = None

    @model_validator(mode="after")
    def exactly_one_source(self) -> "MetricConfig":
        sources = [self.preset, self.tabulated, self.glued]
        if sum(source is not None for source in sources) != 1:
            raise ValueError("exactly one of 'preset', 'tabulated' or 'glued' must be given")
        if self.preset is None and self.params:
            raise ValueError("'params' only applies to presets")
        return self


GluedSource.model_rebuild()


class SphereGeometry(BaseModel):
    s: float
    area: float
    mean_curvature: float
    hawking_mass: float
    enclosed_volume: float


class AFDecaySample(BaseModel):
    r: float
    sigma: float
    r_dsigma: float
    r2_ddsigma: float


class AFDecayReport(BaseModel):
    passes: bool
    witnessed_constant: Optional[float] = Field(
        default=None, description="None when no finite constant exists on the samples")
    decay_slope: float
    bound_violations: int = 0
    samples: List[AFDecaySample]


class GluedMetricSpec(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    inner_metric: Any
    transition_radius: float = Field(gt=0.0)
    cap_scale: float = Field(gt=0.0)
    blend: Literal["smoothstep5"] = "smoothstep5"


class ExteriorRegion(BaseModel):
    s_ext: float
    has_minimal_sphere: bool
    violations: int = 0
    first_violation: Optional[float] = None


# Flow


class JumpEvent(BaseModel):
    t1: float
    s_before: float
    s_after: float
    v_before: float
    v_after: float
    area_before: float
    area_after: float
    initial: bool = False


class VolumeGrowthReport(BaseModel):
    passed: bool
    max_deviation: Optional[float] = None
    checked_samples: int
    skipped_segments: int
    flags: List[str] = Field(default_factory=list)


class LipschitzReport(BaseModel):
    passed: bool
    worst_margin: Optional[float] = None
    equality_deviation: Optional[float] = None
    checked_samples: int
    jump_intervals: int
    flags: List[str] = Field(default_factory=list)


class GerochReport(BaseModel):
    verdict: Verdict
    hypothesis_met: Optional[bool]
    status: str
    min_increment: float
    final_mass: float
    min_scalar_curvature: Optional[float] = None

    @computed_field
    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


# Regularized solver


class LevelSetCrossing(BaseModel):
    level: float
    s: float
    monotone: bool


class BarrierReport(BaseModel):
    holds: bool
    status: str
    c1: Optional[float] = None
    c2: Optional[float] = None
    min_barrier_residual: Optional[float] = None
    min_gap: Optional[float] = None


class StageRecord(BaseModel):
    epsilon: float
    L: float
    n: int
    sL: float
    converged: bool
    newton_iterations: int
    residual_norm: float
    successive_distance: Optional[float] = None
    exact_error: float


class ConvergenceReport(BaseModel):
    passed: bool
    core_s_max: float
    stages: List[StageRecord]
    successive_monotone: bool
    exact_monotone: bool


class RefinementLevel(BaseModel):
    n: int
    error: float
    ratio: Optional[float] = None


class RefinementReport(BaseModel):
    passed: bool
    epsilon: float
    reference_n: int
    levels: List[RefinementLevel]
    observed_order: Optional[float] = None


# Isoperimetry


class CandidateRegion(BaseModel):
    kind: Literal["ball", "annulus"]
    inner: float
    outer: float

    def describe(self) -> str:
        if self.kind == "ball":
            return f"ball(s<={self.outer:.17g})"
        return f"annulus({self.inner:.17g}<=s<={self.outer:.17g})"


class OracleResult(BaseModel):
    v: float
    area: float
    candidate: CandidateRegion


class BoundReport(BaseModel):
    v: float
    B: float
    rhs: float
    classical: float
    slack: float
    improvement: float
    quad_error: float
    verdict: Verdict


class MonotonicityReport(BaseModel):
    passed: bool
    worst_decrement: float
    first_failure: Optional[int] = None


class RigidityReport(BaseModel):
    equality_found: bool
    equality_volumes: List[float]
    equality_on_jump: List[float] = Field(default_factory=list)
    min_relative_gap: float
    max_abs_scalar_curvature: Optional[float] = None
    adm_mass: Optional[float] = None
    flat: Optional[bool] = None
    consistent: bool
    hypothesis_met: Optional[bool] = None


class MeeksYauParams(BaseModel):
    K: float = Field(gt=0.0)
    d: float = Field(gt=0.0)
    iota: float = Field(gt=0.0)

    @computed_field
    @property
    def r(self) -> float:
        return min(self.d / 4.0, self.iota)


class MassComparisonEntry(BaseModel):
    mass: float
    rhs: float


class MassComparisonReport(BaseModel):
    v: float
    entries: List[MassComparisonEntry]
    decreasing: bool


class ChainViolation(BaseModel):
    v: float
    link: str
    lhs: float
    rhs: float


class ChainReport(BaseModel):
    passed: bool
    checked: int
    violations: List[ChainViolation] = Field(default_factory=list)


# Command line


Command = Literal["flow", "solve-reg", "bound", "iso", "rigidity", "sweep", "report"]


class RunConfig(BaseModel):
    """Validated parameters of one lab invocation."""

    model_config = ConfigDict(extra="forbid")

    command: Command
    metric: Optional[MetricConfig] = None
    s0: Optional[float] = Field(default=None, gt=0.0)
    t_max: float = Field(default=12.0, gt=0.0)
    samples: int = Field(default=512, ge=16)
    epsilon: List[float] = Field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    L: List[float] = Field(default_factory=lambda: [12.0])
    n: List[int] = Field(default_factory=lambda: [1024, 2048, 4096])
    v_min: float = Field(default=0.1, gt=0.0)
    v_max: float = Field(default=100.0, gt=0.0)
    v_count: int = Field(default=32, ge=2)
    tol: Optional[float] = Field(default=None, gt=0.0)
    sweep: Dict[str, List[float]] = Field(default_factory=dict)
    refine: bool = False
    task: Literal["flow", "solve-reg", "bound"] = "solve-reg"
    inputs: List[str] = Field(default_factory=list)
    output: str = "runs"
    format: Literal["csv", "json", "both"] = "both"
    seedless: bool = True

    @field_validator("epsilon")
    @classmethod
    def validate_epsilon(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("epsilon schedule must not be empty")
        for eps in v:
            if not (0.0 < eps <= 1.0):
                raise ValueError(f"epsilon must lie in (0, 1], got {eps!r}")
        return v

    @field_validator("L")
    @classmethod
    def validate_levels(cls, v: List[float]) -> List[float]:
        if not v or any(level <= 2.0 for level in v):
            raise ValueError("L must exceed 2 (the outer boundary value is L - 2)")
        return v

    @field_validator("n")
    @classmethod
    def validate_grid(cls, v: List[int]) -> List[int]:
        if not v or any(size < 64 for size in v):
            raise ValueError("grid size n must be at least 64")
        return v

    @model_validator(mode="after")
    def check_command_inputs(self) -> "RunConfig":
        if self.command != "report" and self.metric is None:
            raise ValueError(f"command '{self.command}' requires a metric")
        if self.command == "sweep" and not self.sweep:
            raise ValueError("sweep requires at least one swept parameter")
        if self.v_max <= self.v_min:
            raise ValueError("v_max must exceed v_min")
        return self

    def schedule(self) -> List[Tuple[float, float, int]]:
        """(epsilon, L, n) per stage; shorter lists repeat their last entry."""
        count = max(len(self.epsilon), len(self.L), len(self.n))

        def pick(values, i):
            return values[min(i, len(values) - 1)]

        return [(pick(self.epsilon, i), pick(self.L, i), pick(self.n, i)) for i in range(count)]

    def volume_grid(self) -> List[float]:
        return [float(v) for v in np.geomspace(self.v_min, self.v_max, self.v_count)]

    def public_dump(self) -> Dict[str, Any]:
        """Canonical parameters, without the output location."""
        return self.model_dump(mode="json", exclude={"output"})


class CommandOutcome(BaseModel):
    command: str
    verdicts: Dict[str, bool] = Field(default_factory=dict)
    states: Dict[str, Verdict] = Field(
        default_factory=dict, description="Three-way verdicts where a check has a hypothesis")
    metric: Optional[Dict[str, Any]] = Field(
        default=None, description="Resolved metric document, loadable as a metric config")
    files: List[str] = Field(default_factory=list)

    @computed_field
    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())
