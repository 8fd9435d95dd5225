from typing import Literal

from pydantic import BaseModel, Field, field_validator, model_validator

from geodrat.config import settings

Verdict = Literal["constant_curvature", "exists", "none", "inconclusive"]
Band = Literal["accept", "reject", "inconclusive"]


class DomainModel(BaseModel):
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @model_validator(mode="after")
    def _positive_area(self) -> "DomainModel":
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("domain must have positive area")
        return self


class ExampleEntry(BaseModel):
    """A built-in metric with its expected outcome and where it comes from."""

    name: str
    conformal_factor: str | None = None  # text of e^{2λ}
    lambda_text: str | None = None  # text of λ, for entries given that way
    params: dict[str, float] = Field(default_factory=dict)
    domain: DomainModel
    expected_verdict: Verdict
    expected_moduli: str
    provenance: str

    @model_validator(mode="after")
    def _one_metric_form(self) -> "ExampleEntry":
        if (self.conformal_factor is None) == (self.lambda_text is None):
            raise ValueError("give exactly one of conformal_factor and lambda_text")
        return self


class Tolerances(BaseModel):
    phi_accept: float = settings.phi_accept
    phi_accept_p95: float = settings.phi_accept_p95
    phi_reject: float = settings.phi_reject
    residual_tol: float = settings.residual_tol
    energy_tol: float = settings.energy_tol
    q_min: float = settings.q_min
    u_min: float = settings.u_min


class RunConfig(BaseModel):
    """Everything one pipeline run depends on; embedded verbatim in every report."""

    example: str | None = None
    conformal_factor: str | None = None
    lambda_text: str | None = None
    params: dict[str, float] = Field(default_factory=dict)
    domain: DomainModel | None = None
    grid: tuple[int, int] = (settings.grid_nx, settings.grid_ny)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    trajectories: int = 100
    t_end: float = 10.0
    seed: int = 0
    output_dir: str = settings.output_dir

    @field_validator("grid")
    @classmethod
    def _grid_at_least_5(cls, v: tuple[int, int]) -> tuple[int, int]:
        if v[0] < 5 or v[1] < 5:
            raise ValueError("grid must be at least 5 x 5")
        return v

    @field_validator("trajectories")
    @classmethod
    def _positive_batch(cls, v: int) -> int:
        if v < 1:
            raise ValueError("trajectories must be positive")
        return v

    @model_validator(mode="after")
    def _bands_ordered(self) -> "RunConfig":
        if not self.tolerances.phi_accept < self.tolerances.phi_reject:
            raise ValueError("phi_accept must be smaller than phi_reject")
        sources = [s for s in (self.example, self.conformal_factor, self.lambda_text) if s is not None]
        if len(sources) != 1:
            raise ValueError("give exactly one of example, conformal_factor and lambda_text")
        return self


# --------------------------------------------------------------------------- criterion


class PhiStats(BaseModel):
    """Grid statistics of the per-point maximum of the three normalized Φ components."""

    median: float
    p95: float
    minimum: float
    maximum: float
    points: int
    flagged: int
    band: Band
    normalization: str = "min over Eq0 roots α of |X(α)| / Σ|x_k||α|^k"
    raw_median: list[float] = Field(default_factory=list)
    monic_median: list[float] = Field(default_factory=list)


class WCandidate(BaseModel):
    """A real root of Eq0 at a point with the residuals of the other members."""

    w: float
    point: tuple[float, float]
    residuals: dict[str, float]
    score: float


class BranchReport(BaseModel):
    seed_w: float
    matched: int
    nodes: int
    verified: bool
    rkv_dimension: int | None = None
    max_drift: float | None = None
    cofactor_consistency: float | None = None
    note: str = ""


class GridSample(BaseModel):
    xs: list[float]
    ys: list[float]
    values: list[list[float]]


class SampledCovector(BaseModel):
    u: GridSample
    v: GridSample


class RevolutionWitness(BaseModel):
    """Values of the two candidate roots along x; they cannot agree unless k_x = 0."""

    xs: list[float]
    k_x: list[float]
    denominator_branch: list[tuple[float, float]]
    eq0_branch: list[tuple[float, float]]


class CriterionReport(BaseModel):
    verdict: Verdict
    moduli: str
    moduli_points: int | None = None
    curvature_mean: float | None = None
    phi: PhiStats | None = None
    candidates: list[WCandidate] = Field(default_factory=list)
    branches: list[BranchReport] = Field(default_factory=list)
    cofactor_a: GridSample | None = None
    integral_p: SampledCovector | None = None
    integral_q: SampledCovector | None = None
    revolution: RevolutionWitness | None = None
    derivation_consistent: bool = True
    notes: list[str] = Field(default_factory=list)


class PsiReport(BaseModel):
    points: list[tuple[float, float]]
    remainders: dict[str, list[float]]
    psi1_at_root: list[float]
    psi2_degree: int
    psi2_leading_ratio: list[float]
    passed: bool


# --------------------------------------------------------------------------- flow


class TrajectoryDrift(BaseModel):
    index: int
    initial: tuple[float, float, float, float]
    t_final: float
    exited_domain: bool
    segments: int
    drift: float
    energy_drift: float


class ConservationReport(BaseModel):
    trajectories: list[TrajectoryDrift]
    max_drift: float
    median_drift: float
    max_energy_drift: float
    independent: bool
    seed: int


# --------------------------------------------------------------------------- derive / rkv / geodesic


class DeriveReport(BaseModel):
    degrees: dict[str, int]
    pairing: tuple[str, str]
    checksums: list[str]
    consistent: bool
    dump_path: str | None = None


class RkvReport(BaseModel):
    mode: Literal["ck", "characteristics", "given-cofactor"]
    u: GridSample
    v: GridSample
    a: GridSample
    b: GridSample
    max_residual: float
    error_estimate: float | None = None
    dimension: int | None = None


class GeodesicReport(BaseModel):
    count: int
    max_energy_drift: float
    csv_paths: list[str]


class RunReport(BaseModel):
    tool: str = "geodrat"
    version: str
    command: str
    config: RunConfig | None = None
    result: CriterionReport | ConservationReport | DeriveReport | RkvReport | GeodesicReport


# --------------------------------------------------------------------------- HTTP requests


class AnalyzeRequest(BaseModel):
    """Body for POST /api/analyze and the metric part of POST /api/verify."""

    example: str | None = None
    conformal_factor: str | None = None
    lambda_text: str | None = None
    params: dict[str, float] = Field(default_factory=dict)
    domain: DomainModel | None = None
    grid: tuple[int, int] = (21, 21)

    def to_config(self) -> RunConfig:
        return RunConfig(
            example=self.example,
            conformal_factor=self.conformal_factor,
            lambda_text=self.lambda_text,
            params=self.params,
            domain=self.domain,
            grid=self.grid,
        )


class IntegralSpec(BaseModel):
    """F = (u·p + v·q) / (w·p + r·q) as four expression texts."""

    u: str
    v: str
    w: str
    r: str


class VerifyRequest(AnalyzeRequest):
    integral: IntegralSpec
    trajectories: int = Field(default=10, ge=1, le=1000)
    t_end: float = Field(default=10.0, gt=0)
    seed: int = 0
