"""Pydantic request/response models for the HTTP service.

These are the wire contract; the CLI builds the same request models and the
service handlers return the same response models, so both front ends share
one code path through :mod:`pxnehari.service.runner`.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

SCHEMA_VERSION = 1


class FieldSpecModel(BaseModel):
    kind: Literal["constant", "affine", "sinusoidal", "bump"]
    params: list[float]


class ProblemModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    dimension: int = Field(ge=1, le=2)
    extent: list[float]
    resolution: int = Field(ge=2)
    p: FieldSpecModel
    q: FieldSpecModel
    delta: FieldSpecModel
    a: FieldSpecModel
    b: FieldSpecModel
    lam: float = Field(alias="lambda", ge=0.0)


class SolverSettingsModel(BaseModel):
    max_iters: int = 40000
    step0: float = 1.0
    armijo_c: float = 1e-4
    shrink: float = 0.5
    grad_floor: float = 1e-8
    energy_tol: float = 1e-12
    residual_tol: float = 1e-6
    seed: int = 0


class ScanSettingsModel(BaseModel):
    lambda_grid: list[float]
    directions: int = 32
    seed: int = 0


# ---------------------------------------------------------------- requests

class NormRequest(BaseModel):
    problem: ProblemModel
    function: Optional[FieldSpecModel] = None  # default: sine surrogate


class FiberRequest(BaseModel):
    problem: ProblemModel
    direction: Optional[FieldSpecModel] = None
    t_min: float = 1e-3
    t_max: float = 1e3
    samples: int = 512


class ScanRequest(BaseModel):
    problem: ProblemModel
    scan: ScanSettingsModel


class SolveRequest(BaseModel):
    problem: ProblemModel
    solver: SolverSettingsModel = SolverSettingsModel()
    scan: ScanSettingsModel


class VerifyRequest(BaseModel):
    problem: ProblemModel
    values: list[float]
    floor_scale: float = 1e-8   # relative to the mean positive nodal value
    residual_tol: float = 1e-6


class OracleRequest(BaseModel):
    problem: ProblemModel
    resolution_cap: int = 33
    starts: int = 200
    seed: int = 0


# --------------------------------------------------------------- responses

class NormResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    modular_value: float
    modular_gradient: float
    luxemburg_value: float
    luxemburg_gradient: float
    sobolev: float


class CriticalPointModel(BaseModel):
    t: float
    classification: str
    phi: float
    dphi: float
    ddphi: float


class FiberResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    t: list[float]
    phi: list[float]
    dphi: list[float]
    ddphi: list[float]
    critical_points: list[CriticalPointModel]
    bracket_found: bool


class EmbeddingConstantsModel(BaseModel):
    c_q_plus: float
    c_q_minus: float
    c_d_plus: float
    c_d_minus: float
    sample_count: int


class ScanRowModel(BaseModel):
    lam: float = Field(alias="lambda")
    model_config = ConfigDict(populate_by_name=True)
    passed: bool
    worst_direction: int


class LambdaReportModel(BaseModel):
    schema_version: int = SCHEMA_VERSION
    lambda_scan_threshold: float
    lambda_formula_value: float
    lambda_section5_bound: float
    lambda0: float
    constants_used: EmbeddingConstantsModel
    sign_notes: list[str]
    rows: list[ScanRowModel]


class VerificationModel(BaseModel):
    positivity_ok: bool
    min_interior: float
    floor: float
    residual_ok: bool
    residual: float
    residual_scale: float
    membership_ok: bool
    dphi_at_one: float
    dphi_scale: float
    ok: bool


class BranchResultModel(BaseModel):
    converged: bool
    error: Optional[str] = None
    energy: Optional[float] = None
    weak_residual: Optional[float] = None
    iterations: int = 0
    classification: Optional[str] = None
    values: Optional[list[float]] = None
    verification: Optional[VerificationModel] = None


class MeshModel(BaseModel):
    dimension: int
    vertices: list[list[float]]
    elements: list[list[int]]
    boundary_vertices: list[int]


class SolveResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    lambda_used: float
    threshold: LambdaReportModel
    plus: BranchResultModel
    minus: BranchResultModel
    distinct_sup: Optional[float] = None
    distinct_sobolev: Optional[float] = None
    distinct_ok: Optional[bool] = None
    mesh: MeshModel


class VerifyResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    verification: VerificationModel
    classification: str


class OracleResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    energy_plus: Optional[float] = None
    energy_minus: Optional[float] = None
    starts: int


class ErrorModel(BaseModel):
    error: str
    message: str
