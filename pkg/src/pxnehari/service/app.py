"""FastAPI service wrapping the solver package.

Run with::

    uvicorn pxnehari.service.app:app

Endpoints mirror the CLI subcommands one to one; request/response bodies are
the pydantic models from :mod:`pxnehari.service.schemas`.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import (AllFail, BelowFloor, ConfigError, DegenerateExponents,
                      HypothesisViolation, MaxIters, NoBracket, NonConvergence,
                      NoProjection, PxnehariError, SolverFailure)
from . import runner
from .schemas import (FiberRequest, FiberResponse, LambdaReportModel,
                      NormRequest, NormResponse, OracleRequest, OracleResponse,
                      ScanRequest, SolveRequest, SolveResponse, VerifyRequest,
                      VerifyResponse)

app = FastAPI(title="pxnehari",
              description="Two positive solutions of singular p(x)-Laplacian "
                          "problems via Nehari manifold minimization")

_SOLVER_ERRORS = (NoProjection, MaxIters, AllFail, NonConvergence, BelowFloor,
                  SolverFailure, NoBracket, DegenerateExponents)


def _payload(exc: Exception) -> dict:
    return {"error": type(exc).__name__, "message": str(exc)}


@app.exception_handler(HypothesisViolation)
async def _hypothesis_handler(request: Request, exc: HypothesisViolation):
    return JSONResponse(status_code=422, content=_payload(exc))


@app.exception_handler(ConfigError)
async def _config_handler(request: Request, exc: ConfigError):
    return JSONResponse(status_code=400, content=_payload(exc))


@app.exception_handler(ValueError)
async def _value_handler(request: Request, exc: ValueError):
    return JSONResponse(status_code=400, content=_payload(exc))


@app.exception_handler(PxnehariError)
async def _solver_handler(request: Request, exc: PxnehariError):
    status = 409 if isinstance(exc, _SOLVER_ERRORS) else 500
    return JSONResponse(status_code=status, content=_payload(exc))


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/norm", response_model=NormResponse)
def norm(req: NormRequest) -> NormResponse:
    return runner.run_norm(req)


@app.post("/fiber", response_model=FiberResponse)
def fiber(req: FiberRequest) -> FiberResponse:
    return runner.run_fiber(req)


@app.post("/scan-lambda", response_model=LambdaReportModel)
def scan_lambda(req: ScanRequest) -> LambdaReportModel:
    return runner.run_scan(req)


@app.post("/solve", response_model=SolveResponse)
def solve(req: SolveRequest) -> SolveResponse:
    return runner.run_solve(req)


@app.post("/verify", response_model=VerifyResponse)
def verify(req: VerifyRequest) -> VerifyResponse:
    return runner.run_verify(req)


@app.post("/oracle", response_model=OracleResponse)
def oracle(req: OracleRequest) -> OracleResponse:
    return runner.run_oracle(req)
