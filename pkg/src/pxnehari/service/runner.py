"""Request execution shared by the HTTP endpoints and the CLI."""

from __future__ import annotations

import numpy as np

from ..domain import FieldSpec, ProblemData, build_mesh, validate_hypotheses
from ..errors import NoBracket
from .. import energy as _energy
from .. import nehari as _nehari
from .. import solver as _solver
from .. import vexp as _vexp
from .schemas import (BranchResultModel, CriticalPointModel,
                      EmbeddingConstantsModel, FiberRequest, FiberResponse,
                      LambdaReportModel, MeshModel, NormRequest, NormResponse,
                      OracleRequest, OracleResponse, ScanRequest, ScanRowModel,
                      SolveRequest, SolveResponse, VerificationModel,
                      VerifyRequest, VerifyResponse)


def problem_from_model(model) -> ProblemData:
    if model.dimension == 1:
        extent = tuple(model.extent)
    else:
        extent = tuple(model.extent)
    mesh = build_mesh(model.dimension, extent, model.resolution)

    def fs(m):
        return FieldSpec(m.kind, tuple(m.params))

    return ProblemData(mesh, fs(model.p), fs(model.q), fs(model.delta),
                       fs(model.a), fs(model.b), model.lam)


def _direction(data: ProblemData, field_model) -> _vexp.GridFunction:
    if field_model is None:
        return _vexp.sine_surrogate(data.mesh)
    return _vexp.GridFunction.from_field(
        data.mesh, FieldSpec(field_model.kind, tuple(field_model.params)))


def run_norm(req: NormRequest) -> NormResponse:
    data = problem_from_model(req.problem)
    u = _direction(data, req.function)
    return NormResponse(
        modular_value=_vexp.modular(u, data.p, use_gradient=False),
        modular_gradient=_vexp.modular(u, data.p, use_gradient=True),
        luxemburg_value=_vexp.luxemburg_norm(u, data.p, use_gradient=False),
        luxemburg_gradient=_vexp.luxemburg_norm(u, data.p, use_gradient=True),
        sobolev=_vexp.sobolev_norm(u, data.p),
    )


def run_fiber(req: FiberRequest) -> FiberResponse:
    data = problem_from_model(req.problem)
    u = _direction(data, req.direction)
    bracket_found = True
    try:
        profile = _energy.fiber_profile(u, data, req.t_min, req.t_max, req.samples)
    except NoBracket as exc:
        profile = exc.profile
        bracket_found = False
    return FiberResponse(
        t=list(profile.t), phi=list(profile.phi), dphi=list(profile.dphi),
        ddphi=list(profile.ddphi),
        critical_points=[
            CriticalPointModel(t=c.t, classification=c.classification.value,
                               phi=c.phi, dphi=c.dphi, ddphi=c.ddphi)
            for c in profile.critical_points],
        bracket_found=bracket_found,
    )


def _lambda_report_model(report, rows) -> LambdaReportModel:
    c = report.constants_used
    return LambdaReportModel(
        lambda_scan_threshold=report.lambda_scan_threshold,
        lambda_formula_value=report.lambda_formula_value,
        lambda_section5_bound=report.lambda_section5_bound,
        lambda0=_nehari.default_lambda0(report),
        constants_used=EmbeddingConstantsModel(
            c_q_plus=c.c_q_plus, c_q_minus=c.c_q_minus,
            c_d_plus=c.c_d_plus, c_d_minus=c.c_d_minus,
            sample_count=c.sample_count),
        sign_notes=list(report.sign_notes),
        rows=[ScanRowModel(lam=r.lam, passed=r.passed,
                           worst_direction=r.worst_direction) for r in rows],
    )


def analyze_lambda(data: ProblemData, scan_settings) -> tuple:
    """(LambdaReport, ScanResult) for the given problem and scan settings."""
    validate_hypotheses(data).raise_if_failed()
    consts = _vexp.estimate_embedding_constants(data, 64, scan_settings.seed)
    scan = _nehari.lambda_scan(data, scan_settings.directions,
                               scan_settings.lambda_grid, scan_settings.seed)
    return _nehari.lambda_report(data, consts, scan), scan


def run_scan(req: ScanRequest) -> LambdaReportModel:
    data = problem_from_model(req.problem)
    report, scan = analyze_lambda(data, req.scan)
    return _lambda_report_model(report, scan.rows)


def _verification_model(rec) -> VerificationModel:
    return VerificationModel(
        positivity_ok=rec.positivity_ok, min_interior=rec.min_interior,
        floor=rec.floor, residual_ok=rec.residual_ok, residual=rec.residual,
        residual_scale=rec.residual_scale, membership_ok=rec.membership_ok,
        dphi_at_one=rec.dphi_at_one, dphi_scale=rec.dphi_scale, ok=rec.ok)


def _mesh_model(mesh) -> MeshModel:
    return MeshModel(
        dimension=mesh.dimension,
        vertices=[[float(c) for c in v] for v in mesh.vertices],
        elements=[[int(v) for v in e] for e in mesh.elements],
        boundary_vertices=[int(v) for v in mesh.boundary_vertices],
    )


def run_solve(req: SolveRequest) -> SolveResponse:
    data = problem_from_model(req.problem)
    s = req.solver
    config = _solver.SolveConfig(
        max_iters=s.max_iters, step0=s.step0, armijo_c=s.armijo_c,
        shrink=s.shrink, grad_floor=s.grad_floor, energy_tol=s.energy_tol,
        residual_tol=s.residual_tol, seed=s.seed)
    report = _solver.solve_both(data, config,
                                scan_grid=req.scan.lambda_grid,
                                scan_directions=req.scan.directions)
    errors = {branch: f"{kind}: {msg}" for branch, kind, msg in report.branch_errors}

    def branch_model(name, u, e, res, iters, rec) -> BranchResultModel:
        if u is None:
            return BranchResultModel(converged=False, error=errors.get(name))
        cls = _nehari.classify(u, data)
        return BranchResultModel(
            converged=True, energy=e, weak_residual=res, iterations=iters,
            classification=cls.label.value,
            values=[float(v) for v in u.values],
            verification=_verification_model(rec))

    plus = branch_model("plus", report.u_plus, report.energy_plus,
                        report.residual_plus, report.iterations_plus,
                        report.verification_plus)
    minus = branch_model("minus", report.u_minus, report.energy_minus,
                         report.residual_minus, report.iterations_minus,
                         report.verification_minus)
    return SolveResponse(
        lambda_used=report.lambda_used,
        threshold=_lambda_report_model(report.threshold, report.scan.rows),
        plus=plus, minus=minus,
        distinct_sup=report.distinct_sup,
        distinct_sobolev=report.distinct_sobolev,
        distinct_ok=(None if not report.both_converged
                     else _solver.distinctness_ok(report)),
        mesh=_mesh_model(data.mesh),
    )


def run_verify(req: VerifyRequest) -> VerifyResponse:
    data = problem_from_model(req.problem)
    u = _vexp.GridFunction(data.mesh, np.asarray(req.values, dtype=float))
    floor = _solver.floor_for(u, req.floor_scale)
    rec = _solver.verify_solution(u, data, floor, req.residual_tol)
    cls = _nehari.classify(u, data)
    return VerifyResponse(verification=_verification_model(rec),
                          classification=cls.label.value)


def run_oracle(req: OracleRequest) -> OracleResponse:
    data = problem_from_model(req.problem)
    result = _solver.oracle_global_scan(data, req.resolution_cap,
                                        starts=req.starts, seed=req.seed)
    return OracleResponse(energy_plus=result.energy_plus,
                          energy_minus=result.energy_minus,
                          starts=result.starts)
