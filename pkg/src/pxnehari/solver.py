"""Constrained minimization of the energy on the two manifold branches.

The scheme is a projected gradient loop: descend along the mass-scaled
weak-form residual, clamp to the positive cone, then rescale onto the
target branch by the matching fiber root.  At a manifold point the fiber
derivative vanishes along the ray, so the projected path inherits the free
descent rate and Armijo backtracking guarantees monotone energies.

A brute-force multi-start coordinate-descent oracle is included for
desk-scale cross-checks; it shares nothing with the main loop beyond the
energy and projection definitions.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .domain import ProblemData, validate_hypotheses
from .energy import FiberMap, ManifoldLabel, energy, weak_gradient_parts
from .errors import MaxIters, NoProjection, SolverFailure
from .nehari import (Branch, LambdaReport, ScanResult, branch_root, classify,
                     fiber_roots, lambda_report, lambda_scan)
from .vexp import (EmbeddingConstants, GridFunction,
                   estimate_embedding_constants, sine_surrogate, sobolev_norm)

_DEFAULT_SCAN_GRID = tuple(float(x) for x in np.geomspace(1e-6, 1e2, 17))


@dataclass(frozen=True)
class SolveConfig:
    max_iters: int = 40000
    step0: float = 1.0
    armijo_c: float = 1e-4
    shrink: float = 0.5
    grad_floor: float = 1e-8   # relative to the mean positive nodal value
    energy_tol: float = 1e-12
    residual_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.armijo_c < 1.0 and 0.0 < self.shrink < 1.0):
            raise ValueError("armijo_c and shrink must lie in (0, 1)")
        for name in ("step0", "grad_floor", "energy_tol", "residual_tol"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    energy: float
    ddphi_at_one: float
    step: float
    residual_rel: float


def floor_for(u: GridFunction, relative_floor: float) -> float:
    """Scale-aware positivity floor: relative factor times the mean positive
    nodal value (falls back to the sup norm when nothing is positive)."""
    pos = u.values[u.values > 0.0]
    scale = float(pos.mean()) if pos.size else max(u.sup_norm(), 1.0)
    return relative_floor * scale


def _project_local(fm_builder, v: GridFunction, data: ProblemData,
                   branch: Branch):
    """Project v onto the branch using a local bracket around t = 1.

    Falls back to the full wide-window search if the local expansion fails;
    returns (projected GridFunction, root t, FiberMap of v).
    """
    fm = fm_builder(v)
    want_plus = branch == "plus"
    f1 = fm.dphi(1.0)
    # For N+ the root has dphi going - -> +, for N- it goes + -> -.
    go_right = (f1 < 0.0) if want_plus else (f1 > 0.0)
    lo = hi = 1.0
    f_lo = f_hi = f1
    found = False
    fac = 2.0
    for _ in range(60):
        if go_right:
            hi *= fac
            f_hi = fm.dphi(hi)
            if (f_hi > 0.0) != (f1 > 0.0):
                lo_b, hi_b, f_lo_b = (1.0, hi, f1)
                found = True
                break
        else:
            lo /= fac
            f_lo = fm.dphi(lo)
            if (f_lo > 0.0) != (f1 > 0.0):
                lo_b, hi_b, f_lo_b = (lo, 1.0, f_lo)
                found = True
                break
    if not found:
        cp = branch_root(fiber_roots(v, data), branch)
        return v.scaled(cp.t), cp.t, fm
    for _ in range(200):
        mid = 0.5 * (lo_b + hi_b)
        fmid = fm.dphi(mid)
        if (fmid > 0.0) == (f_lo_b > 0.0):
            lo_b, f_lo_b = mid, fmid
        else:
            hi_b = mid
        if hi_b - lo_b <= 1e-12 * hi_b:
            break
    t = 0.5 * (lo_b + hi_b)
    dd = fm.ddphi(t)
    if (dd > 0.0) != want_plus:
        # landed on the wrong curvature: use the global search
        cp = branch_root(fiber_roots(v, data), branch)
        return v.scaled(cp.t), cp.t, fm
    return v.scaled(t), t, fm


def _minimize(data: ProblemData, config: SolveConfig, branch: Branch):
    mesh = data.mesh
    interior = mesh.interior_vertices
    mass = mesh.lumped_mass

    def fm_builder(v):
        return FiberMap(v, data)

    start = sine_surrogate(mesh)
    cp = branch_root(fiber_roots(start, data), branch)
    u = start.scaled(cp.t)
    e_u = energy(u, data).total

    trace = []
    step = config.step0
    last_t = cp.t
    for it in range(config.max_iters):
        floor = floor_for(u, config.grad_floor)
        floored = GridFunction(mesh, np.maximum(u.values, floor))
        g, qp, sp = weak_gradient_parts(floored, data, floor)
        r = g - qp - data.lam * sp
        scale = float(np.abs(g[interior]).max() + np.abs(qp[interior]).max()
                      + data.lam * np.abs(sp[interior]).max())
        residual = float(np.abs(r[interior]).max())
        residual_rel = residual / scale if scale > 0 else residual

        fm_u = fm_builder(u)
        trace.append(TraceRow(it, e_u, fm_u.ddphi(1.0), step, residual_rel))

        converged = (residual <= config.residual_tol * scale
                     and abs(last_t - 1.0) <= 1e-8
                     and (len(trace) > 1
                          and abs(trace[-2].energy - e_u) <= config.energy_tol))
        if converged:
            return u, trace

        d = np.zeros_like(r)
        d[interior] = r[interior] / mass[interior]
        slope = float(np.dot(r[interior], d[interior]))  # >= 0

        s = step
        accepted = False
        for _ in range(60):
            trial_vals = np.clip(u.values - s * d, 0.0, None)
            if not trial_vals.any():
                s *= config.shrink
                continue
            v = GridFunction(mesh, trial_vals)
            try:
                w, t_root, fm_v = _project_local(fm_builder, v, data, branch)
            except NoProjection:
                s *= config.shrink
                continue
            e_w = fm_v.phi(t_root)
            if e_w <= e_u - config.armijo_c * s * slope:
                u, e_u, last_t = w, e_w, t_root
                step = min(s * 2.0, 1e3 * config.step0)
                accepted = True
                break
            s *= config.shrink
        if not accepted:
            if residual <= config.residual_tol * scale:
                return u, trace
            raise MaxIters(
                f"line search stalled on the {branch} branch at iteration {it} "
                f"(relative residual {residual_rel:.3e})", best=u, trace=trace)
    raise MaxIters(
        f"{branch}-branch loop hit max_iters={config.max_iters} "
        f"(relative residual {trace[-1].residual_rel:.3e})",
        best=u, trace=trace)


def minimize_on_Nplus(data: ProblemData, config: SolveConfig):
    """Minimize the energy over the N+ branch (small fiber root).

    Caller is responsible for lambda being below the two-root threshold;
    a direction without an N+ root raises NoProjection.
    """
    return _minimize(data, config, "plus")


def minimize_on_Nminus(data: ProblemData, config: SolveConfig):
    """Minimize the energy over the N- branch (large fiber root)."""
    return _minimize(data, config, "minus")


@dataclass(frozen=True)
class VerificationRecord:
    positivity_ok: bool
    min_interior: float
    floor: float
    residual_ok: bool
    residual: float
    residual_scale: float
    membership_ok: bool
    dphi_at_one: float
    dphi_scale: float

    @property
    def ok(self) -> bool:
        return self.positivity_ok and self.residual_ok and self.membership_ok


def verify_solution(u: GridFunction, data: ProblemData, floor: float,
                    residual_tol: float = 1e-6,
                    membership_tol: float = 1e-6) -> VerificationRecord:
    """Check interior positivity, the weak residual, and manifold membership.

    Failures are recorded, not raised.  The residual is measured against the
    natural scale of the assembled weak-form terms.
    """
    interior = data.mesh.interior_vertices
    min_int = float(u.values[interior].min()) if interior.size else 0.0
    positivity_ok = min_int >= floor

    residual = math.inf
    scale = 0.0
    if positivity_ok:
        g, qp, sp = weak_gradient_parts(u, data, floor)
        r = g - qp - data.lam * sp
        scale = float(np.abs(g[interior]).max() + np.abs(qp[interior]).max()
                      + data.lam * np.abs(sp[interior]).max())
        residual = float(np.abs(r[interior]).max())
    residual_ok = residual <= residual_tol * scale

    if u.is_zero() or np.any(u.values < 0.0):
        membership_ok, d1, d_scale = False, math.nan, math.nan
    else:
        fm = FiberMap(u, data)
        d1 = fm.dphi(1.0)
        d_scale = fm.dphi_scale()
        membership_ok = abs(d1) <= membership_tol * d_scale
    return VerificationRecord(positivity_ok, min_int, floor, residual_ok,
                              residual, scale, membership_ok, d1, d_scale)


@dataclass(frozen=True, eq=False)
class SolveReport:
    u_plus: GridFunction | None
    u_minus: GridFunction | None
    energy_plus: float | None
    energy_minus: float | None
    residual_plus: float | None
    residual_minus: float | None
    iterations_plus: int
    iterations_minus: int
    verification_plus: VerificationRecord | None
    verification_minus: VerificationRecord | None
    distinct_sup: float | None
    distinct_sobolev: float | None
    lambda_used: float
    threshold: LambdaReport
    scan: ScanResult
    branch_errors: tuple
    trace_plus: tuple
    trace_minus: tuple

    @property
    def both_converged(self) -> bool:
        return self.u_plus is not None and self.u_minus is not None


def solve_both(data: ProblemData, config: SolveConfig,
               scan_grid=None, scan_directions: int = 32,
               constant_samples: int = 64) -> SolveReport:
    """Run both branch minimizations, verify, and assemble the report.

    Validates the structural hypotheses, estimates embedding constants,
    scans for the two-root lambda threshold, and requires the problem's
    lambda to sit below it.  A branch failure is recorded and the other
    branch still reported (partial success).
    """
    validate_hypotheses(data).raise_if_failed()
    consts = estimate_embedding_constants(data, constant_samples, config.seed)
    scan = lambda_scan(data, scan_directions,
                       scan_grid if scan_grid is not None else _DEFAULT_SCAN_GRID,
                       config.seed)
    report = lambda_report(data, consts, scan)
    if data.lam >= scan.threshold:
        raise SolverFailure(
            f"lambda={data.lam:g} is not below the two-root threshold "
            f"{scan.threshold:g}")

    results = {}
    errors = []
    for branch in ("plus", "minus"):
        try:
            results[branch] = _minimize(data, config, branch)
        except (NoProjection, MaxIters) as exc:
            errors.append((branch, type(exc).__name__, str(exc)))
            results[branch] = None

    def unpack(branch):
        res = results[branch]
        if res is None:
            return None, None, None, 0, None, ()
        u, trace = res
        e = energy(u, data).total
        floor = floor_for(u, config.grad_floor)
        rec = verify_solution(u, data, floor, config.residual_tol)
        return u, e, rec.residual, len(trace), rec, tuple(trace)

    up, ep, rp, itp, vp, trp = unpack("plus")
    um, em, rm, itm, vm, trm = unpack("minus")

    d_sup = d_sob = None
    if up is not None and um is not None:
        diff = GridFunction(data.mesh, up.values - um.values)
        d_sup = diff.sup_norm()
        d_sob = sobolev_norm(diff, data.p)

    return SolveReport(
        u_plus=up, u_minus=um, energy_plus=ep, energy_minus=em,
        residual_plus=rp, residual_minus=rm,
        iterations_plus=itp, iterations_minus=itm,
        verification_plus=vp, verification_minus=vm,
        distinct_sup=d_sup, distinct_sobolev=d_sob,
        lambda_used=data.lam, threshold=report, scan=scan,
        branch_errors=tuple(errors), trace_plus=trp, trace_minus=trm,
    )


def distinctness_ok(report: SolveReport, rel: float = 1e-3) -> bool:
    """Scale-relative two-solution gap: sup distance above ``rel`` times the
    larger sup norm."""
    if not report.both_converged:
        return False
    scale = max(report.u_plus.sup_norm(), report.u_minus.sup_norm())
    return report.distinct_sup > rel * scale


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OracleResult:
    energy_plus: float | None
    energy_minus: float | None
    best_plus: GridFunction | None
    best_minus: GridFunction | None
    starts: int


def _try_project(u: GridFunction, data: ProblemData, branch: Branch):
    try:
        cp = branch_root(fiber_roots(u, data), branch)
    except NoProjection:
        return None
    w = u.scaled(cp.t)
    return w, FiberMap(u, data).phi(cp.t)


def coordinate_descent(u: GridFunction, data: ProblemData, branch: Branch,
                       step0: float = 0.25, step_min: float = 1e-6,
                       max_sweeps: int = 400):
    """Greedy per-node descent on the positive cone with branch re-projection.

    Steps are absolute nodal perturbations, halved whenever a full sweep
    brings no improvement.  Returns (best GridFunction, best energy) or None
    if the start has no projection onto the branch.
    """
    mesh = data.mesh
    interior = mesh.interior_vertices
    proj = _try_project(u, data, branch)
    if proj is None:
        return None
    best_u, best_e = proj
    step = step0 * max(best_u.sup_norm(), 1e-3)
    sweeps = 0
    while step >= step_min and sweeps < max_sweeps:
        improved = False
        for i in interior:
            for sgn in (+1.0, -1.0):
                vals = best_u.values.copy()
                vals[i] = max(0.0, vals[i] + sgn * step)
                if not vals.any():
                    continue
                cand = _try_project(GridFunction(mesh, vals), data, branch)
                if cand is not None and cand[1] < best_e:
                    best_u, best_e = cand
                    improved = True
                    break
        sweeps += 1
        if not improved:
            step *= 0.5
    return best_u, best_e


def oracle_global_scan(data: ProblemData, resolution_cap: int,
                       starts: int = 200, seed: int = 0) -> OracleResult:
    """Multi-start coordinate descent returning the best branch energies.

    Independent of the projected-gradient solver: candidates are random
    positive nodal vectors, each descended coarsely; the best few per branch
    are then polished with fine steps.  Restricted to desk-scale meshes.
    """
    mesh = data.mesh
    if mesh.n_vertices > resolution_cap:
        raise ValueError(
            f"oracle restricted to meshes with at most {resolution_cap} "
            f"vertices (got {mesh.n_vertices})")
    if starts < 1:
        raise ValueError("starts must be at least 1")
    rng = np.random.default_rng(seed)
    interior = mesh.interior_vertices

    pool = {"plus": [], "minus": []}
    for k in range(starts):
        vals = np.zeros(mesh.n_vertices)
        if k == 0:
            vals = sine_surrogate(mesh).values.copy()
        else:
            vals[interior] = np.abs(rng.standard_normal(interior.size))
        u0 = GridFunction(mesh, vals)
        for branch in ("plus", "minus"):
            res = coordinate_descent(u0, data, branch,
                                     step0=0.3, step_min=1e-2, max_sweeps=60)
            if res is not None:
                pool[branch].append(res)

    out = {}
    for branch in ("plus", "minus"):
        cands = sorted(pool[branch], key=lambda r: r[1])[:5]
        best = None
        for u, _ in cands:
            res = coordinate_descent(u, data, branch,
                                     step0=2e-2, step_min=1e-6, max_sweeps=400)
            if res is not None and (best is None or res[1] < best[1]):
                best = res
        out[branch] = best
    return OracleResult(
        energy_plus=None if out["plus"] is None else out["plus"][1],
        energy_minus=None if out["minus"] is None else out["minus"][1],
        best_plus=None if out["plus"] is None else out["plus"][0],
        best_minus=None if out["minus"] is None else out["minus"][0],
        starts=starts,
    )
