"""Nehari manifold membership, branch projection, and lambda thresholds.

The manifold splits into N+ (fiber local minima), N- (local maxima) and the
degenerate set N0.  Directions are projected onto a branch by scaling to the
matching fiber root; the lambda scan finds the largest singular-term
strength for which every sampled direction still carries the clean
two-root picture (one N+ root below one N- root, no degenerate hits).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .domain import ProblemData
from .energy import (FiberMap, ManifoldLabel, ZERO_BAND, find_fiber_roots)
from .errors import AllFail, DegenerateExponents, NoProjection
from .vexp import (EmbeddingConstants, GridFunction, random_direction,
                   sine_surrogate, sobolev_norm)

Branch = Literal["plus", "minus"]

#: Default fiber-root search window and sampling density; wide enough to
#: cover the root-merge regime across many decades of t.
T_BRACKET = (1e-6, 1e6)
T_SAMPLES = 512

#: |dphi(1)| above this fraction of its term scale means "not on the manifold".
MEMBERSHIP_TOL = 1e-6


@dataclass(frozen=True)
class ManifoldClass:
    label: ManifoldLabel
    witness: tuple  # (dphi(1), ddphi(1))


def classify(u: GridFunction, data: ProblemData,
             membership_tol: float = MEMBERSHIP_TOL) -> ManifoldClass:
    """Classify u by the signs of the fiber derivatives at t = 1."""
    fm = FiberMap(u, data)
    d1 = fm.dphi(1.0)
    dd1 = fm.ddphi(1.0)
    witness = (d1, dd1)
    if abs(d1) > membership_tol * fm.dphi_scale():
        return ManifoldClass(ManifoldLabel.OFF_MANIFOLD, witness)
    if abs(dd1) <= ZERO_BAND * fm.ddphi_scale():
        return ManifoldClass(ManifoldLabel.N_ZERO, witness)
    label = ManifoldLabel.N_PLUS if dd1 > 0.0 else ManifoldLabel.N_MINUS
    return ManifoldClass(label, witness)


def fiber_roots(u: GridFunction, data: ProblemData,
                t_min: float = T_BRACKET[0], t_max: float = T_BRACKET[1],
                n_samples: int = T_SAMPLES):
    """All classified fiber critical points of the direction u (may be empty)."""
    fm = FiberMap(u, data)
    _, _, roots = find_fiber_roots(fm, t_min, t_max, n_samples)
    return roots


def branch_root(roots, branch: Branch):
    """Pick the branch root: smallest root for N+, largest for N-.

    Intermediate roots (possible with strongly varying exponents) are
    ignored here; the caller may log them.
    """
    if not roots:
        raise NoProjection("no fiber critical point in the search window")
    cp = roots[0] if branch == "plus" else roots[-1]
    want = ManifoldLabel.N_PLUS if branch == "plus" else ManifoldLabel.N_MINUS
    if cp.classification != want:
        raise NoProjection(
            f"{branch} branch root missing: nearest critical point at "
            f"t={cp.t:.6g} classifies {cp.classification.value}")
    return cp


def project(u: GridFunction, data: ProblemData, branch: Branch) -> GridFunction:
    """Scale u onto the requested manifold branch (t1*u or t2*u)."""
    cp = branch_root(fiber_roots(u, data), branch)
    return u.scaled(cp.t)


def _two_root_check(dphi_samples: np.ndarray, fm: FiberMap, ts: np.ndarray) -> bool:
    """True when the direction shows exactly two strictly classified roots,
    the smaller N+ and the larger N-."""
    sign_flips = np.flatnonzero(np.sign(dphi_samples[:-1]) * np.sign(dphi_samples[1:]) < 0)
    if sign_flips.size != 2 or np.any(dphi_samples == 0.0):
        return False
    labels = []
    for i in sign_flips:
        lo, hi, f_lo = float(ts[i]), float(ts[i + 1]), float(dphi_samples[i])
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fmid = fm.dphi(mid)
            if (f_lo > 0.0) == (fmid > 0.0):
                lo, f_lo = mid, fmid
            else:
                hi = mid
            if hi - lo <= 1e-10 * hi:
                break
        t_star = 0.5 * (lo + hi)
        dd = fm.ddphi(t_star)
        if abs(dd) <= ZERO_BAND * fm.ddphi_scale(t_star):
            return False
        labels.append(dd > 0.0)
    return labels == [True, False]


def scan_directions(data: ProblemData, n_random: int, seed: int):
    """The sine surrogate plus seeded random nonnegative directions, each
    normalized to unit Sobolev norm.  Drawn sequentially, so a larger
    ``n_random`` extends (never reshuffles) a smaller set."""
    rng = np.random.default_rng(seed)
    dirs = [sine_surrogate(data.mesh)]
    dirs += [random_direction(data.mesh, rng) for _ in range(int(n_random))]
    return [u.scaled(1.0 / sobolev_norm(u, data.p)) for u in dirs]


@dataclass(frozen=True)
class ScanRow:
    lam: float
    passed: bool
    worst_direction: int  # -1 when the row passed


@dataclass(frozen=True, eq=False)
class ScanResult:
    threshold: float
    rows: tuple
    n_directions: int


def lambda_scan(data: ProblemData, directions: int, lambda_grid: Sequence[float],
                seed: int) -> ScanResult:
    """Largest lambda keeping the two-root picture on every sampled direction.

    Grid values are tested in increasing order; the gap between the last
    passing and the first failing grid point is narrowed by bisection.
    Raises AllFail when even the smallest grid value fails.
    """
    grid = sorted(float(g) for g in lambda_grid)
    if not grid or grid[0] <= 0.0:
        raise ValueError("lambda_grid must be a nonempty list of positive reals")
    if directions < 1:
        raise ValueError("need at least one scan direction")

    dirs = scan_directions(data, directions, seed)
    ts = np.geomspace(T_BRACKET[0], T_BRACKET[1], T_SAMPLES)
    maps = [FiberMap(u, data) for u in dirs]
    # dphi(t) = G(t) - A(t) - lam*B(t); G, A, B are lambda-independent.
    tt = ts.reshape(-1, 1)
    parts = [((tt ** (m.p_c - 1.0)) @ m.gcoef - (tt ** (m.q_c - 1.0)) @ m.acoef,
              (tt ** (-m.d_c)) @ m.bcoef) for m in maps]

    def first_failing(lam: float) -> int:
        for idx, (m, (ga, b)) in enumerate(zip(maps, parts)):
            if not _two_root_check(ga - lam * b, m.with_lambda(lam), ts):
                return idx
        return -1

    rows = []
    outcomes = []
    for lam in grid:
        worst = first_failing(lam)
        rows.append(ScanRow(lam, worst < 0, worst))
        outcomes.append((lam, worst < 0))
    passes = [lam for lam, ok in outcomes if ok]
    if not passes:
        raise AllFail(f"no lambda in the grid passes (smallest tried: {grid[0]:g})")
    last_pass = max(passes)
    fails_above = [lam for lam, ok in outcomes if not ok and lam > last_pass]
    first_fail = min(fails_above) if fails_above else None

    lo, hi = last_pass, first_fail
    if hi is not None and hi > lo:
        for _ in range(40):
            mid = np.sqrt(lo * hi)
            worst = first_failing(mid)
            rows.append(ScanRow(mid, worst < 0, worst))
            if worst < 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-3 * hi:
                break
    return ScanResult(threshold=lo, rows=tuple(rows), n_directions=len(dirs))


@dataclass(frozen=True)
class LambdaFormulae:
    lemma_value: float
    section5_value: float
    notes: tuple


def lambda_formula(data: ProblemData, consts: EmbeddingConstants) -> LambdaFormulae:
    """Evaluate the two printed threshold expressions with the estimated
    constants.

    Both expressions contain factors that are negative as printed
    (1 - delta_plus - q_plus is negative under the standing hypotheses);
    they are evaluated with absolute values and each such use is flagged in
    the notes rather than silently re-signed.
    """
    ex = data.exponent_extrema
    if ex.q_plus == ex.p_minus:
        raise DegenerateExponents("q_plus equals p_minus")
    if ex.p_minus + ex.delta_plus == 1.0:
        raise DegenerateExponents("p_minus + delta_plus equals 1")
    notes = []

    c10, c11, c8 = consts.c_q_plus, consts.c_d_plus, consts.c_d_minus
    if c11 <= 0.0 or c8 <= 0.0:
        raise DegenerateExponents("b-weight embedding constants vanish")

    base_num = ex.p_minus + ex.delta_plus - 1.0
    base_den = 1.0 - ex.delta_plus - ex.q_plus
    base = base_num / base_den
    if base < 0.0:
        notes.append("lemma base (p-+d+-1)/(1-d+-q+) negative as printed; "
                     "absolute value used")
    expo = (ex.p_minus + ex.delta_plus - 1.0) / (ex.q_plus - ex.p_minus)
    tail = (ex.q_plus + ex.delta_plus - 1.0) / (ex.q_plus - ex.p_minus)
    lemma = (c10 / c11) * abs(base) ** expo * tail

    s5_num = (1.0 - ex.delta_plus) * (ex.p_minus - ex.q_plus)
    s5_den = c8 * ex.p_plus * (1.0 - ex.delta_plus - ex.q_plus)
    if s5_num < 0.0 and s5_den < 0.0:
        notes.append("section-5 bound has negative numerator and denominator "
                     "as printed; their ratio is positive")
    section5 = abs(s5_num) / abs(s5_den)
    if s5_num * s5_den < 0.0:
        notes.append("section-5 bound sign-indefinite as printed; absolute "
                     "value used")
    return LambdaFormulae(lemma, section5, tuple(notes))


@dataclass(frozen=True, eq=False)
class LambdaReport:
    lambda_scan_threshold: float
    lambda_formula_value: float
    lambda_section5_bound: float
    constants_used: EmbeddingConstants
    sign_notes: tuple


def lambda_report(data: ProblemData, consts: EmbeddingConstants,
                  scan: ScanResult) -> LambdaReport:
    formulae = lambda_formula(data, consts)
    return LambdaReport(
        lambda_scan_threshold=scan.threshold,
        lambda_formula_value=formulae.lemma_value,
        lambda_section5_bound=formulae.section5_value,
        constants_used=consts,
        sign_notes=formulae.notes,
    )


def default_lambda0(report: LambdaReport) -> float:
    """Operative threshold: 0.9 times the most conservative of the scan
    threshold and the two formula values.  The scan is the certificate; the
    formulas are diagnostics."""
    return 0.9 * min(report.lambda_scan_threshold,
                     report.lambda_formula_value,
                     report.lambda_section5_bound)
