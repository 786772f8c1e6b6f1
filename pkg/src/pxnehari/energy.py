"""Energy functional, weak-form residual, and fiber maps along rays.

The energy is
    E(u) = int |grad u|^{p(x)}/p(x) - int a |u|^{q(x)}/q(x)
           - lam * int b (u+)^{1-delta(x)}/(1-delta(x)),
with the positive part keeping the last integral finite for every u since
0 < 1 - delta < 1.  The weak residual instead needs a strictly positive
iterate because u^{-delta(x)} blows up at zero, hence the floor argument.

Fiber maps phi(t) = E(t u) and their first two t-derivatives are evaluated
with the t-powers inside the quadrature, since the exponents vary with x.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .domain import ProblemData
from .errors import BelowFloor, NoBracket
from .vexp import EmbeddingConstants, GridFunction

#: Local-root bisection: relative width target and step cap.
_ROOT_REL_WIDTH = 1e-10
_ROOT_MAX_STEPS = 200
#: |ddphi| below this fraction of the derivative scale counts as degenerate.
ZERO_BAND = 1e-9


class ManifoldLabel(str, Enum):
    N_PLUS = "N+"
    N_MINUS = "N-"
    N_ZERO = "N0"
    OFF_MANIFOLD = "off"


@dataclass(frozen=True)
class EnergyBreakdown:
    gradient_term: float
    q_term: float
    singular_term: float
    total: float


def _require_nonnegative(u: GridFunction, who: str) -> None:
    if np.any(u.values < 0.0):
        raise ValueError(f"{who} requires a componentwise nonnegative function")
    if u.is_zero():
        raise ValueError(f"{who} requires a nonzero function")


def energy(u: GridFunction, data: ProblemData,
           positive_part: bool = True) -> EnergyBreakdown:
    """Midpoint-quadrature energy split into its three terms.

    With ``positive_part=False`` the singular term uses the raw centroid
    values (callers must keep them positive); this variant is the one that
    is differentiable and is what the finite-difference checks probe.
    """
    mesh = u.mesh
    meas = mesh.element_measures
    gm = u.gradient_magnitude
    uc = u.centroid_values
    grad_term = float(np.dot(meas, gm ** data.p_c / data.p_c))
    q_term = float(np.dot(meas, data.a_c * np.abs(uc) ** data.q_c / data.q_c))
    expo = 1.0 - data.delta_c
    base = np.clip(uc, 0.0, None) if positive_part else uc
    sing_term = float(np.dot(meas, data.b_c * base ** expo / expo))
    total = grad_term - q_term - data.lam * sing_term
    return EnergyBreakdown(grad_term, q_term, sing_term, total)


def nehari_residual(u: GridFunction, data: ProblemData) -> float:
    """int |grad u|^{p} - int a|u|^{q} - lam * int b (u+)^{1-delta}.

    Zero (within tolerance) exactly when u sits on the discrete Nehari
    manifold; identical to the fiber derivative at t = 1.
    """
    _require_nonnegative(u, "nehari_residual")
    meas = u.mesh.element_measures
    gm = u.gradient_magnitude
    uc = u.centroid_values
    g = float(np.dot(meas, gm ** data.p_c))
    aa = float(np.dot(meas, data.a_c * np.abs(uc) ** data.q_c))
    bb = float(np.dot(meas, data.b_c * np.clip(uc, 0.0, None) ** (1.0 - data.delta_c)))
    return g - aa - data.lam * bb


def weak_gradient_parts(u: GridFunction, data: ProblemData, floor: float):
    """Assemble the three weak-form co-vectors tested against interior hats.

    Returns (grad_part, q_part, singular_part): the residual co-vector is
    grad_part - q_part - lam * singular_part.  Requires u >= floor on every
    interior vertex so that u^{-delta} stays bounded.
    """
    mesh = u.mesh
    floor = float(floor)
    if floor <= 0.0:
        raise ValueError("floor must be positive")
    interior = mesh.interior_vertices
    low = u.values[interior].min() if interior.size else np.inf
    if low < floor:
        raise BelowFloor(
            f"interior value {low:.3e} below floor {floor:.3e}")

    meas = mesh.element_measures
    gm = u.gradient_magnitude
    grads = u.element_gradients
    uc = u.centroid_values
    nloc = mesh.dimension + 1

    coef = np.zeros_like(gm)
    nz = gm > 0.0
    coef[nz] = meas[nz] * gm[nz] ** (data.p_c[nz] - 2.0)
    flux = coef[:, None] * np.einsum("evd,ed->ev", mesh.shape_gradients, grads)

    hat = meas / nloc  # value of each local hat at the centroid, times measure
    q_dens = data.a_c * np.abs(uc) ** (data.q_c - 1.0) * hat
    s_dens = np.zeros_like(uc)
    on_b = data.b_c > 0.0
    s_dens[on_b] = data.b_c[on_b] * uc[on_b] ** (-data.delta_c[on_b]) * hat[on_b]

    def scatter(per_local):
        out = np.zeros(mesh.n_vertices)
        np.add.at(out, mesh.elements, per_local)
        out[mesh.boundary_vertices] = 0.0
        return out

    grad_part = scatter(flux)
    q_part = scatter(np.repeat(q_dens[:, None], nloc, axis=1))
    sing_part = scatter(np.repeat(s_dens[:, None], nloc, axis=1))
    return grad_part, q_part, sing_part


def weak_gradient(u: GridFunction, data: ProblemData, floor: float) -> GridFunction:
    """Discrete residual co-vector of the weak form (interior entries only);
    its maximum absolute interior entry is the reported weak residual."""
    g, q, s = weak_gradient_parts(u, data, floor)
    return GridFunction(u.mesh, g - q - data.lam * s)


class FiberMap:
    """Energy and its first two derivatives along the ray t -> t*u.

    Coefficients are precomputed per element, so evaluations are cheap and
    the map can be re-weighted with a different lambda without reassembly.
    """

    def __init__(self, u: GridFunction, data: ProblemData, lam: float | None = None):
        _require_nonnegative(u, "FiberMap")
        mesh = u.mesh
        meas = mesh.element_measures
        uc = np.abs(u.centroid_values)
        self.u = u
        self.lam = data.lam if lam is None else float(lam)
        self.p_c = data.p_c
        self.q_c = data.q_c
        self.d_c = data.delta_c
        self.gcoef = meas * u.gradient_magnitude ** data.p_c
        self.acoef = meas * data.a_c * uc ** data.q_c
        self.bcoef = meas * data.b_c * uc ** (1.0 - data.delta_c)

    def with_lambda(self, lam: float) -> "FiberMap":
        other = copy.copy(self)
        other.lam = float(lam)
        return other

    def _eval(self, t, gpow, apow, bpow, gfac=1.0, afac=1.0, bfac=1.0, bsign=-1.0):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = t.reshape(-1, 1)
        out = ((tt ** gpow) @ (gfac * self.gcoef)
               - (tt ** apow) @ (afac * self.acoef)
               + bsign * self.lam * (tt ** bpow) @ (bfac * self.bcoef))
        return float(out[0]) if scalar else out

    def phi(self, t):
        e = 1.0 - self.d_c
        return self._eval(t, self.p_c, self.q_c, e,
                          gfac=1.0 / self.p_c, afac=1.0 / self.q_c, bfac=1.0 / e)

    def dphi(self, t):
        return self._eval(t, self.p_c - 1.0, self.q_c - 1.0, -self.d_c)

    def ddphi(self, t):
        return self._eval(t, self.p_c - 2.0, self.q_c - 2.0, -self.d_c - 1.0,
                          gfac=self.p_c - 1.0, afac=self.q_c - 1.0,
                          bfac=self.d_c, bsign=+1.0)

    def terms_at_one(self):
        """(G, A, B) with dphi(1) = G - A - lam*B; all three nonnegative."""
        return (float(self.gcoef.sum()), float(self.acoef.sum()),
                float(self.bcoef.sum()))

    def dphi_scale(self, t: float = 1.0) -> float:
        """Sum of the magnitudes of the three dphi terms at t; the natural
        scale against which a small |dphi(t)| is judged."""
        g = float(np.dot(t ** (self.p_c - 1.0), self.gcoef))
        a = float(np.dot(t ** (self.q_c - 1.0), self.acoef))
        b = float(np.dot(t ** (-self.d_c), self.bcoef))
        return g + a + self.lam * b

    def ddphi_scale(self, t: float = 1.0) -> float:
        g = float(np.dot((self.p_c - 1.0) * t ** (self.p_c - 2.0), self.gcoef))
        a = float(np.dot((self.q_c - 1.0) * t ** (self.q_c - 2.0), self.acoef))
        b = float(np.dot(self.d_c * t ** (-self.d_c - 1.0), self.bcoef))
        return g + a + self.lam * b


@dataclass(frozen=True)
class CriticalPoint:
    t: float
    classification: ManifoldLabel
    phi: float
    dphi: float
    ddphi: float


@dataclass(frozen=True, eq=False)
class FiberProfile:
    """Sampled fiber map with refined and classified critical points."""
    direction: GridFunction
    t: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    ddphi: np.ndarray
    critical_points: tuple


def classify_critical_point(fm: FiberMap, t: float) -> CriticalPoint:
    """Classify by the sign of ddphi(t) with the degenerate dead-band taken
    relative to the magnitude sum of the ddphi terms at t (window-independent)."""
    dd = fm.ddphi(t)
    if abs(dd) <= ZERO_BAND * fm.ddphi_scale(t):
        label = ManifoldLabel.N_ZERO
    elif dd > 0.0:
        label = ManifoldLabel.N_PLUS
    else:
        label = ManifoldLabel.N_MINUS
    return CriticalPoint(t, label, fm.phi(t), fm.dphi(t), dd)


def _refine_root(fm: FiberMap, lo: float, hi: float, f_lo: float) -> float:
    """Bisection on dphi; stops once the bracket is relatively tight and the
    derivative value is small against the local term scale."""
    mid = 0.5 * (lo + hi)
    for _ in range(_ROOT_MAX_STEPS):
        mid = 0.5 * (lo + hi)
        fm_mid = fm.dphi(mid)
        if fm_mid == 0.0:
            return mid
        if (f_lo > 0.0) == (fm_mid > 0.0):
            lo = mid
        else:
            hi = mid
        if (hi - lo <= _ROOT_REL_WIDTH * hi
                and abs(fm_mid) <= ZERO_BAND * fm.dphi_scale(mid)):
            break
    return 0.5 * (lo + hi)


def find_fiber_roots(fm: FiberMap, t_min: float, t_max: float,
                     n_samples: int):
    """Locate and classify all sign changes of dphi on a log grid.

    Returns (t_samples, dphi_samples, critical_points); no error on an
    empty result, callers decide whether that is fatal.
    """
    ts = np.geomspace(t_min, t_max, n_samples)
    dp = fm.dphi(ts)
    roots = []
    for i in np.flatnonzero(np.sign(dp[:-1]) * np.sign(dp[1:]) < 0):
        t_star = _refine_root(fm, ts[i], ts[i + 1], dp[i])
        roots.append(classify_critical_point(fm, t_star))
    for i in np.flatnonzero(dp == 0.0):
        roots.append(classify_critical_point(fm, float(ts[i])))
    roots.sort(key=lambda c: c.t)
    return ts, dp, tuple(roots)


def fiber_profile(u: GridFunction, data: ProblemData, t_min: float,
                  t_max: float, n_samples: int) -> FiberProfile:
    """Sample phi, dphi, ddphi on a log-spaced grid and classify the located
    critical points; raises NoBracket when dphi never changes sign."""
    if not (0.0 < t_min < t_max):
        raise ValueError("need 0 < t_min < t_max")
    if n_samples < 16:
        raise ValueError("n_samples must be at least 16")
    _require_nonnegative(u, "fiber_profile")
    fm = FiberMap(u, data)
    ts, dp, roots = find_fiber_roots(fm, t_min, t_max, int(n_samples))
    profile = FiberProfile(u, ts, fm.phi(ts), dp, fm.ddphi(ts), roots)
    if not roots:
        raise NoBracket(
            f"fiber derivative has no sign change in [{t_min:g}, {t_max:g}]",
            profile=profile)
    return profile


def coercivity_radius(data: ProblemData, consts: EmbeddingConstants,
                      grad_modular: float, level: float = 0.0) -> float:
    """Scale beyond which the manifold energy lower bound exceeds ``level``.

    The bound is (1/p_plus - 1/q_minus) * grad_modular * s^{p_minus}
    minus lam * (1/(1-delta_plus) - 1/q_minus) * c_d_minus * s^{1-delta_minus},
    valid for s >= 1; the returned radius is clamped to at least 1.
    """
    ex = data.exponent_extrema
    k = (1.0 / ex.p_plus - 1.0 / ex.q_minus) * grad_modular
    m = data.lam * (1.0 / (1.0 - ex.delta_plus) - 1.0 / ex.q_minus) * consts.c_d_minus
    if k <= 0.0:
        raise ValueError("lower-bound coefficient must be positive (needs p_plus < q_minus)")

    def g(s: float) -> float:
        return k * s ** ex.p_minus - m * s ** (1.0 - ex.delta_minus) - level

    lo = 1.0
    hi = 2.0
    for _ in range(200):
        if g(hi) > 0.0 and g(hi * 2.0) > 0.0:
            break
        hi *= 2.0
    if g(lo) > 0.0:
        return 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi
