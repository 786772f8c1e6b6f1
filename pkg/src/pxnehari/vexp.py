"""Variable-exponent Lebesgue/Sobolev numerics.

Modulars, Luxemburg norms, the modular-norm relations, and empirical
embedding constants for the weighted integrals that drive the energy
functional.  A :class:`GridFunction` is a piecewise-linear function with
zero trace; the quadrature rule everywhere is one midpoint sample per
element, so the discrete spaces form a finite atomic measure space and the
classical modular/norm identities hold exactly (up to root-finder
tolerance).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .domain import FieldSpec, Mesh, ProblemData, sample_field
from .errors import NonConvergence

#: Relative width target for the Luxemburg root; the contract is 1e-10,
#: the bisection aims lower so powered quantities keep full accuracy.
_LUX_TARGET = 1e-13
_LUX_CONTRACT = 1e-10
_LUX_MAX_STEPS = 200


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal coefficients of a piecewise-linear function with zero trace.

    Boundary values are forcibly zeroed on construction, matching the
    zero-trace space the solver works in.
    """

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.mesh.n_vertices,):
            raise ValueError(
                f"expected {self.mesh.n_vertices} nodal values, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("nodal values must be finite")
        vals[self.mesh.boundary_vertices] = 0.0
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, mesh: Mesh) -> "GridFunction":
        return cls(mesh, np.zeros(mesh.n_vertices))

    @classmethod
    def from_field(cls, mesh: Mesh, field: FieldSpec) -> "GridFunction":
        return cls(mesh, sample_field(field, mesh.vertices))

    @cached_property
    def centroid_values(self) -> np.ndarray:
        vals = self.values[self.mesh.elements].mean(axis=1)
        vals.setflags(write=False)
        return vals

    @cached_property
    def element_gradients(self) -> np.ndarray:
        grads = np.einsum("evd,ev->ed", self.mesh.shape_gradients,
                          self.values[self.mesh.elements])
        grads.setflags(write=False)
        return grads

    @cached_property
    def gradient_magnitude(self) -> np.ndarray:
        mag = np.linalg.norm(self.element_gradients, axis=1)
        mag.setflags(write=False)
        return mag

    def scaled(self, s: float) -> "GridFunction":
        return GridFunction(self.mesh, self.values * float(s))

    def positive_part(self) -> "GridFunction":
        return GridFunction(self.mesh, np.clip(self.values, 0.0, None))

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def is_zero(self) -> bool:
        return bool(np.all(self.values == 0.0))


def _exponent_samples(mesh: Mesh, exponent: FieldSpec) -> np.ndarray:
    pe = sample_field(exponent, mesh.element_centroids)
    if pe.min() <= 1.0:
        raise ValueError("modular exponent must exceed 1 on every centroid")
    return pe


def _modular_arrays(u: GridFunction, exponent: FieldSpec, use_gradient: bool):
    w = u.gradient_magnitude if use_gradient else np.abs(u.centroid_values)
    pe = _exponent_samples(u.mesh, exponent)
    return u.mesh.element_measures, w, pe


def modular(u: GridFunction, exponent: FieldSpec, use_gradient: bool = False) -> float:
    """Midpoint-quadrature modular: sum of measure * |w|^{exponent} with w the
    centroid value of u (or |grad u| per element when ``use_gradient``)."""
    meas, w, pe = _modular_arrays(u, exponent, use_gradient)
    return float(np.dot(meas, w ** pe))


def luxemburg_norm(u: GridFunction, exponent: FieldSpec,
                   use_gradient: bool = False) -> float:
    """The unique s > 0 with modular(u / s) = 1, or 0 for u identically zero.

    s -> modular(u/s) is continuous and strictly decreasing for nonzero u,
    so a bracket plus bisection is unconditionally safe.
    """
    meas, w, pe = _modular_arrays(u, exponent, use_gradient)
    m0 = float(np.dot(meas, w ** pe))
    if m0 == 0.0:
        return 0.0

    def excess(s: float) -> float:
        return float(np.dot(meas, (w / s) ** pe)) - 1.0

    guess = m0 ** (1.0 / pe.min()) if np.isfinite(m0) else float(w.max())
    lo, hi = 1e-12 * guess, 1e12 * guess
    for _ in range(60):
        if excess(lo) > 0.0:
            break
        lo *= 0.1
    for _ in range(60):
        if excess(hi) < 0.0:
            break
        hi *= 10.0
    if not (excess(lo) > 0.0 > excess(hi)):
        raise NonConvergence("could not bracket the Luxemburg root")

    for _ in range(_LUX_MAX_STEPS):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _LUX_TARGET * hi:
            break
    if hi - lo > _LUX_CONTRACT * hi:
        raise NonConvergence(
            f"Luxemburg bisection failed relative tolerance {_LUX_CONTRACT}")
    return 0.5 * (lo + hi)


def sobolev_norm(u: GridFunction, p: FieldSpec) -> float:
    """Luxemburg norm of the values plus Luxemburg norm of the gradient."""
    return luxemburg_norm(u, p, use_gradient=False) + luxemburg_norm(u, p, use_gradient=True)


@dataclass(frozen=True)
class ModularRelations:
    """Outcome of the norm-vs-modular two-sided bounds for one function."""
    norm: float
    modular_value: float
    regime: str          # "gt1", "lt1" or "eq1"
    lower: float
    upper: float
    holds: bool


def check_modular_relations(u: GridFunction, p: FieldSpec,
                            use_gradient: bool = False,
                            rel_slack: float = 1e-10) -> ModularRelations:
    """Verify norm^{p_minus} <= modular <= norm^{p_plus} for norm > 1 and the
    swapped chain for norm < 1.  ``rel_slack`` absorbs root-finder error."""
    pe = _exponent_samples(u.mesh, p)
    p_minus, p_plus = float(pe.min()), float(pe.max())
    nrm = luxemburg_norm(u, p, use_gradient)
    rho = modular(u, p, use_gradient)
    if abs(nrm - 1.0) <= rel_slack:
        regime, lower, upper = "eq1", 1.0, 1.0
        holds = abs(rho - 1.0) <= 1e-8
    elif nrm > 1.0:
        regime, lower, upper = "gt1", nrm ** p_minus, nrm ** p_plus
        holds = lower * (1.0 - rel_slack) <= rho <= upper * (1.0 + rel_slack)
    else:
        regime, lower, upper = "lt1", nrm ** p_plus, nrm ** p_minus
        holds = lower * (1.0 - rel_slack) <= rho <= upper * (1.0 + rel_slack)
    return ModularRelations(nrm, rho, regime, lower, upper, holds)


def sine_surrogate(mesh: Mesh) -> GridFunction:
    """Interpolant of the product of coordinate sines scaled to the box;
    positive inside, zero on the boundary."""
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    s = (mesh.vertices - lo) / (hi - lo)
    return GridFunction(mesh, np.prod(np.sin(np.pi * s), axis=1))


def random_direction(mesh: Mesh, rng: np.random.Generator) -> GridFunction:
    """Nonnegative random direction supported on the interior vertices."""
    vals = np.zeros(mesh.n_vertices)
    interior = mesh.interior_vertices
    vals[interior] = np.abs(rng.standard_normal(interior.size))
    return GridFunction(mesh, vals)


@dataclass(frozen=True)
class EmbeddingConstants:
    """Empirical constants for the weighted integral inequalities.

    ``c_q_plus``/``c_q_minus`` certify int a|u|^{q(x)} <= c * norm^{q_plus}
    (norm > 1) resp. c * norm^{q_minus} (norm < 1); ``c_d_minus``/``c_d_plus``
    do the same for int b|u|^{1-delta(x)} against norm^{1-delta_minus} resp.
    norm^{1-delta_plus}.
    """
    c_q_plus: float
    c_q_minus: float
    c_d_plus: float
    c_d_minus: float
    sample_count: int


def weighted_power_integral(u: GridFunction, weight_c: np.ndarray,
                            exponent_c: np.ndarray) -> float:
    """sum of measure * weight * |u_centroid|^{exponent} over elements."""
    uc = np.abs(u.centroid_values)
    return float(np.dot(u.mesh.element_measures, weight_c * uc ** exponent_c))


def estimate_embedding_constants(data: ProblemData, samples: int,
                                 seed: int) -> EmbeddingConstants:
    """Estimate the four weighted-embedding constants by sampled maxima.

    Each random direction is normalized to Sobolev norm just above 1 for the
    norm>1 clauses and just below 1 for the norm<1 clauses; maximal observed
    ratios are inflated by a safety factor 1.1.  Scaling a unit-norm function
    only shrinks the ratios, so the unit sphere is the extremal regime.
    """
    samples = int(samples)
    if samples < 1:
        raise ValueError("samples must be at least 1")
    rng = np.random.default_rng(seed)
    mesh = data.mesh
    q_exp = data.q_c
    d_exp = 1.0 - data.delta_c
    ex = data.exponent_extrema
    up, down = 1.0 + 1e-9, 1.0 - 1e-9

    best = {"qp": 0.0, "qm": 0.0, "dp": 0.0, "dm": 0.0}
    dirs = [sine_surrogate(mesh)]
    dirs += [random_direction(mesh, rng) for _ in range(samples - 1)]
    for u in dirs:
        nrm = sobolev_norm(u, data.p)
        unit = u.scaled(1.0 / nrm)
        above = unit.scaled(up)
        below = unit.scaled(down)
        ia_above = weighted_power_integral(above, data.a_c, q_exp)
        ia_below = weighted_power_integral(below, data.a_c, q_exp)
        ib_above = weighted_power_integral(above, data.b_c, d_exp)
        ib_below = weighted_power_integral(below, data.b_c, d_exp)
        best["qp"] = max(best["qp"], ia_above / up ** ex.q_plus)
        best["qm"] = max(best["qm"], ia_below / down ** ex.q_minus)
        best["dm"] = max(best["dm"], ib_above / up ** (1.0 - ex.delta_minus))
        best["dp"] = max(best["dp"], ib_below / down ** (1.0 - ex.delta_plus))

    return EmbeddingConstants(
        c_q_plus=1.1 * best["qp"],
        c_q_minus=1.1 * best["qm"],
        c_d_plus=1.1 * best["dp"],
        c_d_minus=1.1 * best["dm"],
        sample_count=samples,
    )
