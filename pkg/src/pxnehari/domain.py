"""Meshes, pointwise coefficient fields, and structural-hypothesis validation.

The computational domain is an interval (1D) or an axis-aligned box (2D),
meshed uniformly with first-order simplices.  All quadrature downstream is
midpoint quadrature (one sample per element centroid), so element centroids
and measures are stored explicitly.  Everything here is immutable after
construction and safe to share between threads.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .errors import HypothesisViolation

FIELD_KINDS = ("constant", "affine", "sinusoidal", "bump")


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform simplicial mesh with Dirichlet boundary tagging.

    ``elements`` holds vertex indices, one row per segment (1D) or
    triangle (2D).  ``boundary_vertices`` collects every vertex on the
    topological boundary of the domain.
    """

    dimension: int
    vertices: np.ndarray          # (nv, dim)
    elements: np.ndarray          # (ne, dim + 1)
    boundary_vertices: np.ndarray  # sorted vertex indices
    element_measures: np.ndarray  # (ne,)
    element_centroids: np.ndarray  # (ne, dim)

    def __post_init__(self):
        object.__setattr__(self, "vertices", _frozen(self.vertices))
        object.__setattr__(self, "elements", _frozen(self.elements, dtype=int))
        object.__setattr__(self, "boundary_vertices",
                           _frozen(np.sort(np.asarray(self.boundary_vertices)), dtype=int))
        object.__setattr__(self, "element_measures", _frozen(self.element_measures))
        object.__setattr__(self, "element_centroids", _frozen(self.element_centroids))
        if self.dimension not in (1, 2):
            raise ValueError("only 1D and 2D meshes are supported")
        if np.any(self.element_measures <= 0.0):
            raise ValueError("every element must have positive measure")

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @cached_property
    def is_boundary(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def interior_vertices(self) -> np.ndarray:
        return _frozen(np.flatnonzero(~self.is_boundary), dtype=int)

    @cached_property
    def shape_gradients(self) -> np.ndarray:
        """Gradients of the nodal hat functions per element, shape (ne, dim+1, dim).

        First-order elements have constant gradients, so one row of
        gradients per element is exact.
        """
        verts = self.vertices[self.elements]  # (ne, dim+1, dim)
        if self.dimension == 1:
            h = (verts[:, 1, 0] - verts[:, 0, 0])[:, None]
            grads = np.stack([-1.0 / h, 1.0 / h], axis=1)
        else:
            a, b, c = verts[:, 0], verts[:, 1], verts[:, 2]
            # x = a + J @ (lam_b, lam_c), columns of J are edge vectors
            j00, j01 = (b - a)[:, 0], (c - a)[:, 0]
            j10, j11 = (b - a)[:, 1], (c - a)[:, 1]
            det = j00 * j11 - j01 * j10
            gb = np.stack([j11 / det, -j10 / det], axis=1)
            gc = np.stack([-j01 / det, j00 / det], axis=1)
            ga = -gb - gc
            grads = np.stack([ga, gb, gc], axis=1)
        grads.setflags(write=False)
        return grads

    @cached_property
    def lumped_mass(self) -> np.ndarray:
        """Row-sum (lumped) mass per vertex: adjacent element measure / (dim+1)."""
        mass = np.zeros(self.n_vertices)
        np.add.at(mass, self.elements,
                  np.repeat(self.element_measures[:, None] / (self.dimension + 1),
                            self.dimension + 1, axis=1))
        mass.setflags(write=False)
        return mass

    def total_measure(self) -> float:
        return float(self.element_measures.sum())


def _normalize_extent(dimension: int, extent) -> np.ndarray:
    """Return the box as an array of (lo, hi) rows, one per coordinate."""
    arr = np.asarray(extent, dtype=float)
    if dimension == 1:
        box = arr.reshape(-1)
        if box.size != 2:
            raise ValueError("1D extent must be (lo, hi)")
        box = box.reshape(1, 2)
    else:
        if arr.size != 4:
            raise ValueError("2D extent must be ((xlo, xhi), (ylo, yhi))")
        box = arr.reshape(2, 2)
    if np.any(box[:, 1] - box[:, 0] <= 0.0):
        raise ValueError("extent must have positive length in every coordinate")
    return box


def build_mesh(dimension: int, extent, resolution: int) -> Mesh:
    """Build a uniform mesh: ``resolution`` segments in 1D, or the box split
    into ``resolution**2`` squares of two triangles each in 2D."""
    if dimension not in (1, 2):
        raise ValueError("dimension must be 1 or 2")
    resolution = int(resolution)
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    box = _normalize_extent(dimension, extent)

    if dimension == 1:
        lo, hi = box[0]
        x = np.linspace(lo, hi, resolution + 1)
        vertices = x[:, None]
        elements = np.stack([np.arange(resolution), np.arange(1, resolution + 1)], axis=1)
        boundary = np.array([0, resolution])
        measures = np.diff(x)
        centroids = 0.5 * (vertices[elements[:, 0]] + vertices[elements[:, 1]])
        return Mesh(1, vertices, elements, boundary, measures, centroids)

    (xlo, xhi), (ylo, yhi) = box
    n = resolution
    xs = np.linspace(xlo, xhi, n + 1)
    ys = np.linspace(ylo, yhi, n + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.stack([xx.ravel(), yy.ravel()], axis=1)

    def vid(ix, iy):
        return iy * (n + 1) + ix

    tris = []
    for iy in range(n):
        for ix in range(n):
            v00, v10 = vid(ix, iy), vid(ix + 1, iy)
            v01, v11 = vid(ix, iy + 1), vid(ix + 1, iy + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    elements = np.asarray(tris, dtype=int)

    ix = np.arange(n + 1)
    on_edge = np.zeros((n + 1, n + 1), dtype=bool)
    on_edge[0, :] = on_edge[-1, :] = True
    on_edge[:, 0] = on_edge[:, -1] = True
    boundary = np.flatnonzero(on_edge.ravel())  # row index = iy, col = ix

    verts = vertices[elements]
    e1 = verts[:, 1] - verts[:, 0]
    e2 = verts[:, 2] - verts[:, 0]
    measures = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    centroids = verts.mean(axis=1)
    return Mesh(2, vertices, elements, boundary, measures, centroids)


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """A pointwise coefficient field on the closed domain.

    Kinds and parameter layout (d = space dimension):
      constant    [c]
      affine      [c0, c1, ..., cd]                    -> c0 + sum(ci * x_i)
      sinusoidal  [offset, amplitude, k1, ..., kd]     -> offset + amp * prod sin(pi*ki*x_i)
      bump        1D [lo, hi, height]; 2D [xlo, xhi, ylo, yhi, height]
                  smooth nonnegative window supported exactly on the sub-box
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind == "bump":
            if len(self.params) not in (3, 5):
                raise ValueError("bump needs [lo, hi, height] or [xlo, xhi, ylo, yhi, height]")
            if self.params[-1] < 0:
                raise ValueError("bump height must be nonnegative")
            box = np.asarray(self.params[:-1]).reshape(-1, 2)
            if np.any(box[:, 1] <= box[:, 0]):
                raise ValueError("bump support box must have positive extent")
        elif self.kind == "constant" and len(self.params) != 1:
            raise ValueError("constant needs exactly one parameter")


def constant(value: float) -> FieldSpec:
    return FieldSpec("constant", (value,))


def _bump_window(s: np.ndarray) -> np.ndarray:
    # C^1 window on [0, 1], peak value 1 at s = 1/2, zero value and slope at edges.
    inside = (s > 0.0) & (s < 1.0)
    out = np.zeros_like(s)
    si = s[inside]
    out[inside] = 16.0 * si * si * (1.0 - si) * (1.0 - si)
    return out


def sample_field(field: FieldSpec, points) -> np.ndarray:
    """Evaluate ``field`` at an (n, dim) array of points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n, dim = pts.shape
    k, prm = field.kind, field.params
    if k == "constant":
        return np.full(n, prm[0])
    if k == "affine":
        if len(prm) != dim + 1:
            raise ValueError(f"affine field needs {dim + 1} parameters in {dim}D")
        return prm[0] + pts @ np.asarray(prm[1:])
    if k == "sinusoidal":
        if len(prm) != dim + 2:
            raise ValueError(f"sinusoidal field needs {dim + 2} parameters in {dim}D")
        offset, amp = prm[0], prm[1]
        waves = np.prod(np.sin(np.pi * np.asarray(prm[2:]) * pts), axis=1)
        return offset + amp * waves
    # bump
    box = np.asarray(prm[:-1]).reshape(-1, 2)
    if box.shape[0] != dim:
        raise ValueError(f"bump field needs a {dim}D support box")
    s = (pts - box[:, 0]) / (box[:, 1] - box[:, 0])
    vals = prm[-1] * np.prod(_bump_window(s), axis=1)
    return vals


def eval_field(field: FieldSpec, x) -> float:
    """Evaluate ``field`` at a single point (scalar in 1D, pair in 2D)."""
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    return float(sample_field(field, pt[None, :])[0])


class ExponentExtrema(NamedTuple):
    p_minus: float
    p_plus: float
    q_minus: float
    q_plus: float
    delta_minus: float
    delta_plus: float


@dataclass(frozen=True, eq=False)
class ProblemData:
    """Mesh plus the exponent fields p, q, delta, weights a, b, and the
    singular-term strength ``lam``.

    Exponent extrema are min/max over element-centroid samples, which keeps
    every downstream formula consistent with the quadrature actually used.
    Construction is permissive (``lam =  0`` is allowed so diagnostic runs can
    switch the singular term off); call :func:`validate_hypotheses` to check
    the structural hypotheses before solving.
    """

    mesh: Mesh
    p: FieldSpec
    q: FieldSpec
    delta: FieldSpec
    a: FieldSpec
    b: FieldSpec
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "lam", float(self.lam))
        if not np.isfinite(self.lam) or self.lam < 0.0:
            raise ValueError("lam must be a finite nonnegative real")

    def _centroid(self, field: FieldSpec) -> np.ndarray:
        return _frozen(sample_field(field, self.mesh.element_centroids))

    @cached_property
    def p_c(self) -> np.ndarray:
        return self._centroid(self.p)

    @cached_property
    def q_c(self) -> np.ndarray:
        return self._centroid(self.q)

    @cached_property
    def delta_c(self) -> np.ndarray:
        return self._centroid(self.delta)

    @cached_property
    def a_c(self) -> np.ndarray:
        return self._centroid(self.a)

    @cached_property
    def b_c(self) -> np.ndarray:
        return self._centroid(self.b)

    @cached_property
    def p_star_c(self) -> np.ndarray:
        """Sobolev conjugate N*p/(N - p) per centroid; +inf wherever p >= N."""
        n = float(self.mesh.dimension)
        p = self.p_c
        out = np.full_like(p, np.inf)
        under = p < n
        out[under] = n * p[under] / (n - p[under])
        out.setflags(write=False)
        return out

    @cached_property
    def exponent_extrema(self) -> ExponentExtrema:
        return ExponentExtrema(
            float(self.p_c.min()), float(self.p_c.max()),
            float(self.q_c.min()), float(self.q_c.max()),
            float(self.delta_c.min()), float(self.delta_c.max()),
        )

    @property
    def p_minus(self) -> float:
        return self.exponent_extrema.p_minus

    @property
    def p_plus(self) -> float:
        return self.exponent_extrema.p_plus

    @property
    def q_minus(self) -> float:
        return self.exponent_extrema.q_minus

    @property
    def q_plus(self) -> float:
        return self.exponent_extrema.q_plus

    @property
    def delta_minus(self) -> float:
        return self.exponent_extrema.delta_minus

    @property
    def delta_plus(self) -> float:
        return self.exponent_extrema.delta_plus

    def with_lambda(self, lam: float) -> "ProblemData":
        return dataclasses.replace(self, lam=lam)


@dataclass(frozen=True)
class ClauseCheck:
    clause: str
    passed: bool
    location: tuple | None
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    clauses: tuple

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.clauses)

    def failures(self):
        return [c for c in self.clauses if not c.passed]

    def raise_if_failed(self):
        bad = self.failures()
        if bad:
            first = bad[0]
            where = "" if first.location is None else f" at x={first.location}"
            raise HypothesisViolation(
                f"hypothesis {first.clause} violated{where}: {first.detail}")


def _pointwise_clause(name: str, ok: np.ndarray, centroids: np.ndarray,
                      detail_fmt) -> ClauseCheck:
    if bool(ok.all()):
        return ClauseCheck(name, True, None, "holds at every element centroid")
    i = int(np.argmin(ok))
    loc = tuple(float(v) for v in centroids[i])
    return ClauseCheck(name, False, loc, detail_fmt(i))


def validate_hypotheses(data: ProblemData) -> ValidationReport:
    """Check the structural hypotheses clause by clause.

    A0 is checked pointwise at every element centroid, A1 on the centroid
    extrema.  The A1 chain is checked in the order consistent with min/max
    extrema: 0 < 1 - delta_plus and 1 - delta_minus < p_minus, which bounds
    both ends of the 1 - delta range away from 0 and below p_minus.
    Weight sign requirements are reported as separate "W" clauses.
    Pure function: identical inputs give identical reports.
    """
    mesh = data.mesh
    cts = mesh.element_centroids
    p, q, d = data.p_c, data.q_c, data.delta_c
    a, b = data.a_c, data.b_c
    ex = data.exponent_extrema
    clauses = []

    clauses.append(_pointwise_clause(
        "A0: 0 < 1 - delta(x)", 1.0 - d > 0.0, cts,
        lambda i: f"1 - delta = {1.0 - d[i]:.6g}"))
    clauses.append(_pointwise_clause(
        "A0: 1 - delta(x) < p(x)", 1.0 - d < p, cts,
        lambda i: f"1 - delta = {1.0 - d[i]:.6g}, p = {p[i]:.6g}"))
    clauses.append(_pointwise_clause(
        "A0: p(x) < q(x)", p < q, cts,
        lambda i: f"p = {p[i]:.6g}, q = {q[i]:.6g}"))
    pstar = data.p_star_c
    clauses.append(_pointwise_clause(
        "A0: q(x) < p*(x)", q < pstar, cts,
        lambda i: f"q = {q[i]:.6g}, p* = {pstar[i]:.6g}"))

    clauses.append(ClauseCheck(
        "A1: 0 < 1 - delta_plus", 1.0 - ex.delta_plus > 0.0, None,
        f"1 - delta_plus = {1.0 - ex.delta_plus:.6g}"))
    clauses.append(ClauseCheck(
        "A1: 1 - delta_minus < p_minus", 1.0 - ex.delta_minus < ex.p_minus, None,
        f"1 - delta_minus = {1.0 - ex.delta_minus:.6g}, p_minus = {ex.p_minus:.6g}"))
    clauses.append(ClauseCheck(
        "A1: p_plus < q_minus", ex.p_plus < ex.q_minus, None,
        f"p_plus = {ex.p_plus:.6g}, q_minus = {ex.q_minus:.6g}"))

    clauses.append(_pointwise_clause(
        "W: a(x) >= 0", a >= 0.0, cts, lambda i: f"a = {a[i]:.6g}"))
    clauses.append(_pointwise_clause(
        "W: b(x) >= 0", b >= 0.0, cts, lambda i: f"b = {b[i]:.6g}"))
    clauses.append(ClauseCheck(
        "W: a positive somewhere", bool((a > 0.0).any()), None,
        f"max a = {a.max():.6g}"))
    clauses.append(ClauseCheck(
        "W: b positive somewhere", bool((b > 0.0).any()), None,
        f"max b = {b.max():.6g}"))
    return ValidationReport(tuple(clauses))


def dump_mesh_csv(mesh: Mesh, vertices_path, elements_path) -> None:
    """Write the vertex and element tables as CSV for external plotting."""
    with open(vertices_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "x"] if mesh.dimension == 1 else ["index", "x", "y"])
        for i, v in enumerate(mesh.vertices):
            w.writerow([i, *(repr(float(c)) for c in v)])
    with open(elements_path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["index", "v0", "v1"] + (["v2"] if mesh.dimension == 2 else [])
        w.writerow(head + ["measure"])
        for i, (el, m) in enumerate(zip(mesh.elements, mesh.element_measures)):
            w.writerow([i, *(int(v) for v in el), repr(float(m))])
