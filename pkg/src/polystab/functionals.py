"""Evaluation of the stability functionals.

The central object is FunctionalEvaluator, which fixes a polytope, a scalar
field A, and quadrature schemes, and evaluates

    boundary norm   |u|_b = integral over the boundary of u dsigma,
    linear form     L_A(u) = |u|_b - integral of A u dmu,
    Mabuchi energy  F_A(u) = -integral of log det(Hess u) dmu + L_A(u),
    Abreu operator  S(u) = -sum_ij d^2 u^{ij} / dx_i dx_j,

choosing the quadrature per function class: mesh functions get exact
vertex-weight assembly, piecewise-linear functions get kink-split rules, and
Guillemin-type functions get boundary-graded rules.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convex import AffineFunc, MeshConvexFunc, PLConvexFunc, SmoothConvexFunc
from .errors import NonConvexAtQuadraturePoint, SingularHessian, SingularMoments
from .hessfit import HessianSurrogate, components_to_matrices
from .mesh import Mesh
from .polytope import Polytope
from .quadrature import (
    DEFAULT_DEGREE,
    QuadratureScheme,
    graded_scheme,
    integrate_boundary,
    integrate_interior,
    mesh_graded_scheme,
    split_scheme,
    standard_scheme,
    triangle_rule,
    _segment_rule,
)

GRADED_LAYERS = 40
TRUNCATION_COMPARE = 30


def as_field(A, n):
    """Vectorized scalar field from a number, AffineFunc, or callable."""
    if isinstance(A, (int, float)):
        c = float(A)
        return lambda pts: np.full(np.atleast_2d(pts).shape[0], c)
    if isinstance(A, AffineFunc):
        a = np.asarray(A.a, dtype=float)
        return lambda pts: A.a0 + np.atleast_2d(pts) @ a
    if callable(A):
        return lambda pts: np.asarray(A(np.atleast_2d(pts)), dtype=float)
    raise TypeError(f"cannot interpret {A!r} as a scalar field")


def field_degree(A):
    """Polynomial degree when known, else None."""
    if isinstance(A, (int, float)):
        return 0
    if isinstance(A, AffineFunc):
        return 1
    return getattr(A, "degree", None)


def mesh_linear_forms(mesh: Mesh, A, degree=DEFAULT_DEGREE):
    """Vertex weight vectors (b, a) with |u|_b = b.u and int(A u) = a.u for mesh u.

    b comes from exact trapezoid integration along boundary edges; a from
    per-cell rules applied to A times each hat function.  The same vectors
    drive the stability LP, so LP objectives and evaluator values agree to
    roundoff on mesh functions.
    """
    Af = as_field(A, mesh.dimension)
    V = mesh.num_vertices
    b = MeshConvexFunc(mesh, np.zeros(V)).boundary_norm_weights()
    a = np.zeros(V)
    if mesh.dimension == 1:
        npts = (degree + 2) // 2
        for cell in mesh.cells:
            x0, x1 = mesh.vertices[cell[0], 0], mesh.vertices[cell[1], 0]
            p, w = _segment_rule([x0], [x1], npts)
            Av = Af(p)
            t = (p[:, 0] - x0) / (x1 - x0)
            np.add.at(a, cell[0], np.dot(w * Av, 1.0 - t))
            np.add.at(a, cell[1], np.dot(w * Av, t))
        return b, a
    for cell in mesh.cells:
        v0, v1, v2 = mesh.vertices[cell]
        p, w = triangle_rule(v0, v1, v2, degree)
        Av = Af(p)
        e1, e2 = v1 - v0, v2 - v0
        det = e1[0] * e2[1] - e1[1] * e2[0]
        r = p - v0
        lam1 = (r[:, 0] * e2[1] - r[:, 1] * e2[0]) / det
        lam2 = (-r[:, 0] * e1[1] + r[:, 1] * e1[0]) / det
        lam0 = 1.0 - lam1 - lam2
        for local, lam in zip(cell, (lam0, lam1, lam2)):
            a[local] += float(np.dot(w * Av, lam))
    return b, a


@dataclass
class MabuchiResult:
    value: float
    log_det_term: float
    linear_term: float
    truncation_estimate: float

    def __float__(self):
        return self.value


class FunctionalEvaluator:
    """Quadrature-backed evaluation of the stability functionals.

    A must be evaluable pointwise on the closed polytope (measurable-only
    fields are outside the reach of quadrature); when A is polynomial the
    interior degree is raised to at least deg(A) + 2.
    """

    def __init__(self, P: Polytope, A, degree: int = DEFAULT_DEGREE,
                 layers: int = GRADED_LAYERS):
        self.polytope = P
        self.A = A
        d = field_degree(A)
        if d is not None:
            degree = max(degree, d + 2)
        self.degree = degree
        self.layers = layers
        self._A = as_field(A, P.dimension)
        self.scheme = standard_scheme(P, degree)
        self.graded = graded_scheme(P, degree, layers=layers)
        self._mesh_forms: dict = {}
        self._surrogates: dict = {}
        self._mesh_ops: dict = {}

    # -- helpers -------------------------------------------------------------

    def _forms_for(self, mesh: Mesh):
        key = id(mesh)
        if key not in self._mesh_forms:
            self._mesh_forms[key] = mesh_linear_forms(mesh, self.A, self.degree)
        return self._mesh_forms[key]

    def _surrogate_for(self, mesh: Mesh):
        key = id(mesh)
        if key not in self._surrogates:
            self._surrogates[key] = HessianSurrogate(mesh)
        return self._surrogates[key]

    def _scheme_for(self, u):
        if isinstance(u, PLConvexFunc):
            return split_scheme(self.polytope, u.kink_lines(), self.degree)
        if isinstance(u, SmoothConvexFunc) and u.guillemin_type:
            return self.graded
        return self.scheme

    # -- functionals ---------------------------------------------------------

    def boundary_norm(self, u) -> float:
        """Integral of u over the boundary against dsigma."""
        if isinstance(u, MeshConvexFunc):
            b, _ = self._forms_for(u.mesh)
            return float(b @ u.values)
        Q = self._scheme_for(u)
        return integrate_boundary(u, self.polytope, Q)

    def interior_integral(self, u) -> float:
        """Integral of A u over the polytope."""
        if isinstance(u, MeshConvexFunc):
            _, a = self._forms_for(u.mesh)
            return float(a @ u.values)
        Q = self._scheme_for(u)
        return integrate_interior(lambda p: self._A(p) * np.asarray(u(p), dtype=float),
                                  self.polytope, Q)

    def linear_functional(self, u) -> float:
        """L_A(u) = |u|_b - integral of A u."""
        return self.boundary_norm(u) - self.interior_integral(u)

    def volume(self) -> float:
        return integrate_interior(lambda p: np.ones(p.shape[0]), self.polytope, self.scheme)

    def mabuchi(self, u) -> MabuchiResult:
        """F_A(u) with a reported truncation estimate for the log-det term."""
        if isinstance(u, MeshConvexFunc):
            return self._mabuchi_mesh(u)
        if not isinstance(u, SmoothConvexFunc):
            raise TypeError("mabuchi needs a smooth or mesh convex function")
        Q = self.graded if u.guillemin_type else self.scheme
        H = u.hess(Q.interior_points)
        det = _dets(H)
        if np.any(det <= 0.0):
            raise NonConvexAtQuadraturePoint("det Hess <= 0 at a quadrature point")
        logdet = np.log(det)
        term = -float(np.dot(Q.interior_weights, logdet))
        trunc = 0.0
        if Q.kind == "graded":
            deep = Q.interior_layers < TRUNCATION_COMPARE
            term_shallow = -float(np.dot(Q.interior_weights[deep], logdet[deep]))
            trunc = abs(term - term_shallow)
        lin = self.linear_functional(u)
        return MabuchiResult(term + lin, term, lin, trunc)

    def _mesh_graded_for(self, mesh: Mesh):
        key = ("mgq", id(mesh))
        if key not in self._mesh_ops:
            self._mesh_ops[key] = mesh_graded_scheme(mesh, self.degree)
        return self._mesh_ops[key]

    def _mesh_point_hessians(self, u: MeshConvexFunc, Q: QuadratureScheme):
        key = (id(u.mesh), id(Q))
        if key not in self._mesh_ops:
            sur = self._surrogate_for(u.mesh)
            self._mesh_ops[key] = sur.point_operator(Q.interior_points)
        op = self._mesh_ops[key]
        comp = op @ u.values
        return components_to_matrices(comp, u.dimension)

    def _mabuchi_mesh(self, u: MeshConvexFunc) -> MabuchiResult:
        Q = self._mesh_graded_for(u.mesh)
        H = self._mesh_point_hessians(u, Q)
        det = _dets(H)
        if np.any(det <= 0.0):
            raise NonConvexAtQuadraturePoint(
                "quadric-fit det Hess <= 0 at a quadrature point")
        logdet = np.log(det)
        term = -float(np.dot(Q.interior_weights, logdet))
        deep = Q.interior_layers < TRUNCATION_COMPARE
        trunc = abs(term + float(np.dot(Q.interior_weights[deep], logdet[deep])))
        lin = self.linear_functional(u)
        return MabuchiResult(term + lin, term, lin, trunc)

    # -- Abreu operator -------------------------------------------------------

    def abreu_operator(self, u, points, h_fd=None):
        """S(u) = -sum d^2 u^{ij}/dx_i dx_j at interior samples.

        The inverse Hessian is evaluated analytically at stencil points and
        differentiated with central differences of step h_fd (default
        min(1e-3, dist/4)); the error is O(h_fd^2).
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        P = self.polytope
        dist = np.atleast_1d(P.boundary_distance(pts))
        if h_fd is None:
            h = np.minimum(1e-3, dist / 4.0)
        else:
            h = np.full(pts.shape[0], float(h_fd))
        if np.any(dist <= 2.0 * h):
            raise ValueError("abreu_operator samples must be >= 2 stencil widths from the boundary")

        def W(q):
            H = u.hess(q)
            det = _dets(H)
            if np.any(det < 1e-12):
                raise SingularHessian("det Hess below 1e-12 at a stencil point")
            return _invert(H, det)

        if P.dimension == 1:
            e = np.array([1.0])
            w0 = W(pts)[:, 0, 0]
            wp = W(pts + h[:, None] * e)[:, 0, 0]
            wm = W(pts - h[:, None] * e)[:, 0, 0]
            return -(wp - 2.0 * w0 + wm) / h**2
        ex = np.array([1.0, 0.0])
        ey = np.array([0.0, 1.0])
        w0 = W(pts)
        wxp = W(pts + h[:, None] * ex)
        wxm = W(pts - h[:, None] * ex)
        wyp = W(pts + h[:, None] * ey)
        wym = W(pts - h[:, None] * ey)
        wpp = W(pts + h[:, None] * (ex + ey))
        wpm = W(pts + h[:, None] * (ex - ey))
        wmp = W(pts - h[:, None] * (ex - ey))
        wmm = W(pts - h[:, None] * (ex + ey))
        dxx = (wxp[:, 0, 0] - 2.0 * w0[:, 0, 0] + wxm[:, 0, 0]) / h**2
        dyy = (wyp[:, 1, 1] - 2.0 * w0[:, 1, 1] + wym[:, 1, 1]) / h**2
        dxy = (wpp[:, 0, 1] - wpm[:, 0, 1] - wmp[:, 0, 1] + wmm[:, 0, 1]) / (4.0 * h**2)
        return -(dxx + 2.0 * dxy + dyy)

    def ibp_identity_check(self, v: SmoothConvexFunc, u):
        """(lhs, rhs, gap) for L_A(u) = integral of v^{ij} u_{ij} dmu."""
        Q = self.graded
        Hv = v.hess(Q.interior_points)
        detv = _dets(Hv)
        if np.any(detv <= 0.0):
            raise NonConvexAtQuadraturePoint("v must be strictly convex")
        Wv = _invert(Hv, detv)
        if isinstance(u, MeshConvexFunc):
            Hu = self._mesh_point_hessians(u, Q)
        elif isinstance(u, AffineFunc):
            Hu = np.zeros_like(Hv)
        else:
            Hu = u.hess(Q.interior_points)
        integrand = np.einsum("mij,mij->m", Wv, Hu)
        rhs = float(np.dot(Q.interior_weights, integrand))
        lhs = self.linear_functional(u)
        return lhs, rhs, abs(lhs - rhs)


def _dets(H):
    if H.shape[-1] == 1:
        return H[:, 0, 0]
    return H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]


def _invert(H, det):
    W = np.empty_like(H)
    if H.shape[-1] == 1:
        W[:, 0, 0] = 1.0 / H[:, 0, 0]
        return W
    W[:, 0, 0] = H[:, 1, 1] / det
    W[:, 1, 1] = H[:, 0, 0] / det
    W[:, 0, 1] = -H[:, 0, 1] / det
    W[:, 1, 0] = -H[:, 1, 0] / det
    return W


def extremal_affine(P: Polytope, degree: int = DEFAULT_DEGREE, return_residuals=False):
    """The unique affine A with L_A = 0 on all affine functions.

    Solves the (n+1)x(n+1) moment system: Gram matrix of {1, x_i} against dmu,
    right-hand side their boundary integrals.
    """
    Q = standard_scheme(P, max(degree, 4))
    n = P.dimension
    basis = [lambda p: np.ones(p.shape[0])] + [
        (lambda i: (lambda p: p[:, i]))(i) for i in range(n)
    ]
    M = np.empty((n + 1, n + 1))
    rhs = np.empty(n + 1)
    for i in range(n + 1):
        rhs[i] = integrate_boundary(basis[i], P, Q)
        for j in range(i, n + 1):
            M[i, j] = M[j, i] = integrate_interior(
                lambda p: basis[i](p) * basis[j](p), P, Q)
    try:
        cond = np.linalg.cond(M)
        if cond > 1e14:
            raise SingularMoments(f"moment matrix condition {cond:.2e}")
        coeffs = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMoments(str(exc)) from exc
    A = AffineFunc(float(coeffs[0]), tuple(float(c) for c in coeffs[1:]))
    if not return_residuals:
        return A
    ev = FunctionalEvaluator(P, A, degree=max(degree, 4))
    residuals = np.array([abs(ev.linear_functional(AffineFunc(1.0, (0.0,) * n)))] + [
        abs(ev.linear_functional(AffineFunc(0.0, tuple(1.0 if j == i else 0.0 for j in range(n)))))
        for i in range(n)
    ])
    return A, residuals
