"""Convex function classes and the operations the stability theory needs.

Four representations:

* AffineFunc      -- exact affine functions (normalizations quotient these out);
* PLConvexFunc    -- max of finitely many affine pieces;
* SmoothConvexFunc-- value/gradient/Hessian evaluators on the interior, with a
  flag for Guillemin-type boundary behaviour (u - u_o smooth up to the closure);
* MeshConvexFunc  -- per-vertex values of a piecewise-linear interpolant on a
  mesh, the discrete surrogate for the limit classes.  Boundary traces of the
  surrogate are always the continuous extension; boundary discontinuities of
  the limit class are not representable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvaluationOutsideDomain, InvalidK, SegmentTouchesBoundary
from .mesh import Mesh
from .polytope import Polytope, center_of_mass


def _pts(x, n):
    """Normalize point input to (m, n); also report whether it was a single point."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr.reshape(1, n), True
    return arr, False


def _unwrap(vals, single):
    return float(vals[0]) if single else vals


@dataclass(frozen=True)
class AffineFunc:
    """a0 + a . x"""

    a0: float
    a: tuple

    def __call__(self, x):
        a = np.asarray(self.a, dtype=float)
        pts, single = _pts(x, len(self.a))
        return _unwrap(self.a0 + pts @ a, single)

    def gradient(self):
        return np.asarray(self.a, dtype=float)

    @staticmethod
    def constant(c, n):
        return AffineFunc(float(c), (0.0,) * n)


@dataclass(frozen=True)
class PLConvexFunc:
    """max over affine pieces; convex by construction."""

    pieces: tuple  # of AffineFunc

    @property
    def dimension(self):
        return len(self.pieces[0].a)

    def _tableau(self):
        A = np.array([p.a for p in self.pieces], dtype=float)
        b = np.array([p.a0 for p in self.pieces], dtype=float)
        return A, b

    def __call__(self, x):
        A, b = self._tableau()
        pts, single = _pts(x, self.dimension)
        return _unwrap(np.max(pts @ A.T + b, axis=1), single)

    def active_gradients(self, x, tol=1e-12):
        """Gradients of the pieces attaining the max at x (within tol*scale)."""
        A, b = self._tableau()
        p = np.asarray(x, dtype=float)
        vals = A @ p + b
        top = vals.max()
        scale = max(1.0, abs(top))
        return A[vals >= top - tol * scale]

    def shift(self, ell: AffineFunc):
        """Pointwise u - ell, still piecewise linear."""
        g = ell.gradient()
        return PLConvexFunc(tuple(
            AffineFunc(p.a0 - ell.a0, tuple(np.asarray(p.a) - g)) for p in self.pieces
        ))

    def kink_lines(self):
        """(eta, c) pairs of the pairwise piece-equality lines (for exact quadrature)."""
        A, b = self._tableau()
        out = []
        for i in range(len(b)):
            for j in range(i + 1, len(b)):
                eta = A[i] - A[j]
                if np.linalg.norm(eta) > 1e-14:
                    out.append((tuple(eta), b[j] - b[i]))
        return out


class SmoothConvexFunc:
    """Convex function given by value/gradient/Hessian evaluators.

    `guillemin_type` marks functions whose difference from the Guillemin
    potential is smooth up to the boundary; quadrature of log det Hess then
    uses boundary-graded rules.
    """

    def __init__(self, value, grad, hess, dimension, domain=None,
                 guillemin_type=False, meta=None):
        self._value = value
        self._grad = grad
        self._hess = hess
        self.dimension = dimension
        self.domain = domain
        self.guillemin_type = guillemin_type
        self.meta = meta or {}

    def __call__(self, x):
        pts, single = _pts(x, self.dimension)
        return _unwrap(np.asarray(self._value(pts), dtype=float), single)

    def grad(self, x):
        pts, single = _pts(x, self.dimension)
        g = np.asarray(self._grad(pts), dtype=float)
        return g[0] if single else g

    def hess(self, x):
        pts, single = _pts(x, self.dimension)
        H = np.asarray(self._hess(pts), dtype=float)
        return H[0] if single else H

    def shift(self, ell: AffineFunc):
        g = ell.gradient()
        return SmoothConvexFunc(
            value=lambda p: self._value(p) - (ell.a0 + p @ g),
            grad=lambda p: self._grad(p) - g[None, :],
            hess=self._hess,
            dimension=self.dimension,
            domain=self.domain,
            guillemin_type=self.guillemin_type,
        )

    def scale(self, r):
        r = float(r)
        return SmoothConvexFunc(
            value=lambda p: r * self._value(p),
            grad=lambda p: r * self._grad(p),
            hess=lambda p: r * self._hess(p),
            dimension=self.dimension,
            domain=self.domain,
            guillemin_type=self.guillemin_type,
        )

    def add(self, other: "SmoothConvexFunc"):
        return SmoothConvexFunc(
            value=lambda p: self._value(p) + other._value(p),
            grad=lambda p: self._grad(p) + other._grad(p),
            hess=lambda p: self._hess(p) + other._hess(p),
            dimension=self.dimension,
            domain=self.domain or other.domain,
            guillemin_type=self.guillemin_type or other.guillemin_type,
        )


def from_expressions(value, grad, hess, dimension, domain=None):
    """SmoothConvexFunc from vectorized lambdas (no convexity check)."""
    return SmoothConvexFunc(value, grad, hess, dimension, domain=domain)


class MeshConvexFunc:
    """Piecewise-linear function from per-vertex values on a mesh."""

    def __init__(self, mesh: Mesh, values, p_o_index=None, normalized=False):
        self.mesh = mesh
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (mesh.num_vertices,):
            raise ValueError("one value per mesh vertex required")
        self.p_o_index = p_o_index
        self.normalized = normalized

    @property
    def dimension(self):
        return self.mesh.dimension

    @property
    def domain(self):
        return self.mesh.polytope

    def __call__(self, x):
        pts, single = _pts(x, self.dimension)
        ids, bary = self.mesh.locate(pts)
        if np.any(ids < 0):
            bad = pts[ids < 0][0]
            raise EvaluationOutsideDomain(f"point {bad} is outside the mesh")
        vals = np.sum(self.values[self.mesh.cells[ids]] * bary, axis=1)
        return _unwrap(vals, single)

    def cell_gradients(self):
        """(M, n) gradient of the affine interpolant per cell."""
        m = self.mesh
        v = m.vertices[m.cells]
        u = self.values[m.cells]
        if self.dimension == 1:
            return ((u[:, 1] - u[:, 0]) / (v[:, 1, 0] - v[:, 0, 0]))[:, None]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        du1 = u[:, 1] - u[:, 0]
        du2 = u[:, 2] - u[:, 0]
        gx = (du1 * e2[:, 1] - du2 * e1[:, 1]) / det
        gy = (-du1 * e2[:, 0] + du2 * e1[:, 0]) / det
        return np.column_stack([gx, gy])

    def convexity_margins(self):
        """Per-hinge slack of the discrete convexity inequalities (>= 0 iff convex)."""
        m = self.mesh
        u = self.values
        if self.dimension == 1:
            l, c, r = m.hinges.T
            xl, xc, xr = (m.vertices[i, 0] for i in (l, c, r))
            return (u[r] - u[c]) / (xr - xc) - (u[c] - u[l]) / (xc - xl)
        idx, coef = convexity_coefficients(m)
        return np.sum(u[idx] * coef, axis=1)

    def is_discretely_convex(self, slack=1e-12):
        if len(self.mesh.hinges) == 0:
            return True
        return bool(np.min(self.convexity_margins()) >= -slack)

    def boundary_norm_weights(self):
        """Vertex weights b with integral of u dsigma = b . values (exact for PL u)."""
        m = self.mesh
        P = m.polytope
        b = np.zeros(m.num_vertices)
        if self.dimension == 1:
            for v, facets in m.boundary_facets.items():
                for k in facets:
                    b[v] += P.boundary_weights[k]
            return b
        for (a, c), k in m.boundary_edges():
            L = np.linalg.norm(m.vertices[c] - m.vertices[a])
            b[a] += 0.5 * L * P.boundary_weights[k]
            b[c] += 0.5 * L * P.boundary_weights[k]
        return b

    def with_values(self, values, normalized=False):
        return MeshConvexFunc(self.mesh, values, p_o_index=self.p_o_index,
                              normalized=normalized)


def convexity_coefficients(mesh: Mesh):
    """2D hinge inequalities: rows (p, q, r, s) with sum(coef * u[idx]) >= 0.

    s is written in the barycentric frame of triangle (p, q, r); convexity of
    the interpolant across the shared edge (p, q) is u_s - a u_p - b u_q -
    c u_r >= 0.
    """
    m = mesh
    idx = m.hinges  # (E, 4): p, q, r, s
    vp = m.vertices[idx[:, 0]]
    vq = m.vertices[idx[:, 1]]
    vr = m.vertices[idx[:, 2]]
    vs = m.vertices[idx[:, 3]]
    e1 = vq - vp
    e2 = vr - vp
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    rhs = vs - vp
    beta = (rhs[:, 0] * e2[:, 1] - rhs[:, 1] * e2[:, 0]) / det
    gamma = (-rhs[:, 0] * e1[:, 1] + rhs[:, 1] * e1[:, 0]) / det
    alpha = 1.0 - beta - gamma
    coef = np.column_stack([-alpha, -beta, -gamma, np.ones(len(idx))])
    return idx, coef


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def guillemin_potential(P: Polytope) -> SmoothConvexFunc:
    """u_o(x) = sum_k delta_k(x) log delta_k(x), with analytic derivatives.

    The value extends continuously by 0 log 0 = 0 onto the facets; gradient
    and Hessian require strictly positive gaps and raise otherwise.
    """
    normals = P.normals
    tol = 1e-12 * max(1.0, P._scale)

    def value(pts):
        g = P.gaps(pts)
        if np.any(g < -tol):
            raise EvaluationOutsideDomain("Guillemin potential asked outside the closure")
        gc = np.maximum(g, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(gc > 0.0, gc * np.log(np.where(gc > 0.0, gc, 1.0)), 0.0)
        return np.sum(term, axis=-1)

    def grad(pts):
        g = P.gaps(pts)
        if np.any(g <= 0.0):
            raise EvaluationOutsideDomain("Guillemin gradient needs interior points")
        return (1.0 + np.log(g)) @ normals

    def hess(pts):
        g = P.gaps(pts)
        if np.any(g <= 0.0):
            raise EvaluationOutsideDomain("Guillemin Hessian needs interior points")
        outer = normals[:, :, None] * normals[:, None, :]  # (K, n, n)
        return np.einsum("mk,kij->mij", 1.0 / g, outer)

    return SmoothConvexFunc(value, grad, hess, P.dimension, domain=P,
                            guillemin_type=True)


def supporting_affine(u, p_o) -> AffineFunc:
    """A supporting affine function of u at p_o (deterministic subgradient choice).

    At kinks the lexicographically smallest extreme subgradient is used.
    """
    p = np.atleast_1d(np.asarray(p_o, dtype=float))
    if isinstance(u, AffineFunc):
        return u
    if isinstance(u, PLConvexFunc):
        grads = u.active_gradients(p)
        g = min((tuple(row) for row in grads))
        g = np.asarray(g)
        val = u(p)
    elif isinstance(u, MeshConvexFunc):
        vi = u.mesh.nearest_vertex(p)
        if np.linalg.norm(u.mesh.vertices[vi] - p) > 1e-9 * max(1.0, u.domain._scale):
            raise ValueError("normalization point must be a mesh vertex")
        cells = np.where(np.any(u.mesh.cells == vi, axis=1))[0]
        grads = u.cell_gradients()[cells]
        g = np.asarray(min(tuple(row) for row in grads))
        val = u.values[vi]
        p = u.mesh.vertices[vi]
    else:
        g = np.atleast_1d(u.grad(p))
        val = u(p)
    return AffineFunc(float(val - g @ p), tuple(g))


def normalize(u, p_o):
    """u minus its supporting affine at p_o: nonnegative, vanishing at p_o."""
    ell = supporting_affine(u, p_o)
    if isinstance(u, AffineFunc):
        return AffineFunc.constant(0.0, len(u.a))
    if isinstance(u, PLConvexFunc):
        return u.shift(ell)
    if isinstance(u, MeshConvexFunc):
        vi = u.mesh.nearest_vertex(p_o)
        vals = u.values - np.asarray(ell(u.mesh.vertices))
        vals[vi] = 0.0
        vals[(vals < 0.0) & (vals > -1e-9)] = 0.0
        return MeshConvexFunc(u.mesh, vals, p_o_index=vi, normalized=True)
    return u.shift(ell)


def crease(ell: AffineFunc) -> PLConvexFunc:
    """max(0, ell) -- the elementary piecewise-linear test function."""
    return PLConvexFunc((AffineFunc.constant(0.0, len(ell.a)), ell))


_BUMP_NODES = 32


def _bump(t):
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


def _bump_d1(t):
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    s = 1.0 - t[m] ** 2
    out[m] = np.exp(-1.0 / s) * (-2.0 * t[m] / s**2)
    return out


def _bump_d2(t):
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    tm = t[m]
    s = 1.0 - tm**2
    out[m] = np.exp(-1.0 / s) * (4.0 * tm**2 / s**4 - 2.0 * (1.0 + 3.0 * tm**2) / s**3)
    return out


def _bump_rule():
    x, w = np.polynomial.legendre.leggauss(_BUMP_NODES)
    mass = float(np.dot(w, _bump(x)))
    return x, w, mass


def dilate_mollify_approx(u, P: Polytope, k: int, sup_samples=None) -> SmoothConvexFunc:
    """Smooth convex approximation of u on the closed polytope.

    Dilates toward the center of mass with ratio 1 - 1/k, then convolves with
    a tensor-product bump mollifier whose radius starts at one quarter of
    (1/k) dist(center, boundary) and halves until the sup distance to the
    dilate is at most 1/k.
    """
    if k < 2:
        raise InvalidK("dilate-and-mollify needs k >= 2")
    n = P.dimension
    xc = center_of_mass(P)
    r = 1.0 - 1.0 / k
    eps0 = (1.0 - r) / 4.0 * float(P.boundary_distance(xc))

    def dilate(pts):
        return np.asarray(u(xc[None, :] + r * (np.atleast_2d(pts) - xc[None, :])), dtype=float)

    nodes, wts, mass = _bump_rule()
    if n == 1:
        offs = nodes[:, None]
        wb = wts * _bump(nodes) / mass
        wg = wts * _bump_d1(nodes) / mass
        wh = wts * _bump_d2(nodes) / mass
    else:
        TX, TY = np.meshgrid(nodes, nodes, indexing="ij")
        offs = np.column_stack([TX.ravel(), TY.ravel()])
        bx, by = _bump(TX.ravel()), _bump(TY.ravel())
        dx, dy = _bump_d1(TX.ravel()), _bump_d1(TY.ravel())
        hx, hy = _bump_d2(TX.ravel()), _bump_d2(TY.ravel())
        ww = (wts[:, None] * wts[None, :]).ravel()
        wb = ww * bx * by / mass**2
        wgx = ww * dx * by / mass**2
        wgy = ww * bx * dy / mass**2
        whxx = ww * hx * by / mass**2
        whyy = ww * bx * hy / mass**2
        whxy = ww * dx * dy / mass**2

    if sup_samples is None:
        if n == 1:
            lo, hi = float(P.vertices[0, 0]), float(P.vertices[1, 0])
            sup_samples = np.linspace(lo, hi, 401)[:, None]
        else:
            lo = P.vertices.min(axis=0)
            hi = P.vertices.max(axis=0)
            gx = np.linspace(lo[0], hi[0], 25)
            gy = np.linspace(lo[1], hi[1], 25)
            GX, GY = np.meshgrid(gx, gy)
            grid = np.column_stack([GX.ravel(), GY.ravel()])
            sup_samples = np.vstack([grid[P.contains(grid)], P.vertices])

    def conv_value(pts, eps):
        pts = np.atleast_2d(pts)
        shifted = pts[:, None, :] - eps * offs[None, :, :]
        vals = dilate(shifted.reshape(-1, n)).reshape(pts.shape[0], -1)
        return vals @ wb

    eps = eps0
    target = 1.0 / k
    for _ in range(60):
        gap = np.max(np.abs(conv_value(sup_samples, eps) - dilate(sup_samples)))
        if gap <= target:
            break
        eps *= 0.5
    chosen = eps

    def value(pts):
        return conv_value(pts, chosen)

    if n == 1:
        def grad(pts):
            pts = np.atleast_2d(pts)
            shifted = pts[:, None, :] - chosen * offs[None, :, :]
            vals = dilate(shifted.reshape(-1, 1)).reshape(pts.shape[0], -1)
            return (vals @ wg / chosen)[:, None]

        def hess(pts):
            pts = np.atleast_2d(pts)
            shifted = pts[:, None, :] - chosen * offs[None, :, :]
            vals = dilate(shifted.reshape(-1, 1)).reshape(pts.shape[0], -1)
            return (vals @ wh / chosen**2)[:, None, None]
    else:
        def grad(pts):
            pts = np.atleast_2d(pts)
            shifted = pts[:, None, :] - chosen * offs[None, :, :]
            vals = dilate(shifted.reshape(-1, 2)).reshape(pts.shape[0], -1)
            return np.column_stack([vals @ wgx, vals @ wgy]) / chosen

        def hess(pts):
            pts = np.atleast_2d(pts)
            shifted = pts[:, None, :] - chosen * offs[None, :, :]
            vals = dilate(shifted.reshape(-1, 2)).reshape(pts.shape[0], -1)
            H = np.empty((pts.shape[0], 2, 2))
            H[:, 0, 0] = vals @ whxx / chosen**2
            H[:, 1, 1] = vals @ whyy / chosen**2
            H[:, 0, 1] = H[:, 1, 0] = vals @ whxy / chosen**2
            return H

    return SmoothConvexFunc(value, grad, hess, n, domain=P,
                            meta={"epsilon": chosen, "ratio": r, "k": k})


def _directional(u, point, direction, forward=True):
    """One-sided derivative of t -> u(point + t*direction) at t = 0."""
    d = np.asarray(direction, dtype=float)
    p = np.asarray(point, dtype=float)
    sgn = 1.0 if forward else -1.0

    if isinstance(u, AffineFunc):
        return float(u.gradient() @ d)
    if isinstance(u, PLConvexFunc):
        grads = u.active_gradients(p) @ d
        return float(np.max(grads)) if forward else float(np.min(grads))
    if isinstance(u, MeshConvexFunc):
        # exact piece slope by halving until two difference quotients agree
        t = 1e-3
        prev = None
        for _ in range(50):
            q = (u(p + sgn * t * d) - u(p)) / (sgn * t)
            if prev is not None and abs(q - prev) <= 1e-12 * max(1.0, abs(q)):
                return float(q)
            prev = q
            t *= 0.5
        return float(prev)
    # smooth: one-sided stencil at 1e-4 with one Richardson step
    h = 1e-4
    d1 = (u(p + sgn * h * d) - u(p)) / (sgn * h)
    d2 = (u(p + sgn * 0.5 * h * d) - u(p)) / (sgn * 0.5 * h)
    return float(2.0 * d2 - d1)


def segment_ma_measure(u, a, b, P: Polytope | None = None, tol=1e-9) -> float:
    """Monge-Ampere mass of u restricted to the open segment (a, b).

    Equals w'(b-) - w'(a+) for w the restriction parametrized by arclength;
    nonnegative for convex u.  The segment closure must stay strictly inside
    the polytope.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if P is None:
        P = getattr(u, "domain", None)
    if P is not None:
        if min(P.boundary_distance(a), P.boundary_distance(b)) <= tol:
            raise SegmentTouchesBoundary("segment must be strictly interior")
    d = b - a
    L = np.linalg.norm(d)
    if L == 0.0:
        return 0.0
    d = d / L
    right_at_a = _directional(u, a, d, forward=True)
    left_at_b = _directional(u, b, d, forward=False)
    return float(left_at_b - right_at_a)
