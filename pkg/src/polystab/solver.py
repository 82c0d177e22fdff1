"""Solvers for the fourth-order equation sum_ij d^2 u^{ij}/dx_i dx_j = -A.

1D admits a closed integration: w = 1/u'' solves w'' = -A with w(p) = 0 and
w'(p) equal to the boundary weight at p; the remaining endpoint conditions
are an overdetermined compatibility test on A.  2D minimizes the discretized
Mabuchi energy over corrections u = u_o + f by gradient descent with an
Armijo backtracking line search, keeping every accepted iterate strictly
convex on the quadrature samples.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .convex import SmoothConvexFunc, guillemin_potential
from .errors import IncompatibleA, LineSearchStall, LostConvexity, NonpositiveW
from .fields import QuadraticPoly
from .functionals import FunctionalEvaluator, as_field, field_degree, mesh_linear_forms
from .hessfit import HessianSurrogate, components_to_matrices
from .mesh import Mesh
from .polytope import Polytope, center_of_mass
from .quadrature import gauss_rule, mesh_graded_scheme

COMPAT_TOL = 1e-8


# ---------------------------------------------------------------------------
# 1D closed-form path
# ---------------------------------------------------------------------------

@dataclass
class Compatibility1D:
    w_end: float          # w(q), must vanish
    wprime_end: float     # w'(q) + right boundary weight, must vanish
    w_min: float          # min of w over the open interval
    compatible: bool


class _PanelIntegrator:
    """Deterministic composite Gauss integration on [p_o, x] with end grading."""

    def __init__(self, nodes=12, uniform=16, graded=14):
        self.t, self.w = gauss_rule(nodes)
        self.uniform = uniform
        self.graded = graded

    def panels(self, a, b):
        if a == b:
            return np.zeros(0), np.zeros(0)
        bp = [0.0]
        g = [2.0 ** (-j) for j in range(self.graded, 0, -1)]
        frac = 0.25
        bp.extend([frac * v for v in g])
        bp.extend(np.linspace(frac, 1.0 - frac, self.uniform + 1).tolist())
        bp.extend([1.0 - frac * v for v in reversed(g)])
        bp.append(1.0)
        bp = np.unique(np.clip(bp, 0.0, 1.0))
        xs = a + (b - a) * bp
        starts = xs[:-1]
        widths = np.diff(xs)
        pts = (starts[:, None] + widths[:, None] * self.t[None, :]).ravel()
        wts = (widths[:, None] * self.w[None, :]).ravel()
        return pts, wts


def _poly_antiderivative(coeffs):
    out = [0.0]
    for k, c in enumerate(coeffs):
        out.append(c / (k + 1))
    return np.array(out)


def solve_1d(P: Polytope, A, p_o=None, tol=COMPAT_TOL):
    """Solve the 1D equation; returns (u, Compatibility1D).

    Integrates w'' = -A from the left endpoint with w(p) = 0 and w'(p) the
    sigma-weight there, then checks w(q) = 0 and w'(q) = -(right weight).
    Raises IncompatibleA when the overdetermined conditions fail and
    NonpositiveW when w is not positive inside.
    """
    if P.dimension != 1:
        raise ValueError("solve_1d needs an interval")
    p = float(P.vertices[0, 0])
    q = float(P.vertices[1, 0])
    w_left = float(P.boundary_weights[int(np.argmin(P.gaps([[p]])[0]))])
    w_right = float(P.boundary_weights[int(np.argmin(P.gaps([[q]])[0]))])

    Af = as_field(A, 1)
    deg = field_degree(A)
    if deg is not None:
        # exact polynomial integration: w = w_left (x-p) - C(x), C'' = A, C(p) = C'(p) = 0
        if isinstance(A, QuadraticPoly):
            base = [A.coeffs[0], A.coeffs[1], A.coeffs[3]]
        elif deg == 0:
            base = [float(Af(np.array([[p]]))[0])]
        else:  # AffineFunc
            base = [A.a0, A.a[0]]
        # rewrite A in s = x - p so the initial conditions sit at s = 0
        from math import comb
        shifted = np.zeros(len(base))
        for k, c in enumerate(base):
            for i in range(k + 1):
                shifted[i] += c * comb(k, i) * p ** (k - i)
        B = _poly_antiderivative(shifted)
        C = _poly_antiderivative(B)

        def w_fn(x):
            s = np.asarray(x, dtype=float) - p
            acc = np.zeros_like(s)
            for c in reversed(C):
                acc = acc * s + c
            return w_left * s - acc

        def wprime_fn(x):
            s = np.asarray(x, dtype=float) - p
            acc = np.zeros_like(s)
            for c in reversed(B):
                acc = acc * s + c
            return w_left - acc
    else:
        integ = _PanelIntegrator()

        def wprime_fn(x):
            xs = np.atleast_1d(np.asarray(x, dtype=float))
            out = np.empty_like(xs)
            for i, xi in enumerate(xs):
                pts, wts = integ.panels(p, xi)
                out[i] = w_left - float(np.dot(wts, Af(pts[:, None])))
            return out if np.ndim(x) else float(out[0])

        def w_fn(x):
            xs = np.atleast_1d(np.asarray(x, dtype=float))
            out = np.empty_like(xs)
            for i, xi in enumerate(xs):
                pts, wts = integ.panels(p, xi)
                out[i] = w_left * (xi - p) - float(np.dot(wts, (xi - pts) * Af(pts[:, None])))
            return out if np.ndim(x) else float(out[0])

    scale = max(1.0, w_left * (q - p))
    r_end = float(w_fn(np.array([q]))[0] if np.ndim(w_fn(q)) else w_fn(q))
    r_slope = float(wprime_fn(q)) + w_right
    compatible = abs(r_end) <= tol * scale and abs(r_slope) <= tol * scale
    xs = np.linspace(p, q, 4097)[1:-1]
    wmin = float(np.min(w_fn(xs)))
    report = Compatibility1D(r_end, r_slope, wmin, compatible)
    if not compatible:
        raise IncompatibleA(
            f"endpoint conditions fail: w(q)={r_end:.3e}, w'(q)+w_r={r_slope:.3e}",
            w_end=r_end, wprime_end=r_slope)
    if wmin <= 0.0:
        raise NonpositiveW(f"w reaches {wmin:.3e} inside the interval")

    if p_o is None:
        p_o = float(center_of_mass(P)[0])
    else:
        p_o = float(np.atleast_1d(p_o)[0])
    integ_u = _PanelIntegrator()

    def u_value(pts):
        xs = np.atleast_2d(pts)[:, 0]
        out = np.empty_like(xs)
        for i, xi in enumerate(xs):
            s, wt = integ_u.panels(p_o, xi)
            out[i] = float(np.dot(wt, (xi - s) / w_fn(s))) if len(s) else 0.0
        return out

    def u_grad(pts):
        xs = np.atleast_2d(pts)[:, 0]
        out = np.empty_like(xs)
        for i, xi in enumerate(xs):
            s, wt = integ_u.panels(p_o, xi)
            out[i] = float(np.dot(wt, 1.0 / w_fn(s))) if len(s) else 0.0
        return out[:, None]

    def u_hess(pts):
        xs = np.atleast_2d(pts)[:, 0]
        return (1.0 / w_fn(xs))[:, None, None]

    u = SmoothConvexFunc(u_value, u_grad, u_hess, 1, domain=P, guillemin_type=True,
                         meta={"w": w_fn, "p_o": p_o})
    return u, report


# ---------------------------------------------------------------------------
# 2D descent on the discretized energy
# ---------------------------------------------------------------------------

@dataclass
class SolverState:
    mesh: Mesh
    free: np.ndarray
    f: np.ndarray                 # correction at free vertices
    energy_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    convexity_margin: float = np.inf
    iterations: int = 0
    converged: bool = False
    meta: dict = field(default_factory=dict)

    def full_values(self):
        vals = np.zeros(self.mesh.num_vertices)
        vals[self.free] = self.f
        return vals


class DiscreteEnergy:
    """Discretized F_A over corrections to the Guillemin potential.

    The Hessian of u = u_o + f combines the analytic Guillemin Hessian with
    the quadric-fit surrogate of the piecewise-linear correction, sampled on
    a boundary-graded quadrature; the gradient follows analytically from the
    (linear) surrogate assembly.
    """

    def __init__(self, P: Polytope, A, mesh: Mesh, margin=None, layers=20,
                 degree=6):
        self.polytope = P
        self.mesh = mesh
        if margin is None:
            # two clamped rings: free hats then pair against the Guillemin
            # inverse Hessian only on interior cells, where the quadric-fit
            # assembly reproduces the integration-by-parts identity exactly
            margin = 2.5 * mesh.h
        self.margin = margin
        dist = P.boundary_distance(mesh.vertices)
        self.free = np.where(dist > margin)[0]
        self.scheme = mesh_graded_scheme(mesh, degree=degree, layers=layers,
                                         tangential_layers=8)
        self.u_o = guillemin_potential(P)
        pts = self.scheme.interior_points
        self.wq = self.scheme.interior_weights
        self.H_o = self.u_o.hess(pts)
        sur = HessianSurrogate(mesh)
        self.surrogate = sur
        op = sur.point_operator(pts).tocsc()
        self.op_free = op[:, self.free].tocsr() if len(self.free) else op[:, :0].tocsr()
        b, a = mesh_linear_forms(mesh, A, degree=degree)
        self.lin_free = (b - a)[self.free]
        ev = FunctionalEvaluator(P, A, degree=degree, layers=40)
        self.evaluator = ev
        self.lin_const = ev.linear_functional(self.u_o)
        self.npts = pts.shape[0]

    def hessians(self, f):
        comp = self.op_free @ f
        H = components_to_matrices(comp, 2)
        return self.H_o + H

    def dets(self, f):
        H = self.hessians(f)
        return H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]

    def value(self, f):
        det = self.dets(f)
        if np.any(det <= 0.0):
            return np.inf, 0.0
        margin = float(np.min(det))
        val = -float(np.dot(self.wq, np.log(det)))
        return val + self.lin_const + float(self.lin_free @ f), margin

    def gradient(self, f):
        H = self.hessians(f)
        det = H[:, 0, 0] * H[:, 1, 1] - H[:, 0, 1] * H[:, 1, 0]
        z = np.empty(3 * self.npts)
        z[0::3] = self.wq * H[:, 1, 1] / det
        z[1::3] = self.wq * (-2.0 * H[:, 0, 1] / det)
        z[2::3] = self.wq * H[:, 0, 0] / det
        return -(self.op_free.T @ z) + self.lin_free


def solve_2d_descent(P: Polytope, A, mesh: Mesh, max_iter=5000, tol=1e-6,
                     step_rule="bb", margin=None, f0=None,
                     layers=20) -> SolverState:
    """Minimize the discretized energy by descent with Armijo backtracking.

    Every accepted step keeps det Hess positive on the quadrature samples
    (infeasible trial steps are halved like Armijo failures).  Stops when the
    gradient sup-norm drops below tol or after max_iter accepted steps.
    """
    energy = DiscreteEnergy(P, A, mesh, margin=margin, layers=layers)
    nfree = len(energy.free)
    f = np.zeros(nfree) if f0 is None else np.asarray(f0, dtype=float).copy()
    F, cmargin = energy.value(f)
    if not np.isfinite(F):
        raise LostConvexity("initial iterate is not convex on the samples")
    state = SolverState(mesh=mesh, free=energy.free, f=f,
                        energy_history=[F], residual_history=[],
                        convexity_margin=cmargin,
                        meta={"step_rule": step_rule, "margin": energy.margin,
                              "tol": tol})
    state.energy = energy

    prev_f = None
    prev_g = None
    step = None
    for it in range(max_iter):
        g = energy.gradient(f)
        gnorm = float(np.max(np.abs(g))) if nfree else 0.0
        state.residual_history.append(gnorm)
        if gnorm <= tol:
            state.converged = True
            break
        gg = float(g @ g)
        if step_rule == "bb" and prev_f is not None:
            df = f - prev_f
            dg = g - prev_g
            denom = float(df @ dg)
            t = float(df @ df) / denom if denom > 0 else 1.0
            t = float(np.clip(t, 1e-12, 1e4))
        elif step is not None:
            t = step * 2.0
        else:
            t = 1.0 / max(gnorm, 1.0)
        accepted = False
        t0 = t
        while t >= 1e-14:
            trial = f - t * g
            Ft, cm = energy.value(trial)
            if np.isfinite(Ft) and Ft <= F - 1e-4 * t * gg and Ft < F:
                prev_f, prev_g = f, g
                f, F, cmargin = trial, Ft, cm
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if 1e-4 * t0 * gg < 8.0 * np.finfo(float).eps * abs(F):
                # the Armijo target is below float resolution of the energy:
                # numerically stationary, not a stall
                state.meta["stopped"] = "float-resolution"
                break
            raise LineSearchStall(f"step fell below 1e-14 at iteration {it}")
        step = t
        state.f = f
        state.energy_history.append(F)
        state.convexity_margin = cmargin
        state.iterations = it + 1
    return state


def solution_function(state: SolverState) -> SmoothConvexFunc:
    """u_o + correction as an evaluable function with a surrogate Hessian."""
    energy = state.energy
    mesh = state.mesh
    u_o = energy.u_o
    vals = state.full_values()
    from .convex import MeshConvexFunc

    fmesh = MeshConvexFunc(mesh, vals)
    sur = energy.surrogate

    def value(pts):
        return u_o(np.atleast_2d(pts)) + np.asarray(fmesh(np.atleast_2d(pts)), dtype=float)

    def grad(pts):
        pts = np.atleast_2d(pts)
        ids, _ = mesh.locate(pts)
        return u_o.grad(pts) + fmesh.cell_gradients()[ids]

    def hess(pts):
        pts = np.atleast_2d(pts)
        comp = sur.point_operator(pts) @ vals
        return u_o.hess(pts) + components_to_matrices(comp, 2)

    return SmoothConvexFunc(value, grad, hess, 2, domain=mesh.polytope,
                            guillemin_type=True, meta={"state": state})


def residual(u, A, P: Polytope, margin=0.05, samples=9, h_fd=1e-3,
             evaluator: FunctionalEvaluator | None = None):
    """(sup, weighted L2, per-sample values) of |sum (u^{ij})_{,ij} + A|.

    Samples live on a uniform interior grid at boundary distance >= margin.
    """
    if evaluator is None:
        evaluator = FunctionalEvaluator(P, A)
    Af = as_field(A, P.dimension)
    if P.dimension == 1:
        lo, hi = float(P.vertices[0, 0]), float(P.vertices[1, 0])
        pts = np.linspace(lo + margin, hi - margin, samples)[:, None]
        meas = (hi - lo - 2 * margin) / samples
    else:
        lo = P.vertices.min(axis=0)
        hi = P.vertices.max(axis=0)
        gx = np.linspace(lo[0], hi[0], samples * 2 + 1)
        gy = np.linspace(lo[1], hi[1], samples * 2 + 1)
        GX, GY = np.meshgrid(gx, gy)
        grid = np.column_stack([GX.ravel(), GY.ravel()])
        keep = P.boundary_distance(grid) >= margin
        pts = grid[keep]
        meas = (gx[1] - gx[0]) * (gy[1] - gy[0])
    dev = np.abs(evaluator.abreu_operator(u, pts, h_fd=h_fd) - Af(pts))
    sup = float(np.max(dev))
    l2 = float(np.sqrt(np.sum(dev**2) * meas))
    return sup, l2, dev
