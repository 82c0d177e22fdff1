from fractions import Fraction

import numpy as np
import pytest

from polystab.errors import LPInfeasible, LPUnbounded
from polystab.simplex_lp import solve_lp


def test_basic_optimum():
    A = np.array([[1.0, 1.0, 1.0, 0.0], [1.0, 3.0, 0.0, 1.0]])
    b = np.array([4.0, 6.0])
    c = np.array([-1.0, -2.0, 0.0, 0.0])
    res = solve_lp(c, A, b)
    assert res.value == pytest.approx(-5.0)
    assert np.allclose(res.x, [3.0, 1.0, 0.0, 0.0])


def test_exact_mode_matches_float():
    A = np.array([[1.0, 1.0, 1.0, 0.0], [1.0, 3.0, 0.0, 1.0]])
    b = np.array([4.0, 6.0])
    c = np.array([-1.0, -2.0, 0.0, 0.0])
    res = solve_lp(c, A, b, mode="exact")
    assert res.value == Fraction(-5)
    assert list(res.x) == [Fraction(3), Fraction(1), Fraction(0), Fraction(0)]


def test_infeasible():
    with pytest.raises(LPInfeasible):
        solve_lp(np.array([1.0]), np.array([[1.0]]), np.array([-1.0]))


def test_unbounded():
    with pytest.raises(LPUnbounded):
        solve_lp(np.array([-1.0, 0.0]), np.array([[1.0, -1.0]]), np.array([0.0]))


def test_degenerate_and_redundant():
    res = solve_lp(np.array([-1.0, 0.0, 0.0]),
                   np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 1.0]]),
                   np.array([0.0, 1.0]))
    assert res.value == pytest.approx(0.0)
    res2 = solve_lp(np.array([1.0, 1.0]),
                    np.array([[1.0, 1.0], [2.0, 2.0]]),
                    np.array([1.0, 2.0]))
    assert res2.value == pytest.approx(1.0)


def test_determinism():
    rng = np.random.default_rng(0)
    A = rng.uniform(-1, 1, size=(6, 10))
    x0 = rng.uniform(0, 1, size=10)
    b = A @ x0
    c = rng.uniform(-1, 1, size=10)
    r1 = solve_lp(c, A, b)
    r2 = solve_lp(c, A, b)
    assert np.array_equal(r1.x, r2.x)
    assert r1.iterations == r2.iterations


def test_bland_handles_cycling_prone_problem():
    # classic Beale cycling example (cycles under naive Dantzig pivoting)
    c = np.array([-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0])
    A = np.array([
        [0.25, -60.0, -1.0 / 25.0, 9.0, 1.0, 0.0, 0.0],
        [0.5, -90.0, -1.0 / 50.0, 3.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
    ])
    b = np.array([0.0, 0.0, 1.0])
    res = solve_lp(c, A, b)
    assert res.value == pytest.approx(-0.05)


def test_float_vs_exact_on_stability_instance():
    from polystab.mesh import make_mesh
    from polystab.polytope import interval
    from polystab.stability import StabilityLP

    P = interval()
    m = make_mesh(P, 1 / 8)
    lp = StabilityLP(P, 2.0, m, p_o=[0.5])
    vf, _, _ = lp.minimize_linear_functional(mode="float")
    vx, _, _ = lp.minimize_linear_functional(mode="exact")
    assert vf == pytest.approx(float(vx), abs=1e-12)
    assert float(vx) == pytest.approx(0.5, abs=1e-12)
