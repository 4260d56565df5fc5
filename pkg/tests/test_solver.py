import math

import numpy as np
import pytest

from ls2d.errors import MaxIterations
from ls2d.geometry import Circle, Scatterer, constant_contrast
from ls2d.oracle import DiscSeriesSolution
from ls2d.solver import (LSOperator, SolverOptions, error_metrics, gmres_solve, incident_field,
                         interpolate_solution, observed_order, scatter_solve)


@pytest.fixture(scope="module")
def small_ops():
    sc = Scatterer(Circle(1.0), 0.3, constant_contrast(math.sqrt(2.0)))
    return {b: LSOperator(sc, 2.0, "2x17x9+33x17" if b == "atm" else "2x17x9+33x33", b) for b in ("atm", "pct")}


@pytest.mark.parametrize("backend", ["atm", "pct"])
def test_apply_is_linear(small_ops, backend, rng):
    A = small_ops[backend]
    u = rng.standard_normal(A.size) + 1j * rng.standard_normal(A.size)
    v = rng.standard_normal(A.size) + 1j * rng.standard_normal(A.size)
    lhs = A.apply(2.0 * u - 0.5j * v)
    rhs = 2.0 * A.apply(u) - 0.5j * A.apply(v)
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(rhs).max()


def test_zero_contrast_needs_one_iteration():
    sc = Scatterer(Circle(1.0), 0.3, constant_contrast(1.0))
    sol = scatter_solve(sc, 2.0, "2x17x9+33x17", "atm")
    assert sol.report.iterations == 1
    assert np.abs(sol.scattered).max() <= 1e-12


def test_accelerated_and_direct_operators_agree(rng):
    sc = Scatterer(Circle(1.0), 0.3, constant_contrast(math.sqrt(2.0)))
    A = LSOperator(sc, 2 * math.pi, "2x33x17+65x33", "atm", SolverOptions(accel=True))
    B = LSOperator(sc, 2 * math.pi, "2x33x17+65x33", "atm", SolverOptions(accel=False))
    v = rng.standard_normal(A.size) + 1j * rng.standard_normal(A.size)
    a, b = A.apply(v), B.apply(v)
    assert np.abs(a - b).max() <= 1e-7 * np.abs(b).max()


@pytest.mark.parametrize("backend", ["atm", "pct"])
def test_potential_at_nodes_reproduces_apply(small_ops, backend, rng):
    A = small_ops[backend]
    v = rng.standard_normal(A.size) + 1j * rng.standard_normal(A.size)
    full = A.apply(v)
    NB = A.grid.NB
    sel = NB + np.concatenate([A.sel_omega_b[:20], A.sel_interior[:20]])
    pts = A.potential_at(v, A.x[sel], A.y[sel])
    assert np.abs(pts - full[sel]).max() <= 1e-7 * np.abs(full).max()


def test_small_disc_solve_is_accurate():
    k = 2.0
    sc = Scatterer(Circle(1.0), 0.3, constant_contrast(math.sqrt(2.0)))
    exact = DiscSeriesSolution(k, math.sqrt(2.0)).field
    sol = scatter_solve(sc, k, "2x33x17+65x33", "atm", exact=exact)
    assert sol.report.converged
    assert sol.report.errors["eps_inf"] < 1e-4
    # off-grid evaluation through the equation
    tx, ty = np.array([0.1, -0.3, 0.55]), np.array([0.2, 0.4, -0.6])
    assert np.abs(interpolate_solution(sol, tx, ty) - exact(tx, ty)).max() < 1e-4


def test_gmres_failure_raises():
    M = np.diag(np.linspace(1, 1e4, 50)).astype(complex)
    with pytest.raises(MaxIterations):
        gmres_solve(lambda u: M @ u, np.ones(50), tol=1e-14, restart=5, maxit=10)
    u, rep = gmres_solve(lambda u: M @ u, np.ones(50), tol=1e-10, restart=50, maxit=100)
    assert rep.converged and np.allclose(M @ u, 1.0, atol=1e-6)


def test_metrics_and_orders():
    e = error_metrics(np.array([1.0, 2.1]), np.array([1.0, 2.0]))
    assert e["eps_inf"] == pytest.approx(0.05)
    assert e["eps_2"] == pytest.approx(0.1 / math.sqrt(5))
    assert np.allclose(observed_order([1.0, 0.125, 1 / 64]), [3.0, 3.0])
    assert np.allclose(incident_field(2.0, np.array([0.5]), np.array([0.0])), np.exp(1j))
    assert np.allclose(incident_field(2.0, np.array([0.0]), np.array([0.5]), (0.0, 3.0)), np.exp(1j))
