"""Acceptance suite.  Every test records one PASS/FAIL line, printed in the
terminal summary under "acceptance criteria"."""
import math
import time

import numpy as np
import pytest

from ls2d.accel import EquivalentSourceAccelerator
from ls2d.base_pct import PCTOperator
from ls2d.boundary_quad import RegularNear, SingularQuadrature
from ls2d.geometry import (Circle, PatchCover, Scatterer, constant_contrast, eta, gaussian_contrast, make_curve)
from ls2d.grids import CellDecomposition, GridSpec, distance_class_index, BoundaryGrid
from ls2d.oracle import DiscSeriesSolution, disc_exact_volume_potential, disc_series_potential
from ls2d.solver import (LSOperator, SolverOptions, error_metrics, interpolate_solution, observed_order,
                         scatter_solve)

from radial_reference import radial_potential

SQRT2 = math.sqrt(2.0)
DISC = Scatterer(Circle(1.0), 0.3, constant_contrast(SQRT2))

VOLPOT_LADDERS = {
    "atm": ["2x9x5+17x9", "2x17x9+33x17", "2x33x17+65x33", "2x65x33+129x65"],
    "pct": ["2x9x5+17x17", "2x17x9+33x33", "2x33x17+65x65", "2x65x33+129x129"],
}


# ----------------------------------------------------------------------------
# 1. volume potential, disc, kappa a = 4
# ----------------------------------------------------------------------------

@pytest.mark.slow
@pytest.mark.parametrize("backend,bound", [("atm", 3.3e-5), ("pct", 7.6e-5)])
def test_c1_volume_potential_convergence(backend, bound, record):
    k, m = 2.0, -1.0
    t0 = time.perf_counter()
    errs = []
    for spec in VOLPOT_LADDERS[backend]:
        A = LSOperator(DISC, k, spec, backend)
        approx = A.apply(m * np.exp(1j * k * A.x))
        errs.append(error_metrics(approx, disc_exact_volume_potential(k, m, 1.0, A.x, A.y))["eps_inf"])
    elapsed = time.perf_counter() - t0
    order = observed_order(errs)[-1]
    ok = errs[-1] <= bound and order >= 3 and elapsed <= 120
    record(f"C1 volume potential ({backend}, {VOLPOT_LADDERS[backend][-1]})", ok,
           f"eps_inf={errs[-1]:.2e} (<= {bound:.1e}), last order={order:.2f} (>= 3), ladder time={elapsed:.0f}s (<= 120)")
    assert ok


# ----------------------------------------------------------------------------
# 2. scattering by a disc, kappa a = 4 pi
# ----------------------------------------------------------------------------

@pytest.mark.slow
@pytest.mark.parametrize("backend,spec,bound", [("atm", "2x65x33+129x65", 8.5e-4), ("pct", "2x65x33+129x129", 7.3e-4)])
def test_c2_disc_scattering(backend, spec, bound, record):
    k = 2 * math.pi
    exact = DiscSeriesSolution(k, SQRT2).field
    t0 = time.perf_counter()
    sol = scatter_solve(DISC, k, spec, backend, exact=exact)
    elapsed = time.perf_counter() - t0
    e, it = sol.report.errors["eps_inf"], sol.report.iterations
    ok = e <= bound and it <= 60 and elapsed <= 300
    record(f"C2 disc scattering ({backend}, {spec})", ok,
           f"eps_inf={e:.2e} (<= {bound:.1e}), numIt={it} (<= 60), time={elapsed:.0f}s (<= 300)")
    assert ok


# ----------------------------------------------------------------------------
# 3. bean, kappa a = 10 pi, variable contrast, self-reference
# ----------------------------------------------------------------------------

BEAN_LADDERS = {
    "atm": ["2x9x5+17x9", "2x17x9+33x17", "2x33x17+65x33", "2x65x33+129x65"],
    "pct": ["2x9x5+17x17", "2x17x9+33x33", "2x33x17+65x65", "2x65x33+129x129"],
}


@pytest.mark.slow
@pytest.mark.parametrize("backend", ["atm", "pct"])
def test_c3_bean_self_convergence(backend, record):
    curve = make_curve("bean")
    sc = Scatterer(curve, 0.08, gaussian_contrast(0.5, 1.0))
    k = 10 * math.pi / curve.diameter()
    ladder = BEAN_LADDERS[backend]
    ref = scatter_solve(sc, k, GridSpec.parse(ladder[-1]).refined(), backend)
    errs, its = [], []
    for spec in ladder:
        sol = scatter_solve(sc, k, spec, backend)
        errs.append(error_metrics(sol.total, interpolate_solution(ref, sol.x, sol.y))["eps_inf"])
        its.append(sol.report.iterations)
    orders = observed_order(errs)
    from_third = orders[2:]
    ok = bool(np.all(from_third >= 3))
    record(f"C3 bean self-convergence ({backend})", ok,
           "eps_inf=" + ", ".join(f"{e:.2e}" for e in errs) + "; orders=" + ", ".join(f"{o:.2f}" for o in orders)
           + f" (>= 3 from the third refinement); numIt={its}")
    assert ok


# ----------------------------------------------------------------------------
# 4. timing ladder
# ----------------------------------------------------------------------------

@pytest.mark.slow
def test_c4_timing_ladder(record):
    k = 15.0  # kappa a = 30
    ladder = ["2x33x33+65x33", "2x65x33+129x65", "2x129x33+257x129"]
    times = {True: [], False: []}
    diffs = []
    for spec in ladder:
        out = {}
        for accel in (True, False):
            t0 = time.perf_counter()
            A = LSOperator(DISC, k, spec, "atm", SolverOptions(accel=accel))
            out[accel] = A.apply(-np.exp(1j * k * A.x))
            times[accel].append(time.perf_counter() - t0)
            del A
        diffs.append(np.abs(out[True] - out[False]).max() / np.abs(out[False]).max())
    growth = np.array(times[True][1:]) / np.array(times[True][:-1])
    ok = bool(np.all(growth <= 6.0)) and times[True][-1] < times[False][-1] and max(diffs) <= 1e-7
    record("C4 timing ladder (atm, kappa a = 30)", ok,
           "accel " + "/".join(f"{t:.1f}" for t in times[True]) + "s, un-accel "
           + "/".join(f"{t:.1f}" for t in times[False]) + "s; growth " + ", ".join(f"{g:.2f}" for g in growth)
           + f" (<= 6); accel/un-accel difference {max(diffs):.1e}")
    assert ok


# ----------------------------------------------------------------------------
# 5. oracle equivalences
# ----------------------------------------------------------------------------

def test_c5a_fft_vs_direct(rng, record):
    op = PCTOperator(16, 2.1 / 32, 2.0, p=3)
    d = rng.standard_normal((33, 33)) + 1j * rng.standard_normal((33, 33))
    a, b = op.apply(d), op.apply_direct(d)
    err = np.abs(a - b).max() / np.abs(b).max()
    ok = err <= 1e-12
    record("C5a FFT base convolution vs direct sum (33x33)", ok, f"rel err={err:.1e} (<= 1e-12)")
    assert ok


@pytest.mark.parametrize("L", [8, 16])
def test_c5b_acceleration_vs_direct(L, rng, record):
    cells = CellDecomposition(-1.0, -1.0, 2.0, L)
    sx, sy = rng.uniform(-1, 1, (2, 3000))
    tx, ty = rng.uniform(-1, 1, (2, 2000))
    acc = EquivalentSourceAccelerator(cells, 2 * math.pi, sx, sy, tx, ty)
    q = rng.standard_normal(3000) + 1j * rng.standard_normal(3000)
    err = np.abs(acc.apply(q) - acc.direct(q)).max() / np.abs(acc.direct(q)).max()
    ok = err <= 1e-7
    record(f"C5b equivalent-source acceleration vs direct ({L}x{L} cells)", ok, f"rel err={err:.1e} (<= 1e-7)")
    assert ok


@pytest.mark.slow
def test_c5c_annulus(record):
    k, tau0 = 2 * math.pi, 0.25
    g = BoundaryGrid(PatchCover(Circle(1.0), tau0, K=2), 65, 33)
    S = SingularQuadrature(g, k)
    th = np.broadcast_to(g.theta[:, :, None], g.x.shape).reshape(-1)
    R = RegularNear(g, k, S.W, g.x.ravel(), g.y.ravel(), th, None, store=False)
    v = np.ones(g.size)
    A = (S.apply(v) + R.apply(v)).reshape(g.x.shape)
    dens = lambda r: np.where((r <= 1.0) & (r >= 1 - tau0), eta(1 - np.minimum(r, 1.0), tau0), 0.0)
    err = 0.0
    for j in range(g.N2):
        ref = radial_potential(k, 1 - tau0 * j / (g.N2 - 1), g=dens)
        err = max(err, np.abs(A[:, :, j] - ref).max())
    ok = err <= 1e-6
    record("C5c boundary singular quadrature on the annulus (2x65x33)", ok, f"max err={err:.1e} (<= 1e-6)")
    assert ok


def test_c5d_series_oracle(record):
    k = 2 * math.pi
    sol = DiscSeriesSolution(k, SQRT2)
    cont = sol.continuity_residual()
    x = np.array([0.3, 0.0, 0.9, 1.5, -0.5, 1.0, 0.2])
    y = np.array([0.2, 0.0, -0.3, 0.4, 0.7, 0.0, -0.97])
    bal = np.abs(sol.field(x, y) + k * k * disc_series_potential(sol, x, y) - np.exp(1j * k * x)).max()
    ok = cont <= 1e-10 and bal <= 1e-8
    record("C5d disc series oracle", ok, f"interface continuity={cont:.1e} (<= 1e-10), LS balance={bal:.1e} (<= 1e-8)")
    assert ok


# ----------------------------------------------------------------------------
# 6. invariants
# ----------------------------------------------------------------------------

def test_c6_invariants(rng, record):
    checks = {}
    tau0 = 0.3
    checks["cut-off branches"] = (eta(0.0, tau0) == 1.0 and eta(-1.0, tau0) == 1.0 and eta(tau0, tau0) == 0.0
                                  and eta(1.0, tau0) == 0.0 and 0 < eta(0.1, tau0) < 1)
    cover = PatchCover(make_curve("bean"), 0.08, K=2)
    th = np.linspace(0, 2 * np.pi, 2001)
    checks["POU sum"] = bool(np.allclose(sum(cover.pou_theta(k, th) for k in range(2)), 1.0, atol=1e-14))
    checks["distance-class index law"] = all(distance_class_index(i, j) == i * (i + 1) // 2 + j + 1
                                             for i in range(12) for j in range(i + 1))
    cells = CellDecomposition(-1, -1, 2, 7)
    I, J = np.meshgrid(np.arange(7), np.arange(7), indexing="ij")
    I, J = I.ravel(), J.ravel()
    adj = cells.adjacent(I[:, None], J[:, None], I[None, :], J[None, :])
    checks["adjacency symmetry"] = bool(np.array_equal(adj, adj.T))
    tabulated = {"2x9x5+17x9": 243, "2x17x9+33x17": 867, "2x33x17+65x33": 3267, "2x65x33+129x65": 12675,
                 "2x129x65+257x129": 49923, "2x9x5+17x17": 379, "2x17x9+33x33": 1395, "2x33x17+65x65": 5347,
                 "2x65x33+129x129": 20931, "2x129x65+257x257": 82819}
    checks["grid unknown counts"] = all(GridSpec.parse(s).unknowns == n for s, n in tabulated.items())
    free = scatter_solve(Scatterer(Circle(1.0), 0.3, constant_contrast(1.0)), 2.0, "2x17x9+33x17", "atm")
    checks["GMRES identity (m = 0 -> 1 iteration)"] = free.report.iterations == 1
    A = LSOperator(DISC, 2.0, "2x17x9+33x17", "atm")
    u, v = rng.standard_normal((2, A.size)) + 1j * rng.standard_normal((2, A.size))
    lhs, rhs = A.apply(3 * u - 2j * v), 3 * A.apply(u) - 2j * A.apply(v)
    checks["linearity of A_h"] = bool(np.abs(lhs - rhs).max() <= 1e-12 * np.abs(rhs).max())
    ok = all(checks.values())
    record("C6 invariants", ok, ", ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert ok
