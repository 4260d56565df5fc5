"""Discrete operator A_h and the GMRES solve of u + k^2 A_h(m u) = u_inc.

Unknowns are ordered boundary-grid nodes first (patch, s-index, t-index),
then base nodes inside the scatterer in base-grid lexicographic order.

A_h(v) = A_E(E v) + A_B(v):

* A_E is the base-grid quadrature of the cut-off density E(v); it is read
  directly at base nodes and interpolated to boundary nodes;
* A_B integrates eta v over the boundary grid.  At boundary nodes it is the
  windowed singular quadrature, the smooth near remainder and the
  accelerated far field; at deep base nodes the near remainder and the far
  field; at base nodes inside the boundary region it is interpolated from
  the boundary-node values.
"""
from __future__ import annotations

import math
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, gmres

from .accel import AccelConfig, EquivalentSourceAccelerator, default_accel_cells
from .base_atm import ATMOperator, ModalDensity, angular_synthesis
from .base_pct import PCTOperator
from .boundary_quad import RegularNear, SingularQuadrature
from .errors import MaxIterations
from .geometry import Scatterer, eta
from .grids import BOUNDARY, INTERIOR, GridSpec, build_grids, classify
from .interp import BoundaryFieldInterpolator, PolarEvaluator, cartesian_interpolation_matrix


@dataclass
class SolverOptions:
    tol: float = 1e-10
    restart: int = 200
    maxit: int = 500
    accel: bool = True
    window: float | None = None  # default: default_window(N1)
    n_tau: int = 80
    pct_order: int = 3
    accel_cells: int | None = None


def default_window(N1, W=0.2, nodes=64):
    """Adjacency window half-width in patch parameter: W up to N1 = nodes + 1,
    then a fixed number of s-nodes, which keeps the windowed work per target
    bounded under refinement."""
    return W * min(1.0, nodes / (N1 - 1))


class _Timer:
    def __init__(self):
        self.totals = defaultdict(float)

    def __call__(self, name):
        timer = self

        class _Ctx:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.totals[name] += time.perf_counter() - self.t0

        return _Ctx()


class LSOperator:
    """A_h for one scatterer, wavenumber, grid spec and base backend."""

    def __init__(self, scatterer: Scatterer, kappa: float, spec: GridSpec | str, backend: str = "atm",
                 options: SolverOptions | None = None):
        if isinstance(spec, str):
            spec = GridSpec.parse(spec)
        self.scatterer, self.kappa, self.spec, self.backend = scatterer, kappa, spec, backend
        self.opts = options or SolverOptions()
        self.timer = _Timer()
        with self.timer("setup_grids"):
            self.bgrid, self.base, self.grid = build_grids(scatterer, spec, backend)
        g, b, base = self.grid, self.bgrid, self.base
        tau0 = scatterer.tau0
        self.x, self.y = g.x, g.y
        NB = g.NB
        bx, by = b.x.reshape(-1), b.y.reshape(-1)

        # base nodes: cut-off factor 1 - eta(depth), and the two target classes
        cls = base.cls.reshape(-1)[g.base_inside]
        depth = base.depth.reshape(-1)[g.base_inside]
        self.efac = np.where(cls == BOUNDARY, 1.0 - eta(np.where(np.isfinite(depth), depth, 0.0), tau0), 1.0)
        self.sel_omega_b = np.flatnonzero(cls == BOUNDARY)
        self.sel_interior = np.flatnonzero(cls == INTERIOR)
        ob_x, ob_y = g.x[NB + self.sel_omega_b], g.y[NB + self.sel_omega_b]
        in_x, in_y = g.x[NB + self.sel_interior], g.y[NB + self.sel_interior]

        with self.timer("setup_base"):
            if backend == "pct":
                self.base_op = PCTOperator(base.n, base.h, kappa, self.opts.pct_order)
                self.to_boundary = cartesian_interpolation_matrix(base, bx, by)
            else:
                self.base_op = ATMOperator(base, kappa)
                self.to_boundary = PolarEvaluator(base, bx, by, self.base_op.L)

        W = self.opts.window if self.opts.window is not None else default_window(spec.N1)
        self.window = W
        theta_b = np.broadcast_to(b.theta[:, :, None], b.x.shape).reshape(-1)
        accel = self.opts.accel
        self.cells = (default_accel_cells(scatterer.curve.bounding_box(), kappa, spec.unknowns, L=self.opts.accel_cells)
                      if accel else None)
        with self.timer("setup_boundary"):
            self.singular = SingularQuadrature(b, kappa, W=W, n_tau=self.opts.n_tau, assemble=False)
            self.near_b = RegularNear(b, kappa, W, bx, by, theta_b, self.cells, store=False)
            if accel:
                # windowed singular part and smooth near remainder share their
                # support, so they are stored as one matrix, built by row blocks
                step = 256
                self.boundary_matrix = sparse.vstack(
                    [self.singular.block_matrix(np.arange(lo, min(lo + step, NB)))
                     + self.near_b.block_matrix(np.arange(lo, min(lo + step, NB))) for lo in range(0, NB, step)],
                    format="csr")
            else:
                self.singular.matrix = self.singular._assemble()
                self.boundary_matrix = None
            self.near_i = RegularNear(b, kappa, W, in_x, in_y, np.full(in_x.size, np.nan), self.cells, store=accel)
        self.far = None
        if accel:
            with self.timer("setup_accel"):
                self.far = EquivalentSourceAccelerator(self.cells, kappa, bx, by,
                                                       np.concatenate([bx, in_x]), np.concatenate([by, in_y]),
                                                       AccelConfig())
        with self.timer("setup_interp"):
            self.to_omega_b = BoundaryFieldInterpolator(b, ob_x, ob_y)
        self.weights = b.weights.reshape(-1)
        self.n_applies = 0
        self.setup_time = sum(self.timer.totals.values())

    @property
    def size(self):
        return self.grid.size

    def base_density(self, v):
        """E(v) on the full base grid (zero outside the scatterer)."""
        out = np.zeros(self.base.size, dtype=complex)
        out[self.grid.base_inside] = v[self.grid.NB:] * self.efac
        return out.reshape(self.base.shape)

    def apply(self, v):
        """A_h(v) at every unknown node."""
        v = np.asarray(v, dtype=complex).reshape(-1)
        g, NB = self.grid, self.grid.NB
        vb = v[:NB]
        out = np.empty(g.size, dtype=complex)
        t = self.timer
        with t("apply_base"):
            dens = self.base_density(v)
            if self.backend == "pct":
                AE = self.base_op.apply(dens).reshape(-1)
                with t("apply_interp"):
                    AE_b = self.to_boundary @ AE
            else:
                modes = self.base_op.modes(dens)
                AE = angular_synthesis(ModalDensity(self.base_op.L, modes), self.base.n_theta).reshape(-1)
                with t("apply_interp"):
                    AE_b = self.to_boundary(modes)
        with t("apply_boundary"):
            AB_b = self._boundary_near(vb)
            AB_i = self.near_i.apply(vb)
        if self.far is not None:
            with t("apply_accel"):
                far = self.far.apply(self.weights * vb)
            AB_b = AB_b + far[:NB]
            AB_i = AB_i + far[NB:]
        with t("apply_interp"):
            AB_ob = self.to_omega_b(AB_b)
        out[:NB] = AE_b + AB_b
        AE_in = AE[g.base_inside]
        base_out = AE_in.copy()
        base_out[self.sel_omega_b] += AB_ob
        base_out[self.sel_interior] += AB_i
        out[NB:] = base_out
        self.n_applies += 1
        return out

    __call__ = apply

    def _boundary_near(self, vb):
        if self.boundary_matrix is not None:
            return self.boundary_matrix @ vb
        return self.singular.apply(vb) + self.near_b.apply(vb)

    def potential_at(self, v, tx, ty):
        """A_h(v) at arbitrary points inside the scatterer.

        A_E is interpolated from the base grid; A_B is interpolated from the
        boundary nodes in the boundary region and summed directly (window-free,
        since deep points are at distance >= tau0 from every source) elsewhere.
        """
        v = np.asarray(v, dtype=complex).reshape(-1)
        tx, ty = np.atleast_1d(np.asarray(tx, float)), np.atleast_1d(np.asarray(ty, float))
        NB = self.grid.NB
        vb = v[:NB]
        dens = self.base_density(v)
        if self.backend == "pct":
            AE = self.base_op.apply(dens).reshape(-1)
            AE_t = cartesian_interpolation_matrix(self.base, tx, ty) @ AE
        else:
            modes = self.base_op.modes(dens)
            AE_t = PolarEvaluator(self.base, tx, ty, self.base_op.L)(modes)
        cls, _ = classify(self.scatterer, tx, ty)
        out = AE_t.astype(complex)
        near = cls == BOUNDARY
        if np.any(near):
            AB_b = self._boundary_near(vb)
            if self.far is not None:
                AB_b = AB_b + self.far.apply(self.weights * vb)[:NB]
            out[near] += BoundaryFieldInterpolator(self.bgrid, tx[near], ty[near])(AB_b)
        deep = cls == INTERIOR
        if np.any(deep):
            direct = RegularNear(self.bgrid, self.kappa, self.window, tx[deep], ty[deep],
                                 np.full(int(deep.sum()), np.nan), None, store=False)
            out[deep] += direct.apply(vb)
        return out


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    unknowns: int
    times: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    residual_history: list = field(default_factory=list)

    def to_dict(self):
        return {"schema": 1, "numIt": self.iterations, "residual": self.residual, "converged": self.converged,
                "unknowns": self.unknowns, "times": dict(self.times), "errors": dict(self.errors)}


def gmres_solve(matvec, rhs, tol=1e-10, restart=200, maxit=500, raise_on_fail=True):
    """Restarted GMRES on u -> matvec(u); returns (u, SolveReport)."""
    rhs = np.asarray(rhs, dtype=complex)
    n = rhs.size
    op = LinearOperator((n, n), matvec=matvec, dtype=complex)
    history = []
    norm_b = np.linalg.norm(rhs)
    if norm_b == 0:
        return np.zeros(n, complex), SolveReport(0, 0.0, True, n)

    def cb(res):
        history.append(float(res))

    t0 = time.perf_counter()
    sol, info = gmres(op, rhs, rtol=tol, atol=0.0, restart=min(restart, n), maxiter=max(1, math.ceil(maxit / min(restart, n))),
                      callback=cb, callback_type="pr_norm")
    elapsed = time.perf_counter() - t0
    res = float(np.linalg.norm(matvec(sol) - rhs) / norm_b)
    its = len(history)
    rep = SolveReport(its, res, info == 0, n, {"gmres": elapsed}, residual_history=history)
    if info != 0 and raise_on_fail:
        raise MaxIterations(f"GMRES did not reach {tol:g} in {maxit} iterations (residual {res:.2e})")
    return sol, rep


def incident_field(kappa, x, y, direction=(1.0, 0.0)):
    dx, dy = direction
    nrm = math.hypot(dx, dy)
    return np.exp(1j * kappa * (dx * np.asarray(x) + dy * np.asarray(y)) / nrm)


@dataclass
class Solution:
    operator: LSOperator
    total: np.ndarray
    scattered: np.ndarray
    report: SolveReport
    direction: tuple = (1.0, 0.0)

    @property
    def x(self):
        return self.operator.x

    @property
    def y(self):
        return self.operator.y


def scatter_solve(scatterer: Scatterer, kappa, spec, backend="atm", direction=(1.0, 0.0),
                  options: SolverOptions | None = None, operator: LSOperator | None = None, exact=None):
    """Solve for the total field at every unknown node.

    ``exact(x, y)``, if given, supplies reference values for the error metrics.
    """
    opts = options or SolverOptions()
    t0 = time.perf_counter()
    A = operator or LSOperator(scatterer, kappa, spec, backend, opts)
    t_setup = time.perf_counter() - t0
    m = np.asarray(scatterer.contrast(A.x, A.y), dtype=complex)
    uinc = incident_field(kappa, A.x, A.y, direction)
    k2 = kappa * kappa

    def matvec(u):
        return u + k2 * A.apply(m * u)

    u, rep = gmres_solve(matvec, uinc, opts.tol, opts.restart, opts.maxit)
    rep.times["setup"] = t_setup
    rep.times.update({k: v for k, v in A.timer.totals.items() if k.startswith("apply")})
    rep.times["total"] = time.perf_counter() - t0
    if exact is not None:
        rep.errors = error_metrics(u, exact(A.x, A.y))
    return Solution(A, u, u - uinc, rep, tuple(direction))


def error_metrics(approx, reference):
    """Relative maximum and root-mean-square errors over the given nodes."""
    approx = np.asarray(approx)
    reference = np.asarray(reference)
    diff = approx - reference
    return {"eps_inf": float(np.abs(diff).max() / np.abs(reference).max()),
            "eps_2": float(np.linalg.norm(diff) / np.linalg.norm(reference))}


def observed_order(errors, factor=2.0):
    """log_factor of consecutive error ratios (NaN where undefined)."""
    e = np.asarray(errors, dtype=float)
    with np.errstate(all="ignore"):
        return np.log(e[:-1] / e[1:]) / math.log(factor)


def interpolate_solution(sol: Solution, tx, ty):
    """The computed total field at arbitrary points of the scatterer, via the
    equation itself: u = u_inc - k^2 A_h(m u) with A_h evaluated off-grid."""
    A = sol.operator
    tx, ty = np.asarray(tx, float), np.asarray(ty, float)
    m = np.asarray(A.scatterer.contrast(A.x, A.y), dtype=complex)
    pot = A.potential_at(m * sol.total, tx, ty)
    return incident_field(A.kappa, tx, ty, sol.direction) - A.kappa ** 2 * pot
