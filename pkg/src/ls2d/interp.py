"""Cross-grid coupling.

* base -> boundary: A_E is a volume potential of a smooth, compactly
  supported density, hence smooth everywhere.  On the Cartesian grid it is
  interpolated by local tensor Lagrange polynomials; on the polar grid its
  radial modes are interpolated per interval and summed in theta exactly.
* boundary -> base: A_B is known at the boundary-grid nodes and smooth on
  each patch up to t = 0; base nodes inside the boundary region get it by
  Lagrange interpolation in (s, t) on the patch where they sit deepest.

The FFT-refined, windowed interpolant is kept as an alternative for
periodic or windowed fields.
"""
from __future__ import annotations

import numpy as np
from scipy import fft as sfft
from scipy import sparse

from .boundary_quad import lagrange_weights, stencil, trig_poly_interpolate
from .errors import TargetNotInBoundaryRegion, TargetOutsideOmega
from .geometry import eta, project_to_boundary
from .grids import BoundaryGrid, CartesianBaseGrid, PolarBaseGrid


# ----------------------------------------------------------------------------
# Cartesian base grid
# ----------------------------------------------------------------------------

def cartesian_interpolation_matrix(grid: CartesianBaseGrid, tx, ty, d=7):
    """Sparse (n_targets, grid.size) local tensor Lagrange interpolation."""
    tx, ty = np.asarray(tx, float), np.asarray(ty, float)
    n = grid.X.shape[0]
    ux = (tx - (grid.cx - grid.a)) / grid.h
    uy = (ty - (grid.cy - grid.a)) / grid.h
    if np.any((ux < 0) | (ux > n - 1) | (uy < 0) | (uy > n - 1)):
        raise TargetOutsideOmega("target outside the base square")
    sx, wx = stencil(ux, d, n)
    sy, wy = stencil(uy, d, n)
    q = np.arange(d + 1)
    I = sx[:, None, None] + q[None, :, None]
    J = sy[:, None, None] + q[None, None, :]
    vals = wx[:, :, None] * wy[:, None, :]
    rows = np.broadcast_to(np.arange(tx.size)[:, None, None], vals.shape)
    return sparse.csr_matrix((vals.ravel(), (rows.ravel(), (I * n + J).ravel())), shape=(tx.size, n * n))


def window_function(grid: CartesianBaseGrid, inner_half, margin_cells=2):
    """Tensor-product window: 1 on the square of half-side ``inner_half`` about
    the grid centre, smoothly 0 ``margin_cells`` spacings further out."""
    w = margin_cells * grid.h

    def one(u):
        return eta(np.abs(u) - inner_half, w)

    return one(grid.X - grid.cx) * one(grid.Y - grid.cy)


def fft_refined_interpolate(values, grid: CartesianBaseGrid, tx, ty, rho_f=4, d=6, window=None):
    """Steps: (optionally windowed) DFT, zero-padded refinement by rho_f, local
    degree-d tensor polynomial on the refined grid."""
    v = np.asarray(values, dtype=complex).reshape(grid.shape)
    if window is not None:
        v = v * window
    n = v.shape[0]
    # period n h (the last node is dropped: the windowed field is periodic)
    per = v[:-1, :-1]
    m = per.shape[0]
    mf = rho_f * m
    c = sfft.fft2(per)
    pad = np.zeros((mf, mf), dtype=complex)
    h = (m - 1) // 2
    idx_lo = np.r_[0: h + 1, m - h: m]
    idx_hi = np.r_[0: h + 1, mf - h: mf]
    pad[np.ix_(idx_hi, idx_hi)] = c[np.ix_(idx_lo, idx_lo)]
    fine = sfft.ifft2(pad) * rho_f * rho_f
    hf = grid.h / rho_f
    ux = (np.asarray(tx) - (grid.cx - grid.a)) / hf
    uy = (np.asarray(ty) - (grid.cy - grid.a)) / hf
    stx = np.floor(ux).astype(int) - d // 2
    sty = np.floor(uy).astype(int) - d // 2
    wx = lagrange_weights(ux - stx, d)
    wy = lagrange_weights(uy - sty, d)
    q = np.arange(d + 1)
    I = (stx[:, None] + q) % mf
    J = (sty[:, None] + q) % mf
    blk = fine[I[:, :, None], J[:, None, :]]
    return np.einsum("tij,ti,tj->t", blk, wx, wy)


# ----------------------------------------------------------------------------
# polar base grid
# ----------------------------------------------------------------------------

class PolarEvaluator:
    """Evaluate sum_l A_l(r) e^{il theta} at arbitrary points from the modal
    values A_l at the grid radii (rows l = -L..L)."""

    def __init__(self, grid: PolarBaseGrid, tx, ty, L):
        self.grid, self.L = grid, L
        tx, ty = np.asarray(tx, float), np.asarray(ty, float)
        r = np.hypot(tx - grid.cx, ty - grid.cy)
        if np.any(r > grid.R * (1 + 1e-12)):
            raise TargetOutsideOmega("target outside the polar base disc")
        th = np.arctan2(ty - grid.cy, tx - grid.cx)
        I = np.minimum(np.searchsorted(grid.edges, r, side="right") - 1, grid.n_int - 1)
        # interval nodes: left edge, Nc Chebyshev nodes, right edge
        per = grid.Nc + 2
        first = I * (grid.Nc + 1)  # radial index of the left edge
        nodes = first[:, None] + np.arange(per)[None, :]
        rn = grid.r[nodes]
        w = _barycentric_weights(rn, r)
        rows = np.broadcast_to(np.arange(r.size)[:, None], nodes.shape)
        # radial interpolation as a sparse (n_r, n_targets) matrix: modes @ radial
        self.radial = sparse.csr_matrix((w.ravel(), (nodes.ravel(), rows.ravel())), shape=(grid.n_r, r.size))
        self.phase = np.exp(1j * np.outer(np.arange(-L, L + 1), th))

    def __call__(self, modes):
        A = np.asarray(modes)  # (2L+1, n_r)
        vals = (self.radial.T @ A.T).T
        return np.einsum("lt,lt->t", vals, self.phase)


def _barycentric_weights(nodes, x):
    """Lagrange weights, per row of ``nodes``, for evaluating at x."""
    n = nodes.shape[1]
    diff = nodes[:, :, None] - nodes[:, None, :]
    np.einsum("tii->ti", diff)[...] = 1.0
    lam = 1.0 / np.prod(diff, axis=2)
    dx = x[:, None] - nodes
    exact = np.abs(dx) < 1e-15 * np.maximum(1.0, np.abs(nodes))
    dx = np.where(exact, 1.0, dx)
    t = lam / dx
    w = t / t.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if np.any(hit):
        w[hit] = exact[hit].astype(float)
    return w


# ----------------------------------------------------------------------------
# boundary -> base
# ----------------------------------------------------------------------------

class BoundaryFieldInterpolator:
    """Sparse map from boundary-grid values of A_B to base targets inside the
    boundary region."""

    def __init__(self, bgrid: BoundaryGrid, tx, ty, d=7):
        self.bgrid = bgrid
        tx, ty = np.asarray(tx, float), np.asarray(ty, float)
        cover = bgrid.cover
        self.d = d
        if tx.size == 0:
            self.matrix = sparse.csr_matrix((0, bgrid.size), dtype=float)
            self.params = (np.zeros(0), np.zeros(0))
            return
        theta, tau = project_to_boundary(cover.curve, tx, ty, tau0=cover.tau0)
        if np.any(tau < -1e-12) or np.any(tau > cover.tau0 * (1 + 1e-12)):
            raise TargetNotInBoundaryRegion("target depth outside [0, tau0]")
        t = np.clip(tau / cover.tau0, 0.0, 1.0)
        best_k = np.zeros(tx.size, int)
        best_w = np.full(tx.size, -1.0)
        for k in range(cover.K):
            s = cover.s_of_theta(k, theta)
            w = np.where(s <= 1.0, cover.pou_theta(k, theta), -1.0)
            upd = w > best_w
            best_k[upd] = k
            best_w[upd] = w[upd]
        if np.any(best_w <= 0):
            raise TargetNotInBoundaryRegion("no patch contains the target")
        s = np.array([cover.s_of_theta(k, th) for k, th in zip(best_k, theta)])
        self.params = (s, t)
        N1, N2 = bgrid.N1, bgrid.N2
        ds, dt = min(d, N1 - 1), min(d, N2 - 1)
        st_s, ws = stencil(s * (N1 - 1), ds, N1)
        st_t, wt = stencil(t * (N2 - 1), dt, N2)
        I = st_s[:, None, None] + np.arange(ds + 1)[None, :, None]
        J = st_t[:, None, None] + np.arange(dt + 1)[None, None, :]
        vals = ws[:, :, None] * wt[:, None, :]
        cols = best_k[:, None, None] * N1 * N2 + I * N2 + J
        rows = np.broadcast_to(np.arange(tx.size)[:, None, None], vals.shape)
        self.matrix = sparse.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(tx.size, bgrid.size))

    def __call__(self, values):
        return self.matrix @ np.asarray(values).reshape(-1)


def base_boundary_interp(values, bgrid: BoundaryGrid, tx, ty, mode="direct", rho_f=4, d=6):
    """A_B at targets in the boundary region from its boundary-grid values.

    ``mode="direct"`` interpolates A_B on the deepest-covering patch;
    ``mode="pou"`` sums over patches the interpolants of w_k A_B, refined by
    FFT in s (periodic, w_k vanishes at both ends) and Lagrange in t.
    """
    if mode == "direct":
        return BoundaryFieldInterpolator(bgrid, tx, ty, d=d + 1)(values)
    tx, ty = np.atleast_1d(np.asarray(tx, float)), np.atleast_1d(np.asarray(ty, float))
    cover = bgrid.cover
    theta, tau = project_to_boundary(cover.curve, tx, ty, tau0=cover.tau0)
    if np.any(tau > cover.tau0 * (1 + 1e-12)) or np.any(tau < -1e-12):
        raise TargetNotInBoundaryRegion("target depth outside [0, tau0]")
    t = np.clip(tau / cover.tau0, 0, 1)
    V = np.asarray(values).reshape(bgrid.K, bgrid.N1, bgrid.N2)
    N1, N2 = bgrid.N1, bgrid.N2
    dt = min(d, N2 - 1)
    st_t, wt = stencil(t * (N2 - 1), dt, N2)
    out = np.zeros(tx.size, dtype=complex)
    for k in range(bgrid.K):
        s = cover.s_of_theta(k, theta)
        inside = s < 1.0
        if not np.any(inside):
            continue
        wk = (bgrid.pou[k][:, None] * V[k])[:-1]  # periodic samples, last node duplicates the first (both zero)
        # interpolate every level along s, then combine levels in t
        along = trig_poly_interpolate(wk.T, s[inside], rho_f=rho_f, d=d)  # (N2, n_inside)
        idx = np.flatnonzero(inside)
        for n, tgt in enumerate(idx):
            out[tgt] += along[st_t[tgt]: st_t[tgt] + dt + 1, n] @ wt[tgt]
    return out
