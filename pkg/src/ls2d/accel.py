"""Equivalent-source acceleration of non-adjacent interactions.

Sources q_y (quadrature weight times density) are grouped in an L x L cell
decomposition.  For every cell:

1. monopoles and x-dipoles on the lattice points of its two x-faces are
   fitted, in the least-squares sense, to reproduce the cell's true field on
   the boundary of its 3x3 block (one pseudo-inverse shared by all cells);
2. all equivalent sources sit on one regular lattice of spacing H/n_f, so
   their mutual field is a single FFT convolution;
3. the near part (3x3 block) is subtracted on the perimeter lattice points
   of each target cell, which leaves the field of non-adjacent cells only;
4. that field is a regular Helmholtz solution inside the cell and is
   expanded in J_l(k r) e^{i l phi} about the cell centre, fitted on the
   perimeter points, then evaluated at the targets.

Cylindrical waves are used for step 4 rather than plane waves: for kH of
order one a plane-wave basis with enough directions is numerically
dependent, while the Bessel basis, normalised per order, stays well scaled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import sparse
from scipy import special as sp

from .errors import IllConditioned, ResonantCell
from .grids import CellDecomposition
from .specfun import green


def dipole_kernel(kappa, dx, dy):
    """Field at offset (dx, dy) of a unit dipole with axis e_1: -d/dx G."""
    r = np.hypot(dx, dy)
    with np.errstate(all="ignore"):
        out = 0.25j * kappa * sp.hankel1(1, kappa * r) * dx / r
    return np.where(r > 0, out, 0.0)


def monopole_kernel(kappa, dx, dy):
    r = np.hypot(dx, dy)
    with np.errstate(all="ignore"):
        out = green(kappa, np.where(r > 0, r, 1.0))
    return np.where(r > 0, out, 0.0)


def _pinv(A, rcond=1e-13):
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    keep = s > rcond * s[0]
    return (Vh[keep].conj().T / s[keep]) @ U[:, keep].conj().T, s


@dataclass
class AccelConfig:
    n_f: int = 16
    ell_max: int | None = None
    coll_factor: float = 2.0
    rcond: float = 1e-10


class EquivalentSourceAccelerator:
    """Non-adjacent sum  u(x) = sum_{y not in N_x} G(x - y) q_y."""

    def __init__(self, cells: CellDecomposition, kappa, sx, sy, tx, ty, config: AccelConfig | None = None):
        self.cells = cells
        self.kappa = kappa
        self.cfg = config or AccelConfig()
        self.sx, self.sy = np.asarray(sx, float), np.asarray(sy, float)
        self.tx, self.ty = np.asarray(tx, float), np.asarray(ty, float)
        L, H = cells.L, cells.H
        kH = kappa * H
        ell = self.cfg.ell_max
        if ell is None:
            ell = int(math.ceil(max(27.0, kH / math.sqrt(2) + 22.0)))
        self.ell_max = ell
        n_f = max(self.cfg.n_f, int(math.ceil(1.2 * (2 * ell + 1) / 4)))
        if n_f % 2:
            n_f += 1
        self.n_f = n_f
        self.delta = H / n_f
        self.n_lat = L * n_f + 1
        self._setup_local_geometry()
        self._setup_sources()
        self._setup_kernels()
        self._setup_targets()

    # -- geometry shared by all cells ------------------------------------------
    def _setup_local_geometry(self):
        n_f, H, d = self.n_f, self.cells.H, self.delta
        # equivalent sources: face a in {0, 1} (x = 0, H), j = 0..n_f, relative to the cell corner
        fa, fj = np.meshgrid([0, 1], np.arange(n_f + 1), indexing="ij")
        self.eq_li = (fa * n_f).ravel()
        self.eq_lj = fj.ravel()
        self.n_eq = self.eq_li.size
        ex = self.eq_li * d - 0.5 * H
        ey = self.eq_lj * d - 0.5 * H
        # collocation on the boundary of the 3x3 block
        n_coll = int(math.ceil(self.cfg.coll_factor * 2 * self.n_eq))
        n_coll += (-n_coll) % 4
        per_side = n_coll // 4
        u = (np.arange(per_side) + 0.5) / per_side * 3 * H - 1.5 * H
        cx = np.concatenate([u, np.full(per_side, 1.5 * H), -u, np.full(per_side, -1.5 * H)])
        cy = np.concatenate([np.full(per_side, -1.5 * H), u, np.full(per_side, 1.5 * H), -u])
        self.coll = (cx, cy)
        k = self.kappa
        A = np.hstack([monopole_kernel(k, cx[:, None] - ex[None, :], cy[:, None] - ey[None, :]),
                       dipole_kernel(k, cx[:, None] - ex[None, :], cy[:, None] - ey[None, :])])
        self.fit_pinv, sv = _pinv(A, self.cfg.rcond)
        if sv[0] == 0 or not np.isfinite(sv).all():
            raise ResonantCell("equivalent-source collocation matrix is degenerate")
        self.fit_sv = sv
        # perimeter lattice points of a cell (counter-clockwise, no repeats)
        i_side = np.arange(n_f)
        pi = np.concatenate([i_side, np.full(n_f, n_f), n_f - i_side, np.zeros(n_f, int)])
        pj = np.concatenate([np.zeros(n_f, int), i_side, np.full(n_f, n_f), n_f - i_side])
        self.per_li, self.per_lj = pi, pj
        px = pi * d - 0.5 * H
        py = pj * d - 0.5 * H
        # local expansion on the perimeter
        ells = np.arange(-self.ell_max, self.ell_max + 1)
        self.ells = ells
        self.rho_c = H / math.sqrt(2)
        B = self._local_basis(px, py)
        self.loc_pinv, sv2 = _pinv(B, self.cfg.rcond)
        resid = np.linalg.norm(B @ (self.loc_pinv @ B) - B) / np.linalg.norm(B)
        if resid > 1e-6:
            raise IllConditioned(f"local expansion basis not resolved on the cell perimeter (residual {resid:.1e})")
        self.loc_sv = sv2
        # 3x3 near matrices: sources of cell (ci+di, cj+dj) -> perimeter of (ci, cj)
        self.off = {}
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                dx = (pi[:, None] - (self.eq_li[None, :] + di * n_f)) * d
                dy = (pj[:, None] - (self.eq_lj[None, :] + dj * n_f)) * d
                self.off[(di, dj)] = np.hstack([monopole_kernel(k, dx, dy), dipole_kernel(k, dx, dy)])

    def _local_basis(self, x, y):
        r = np.hypot(x, y)
        ph = np.arctan2(y, x)
        k = self.kappa
        a = np.abs(self.ells)
        norm = sp.jv(a, k * self.rho_c)
        norm = np.where(np.abs(norm) > 1e-300, norm, 1e-300)
        return sp.jv(a[None, :], k * r[:, None]) / norm[None, :] * np.exp(1j * self.ells[None, :] * ph[:, None])

    # -- sources: block-diagonal fitting operator ------------------------------
    def _setup_sources(self):
        c = self.cells
        ci, cj = c.cell_of(self.sx, self.sy)
        self.src_cell = ci * c.L + cj
        order = np.argsort(self.src_cell, kind="stable")
        rows, cols, vals = [], [], []
        cx, cy = self.coll
        k = self.kappa
        neq2 = 2 * self.n_eq
        cells_with = np.unique(self.src_cell)
        bounds = np.searchsorted(self.src_cell[order], cells_with, side="left")
        bounds = np.append(bounds, order.size)
        for n, cid in enumerate(cells_with):
            idx = order[bounds[n]: bounds[n + 1]]
            ccx, ccy = c.center(cid // c.L, cid % c.L)
            G = monopole_kernel(k, (cx + ccx)[:, None] - self.sx[idx][None, :], (cy + ccy)[:, None] - self.sy[idx][None, :])
            Bc = self.fit_pinv @ G  # (2 n_eq, n_src)
            rr, cc = np.meshgrid(cid * neq2 + np.arange(neq2), idx, indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            vals.append(Bc.ravel())
        n_cells = c.L * c.L
        self.fit_op = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                        shape=(n_cells * neq2, self.sx.size))
        # lattice index of every equivalent source slot, per cell
        L, n_f = c.L, self.n_f
        cid = np.arange(n_cells)
        gi = (cid // L)[:, None] * n_f + self.eq_li[None, :]
        gj = (cid % L)[:, None] * n_f + self.eq_lj[None, :]
        self.eq_lattice = (gi * self.n_lat + gj).ravel()

    def _setup_kernels(self):
        n = self.n_lat
        N = sfft.next_fast_len(2 * n - 1)
        self.nfft = N
        off = np.arange(-(n - 1), n) * self.delta
        DX, DY = np.meshgrid(off, off, indexing="ij")
        idx = np.arange(-(n - 1), n) % N
        km = np.zeros((N, N), dtype=complex)
        kd = np.zeros((N, N), dtype=complex)
        km[np.ix_(idx, idx)] = monopole_kernel(self.kappa, DX, DY)
        kd[np.ix_(idx, idx)] = dipole_kernel(self.kappa, DX, DY)
        self.km_hat = sfft.fft2(km)
        self.kd_hat = sfft.fft2(kd)

    def _setup_targets(self):
        c = self.cells
        ci, cj = c.cell_of(self.tx, self.ty)
        self.tgt_cell = ci * c.L + cj
        self.active = np.unique(self.tgt_cell)
        L, n_f = c.L, self.n_f
        a = self.active
        gi = (a // L)[:, None] * n_f + self.per_li[None, :]
        gj = (a % L)[:, None] * n_f + self.per_lj[None, :]
        self.per_lattice = gi * self.n_lat + gj  # (n_active, 4 n_f)
        pos = {int(cid): n for n, cid in enumerate(a)}
        rows, cols, vals = [], [], []
        order = np.argsort(self.tgt_cell, kind="stable")
        bounds = np.searchsorted(self.tgt_cell[order], a, side="left")
        bounds = np.append(bounds, order.size)
        nper = self.per_li.size
        for n, cid in enumerate(a):
            idx = order[bounds[n]: bounds[n + 1]]
            ccx, ccy = c.center(cid // L, cid % L)
            E = self._local_basis(self.tx[idx] - ccx, self.ty[idx] - ccy) @ self.loc_pinv
            rr, cc = np.meshgrid(idx, n * nper + np.arange(nper), indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            vals.append(E.ravel())
        self.eval_op = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                         shape=(self.tx.size, a.size * nper))
        # neighbour cell ids of every active cell (or -1)
        ai, aj = a // L, a % L
        self.nbr = {}
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                ni, nj = ai + di, aj + dj
                ok = (ni >= 0) & (ni < L) & (nj >= 0) & (nj < L)
                self.nbr[(di, dj)] = np.where(ok, ni * L + nj, -1)

    # -- application -------------------------------------------------------------
    def equivalent_strengths(self, q):
        """(n_cells, 2 n_eq): monopole strengths then dipole strengths."""
        return (self.fit_op @ q).reshape(self.cells.L ** 2, 2 * self.n_eq)

    def lattice_field(self, sigma):
        n, N = self.n_lat, self.nfft
        neq = self.n_eq
        sm = np.bincount(self.eq_lattice, weights=sigma[:, :neq].real.ravel(), minlength=n * n) + \
            1j * np.bincount(self.eq_lattice, weights=sigma[:, :neq].imag.ravel(), minlength=n * n)
        sd = np.bincount(self.eq_lattice, weights=sigma[:, neq:].real.ravel(), minlength=n * n) + \
            1j * np.bincount(self.eq_lattice, weights=sigma[:, neq:].imag.ravel(), minlength=n * n)
        pm = np.zeros((N, N), dtype=complex)
        pd = np.zeros((N, N), dtype=complex)
        pm[:n, :n] = sm.reshape(n, n)
        pd[:n, :n] = sd.reshape(n, n)
        phi = sfft.ifft2(sfft.fft2(pm) * self.km_hat + sfft.fft2(pd) * self.kd_hat)
        return phi[:n, :n].reshape(-1)

    def perimeter_far_field(self, sigma):
        phi = self.lattice_field(sigma)
        vals = phi[self.per_lattice]
        for key, nb in self.nbr.items():
            ok = nb >= 0
            vals[ok] -= sigma[nb[ok]] @ self.off[key].T
        return vals

    def apply(self, q):
        q = np.asarray(q, dtype=complex).reshape(-1)
        sigma = self.equivalent_strengths(q)
        per = self.perimeter_far_field(sigma)
        return self.eval_op @ per.reshape(-1)

    def direct(self, q):
        """Reference O(N_t N_s) non-adjacent sum."""
        q = np.asarray(q, dtype=complex).reshape(-1)
        c = self.cells
        ti, tj = c.cell_of(self.tx, self.ty)
        si, sj = c.cell_of(self.sx, self.sy)
        out = np.zeros(self.tx.size, dtype=complex)
        for lo in range(0, self.tx.size, 256):
            sl = slice(lo, lo + 256)
            far = (np.abs(si[None, :] - ti[sl, None]) > 1) | (np.abs(sj[None, :] - tj[sl, None]) > 1)
            r = np.hypot(self.tx[sl, None] - self.sx[None, :], self.ty[sl, None] - self.sy[None, :])
            G = np.where(far, green(self.kappa, np.where(far, r, 1.0)), 0.0)
            out[sl] = G @ q
        return out


def default_accel_cells(bbox, kappa, n_unknowns, L=None, margin=0.02, kH_max=3.0):
    """Square cell decomposition covering ``bbox`` with kH <= kH_max."""
    x0, x1, y0, y1 = bbox
    side = max(x1 - x0, y1 - y0) * (1 + margin)
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    if L is None:
        L = max(4, math.ceil(math.sqrt(n_unknowns) / 8), math.ceil(kappa * side / kH_max))
    return CellDecomposition(cx - side / 2, cy - side / 2, side, int(L))
