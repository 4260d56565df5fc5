"""Quadrature of the boundary-region potential A_B.

For a boundary-grid target x and each patch k the integral of
G(x - y) w_k eta v over the patch is split with a window eta_s in the patch
parameter s centred at the target's own parameter s_x:

* the windowed part is integrated along every transverse level t' by the
  trapezoidal rule in a variable tau, s' = s_x + rho(tau), where rho flattens
  the logarithmic singularity; the t'-integral is split at t' = t and done by
  composite 5-point Newton-Cotes, leftover panels sitting at t' = 0 and
  t' = 1 on a few extra levels;
* the remainder (1 - eta_s) is smooth and handled by the plain grid rule
  (trapezoid in s, Newton-Cotes in t).

Everything here is linear in the density and independent of it, so the
windowed part is assembled once into a sparse matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import sparse

from .errors import TargetOutsidePatch
from .geometry import TWO_PI, eta
from .grids import BoundaryGrid, CellDecomposition, newton_cotes_panel
from .specfun import green


# ----------------------------------------------------------------------------
# change of variable and window
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ChangeOfVariable:
    """rho(tau) = (W/pi)(tau - 4/3 sin tau + 1/6 sin 2 tau), tau in [-pi, pi].

    rho'(tau) = (8/3)(W/pi) sin^4(tau/2): odd map of [-pi, pi] onto [-W, W]
    whose derivatives of order 0..4 vanish at tau = 0 (M = 4).
    """

    W: float
    M: int = 4

    def rho(self, tau):
        tau = np.asarray(tau, dtype=float)
        return (self.W / math.pi) * (tau - 4.0 / 3.0 * np.sin(tau) + np.sin(2 * tau) / 6.0)

    def drho(self, tau):
        tau = np.asarray(tau, dtype=float)
        return (8.0 / 3.0) * (self.W / math.pi) * np.sin(0.5 * tau) ** 4

    def rho_inverse(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(np.abs(s) > self.W * (1 + 1e-14)):
            raise ValueError("argument outside the range of rho")
        # start from the small-tau expansion rho ~ (W/pi) tau^5/30, then Newton
        u = np.abs(s) * math.pi / self.W
        tau = np.minimum((30.0 * u) ** 0.2, math.pi)
        tau = np.where(u > 0.5 * math.pi, u, tau)
        for _ in range(60):
            f = self.rho(tau) - np.abs(s)
            d = self.drho(tau)
            step = np.where(d > 0, f / np.where(d > 0, d, 1.0), 0.0)
            tau = np.clip(tau - step, 0.0, math.pi)
            if np.all(np.abs(step) < 1e-15):
                break
        return np.sign(s) * tau

    def nodes(self, n_tau):
        """Interior trapezoid nodes tau_m != 0 and weights rho'(tau_m) dtau."""
        if n_tau % 2:
            raise ValueError("n_tau must be even")
        dtau = TWO_PI / n_tau
        m = np.concatenate([np.arange(-(n_tau // 2) + 1, 0), np.arange(1, n_tau // 2)])
        tau = m * dtau
        return tau, self.drho(tau) * dtau


def eta_s(delta, W):
    """Adjacency window: 1 at delta = 0, 0 for |delta| >= W, smooth."""
    return eta(np.abs(delta), W)


# ----------------------------------------------------------------------------
# small interpolation helpers
# ----------------------------------------------------------------------------

def lagrange_weights(u, d):
    """Weights of the degree-d Lagrange interpolant on nodes 0..d at points u."""
    u = np.asarray(u, dtype=float)
    nodes = np.arange(d + 1)
    out = np.ones(u.shape + (d + 1,))
    for j in range(d + 1):
        for m in range(d + 1):
            if m != j:
                out[..., j] *= (u - m) / (j - m)
    return out


def stencil(u, d, n):
    """Start index and weights for interpolating at grid coordinate u on nodes
    0..n-1, using the d+1 nodes nearest to u (shifted inward at the ends)."""
    u = np.asarray(u, dtype=float)
    st = np.floor(u).astype(int) - (d - 1) // 2 if d % 2 else np.rint(u).astype(int) - d // 2
    st = np.clip(st, 0, n - 1 - d)
    return st, lagrange_weights(u - st, d)


def trig_poly_interpolate(samples, query, rho_f=4, d=6, period=1.0):
    """Interpolate periodic samples on s_j = j period/N at ``query``.

    The samples are refined by zero-padding their DFT by ``rho_f``; a local
    degree-d Lagrange polynomial on the refined grid gives the value.
    """
    samples = np.asarray(samples)
    N = samples.shape[-1]
    Nf = rho_f * N
    c = sfft.fft(samples, axis=-1)
    pad = np.zeros(samples.shape[:-1] + (Nf,), dtype=complex)
    half = (N - 1) // 2
    pad[..., : half + 1] = c[..., : half + 1]
    pad[..., Nf - half:] = c[..., N - half:]
    if N % 2 == 0:  # split the Nyquist coefficient
        pad[..., N // 2] = 0.5 * c[..., N // 2]
        pad[..., Nf - N // 2] = 0.5 * c[..., N // 2]
    fine = sfft.ifft(pad, axis=-1) * rho_f
    if not np.iscomplexobj(samples):
        fine = fine.real
    u = np.mod(np.asarray(query, dtype=float) / period, 1.0) * Nf
    st = np.floor(u).astype(int) - d // 2
    w = lagrange_weights(u - st, d)
    idx = (st[..., None] + np.arange(d + 1)) % Nf
    return np.sum(fine[..., idx] * w, axis=-1)


# ----------------------------------------------------------------------------
# transverse Newton-Cotes split at the target level
# ----------------------------------------------------------------------------

EXTRA_FRACTIONS = np.array([0.25, 0.5, 0.75, 1.5, 2.25])


@dataclass
class SplitNewtonCotes:
    """Levels t'_l (grid levels, then extra ones near 0 and near 1) and, for a
    target on grid level j, weights over all levels integrating [0, t_j] and
    [t_j, 1] separately with composite Q-point rules."""

    N2: int
    Q: int = 5

    def __post_init__(self):
        if self.Q != 5:
            raise ValueError("only the 5-point rule is implemented")
        N2 = self.N2
        dt = 1.0 / (N2 - 1)
        self.dt = dt
        extra0 = EXTRA_FRACTIONS * dt
        extra1 = 1.0 - EXTRA_FRACTIONS * dt
        self.levels = np.concatenate([np.linspace(0, 1, N2), extra0, extra1])
        self.n_levels = self.levels.size
        self.weights = np.zeros((N2, self.n_levels))
        nc = newton_cotes_panel(5)
        for j in range(N2):
            self.weights[j] = self._weights_for(j, nc)

    def _level_index(self, t):
        hit = np.flatnonzero(np.abs(self.levels - t) < 1e-12)
        return int(hit[0])

    def _weights_for(self, j, nc):
        N2, dt = self.N2, self.dt
        w = np.zeros(self.n_levels)
        r = j % 4
        if r:
            for f, c in zip(np.linspace(0, r, 5), nc):
                w[self._level_index(f * dt)] += c * r * dt
        for p0 in range(r, j, 4):
            for q in range(5):
                w[p0 + q] += nc[q] * 4 * dt
        top = N2 - 1
        r2 = (top - j) % 4
        for p0 in range(j, top - r2, 4):
            for q in range(5):
                w[p0 + q] += nc[q] * 4 * dt
        if r2:
            for f, c in zip(np.linspace(0, r2, 5), nc):
                w[self._level_index(1.0 - f * dt)] += c * r2 * dt
        return w

    def level_interpolation(self, d=6):
        """Matrix (n_levels, N2) mapping grid-level values to all levels."""
        N2 = self.N2
        dd = min(d, N2 - 1)
        T = np.zeros((self.n_levels, N2))
        u = self.levels * (N2 - 1)
        st, w = stencil(u, dd, N2)
        for l in range(self.n_levels):
            T[l, st[l]: st[l] + dd + 1] = w[l]
        grid = np.arange(N2)
        T[grid] = np.eye(N2)
        return T


def nc_split_weights(n_points, j, Q=5):
    """Weights on grid levels alone for a split at level j when both sides are
    whole panels (used in tests)."""
    return SplitNewtonCotes(n_points, Q).weights[j][:n_points]


# ----------------------------------------------------------------------------
# per-patch parameters of targets
# ----------------------------------------------------------------------------

def target_patch_parameter(cover, k, theta):
    """s-coordinate in patch k of boundary parameter theta, choosing the
    periodic representative closest to [0, 1]."""
    P = TWO_PI / cover.length
    s = cover.s_of_theta(k, theta)
    return np.where(s > 1.0, np.where(s - 1.0 < P - s, s, s - P), s)


def wrapped_delta(s_src, s_c, period):
    d = np.asarray(s_src) - np.asarray(s_c)
    return d - period * np.round(d / period)


# ----------------------------------------------------------------------------
# singular (windowed) part
# ----------------------------------------------------------------------------

class SingularQuadrature:
    """Windowed singular integrals for all boundary-grid targets, as a sparse
    matrix acting on the density at boundary-grid nodes.

    ``W`` is the window half-width in s, ``n_tau`` the number of trapezoid
    intervals in tau, ``d`` the Lagrange degree used in s and t.
    """

    def __init__(self, bgrid: BoundaryGrid, kappa: float, W=0.2, n_tau=80, d=7, chunk=256, assemble=True):
        self.bgrid = bgrid
        self.kappa = kappa
        self.cov = ChangeOfVariable(W)
        self.W = W
        self.n_tau = n_tau
        self.d = min(d, bgrid.N1 - 1)
        self.split = SplitNewtonCotes(bgrid.N2, bgrid.Q)
        self.T = self.split.level_interpolation(d=min(6, bgrid.N2 - 1))
        self.chunk = chunk
        self.matrix = self._assemble() if assemble else None

    # -- target/patch pairs ---------------------------------------------------
    def _pairs(self, targets):
        """(target, patch, s_c, level) for every patch whose window reaches the target."""
        g, c = self.bgrid, self.bgrid.cover
        N1, N2 = g.N1, g.N2
        kk, rem = np.divmod(targets, N1 * N2)
        ii, jj = np.divmod(rem, N2)
        theta = g.theta[kk, ii]
        rows, patches, centres = [], [], []
        for k in range(g.K):
            sc = target_patch_parameter(c, k, theta)
            ok = (sc + self.W > 0) & (sc - self.W < 1)
            rows.append(np.flatnonzero(ok))
            patches.append(np.full(ok.sum(), k))
            centres.append(sc[ok])
        rows = np.concatenate(rows)
        return rows, np.concatenate(patches), np.concatenate(centres), jj[rows]

    def block_matrix(self, targets):
        """Rows of the windowed operator for the given targets, as CSR (len(targets), N_B)."""
        g = self.bgrid
        targets = np.sort(np.asarray(targets))
        rows, patches, centres, levels = self._pairs(targets)
        data, ri, ci = [], [], []
        for k in range(g.K):
            sel = np.flatnonzero(patches == k)
            for lo in range(0, sel.size, self.chunk):
                idx = sel[lo: lo + self.chunk]
                r_, c_, v_ = self._block(k, targets[rows[idx]], centres[idx], levels[idx])
                ri.append(np.searchsorted(targets, r_).astype(np.int32))  # targets are sorted
                ci.append(c_.astype(np.int32))
                data.append(v_)
        shape = (targets.size, g.size)
        if not data:
            return sparse.csr_matrix(shape, dtype=complex)
        return sparse.csr_matrix((np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))), shape=shape)

    def _assemble(self):
        n = self.bgrid.size
        step = max(self.chunk, 1)
        pieces = [self.block_matrix(np.arange(lo, min(lo + step, n))) for lo in range(0, n, step)]
        return sparse.vstack(pieces, format="csr")

    def kernel_block(self, k, xt, yt, s_c, level_weights):
        """Kernel array (P, n_levels, n_tau') and source parameters s' (P, n_tau')
        for targets (xt, yt) whose patch-k parameter is s_c."""
        g, cov = self.bgrid, self.cov
        cover = g.cover
        tau, dw = cov.nodes(self.n_tau)
        rho = cov.rho(tau)
        win = eta_s(rho, self.W) * dw
        s_src = s_c[:, None] + rho[None, :]
        valid = (s_src > 0.0) & (s_src < 1.0)
        s_eval = np.clip(s_src, 0.0, 1.0)
        th = cover.theta(k, s_eval)
        px, py = cover.curve.point(th)
        nx, ny = cover.curve.normal(th)
        dx, dy = cover.curve.d1(th)
        ndx, ndy = cover.curve.normal_derivative(th)
        pou = np.where(valid, cover.pou(k, s_eval), 0.0)
        lv = self.split.levels
        tau0 = cover.tau0
        tl = (tau0 * lv)[None, :, None]
        ex = px[:, None, :] - tl * nx[:, None, :]
        ey = py[:, None, :] - tl * ny[:, None, :]
        ax = dx[:, None, :] - tl * ndx[:, None, :]
        ay = dy[:, None, :] - tl * ndy[:, None, :]
        jac = cover.length * tau0 * np.abs(ax * ny[:, None, :] - ay * nx[:, None, :])
        r = np.hypot(xt[:, None, None] - ex, yt[:, None, None] - ey)
        G = green(self.kappa, np.maximum(r, 1e-300))
        eta_l = eta(tau0 * lv, tau0)
        Kb = (level_weights[:, :, None] * eta_l[None, :, None]) * (win * 1.0)[None, None, :] * pou[:, None, :] * jac * G
        return Kb, s_src, valid

    def _block(self, k, rows, s_c, levels):
        g = self.bgrid
        N1, N2, d = g.N1, g.N2, self.d
        xt = g.x.reshape(-1)[rows]
        yt = g.y.reshape(-1)[rows]
        Kb, s_src, valid = self.kernel_block(k, xt, yt, s_c, self.split.weights[levels])
        u = np.clip(s_src, 0.0, 1.0) * (N1 - 1)
        st, cw = stencil(u, d, N1)
        cw = cw * valid[..., None]
        base = st.min(axis=1)
        width = int((st.max(axis=1) - base).max()) + d + 1
        P, M = st.shape
        Cst = np.zeros((P, M, width))
        off = (st - base[:, None])[..., None] + np.arange(d + 1)
        pi = np.repeat(np.arange(P), M * (d + 1))
        mi = np.tile(np.repeat(np.arange(M), d + 1), P)
        np.add.at(Cst, (pi, mi, off.reshape(-1)), cw.reshape(-1))
        Wl = np.einsum("plm,pmw->plw", Kb, Cst)  # (P, n_levels, width)
        Wg = Wl[:, :N2] + np.einsum("pew,ej->pjw", Wl[:, N2:], self.T[N2:])
        # node index: k*N1*N2 + i*N2 + j
        i_idx = base[:, None, None] + np.arange(width)[None, None, :]
        j_idx = np.arange(N2)[None, :, None]
        cols = k * N1 * N2 + np.clip(i_idx, 0, N1 - 1) * N2 + j_idx
        keep = (i_idx < N1) & np.ones_like(j_idx, dtype=bool)
        rr = np.broadcast_to(rows[:, None, None], Wg.shape)
        keep = np.broadcast_to(keep, Wg.shape) & (Wg != 0)
        return rr[keep], np.broadcast_to(cols, Wg.shape)[keep], Wg[keep]

    def apply(self, v):
        return self.matrix @ np.asarray(v).reshape(-1)

    # -- single target, arbitrary depth ---------------------------------------
    def adjacent_boundary_integral(self, k, s, t, v):
        """Windowed singular integral over patch k for the point xi_k(s, t)
        with density values ``v`` (K, N1, N2) on the boundary grid."""
        if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
            raise TargetOutsidePatch(f"(s, t) = ({s}, {t}) outside [0, 1]^2")
        g = self.bgrid
        N1, N2 = g.N1, g.N2
        x, y = g.cover.xi(k, s, t)
        levels, lw = _split_levels_offgrid(t, N2)
        # interpolate the density to the chosen levels, then in s
        dd = min(6, N2 - 1)
        st_t, wt = stencil(levels * (N2 - 1), dd, N2)
        vk = np.asarray(v).reshape(g.K, N1, N2)[k]
        vl = np.stack([vk[:, a: a + dd + 1] @ w for a, w in zip(st_t, wt)])  # (n_lv, N1)
        tau, dw = self.cov.nodes(self.n_tau)
        rho = self.cov.rho(tau)
        s_src = s + rho
        valid = (s_src > 0) & (s_src < 1)
        u = np.clip(s_src, 0, 1) * (N1 - 1)
        st, cw = stencil(u, self.d, N1)
        vals = np.stack([np.sum(vl[:, st[m]: st[m] + self.d + 1] * cw[m], axis=1) for m in range(tau.size)], axis=1)
        cover = g.cover
        sp_ = np.clip(s_src, 0, 1)
        S, Tt = np.meshgrid(sp_, levels, indexing="xy")
        ex, ey = cover.xi(k, S, Tt)
        jac = cover.jacobian(k, S, Tt)
        G = green(self.kappa, np.maximum(np.hypot(x - ex, y - ey), 1e-300))
        pou = np.where(valid, cover.pou(k, sp_), 0.0)
        f = vals * jac * G * (eta_s(rho, self.W) * dw * pou)[None, :] * eta(cover.tau0 * levels, cover.tau0)[:, None]
        return complex(np.sum(lw[:, None] * f))


def _split_levels_offgrid(t, N2):
    """Levels and weights for int_0^1 split at an arbitrary t: each side is
    covered by whole 5-point panels of spacing close to the grid's."""
    dt = 1.0 / (N2 - 1)
    nc = newton_cotes_panel(5)
    lv, w = [], []
    for a, b in ((0.0, t), (t, 1.0)):
        if b - a <= 0:
            continue
        panels = max(1, int(math.ceil((b - a) / (4 * dt))))
        h = (b - a) / panels
        for p in range(panels):
            for q in range(5):
                lv.append(a + p * h + q * h / 4)
                w.append(nc[q] * h)
    return np.array(lv), np.array(w)


# ----------------------------------------------------------------------------
# regular part: (1_{N_x} - eta_s) w_y G(x - y)
# ----------------------------------------------------------------------------

def _source_arrays(bgrid: BoundaryGrid):
    K, N1, N2 = bgrid.K, bgrid.N1, bgrid.N2
    kk, ii, _ = np.meshgrid(np.arange(K), np.arange(N1), np.arange(N2), indexing="ij")
    return bgrid.x.reshape(-1), bgrid.y.reshape(-1), kk.reshape(-1), bgrid.s[ii.reshape(-1)]


def window_factor(bgrid: BoundaryGrid, W, target_theta, src_patch, src_s):
    """eta_s between targets (with boundary parameter theta, or NaN for targets
    without a window) and sources; shape (n_targets, n_sources)."""
    cover = bgrid.cover
    P = TWO_PI / cover.length
    out = np.zeros((np.size(target_theta), np.size(src_s)))
    has = np.isfinite(target_theta)
    if not np.any(has):
        return out
    for k in range(bgrid.K):
        cols = np.flatnonzero(src_patch == k)
        if cols.size == 0:
            continue
        sc = target_patch_parameter(cover, k, np.where(has, target_theta, 0.0))
        delta = wrapped_delta(src_s[cols][None, :], sc[:, None], P)
        out[np.ix_(has, cols)] = eta_s(delta[has], W)
    return out


class RegularNear:
    """Sparse matrix of the smooth near-field weights for a set of targets.

    Row x collects sources y with weight (1[y in N_x] - eta_s(x, y)) w_y G(x-y),
    where N_x is the 3x3 cell block around x (``cells=None`` means every
    source is near, i.e. the unaccelerated direct sum).  ``target_theta`` is
    the boundary parameter of window-carrying targets and NaN otherwise.
    """

    def __init__(self, bgrid: BoundaryGrid, kappa, W, tx, ty, target_theta, cells: CellDecomposition | None,
                 chunk=512, store=True):
        self.bgrid, self.kappa, self.W = bgrid, kappa, W
        self.tx, self.ty = np.asarray(tx, float), np.asarray(ty, float)
        self.theta = np.asarray(target_theta, float)
        self.cells = cells
        self.chunk = chunk
        self.sx, self.sy, self.sk, self.ss = _source_arrays(bgrid)
        self.w = bgrid.weights.reshape(-1)
        self.store = store
        self.matrix = self._assemble() if store else None

    def _rows(self, rows):
        """(row index, col index, value) for a block of targets."""
        tx, ty, th = self.tx[rows], self.ty[rows], self.theta[rows]
        if self.cells is None:
            cols = np.arange(self.sx.size)
            inblock = np.ones((rows.size, cols.size))
        else:
            c = self.cells
            ti, tj = c.cell_of(tx, ty)
            si, sj = c.cell_of(self.sx, self.sy)
            # candidates: sources in the union of the blocks of these targets
            # plus sources inside some target's window
            near = (np.abs(si[None, :] - ti[:, None]) <= 1) & (np.abs(sj[None, :] - tj[:, None]) <= 1)
            cols = np.flatnonzero(near.any(axis=0) | self._window_candidates(th))
            inblock = near[:, cols].astype(float)
        win = window_factor(self.bgrid, self.W, th, self.sk[cols], self.ss[cols])
        fac = inblock - win
        r = np.hypot(tx[:, None] - self.sx[cols][None, :], ty[:, None] - self.sy[cols][None, :])
        with np.errstate(all="ignore"):
            G = green(self.kappa, np.where(fac != 0, np.maximum(r, 1e-300), 1.0))
        val = np.where(fac != 0, fac * G * self.w[cols][None, :], 0.0)
        return cols, val

    def _window_candidates(self, th):
        has = np.isfinite(th)
        out = np.zeros(self.sx.size, dtype=bool)
        if not np.any(has):
            return out
        cover = self.bgrid.cover
        P = TWO_PI / cover.length
        for k in range(self.bgrid.K):
            cols = np.flatnonzero(self.sk == k)
            sc = target_patch_parameter(cover, k, th[has])
            lo, hi = sc.min() - self.W, sc.max() + self.W
            d = self.ss[cols]
            # conservative: any source within [lo, hi] modulo the period
            dd = wrapped_delta(d, 0.5 * (lo + hi), P)
            out[cols] |= np.abs(dd) <= 0.5 * (hi - lo)
        return out

    def block_matrix(self, rows):
        """CSR rows (len(rows), N_B) for the given target indices."""
        rows = np.asarray(rows)
        cols, val = self._rows(rows)
        nz = np.nonzero(val)
        return sparse.csr_matrix((val[nz], (nz[0].astype(np.int32), cols[nz[1]].astype(np.int32))),
                                 shape=(rows.size, self.sx.size))

    def _assemble(self):
        n = self.tx.size
        order = self._order()
        pieces = [self.block_matrix(order[lo: lo + self.chunk]) for lo in range(0, n, self.chunk)]
        if not pieces:
            return sparse.csr_matrix((0, self.sx.size), dtype=complex)
        mat = sparse.vstack(pieces, format="csr")
        # undo the cell ordering
        inv = np.empty(n, dtype=np.int64)
        inv[order] = np.arange(n)
        return mat[inv]

    def _order(self):
        """Group targets by cell so each block touches few sources."""
        if self.cells is None:
            return np.arange(self.tx.size)
        i, j = self.cells.cell_of(self.tx, self.ty)
        return np.lexsort((self.theta if np.all(np.isfinite(self.theta)) else np.zeros_like(self.tx), j, i))

    def apply(self, v):
        v = np.asarray(v).reshape(-1)
        if self.matrix is not None:
            return self.matrix @ v
        out = np.zeros(self.tx.size, dtype=complex)
        for lo in range(0, self.tx.size, self.chunk):
            rows = np.arange(lo, min(lo + self.chunk, self.tx.size))
            cols, val = self._rows(rows)
            out[rows] = val @ v[cols]
        return out

    @property
    def nnz(self):
        return 0 if self.matrix is None else self.matrix.nnz


def base_boundary_adjacent(bgrid, kappa, W, tx, ty, cells, v):
    """Adjacent-cell part of A_B at (non boundary-region) targets."""
    near = RegularNear(bgrid, kappa, W, tx, ty, np.full(np.size(tx), np.nan), cells)
    return near.apply(v)


def nonadjacent_boundary_quadrature_weights(bgrid: BoundaryGrid):
    return bgrid.weights.reshape(-1)
