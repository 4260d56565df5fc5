"""Base-base interaction on the polar grid via the addition theorem.

With (E v)(r, theta) = sum_l f_l(r) e^{i l theta} the potential decouples,

    A_l(r) = 2 pi int_0^R G_l(r, r') f_l(r') r' dr',
    G_l(r, r') = (i/4) H_l(k max(r, r')) J_l(k min(r, r')).

Each f_l is represented per radial interval by its Chebyshev series through
the Nc interior nodes.  Moments of G_l against T_n are computed once for all
target radii (the grid radii), split at the target so each piece has a smooth
integrand.  An application is then an FFT in theta, one small dense product
per mode and an inverse FFT.

For large |l| at small radii J_l underflows while Y_l overflows; their
product is bounded, so both are carried as (mantissa, log-scale) pairs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import special as sp

from .errors import AliasError, QuadratureFailure, ShapeMismatch
from .grids import PolarBaseGrid

_BIG = 1e200
_SMALL = 1e-200


# ----------------------------------------------------------------------------
# Fourier and Chebyshev analysis
# ----------------------------------------------------------------------------

@dataclass
class ModalDensity:
    """Modes -L..L (row index l + L) of a polar-grid field, per radial node."""

    L: int
    values: np.ndarray  # (2L+1, n_r)

    def mode(self, ell):
        return self.values[ell + self.L]


def angular_fourier(samples, L_max=None) -> ModalDensity:
    """Trapezoidal Fourier coefficients in theta; ``samples`` is (n_theta, n_r)."""
    samples = np.asarray(samples)
    n_theta = samples.shape[0]
    if L_max is None:
        L_max = (n_theta - 1) // 2
    if 2 * L_max + 1 > n_theta:
        raise AliasError(f"L_max={L_max} aliases with {n_theta} angles")
    c = sfft.fft(samples, axis=0) / n_theta
    idx = np.arange(-L_max, L_max + 1) % n_theta
    return ModalDensity(L_max, c[idx])


def angular_synthesis(modes: ModalDensity, n_theta: int):
    L = modes.L
    if 2 * L + 1 > n_theta:
        raise AliasError("too many modes for the angular grid")
    buf = np.zeros((n_theta,) + modes.values.shape[1:], dtype=complex)
    buf[np.arange(-L, L + 1) % n_theta] = modes.values
    return sfft.ifft(buf, axis=0) * n_theta


def chebyshev_nodes(Nc):
    return np.cos(np.pi * (np.arange(1, Nc + 1) - 0.5) / Nc)


def chebyshev_analysis_matrix(Nc):
    """C with c = C f for samples f_j at beta_j = cos(pi (j - 1/2)/Nc)."""
    beta = chebyshev_nodes(Nc)
    n = np.arange(Nc)
    C = (2.0 / Nc) * np.cos(np.outer(n, np.arccos(beta)))
    C[0] *= 0.5
    return C


def chebyshev_analyze(samples, axis=-1):
    """Discrete Chebyshev coefficients from samples at the Nc first-kind nodes."""
    samples = np.asarray(samples)
    C = chebyshev_analysis_matrix(samples.shape[axis])
    return np.moveaxis(np.tensordot(C, np.moveaxis(samples, axis, 0), axes=(1, 0)), 0, axis)


def chebyshev_evaluate(coeffs, beta):
    """sum_n c_n T_n(beta) along the last axis of ``coeffs``."""
    coeffs = np.asarray(coeffs)
    beta = np.asarray(beta, dtype=float)
    T = np.cos(np.multiply.outer(np.arange(coeffs.shape[-1]), np.arccos(np.clip(beta, -1, 1))))
    return np.tensordot(coeffs, T, axes=(-1, 0))


# ----------------------------------------------------------------------------
# Bessel values with a separate log-scale
# ----------------------------------------------------------------------------

def _log_j_series(ell, x):
    q = -0.25 * x * x
    term = np.ones_like(x)
    s = np.ones_like(x)
    for k in range(1, 40):
        term = term * q / (k * (ell + k))
        s = s + term
    return ell * np.log(0.5 * x) - sp.gammaln(ell + 1.0) + np.log(s)


def _log_y_series(ell, x):
    """log|Y_l(x)| from the leading finite sum (valid where Y_l is huge)."""
    q = 0.25 * x * x
    term = np.ones_like(x)
    s = np.ones_like(x)
    ell = np.asarray(ell)
    for k in range(0, int(np.max(ell)) - 1):
        denom = (k + 1) * (ell - k - 1)
        term = np.where(denom > 0, term * q / np.where(denom > 0, denom, 1), 0.0)
        s = s + term
    return -ell * np.log(0.5 * x) - math.log(math.pi) + sp.gammaln(ell * 1.0) + np.log(s)


def scaled_jh(L, x):
    """J_l(x) = Jm e^{eJ} and H_l(x) = Hm e^{eH} for l = 0..L (rows), x > 0 or 0."""
    x = np.asarray(x, dtype=float)
    ells = np.arange(L + 1)[:, None]
    X = np.broadcast_to(x[None, :], (L + 1, x.size))
    with np.errstate(all="ignore"):
        J = sp.jv(ells, X)
        Y = sp.yv(ells, X)
    Jm = J.astype(float)
    eJ = np.zeros_like(Jm)
    badJ = (np.abs(J) < _SMALL) & (X > 0) & (ells > 0)
    if np.any(badJ):
        ii, jj = np.nonzero(badJ)
        lj = _log_j_series(ii.astype(float), X[ii, jj])
        Jm[ii, jj] = 1.0
        eJ[ii, jj] = lj
    with np.errstate(all="ignore"):
        Hm = (J + 1j * Y).astype(complex)
    eH = np.zeros(Hm.shape)
    badY = (~np.isfinite(Y) | (np.abs(Y) > _BIG)) & (X > 0)
    if np.any(badY):
        ii, jj = np.nonzero(badY)
        ly = _log_y_series(ii.astype(float), X[ii, jj])
        Hm[ii, jj] = -1j
        eH[ii, jj] = ly
    Hm[:, x == 0] = 0.0
    return Jm, eJ, Hm, eH


# ----------------------------------------------------------------------------
# radial quadrature
# ----------------------------------------------------------------------------

def _radial_pieces(r_nodes, ratio=1.05, origin_levels=40):
    """Subintervals between consecutive radii, graded geometrically."""
    pieces = []
    for lo, hi in zip(r_nodes[:-1], r_nodes[1:]):
        if lo == 0.0:
            edges = [hi * 2.0 ** (-k) for k in range(origin_levels, -1, -1)]
            pieces.append((0.0, edges[0]))
            # inside [hi 2^-40, hi] refine to the common ratio
            e = np.geomspace(edges[0], hi, int(math.ceil(math.log(hi / edges[0]) / math.log(2.0))) + 1)
            pieces.extend(zip(e[:-1], e[1:]))
            continue
        n = max(1, int(math.ceil(math.log(hi / lo) / math.log(ratio))))
        e = np.geomspace(lo, hi, n + 1)
        pieces.extend(zip(e[:-1], e[1:]))
    return pieces


def radial_quadrature(r_nodes, n_gauss=16, ratio=1.05):
    """Composite Gauss-Legendre nodes/weights with breakpoints at every grid radius."""
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    pts, wts = [], []
    for lo, hi in _radial_pieces(np.asarray(r_nodes), ratio):
        pts.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * xg)
        wts.append(0.5 * (hi - lo) * wg)
    return np.concatenate(pts), np.concatenate(wts)


def modal_kernel(ell, kappa, r, rp):
    """G_l(r, r') = (i/4) H_l(k max) J_l(k min) (reference, unscaled)."""
    r = np.asarray(r, float)
    rp = np.asarray(rp, float)
    lo, hi = np.minimum(r, rp), np.maximum(r, rp)
    return 0.25j * sp.hankel1(ell, kappa * hi) * sp.jv(ell, kappa * lo)


def _scaled_product(Am, eA, Bm, eB):
    e = eA + eB
    out = Am * Bm
    if np.any(e != 0):
        out = out * np.exp(np.clip(e, -745.0, 700.0))
    return out


# ----------------------------------------------------------------------------
# moments and operator
# ----------------------------------------------------------------------------

def interval_moments(kappa, ell, a, b, r, Nc, n_gauss=16, ratio=1.05):
    """(inner, outer) Chebyshev moments of one interval [a, b] for target radius r.

    inner_n = 2 pi int_a^{min(r,b)} G_l(r, r') T_n(alpha(r')) r' dr', outer the
    remainder up to b.  Each piece is integrated with graded Gauss-Legendre.
    """
    def piece(lo, hi):
        if hi <= lo:
            return np.zeros(Nc, dtype=complex)
        q, w = radial_quadrature(np.array([lo, hi]), n_gauss, ratio)
        G = modal_kernel(ell, kappa, r, q)
        beta = (2 * q - a - b) / (b - a)
        T = np.cos(np.outer(np.arange(Nc), np.arccos(np.clip(beta, -1, 1))))
        return 2 * np.pi * (T * (G * q * w)[None, :]).sum(axis=1)

    split = min(max(r, a), b)
    return piece(a, split), piece(split, b)


@dataclass
class RadialMoments:
    """Per mode l >= 0: P[l] of shape (n_r, n_int, Nc), the Chebyshev moments of
    G_l(r_a, .) over every interval (inner and outer parts summed), and the
    nodal operator M[l] = P[l] composed with the Chebyshev analysis."""

    kappa: float
    L: int
    P: np.ndarray
    M: np.ndarray


def precompute_moments(grid: PolarBaseGrid, kappa: float, L_max=None, n_gauss=16, ratio=1.05,
                       check=True) -> RadialMoments:
    if L_max is None:
        L_max = grid.L_max
    if 2 * L_max + 1 > grid.n_theta:
        raise AliasError(f"L_max={L_max} aliases with {grid.n_theta} angles")
    r = grid.r
    Nc, n_int = grid.Nc, grid.n_int
    q, w = radial_quadrature(r, n_gauss, ratio)
    interval = np.minimum(np.searchsorted(grid.edges, q, side="right") - 1, n_int - 1)
    a, b = grid.edges[interval], grid.edges[interval + 1]
    beta = (2 * q - a - b) / (b - a)
    T = np.cos(np.outer(np.arange(Nc), np.arccos(np.clip(beta, -1, 1))))  # (Nc, nq)
    # basis weights: (nq, n_int*Nc) sparse in structure, store dense per interval
    Wq = 2 * np.pi * w * q
    basis = np.zeros((q.size, n_int, Nc))
    basis[np.arange(q.size), interval, :] = (T * Wq[None, :]).T
    basis = basis.reshape(q.size, n_int * Nc)

    JmR, eJR, HmR, eHR = scaled_jh(L_max, kappa * r)
    JmQ, eJQ, HmQ, eHQ = scaled_jh(L_max, kappa * q)
    outer_mask = q[None, :] > r[:, None]  # r' > r: J(r) H(r')

    C = chebyshev_analysis_matrix(Nc)
    P = np.zeros((L_max + 1, r.size, n_int, Nc), dtype=complex)
    M = np.zeros((L_max + 1, r.size, n_int * Nc), dtype=complex)
    for ell in range(L_max + 1):
        G_out = _scaled_product(JmR[ell][:, None], eJR[ell][:, None], HmQ[ell][None, :], eHQ[ell][None, :])
        G_in = _scaled_product(HmR[ell][:, None], eHR[ell][:, None], JmQ[ell][None, :], eJQ[ell][None, :])
        G = 0.25j * np.where(outer_mask, G_out, G_in)
        Pl = (G @ basis).reshape(r.size, n_int, Nc)
        if check and not np.all(np.isfinite(Pl)):
            raise QuadratureFailure(f"non-finite radial moment for mode {ell}")
        P[ell] = Pl
        M[ell] = np.einsum("ain,nj->aij", Pl, C).reshape(r.size, n_int * Nc)
    return RadialMoments(kappa, L_max, P, M)


class ATMOperator:
    """A_E on a :class:`PolarBaseGrid`; density and result are (n_theta, n_r)."""

    def __init__(self, grid: PolarBaseGrid, kappa: float, L_max=None, moments: RadialMoments | None = None):
        self.grid = grid
        self.kappa = kappa
        self.moments = moments if moments is not None else precompute_moments(grid, kappa, L_max)
        self.L = self.moments.L
        self.cheb_nodes = grid.cheb_index.reshape(-1)  # radial node index per (interval, beta_j)

    @property
    def shape(self):
        return self.grid.shape

    def modes(self, density) -> np.ndarray:
        """A_l at every grid radius, rows l = -L..L."""
        density = np.asarray(density)
        if density.shape != self.shape:
            if density.size != self.grid.size:
                raise ShapeMismatch(f"density of shape {density.shape}, expected {self.shape}")
            density = density.reshape(self.shape)
        f = angular_fourier(density, self.L).values  # (2L+1, n_r)
        fc = f[:, self.cheb_nodes]
        L = self.L
        # modes +l and -l share the same radial operator
        pair = np.stack([fc[L:], fc[L::-1]], axis=-1)  # (L+1, n_int*Nc, 2)
        res = np.matmul(self.moments.M, pair)  # (L+1, n_r, 2)
        out = np.empty((2 * L + 1, self.grid.n_r), dtype=complex)
        out[L:] = res[:, :, 0]
        out[L::-1] = res[:, :, 1]
        return out

    def apply(self, density):
        A = self.modes(density)
        return angular_synthesis(ModalDensity(self.L, A), self.grid.n_theta)


def apply_base_atm(density, op: ATMOperator):
    return op.apply(density)
