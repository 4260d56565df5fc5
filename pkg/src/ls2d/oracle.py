"""Reference solutions for validation.

* :class:`DiscSeriesSolution` -- transmission problem for a homogeneous disc
  under plane-wave incidence exp(i k x), solved mode by mode.
* :func:`disc_exact_volume_potential` -- the volume potential of
  m exp(i k x_1) over a disc, via Lommel's integrals of Bessel products.
* :func:`brute_force_potential` -- adaptive quadrature in polar coordinates
  centred at the target (removes the logarithmic singularity).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy import special as sp

from .errors import QuadratureFailure, SingularMode
from .specfun import green


def _jl(ell, x):
    return sp.jv(ell, x)


def _hl(ell, x):
    return sp.hankel1(ell, x)


@dataclass
class DiscSeriesSolution:
    """Total field for a disc of radius ``a`` and index ``n`` centred at the origin."""

    kappa: float
    n: complex
    a: float = 1.0
    L: int | None = None
    coef_in: np.ndarray = field(init=False, repr=False)
    coef_out: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.L is None:
            self.L = math.ceil(self.kappa * self.a) + 40
        k, n, a = self.kappa, complex(self.n), self.a
        ells = np.arange(-self.L, self.L + 1)
        ain = np.zeros(ells.size, dtype=complex)
        bout = np.zeros(ells.size, dtype=complex)
        for idx, ell in enumerate(ells):
            inc = 1j ** ell
            M = np.array([[sp.jv(ell, k * n * a), -_hl(ell, k * a)],
                          [k * n * sp.jvp(ell, k * n * a), -k * sp.h1vp(ell, k * a)]], dtype=complex)
            rhs = inc * np.array([sp.jv(ell, k * a), k * sp.jvp(ell, k * a)], dtype=complex)
            colscale = np.abs(M).max(axis=0)
            if not np.all(np.isfinite(M)) or np.any(colscale == 0) or np.linalg.cond(M / colscale) > 1e14:
                raise SingularMode(f"modal system for ell={ell} is singular")
            ain[idx], bout[idx] = np.linalg.solve(M / colscale, rhs) / colscale
        self.ells = ells
        self.coef_in, self.coef_out = ain, bout

    def field(self, x, y):
        """Total field u at points (x, y)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.hypot(x, y)
        th = np.arctan2(y, x)
        out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
        inner = r <= self.a
        k, n = self.kappa, complex(self.n)
        for ell, ai, bo in zip(self.ells, self.coef_in, self.coef_out):
            ph = np.exp(1j * ell * th)
            if np.any(inner):
                out[inner] += ai * sp.jv(ell, k * n * r[inner]) * ph[inner]
            if np.any(~inner):
                out[~inner] += bo * _hl(ell, k * r[~inner]) * ph[~inner]
        out[~inner] += np.exp(1j * k * x[~inner])
        return out

    def scattered(self, x, y):
        return self.field(x, y) - np.exp(1j * self.kappa * np.asarray(x))

    def continuity_residual(self, n_angles=64):
        """max over angles of |u_in - u_out| and |d_r u_in - d_r u_out| at r = a."""
        th = np.arange(n_angles) * 2 * np.pi / n_angles
        k, n, a = self.kappa, complex(self.n), self.a
        ui = np.zeros(n_angles, complex)
        uo = np.exp(1j * k * a * np.cos(th))
        di = np.zeros(n_angles, complex)
        do = 1j * k * np.cos(th) * uo
        for ell, ai, bo in zip(self.ells, self.coef_in, self.coef_out):
            ph = np.exp(1j * ell * th)
            ui += ai * sp.jv(ell, k * n * a) * ph
            di += ai * k * n * sp.jvp(ell, k * n * a) * ph
            uo += bo * _hl(ell, k * a) * ph
            do += bo * k * sp.h1vp(ell, k * a) * ph
        scale = max(np.abs(uo).max(), 1.0)
        return max(np.abs(ui - uo).max() / scale, np.abs(di - do).max() / (k * scale))


def disc_exact_field(kappa, n, a_disc, x, y):
    return DiscSeriesSolution(kappa, n, a_disc).field(x, y)


def _lommel(ell, x, Z, W):
    """Antiderivative of rho Z_l(k rho) W_l(k rho) in the variable x = k rho, divided by k^2."""
    return 0.25 * x * x * (2 * Z(ell, x) * W(ell, x) - Z(ell - 1, x) * W(ell + 1, x) - Z(ell + 1, x) * W(ell - 1, x))


def disc_exact_volume_potential(kappa, m, a_disc, x, y, L=None):
    """Volume potential  int_disc G(x - y) m exp(i k y_1) dy  (disc centred at 0)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k, a = kappa, a_disc
    if L is None:
        L = math.ceil(k * a) + 40
    r = np.hypot(x, y)
    th = np.arctan2(y, x)
    out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
    ka = k * a
    for ell in range(-L, L + 1):
        c = m * (1j ** ell)
        # inner: H_l(k r) int_0^r J_l^2 rho; outer: J_l(k r) int_r^a H_l J_l rho
        rin = np.minimum(r, a)
        with np.errstate(all="ignore"):
            I_in = _lommel(ell, k * rin, _jl, _jl) / k**2
            H_r = np.where(r > 0, _hl(ell, k * np.where(r > 0, r, 1.0)), 0.0)
            term = H_r * I_in
            if ell == 0:
                term = np.where(r > 0, term, 0.0)
            I_out = np.where(r < a, (_lommel(ell, ka, _hl, _jl) - _lommel(ell, k * np.where(r > 0, r, 1.0), _hl, _jl)) / k**2, 0.0)
            if ell == 0:
                I0 = _lommel(0, ka, _hl, _jl) / k**2  # limit at r -> 0 of the antiderivative is 0
                I_out = np.where(r > 0, I_out, I0)
            term = term + sp.jv(ell, k * r) * I_out
        term = np.where(np.isfinite(term), term, 0.0)
        out += (1j * math.pi / 2) * c * term * np.exp(1j * ell * th)
    return out


def _lommel2(ell, x, alpha, beta, Z, W):
    """Antiderivative of rho Z_l(alpha rho) W_l(beta rho) at rho = x (alpha != beta)."""
    dZ = 0.5 * (Z(ell - 1, alpha * x) - Z(ell + 1, alpha * x))
    dW = 0.5 * (W(ell - 1, beta * x) - W(ell + 1, beta * x))
    return x * (beta * Z(ell, alpha * x) * dW - alpha * dZ * W(ell, beta * x)) / (alpha**2 - beta**2)


def disc_series_potential(sol: DiscSeriesSolution, x, y):
    """A(m u) for the series solution: m = 1 - n^2 on the disc, u the interior
    field sum_l a_l J_l(k n r) e^{il theta}.  Then u + k^2 A(m u) = u_inc."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k, n, a = sol.kappa, complex(sol.n), sol.a
    if abs(n - 1.0) < 1e-14:
        return np.zeros(np.broadcast(x, y).shape, dtype=complex)
    m = 1.0 - n * n
    kn = k * n
    r = np.hypot(x, y)
    th = np.arctan2(y, x)
    rin = np.minimum(r, a)
    rpos = np.where(r > 0, r, 1.0)
    out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
    for ell, ai in zip(sol.ells, sol.coef_in):
        # inner: H_l(k r) int_0^r J_l(k rho) J_l(kn rho) rho; outer: J_l(k r) int_r^a H_l(k rho) J_l(kn rho) rho
        with np.errstate(all="ignore"):
            I_in = _lommel2(ell, rin, k, kn, _jl, _jl) - _lommel2(ell, 0.0, k, kn, _jl, _jl)
            term = np.where(r > 0, _hl(ell, k * rpos) * I_in, 0.0)
            I_out = np.where(r < a, _lommel2(ell, a, k, kn, _hl, _jl) - _lommel2(ell, rpos, k, kn, _hl, _jl), 0.0)
            if ell == 0:
                # rho H_0 J_0 antiderivative vanishes at 0 (rho log rho -> 0)
                I_out = np.where(r > 0, I_out, _lommel2(0, a, k, kn, _hl, _jl) + 1j * 2 / (math.pi * (k**2 - kn**2)))
            term = term + sp.jv(ell, k * r) * I_out
        term = np.where(np.isfinite(term), term, 0.0)
        out += (1j * math.pi / 2) * m * ai * term * np.exp(1j * ell * th)
    return out


def _ray_interval_disc(x0, y0, phi, R):
    # |p + rho e| = R, rho >= 0
    ex, ey = math.cos(phi), math.sin(phi)
    b = x0 * ex + y0 * ey
    c = x0 * x0 + y0 * y0 - R * R
    disc = b * b - c
    if disc <= 0:
        return None
    s = math.sqrt(disc)
    lo, hi = -b - s, -b + s
    if hi <= 0:
        return None
    return max(lo, 0.0), hi


def brute_force_potential(density, kappa, x, y, radius=1.0, epsabs=1e-11, epsrel=1e-11, breakpoints=()):
    """Adaptive evaluation of int_{|y|<radius} G(x - y) density(y) dy.

    ``density(px, py)`` must accept floats.  Integration runs in polar
    coordinates about the target, so the rho factor cancels the logarithm.
    ``breakpoints`` are radii (about the disc centre) where the density has
    reduced smoothness; rays are split where they cross them.
    """

    def inner(phi):
        seg = _ray_interval_disc(x, y, phi, radius)
        if seg is None:
            return 0.0, 0.0
        lo, hi = seg
        pts = [lo, hi]
        ex, ey = math.cos(phi), math.sin(phi)
        for bp in breakpoints:
            got = _ray_interval_disc(x, y, phi, bp)
            if got is not None:
                pts.extend(v for v in got if lo < v < hi)
        pts = sorted(set(pts))

        def f(rho, part):
            val = density(x + rho * ex, y + rho * ey) * (green(kappa, rho) if rho > 0 else 0.0) * rho
            return val.real if part == 0 else val.imag

        re = im = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            re += integrate.quad(f, a, b, args=(0,), epsabs=epsabs, epsrel=epsrel, limit=200)[0]
            im += integrate.quad(f, a, b, args=(1,), epsabs=epsabs, epsrel=epsrel, limit=200)[0]
        return re, im

    with np.errstate(all="ignore"):
        res_re, err_re = integrate.quad(lambda p: inner(p)[0], 0, 2 * math.pi, epsabs=epsabs, epsrel=epsrel, limit=400)
        res_im, err_im = integrate.quad(lambda p: inner(p)[1], 0, 2 * math.pi, epsabs=epsabs, epsrel=epsrel, limit=400)
    if max(err_re, err_im) > 1e3 * max(epsabs, epsrel * abs(complex(res_re, res_im))):
        raise QuadratureFailure(f"error estimate {max(err_re, err_im):.2e} too large")
    return complex(res_re, res_im)
