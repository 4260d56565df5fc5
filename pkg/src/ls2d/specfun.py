"""Cylinder functions and Chebyshev polynomials.

Thin, vectorised wrappers over :mod:`scipy.special` with the order-reflection
rules applied explicitly, plus a couple of fast paths for the orders that the
kernels evaluate millions of times (``H0`` and ``H1``).
"""
from __future__ import annotations

import numpy as np
from scipy import special as _sp

ELL_MAX = 512


def _reflect(ell, values):
    ell = np.asarray(ell)
    sign = np.where((ell < 0) & (np.abs(ell) % 2 == 1), -1.0, 1.0)
    return sign * values


def bessel_j(ell, x):
    """J_ell(x) for integer ``ell`` (any sign) and ``x >= 0``."""
    ell = np.asarray(ell)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("bessel_j requires x >= 0")
    return _reflect(ell, _sp.jv(np.abs(ell), x))


def bessel_y(ell, x):
    """Y_ell(x) for integer ``ell`` and ``x > 0``."""
    ell = np.asarray(ell)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("bessel_y requires x > 0")
    return _reflect(ell, _sp.yv(np.abs(ell), x))


def hankel1(ell, x):
    """H^(1)_ell(x) = J_ell(x) + i Y_ell(x), ``x > 0``."""
    return bessel_j(ell, x) + 1j * bessel_y(ell, x)


def h0(x):
    """H^(1)_0 for positive arrays (fast path, no argument checks)."""
    return _sp.j0(x) + 1j * _sp.y0(x)


def h1(x):
    """H^(1)_1 for positive arrays (fast path, no argument checks)."""
    return _sp.j1(x) + 1j * _sp.y1(x)


def green(kappa, r):
    """Radiating fundamental solution (i/4) H0(kappa r) for r > 0."""
    return 0.25j * h0(kappa * r)


def chebyshev_t(n, beta):
    """T_n(beta) by the three-term recurrence, ``|beta| <= 1``."""
    beta = np.asarray(beta, dtype=float)
    if np.any(np.abs(beta) > 1 + 1e-14):
        raise ValueError("chebyshev_t requires |beta| <= 1")
    if n == 0:
        return np.ones_like(beta)
    t0, t1 = np.ones_like(beta), beta.copy()
    for _ in range(n - 1):
        t0, t1 = t1, 2 * beta * t1 - t0
    return t1


def chebyshev_matrix(nmax, beta):
    """Rows T_0..T_{nmax-1} evaluated at ``beta``; shape (len(beta), nmax)."""
    beta = np.asarray(beta, dtype=float)
    out = np.empty(beta.shape + (nmax,))
    out[..., 0] = 1.0
    if nmax > 1:
        out[..., 1] = beta
    for n in range(2, nmax):
        out[..., n] = 2 * beta * out[..., n - 1] - out[..., n - 2]
    return out
