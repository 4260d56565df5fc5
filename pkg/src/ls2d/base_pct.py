"""Base-base interaction on the Cartesian grid with the corrected trapezoidal rule.

The kernel is split as G(x) = P(x) ln|x| + Q(x) with P = -J0(k|x|)/(2 pi).
The punctured trapezoidal sum of G is completed by local corrections

    h^2 sum_r w_r sum_{q in S_r} f(x_l + q h),

w_1 = -(ln(h k / 2) + c_1 + gamma - 2 pi i / 4)/(2 pi), w_r = P(q_r) c_r,
which all live on a fixed stencil.  Both the trapezoidal part and the
corrections are therefore one translation-invariant stencil, applied as a
single zero-padded FFT convolution.

Performance: O(N log N) per application; the kernel transform is cached.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy import fft as sfft
from scipy import special as sp

from .errors import ShapeMismatch, UnsupportedOrder
from .grids import DistanceClassTable
from .specfun import green

EULER_GAMMA = 0.5772156649015328606


def kernel_split_eval(x, kappa):
    """(P, Q) for offsets of length |x| > 0."""
    r = np.asarray(x, dtype=float)
    if r.ndim and r.shape[-1:] == (2,):
        r = np.hypot(r[..., 0], r[..., 1])
    if np.any(r <= 0):
        raise ValueError("kernel split is singular at the origin; use q_at_zero")
    P = -sp.j0(kappa * r) / (2 * math.pi)
    Q = green(kappa, r) - P * np.log(r)
    return P, Q


def q_at_zero(kappa):
    return -(math.log(kappa / 2) + EULER_GAMMA) / (2 * math.pi) + 0.25j


@lru_cache(maxsize=None)
def _coefficient_table():
    text = resources.files("ls2d").joinpath("data/pct_coefficients.txt").read_text()
    table: dict[int, list[float]] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        p, r, c = line.split()
        table.setdefault(int(p), []).append((int(r), float(c)))
    return {p: tuple(c for _, c in sorted(rows)) for p, rows in table.items()}


def load_correction_coefficients(p: int) -> tuple:
    table = _coefficient_table()
    if p not in table:
        raise UnsupportedOrder(f"no correction coefficients for p={p}; available {sorted(table)}")
    coeffs = table[p]
    assert len(coeffs) == p * (p + 1) // 2 + 1
    return coeffs


@dataclass(frozen=True)
class CorrectionTable:
    p: int
    h: float
    kappa: float

    @property
    def k(self):
        return self.p * (self.p + 1) // 2 + 1

    @property
    def c(self):
        return np.array(load_correction_coefficients(self.p))

    @property
    def classes(self):
        return DistanceClassTable(self.k)

    @property
    def d(self):
        reps = self.classes.reps
        r = np.array([math.hypot(i, j) for i, j in reps]) * self.h
        return -sp.j0(self.kappa * r) / (2 * math.pi)

    @property
    def w(self):
        c, d = self.c, self.d
        w = (d * c).astype(complex)
        w[0] = -(math.log(self.h * self.kappa / 2) + c[0] + EULER_GAMMA - 2j * math.pi / 4) / (2 * math.pi)
        return w


class PCTOperator:
    """A_E on a (2n+1)^2 grid of spacing h."""

    def __init__(self, n: int, h: float, kappa: float, p: int = 3):
        self.n, self.h, self.kappa, self.p = n, h, kappa, p
        self.table = CorrectionTable(p, h, kappa)
        m = 2 * n + 1
        self.nfft = sfft.next_fast_len(2 * m)
        self._khat = sfft.fft2(self._circular_kernel())

    @property
    def shape(self):
        return (2 * self.n + 1, 2 * self.n + 1)

    def stencil(self):
        """Kernel values on offsets -2n..2n (index offset + 2n), corrections included."""
        n, h = self.n, self.h
        d = np.arange(-2 * n, 2 * n + 1) * h
        DX, DY = np.meshgrid(d, d, indexing="ij")
        R = np.hypot(DX, DY)
        R[2 * n, 2 * n] = 1.0
        K = green(self.kappa, R)
        K[2 * n, 2 * n] = 0.0
        w = self.table.w
        for r, offs in enumerate(self.table.classes.offsets):
            for (i, j) in offs:
                if abs(i) <= 2 * n and abs(j) <= 2 * n:
                    K[i + 2 * n, j + 2 * n] += w[r]
        return K * h * h

    def _circular_kernel(self):
        n, N = self.n, self.nfft
        K = self.stencil()
        out = np.zeros((N, N), dtype=complex)
        idx = np.arange(-2 * n, 2 * n + 1) % N
        out[np.ix_(idx, idx)] = K
        return out

    def apply(self, density):
        density = np.asarray(density)
        if density.shape != self.shape:
            if density.size == self.shape[0] * self.shape[1]:
                density = density.reshape(self.shape)
            else:
                raise ShapeMismatch(f"density of shape {density.shape}, expected {self.shape}")
        N = self.nfft
        pad = np.zeros((N, N), dtype=complex)
        pad[: self.shape[0], : self.shape[1]] = density
        out = sfft.ifft2(sfft.fft2(pad) * self._khat)
        return out[: self.shape[0], : self.shape[1]]

    def apply_direct(self, density):
        """O(N^2) reference for the same discrete operator."""
        density = np.asarray(density).reshape(self.shape)
        K = self.stencil()
        m = self.shape[0]
        out = np.zeros(self.shape, dtype=complex)
        for i in range(m):
            for j in range(m):
                sub = K[2 * self.n - np.arange(m)[:, None] + i, 2 * self.n - np.arange(m)[None, :] + j]
                out[i, j] = np.sum(sub * density)
        return out


def apply_base_pct(density, op: PCTOperator):
    return op.apply(density)
