"""Scatterer geometry: boundary curves, the tubular neighbourhood, cut-offs and patches.

Curves are counter-clockwise, 2*pi-periodic maps ``t -> c(t)``; the outward
normal is the tangent rotated by -90 degrees.  Depth ``tau`` of a point ``x``
in the tube is ``(P x - x) . nu(P x)``, positive inside the scatterer.

The boundary region is covered by ``K`` overlapping patches.  Patch ``k``
maps ``(s, t) in [0, 1]^2`` to ``psi_k(s) - tau0 t nu(psi_k(s))`` and carries
a partition-of-unity weight built from the same exponential ramp as the
cut-off ``eta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import ConfigError, NoProjection, NotInBoundaryRegion

TWO_PI = 2.0 * math.pi


# ----------------------------------------------------------------------------
# cut-off family
# ----------------------------------------------------------------------------

def eta(tau, tau0):
    """Smooth step: 1 for tau <= 0, 0 for tau >= tau0, C-infinity in between."""
    tau = np.asarray(tau, dtype=float)
    out = np.where(tau <= 0.0, 1.0, 0.0)
    mid = (tau > 0.0) & (tau < tau0)
    if np.any(mid):
        tm = tau[mid]
        with np.errstate(over="ignore", under="ignore"):
            out[mid] = np.exp(2.0 * tau0 * np.exp(-tau0 / tm) / (tm - tau0))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CutoffSpec:
    tau0: float

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ConfigError("tau0 must be positive")

    def __call__(self, tau):
        return eta(tau, self.tau0)


def ramp_up(s, width):
    """0 for s <= 0, 1 for s >= width; complement of :func:`eta`."""
    return 1.0 - eta(s, width)


# ----------------------------------------------------------------------------
# curves
# ----------------------------------------------------------------------------

class Curve:
    """Smooth closed curve; subclasses provide c, c' and c''."""

    name = "curve"

    def point(self, t):
        raise NotImplementedError

    def d1(self, t):
        raise NotImplementedError

    def d2(self, t):
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    # derived quantities -----------------------------------------------------
    def speed(self, t):
        dx, dy = self.d1(t)
        return np.hypot(dx, dy)

    def normal(self, t):
        dx, dy = self.d1(t)
        sp = np.hypot(dx, dy)
        return dy / sp, -dx / sp

    def normal_derivative(self, t):
        """d nu / dt."""
        dx, dy = self.d1(t)
        ddx, ddy = self.d2(t)
        sp2 = dx * dx + dy * dy
        sp = np.sqrt(sp2)
        dot = dx * ddx + dy * ddy
        tx = (ddx * sp2 - dx * dot) / sp**3
        ty = (ddy * sp2 - dy * dot) / sp**3
        return ty, -tx

    def curvature(self, t):
        """Signed curvature, positive where the curve is locally convex."""
        dx, dy = self.d1(t)
        ddx, ddy = self.d2(t)
        return (dx * ddy - dy * ddx) / np.hypot(dx, dy) ** 3

    def samples(self, n):
        t = np.arange(n) * (TWO_PI / n)
        return (t,) + tuple(self.point(t))

    def bounding_box(self, n=4096):
        _, x, y = self.samples(n)
        return x.min(), x.max(), y.min(), y.max()

    def diameter(self, n=2048):
        _, x, y = self.samples(n)
        d2 = (x[:, None] - x[None, :]) ** 2 + (y[:, None] - y[None, :]) ** 2
        return float(np.sqrt(d2.max()))

    def center(self):
        x0, x1, y0, y1 = self.bounding_box()
        return 0.5 * (x0 + x1), 0.5 * (y0 + y1)


@dataclass(frozen=True)
class Circle(Curve):
    radius: float = 1.0
    cx: float = 0.0
    cy: float = 0.0
    name = "disc"

    def point(self, t):
        return self.cx + self.radius * np.cos(t), self.cy + self.radius * np.sin(t)

    def d1(self, t):
        return -self.radius * np.sin(t), self.radius * np.cos(t)

    def d2(self, t):
        return -self.radius * np.cos(t), -self.radius * np.sin(t)

    def params(self):
        return {"radius": self.radius, "cx": self.cx, "cy": self.cy}


@dataclass(frozen=True)
class Ellipse(Curve):
    a: float = 1.0
    b: float = 0.5
    cx: float = 0.0
    cy: float = 0.0
    name = "ellipse"

    def point(self, t):
        return self.cx + self.a * np.cos(t), self.cy + self.b * np.sin(t)

    def d1(self, t):
        return -self.a * np.sin(t), self.b * np.cos(t)

    def d2(self, t):
        return -self.a * np.cos(t), -self.b * np.sin(t)

    def params(self):
        return {"a": self.a, "b": self.b, "cx": self.cx, "cy": self.cy}


@dataclass(frozen=True)
class Bean(Curve):
    """r(t) = (cos t + 0.65 cos 2t - 0.65, 1.5 sin t), optionally scaled."""

    scale: float = 1.0
    name = "bean"

    def point(self, t):
        s = self.scale
        return s * (np.cos(t) + 0.65 * np.cos(2 * t) - 0.65), s * 1.5 * np.sin(t)

    def d1(self, t):
        s = self.scale
        return s * (-np.sin(t) - 1.3 * np.sin(2 * t)), s * 1.5 * np.cos(t)

    def d2(self, t):
        s = self.scale
        return s * (-np.cos(t) - 2.6 * np.cos(2 * t)), -s * 1.5 * np.sin(t)

    def params(self):
        return {"scale": self.scale}


class ArclengthCurve(Curve):
    """The same curve traversed at constant speed: u in [0, 2 pi) is
    proportional to arclength.

    The arclength S(t) is integrated spectrally from the Fourier series of the
    speed and inverted by Newton's method on a uniform u-grid; the periodic
    part of t(u) - u is band-limited to a fine grid and splined.
    """

    def __init__(self, base: Curve, n_fourier=2048):
        self.base = base
        self.name = base.name
        n = n_fourier
        grid = np.arange(n) * (TWO_PI / n)
        c = np.fft.rfft(base.speed(grid)) / n
        self.length = float(TWO_PI * c[0].real)
        ck = c[1:].copy()
        ck[-1] *= 0.5
        k = np.arange(1, c.size)
        sk = ck / (1j * k)
        sig = np.flatnonzero(np.abs(sk) > 1e-18 * self.length)
        m = int(sig.max()) + 1 if sig.size else 1
        k, sk = k[:m], sk[:m]
        s0 = 2.0 * np.real(sk.sum())

        def arclength(t):
            return self.length / TWO_PI * t + 2.0 * np.real(np.exp(1j * np.outer(t, k)) @ sk) - s0

        t = grid.copy()
        target = grid * (self.length / TWO_PI)
        for _ in range(30):
            step = (arclength(t) - target) / base.speed(t)
            t -= step
            if np.max(np.abs(step)) < 1e-13:
                break
        # exact samples of t(u) - u on a 4x finer grid, then a periodic spline
        d = np.fft.rfft(t - grid)
        nf = 4 * n
        fine = np.fft.irfft(d, nf) * (nf / n)
        uf = np.arange(nf + 1) * (TWO_PI / nf)
        self._spline = make_interp_spline(uf, np.r_[fine, fine[0]], k=7, bc_type="periodic")

    def param(self, u):
        """Base-curve parameter t(u)."""
        u = np.asarray(u, dtype=float)
        return u + self._spline(np.mod(u, TWO_PI))

    def point(self, u):
        return self.base.point(self.param(u))

    def d1(self, u):
        t = self.param(u)
        dx, dy = self.base.d1(t)
        f = (self.length / TWO_PI) / np.hypot(dx, dy)
        return dx * f, dy * f

    def d2(self, u):
        t = self.param(u)
        dx, dy = self.base.d1(t)
        ddx, ddy = self.base.d2(t)
        sp = np.hypot(dx, dy)
        tp = (self.length / TWO_PI) / sp  # dt/du
        tpp = -tp * tp * (dx * ddx + dy * ddy) / sp**2  # d2t/du2
        return ddx * tp * tp + dx * tpp, ddy * tp * tp + dy * tpp

    def params(self):
        return dict(self.base.params(), arclength=True)


CURVES = {"disc": Circle, "circle": Circle, "ellipse": Ellipse, "bean": Bean}


def make_curve(name: str, arclength: bool = True, **params) -> Curve:
    """Curve by name.  Non-circular curves are reparametrized by arclength
    unless ``arclength=False``, which spaces boundary-grid nodes evenly."""
    try:
        cls = CURVES[name]
    except KeyError:
        raise ConfigError(f"unknown scatterer shape {name!r}") from None
    curve = cls(**params)
    if arclength and not isinstance(curve, Circle):
        curve = ArclengthCurve(curve)
    return curve


# ----------------------------------------------------------------------------
# projection and point location
# ----------------------------------------------------------------------------

def project_to_boundary(curve: Curve, x, y, tau0=None, n_seed=256, maxiter=50):
    """Orthogonal projection onto the curve.

    Returns ``(t, tau)`` with ``t`` the curve parameter of the foot point and
    ``tau`` the signed depth (positive inside).  When ``tau0`` is given the
    points must lie in the inner tube ``0 <= tau <= tau0`` (up to 1e-12).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ts, cx, cy = curve.samples(n_seed)
    t = np.empty(x.shape)
    chunk = 4096
    flat_x, flat_y, flat_t = x.ravel(), y.ravel(), t.ravel()
    for lo in range(0, flat_x.size, chunk):
        sl = slice(lo, lo + chunk)
        d2 = (flat_x[sl, None] - cx[None, :]) ** 2 + (flat_y[sl, None] - cy[None, :]) ** 2
        flat_t[sl] = ts[np.argmin(d2, axis=1)]
    t = flat_t.reshape(x.shape)
    step_cap = TWO_PI / n_seed
    converged = np.zeros(x.shape, dtype=bool)
    for _ in range(maxiter):
        px, py = curve.point(t)
        dx, dy = curve.d1(t)
        ddx, ddy = curve.d2(t)
        rx, ry = x - px, y - py
        f = rx * dx + ry * dy
        fp = -(dx * dx + dy * dy) + rx * ddx + ry * ddy
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(fp != 0, -f / fp, 0.0)
        step = np.clip(step, -step_cap, step_cap)
        t = t + np.where(converged, 0.0, step)
        converged |= np.abs(step) < 1e-15 * (1 + np.abs(t))
        if converged.all():
            break
    px, py = curve.point(t)
    dx, dy = curve.d1(t)
    res = np.abs((x - px) * dx + (y - py) * dy) / np.hypot(dx, dy)
    if np.any(res > 1e-9 * (1 + np.hypot(x - px, y - py))):
        raise NoProjection("Newton iteration for the nearest boundary point did not converge")
    nx, ny = curve.normal(t)
    tau = (px - x) * nx + (py - y) * ny
    t = np.mod(t, TWO_PI)
    if tau0 is not None:
        bad = (tau < -1e-12) | (tau > tau0 * (1 + 1e-12))
        if np.any(bad):
            raise NoProjection("point outside the boundary tube")
    return t, tau


def inside(curve: Curve, x, y, tol=1e-12, n_poly=2048):
    """Point-in-region test; points within ``tol`` of the boundary count as inside.

    Crossing-number test against a fine polygon, corrected by an exact
    projection for points close to the curve.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = x.shape
    x, y = x.ravel(), y.ravel()
    _, px, py = curve.samples(n_poly)
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    result = np.zeros(x.size, dtype=bool)
    near = np.zeros(x.size, dtype=bool)
    seg = np.hypot(qx - px, qy - py).max()
    chunk = max(1, 2_000_000 // n_poly)
    for lo in range(0, x.size, chunk):
        sl = slice(lo, lo + chunk)
        X, Y = x[sl, None], y[sl, None]
        cond = (py[None, :] > Y) != (qy[None, :] > Y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = px[None, :] + (Y - py[None, :]) * (qx - px)[None, :] / (qy - py)[None, :]
        crossings = np.sum(cond & (X < xint), axis=1)
        result[sl] = crossings % 2 == 1
        d2 = (X - px[None, :]) ** 2 + (Y - py[None, :]) ** 2
        near[sl] = d2.min(axis=1) < (2 * seg) ** 2
    if np.any(near):
        _, tau = project_to_boundary(curve, x[near], y[near])
        result[near] = tau >= -tol
    return result.reshape(shape)


# ----------------------------------------------------------------------------
# scatterer
# ----------------------------------------------------------------------------

Contrast = Callable[[np.ndarray, np.ndarray], np.ndarray]


def constant_contrast(n_index: complex) -> Contrast:
    m = 1.0 - complex(n_index) ** 2

    def f(x, y):
        return np.full(np.shape(x), m, dtype=complex)

    f.description = {"kind": "constant", "n": n_index}
    return f


def gaussian_contrast(amplitude=0.5, width=1.0) -> Contrast:
    """m(x) = 1 - amplitude * exp(-|x|^2 / width^2) inside the scatterer."""

    def f(x, y):
        return (1.0 - amplitude * np.exp(-(np.asarray(x) ** 2 + np.asarray(y) ** 2) / width**2)).astype(complex)

    f.description = {"kind": "gaussian", "amplitude": amplitude, "width": width}
    return f


def max_tau0(curve: Curve, n=4096, safety=0.5):
    """Largest tube width that keeps the projection single-valued (with margin).

    Inner parallel curves at depth tau develop cusps where tau * curvature = 1,
    and opposite sides must not meet, so tau0 is limited by both the maximum
    curvature and half the minimal width.
    """
    t = np.arange(n) * (TWO_PI / n)
    kmax = np.max(curve.curvature(t))
    return safety / kmax


@dataclass(frozen=True)
class Scatterer:
    curve: Curve
    tau0: float
    contrast: Contrast

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ConfigError("tau0 must be positive")
        limit = max_tau0(self.curve, safety=0.95)
        if self.tau0 >= limit:
            raise ConfigError(f"tau0={self.tau0} too large for curve (limit {limit:.3g})")

    @property
    def cutoff(self) -> CutoffSpec:
        return CutoffSpec(self.tau0)

    def inside(self, x, y):
        return inside(self.curve, x, y)

    def contrast_at(self, x, y):
        """m(x): the contrast profile inside, zero outside."""
        m = np.asarray(self.contrast(np.asarray(x, float), np.asarray(y, float)), dtype=complex)
        return np.where(self.inside(x, y), m, 0.0)

    def depth(self, x, y):
        """Depth below the boundary for points known to lie inside.  Points
        deeper than tau0 get ``inf``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.full(x.shape, np.inf)
        _, px, py = self.curve.samples(2048)
        flat = np.empty(x.size)
        xf, yf = x.ravel(), y.ravel()
        chunk = 1024
        for lo in range(0, xf.size, chunk):
            sl = slice(lo, lo + chunk)
            d2 = (xf[sl, None] - px[None, :]) ** 2 + (yf[sl, None] - py[None, :]) ** 2
            flat[sl] = np.sqrt(d2.min(axis=1))
        cand = flat < 1.05 * self.tau0 + 1e-3
        if np.any(cand):
            _, tau = project_to_boundary(self.curve, xf[cand], yf[cand])
            vals = np.where(tau < self.tau0, np.maximum(tau, 0.0), np.inf)
            tmp = out.ravel()
            tmp[cand] = vals
            out = tmp.reshape(x.shape)
        return out


def extended_density(v, depth, is_inside, tau0):
    """E(v): v in the deep interior, v (1 - eta(depth)) in the boundary region,
    zero outside the scatterer."""
    v = np.asarray(v)
    depth = np.asarray(depth, dtype=float)
    factor = np.where(np.isfinite(depth), 1.0 - eta(np.where(np.isfinite(depth), depth, 0.0), tau0), 1.0)
    return np.where(is_inside, v * factor, 0.0)


# ----------------------------------------------------------------------------
# patches and partition of unity
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class PatchCover:
    """K overlapping patches of the boundary region.

    Patch k spans the curve parameters [theta0_k, theta0_k + length] with
    theta0_k = offset + k 2pi/K - d and length = 2pi/K + 2d, d = overlap 2pi/K.
    """

    curve: Curve
    tau0: float
    K: int = 2
    overlap: float = 0.1
    offset: float = 0.0
    starts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.K < 2:
            raise ConfigError("need at least two patches")
        if not 0 < self.overlap < 0.5:
            raise ConfigError("overlap must lie in (0, 0.5)")
        delta = TWO_PI / self.K
        starts = self.offset + np.arange(self.K) * delta - self.overlap * delta
        object.__setattr__(self, "starts", starts)

    @property
    def length(self) -> float:
        return TWO_PI / self.K * (1 + 2 * self.overlap)

    @property
    def ramp(self) -> float:
        """Width of the overlap zone in patch parameter s."""
        return 2 * self.overlap / (1 + 2 * self.overlap)

    def theta(self, k, s):
        return self.starts[k] + self.length * np.asarray(s, dtype=float)

    def s_of_theta(self, k, theta):
        return np.mod(np.asarray(theta, dtype=float) - self.starts[k], TWO_PI) / self.length

    def bump(self, s):
        s = np.asarray(s, dtype=float)
        return ramp_up(s, self.ramp) * ramp_up(1.0 - s, self.ramp)

    def pou_theta(self, k, theta):
        """w_k as a function of the boundary parameter (zero off the patch)."""
        num = self._bump_theta(k, theta)
        den = sum(self._bump_theta(j, theta) for j in range(self.K))
        return num / den

    def _bump_theta(self, k, theta):
        s = self.s_of_theta(k, theta)
        return np.where(s <= 1.0, self.bump(np.minimum(s, 1.0)), 0.0)

    def pou(self, k, s):
        return self.pou_theta(k, self.theta(k, s))

    def xi(self, k, s, t):
        th = self.theta(k, s)
        px, py = self.curve.point(th)
        nx, ny = self.curve.normal(th)
        t = np.asarray(t, dtype=float)
        return px - self.tau0 * t * nx, py - self.tau0 * t * ny

    def jacobian(self, k, s, t):
        th = self.theta(k, s)
        dx, dy = self.curve.d1(th)
        nx, ny = self.curve.normal(th)
        ndx, ndy = self.curve.normal_derivative(th)
        t = np.asarray(t, dtype=float)
        ax = dx - self.tau0 * t * ndx
        ay = dy - self.tau0 * t * ndy
        return self.length * self.tau0 * np.abs(ax * ny - ay * nx)

    def patches_containing(self, theta):
        """Boolean array (K, ...) telling which patches contain parameter theta
        in the open parameter interval."""
        theta = np.asarray(theta, dtype=float)
        out = []
        for k in range(self.K):
            s = self.s_of_theta(k, theta)
            out.append((s > 0.0) & (s < 1.0))
        return np.array(out)

    def inverse(self, k, x, y):
        """(s, t) with xi_k(s, t) = (x, y)."""
        theta, tau = project_to_boundary(self.curve, x, y, tau0=self.tau0)
        s = self.s_of_theta(k, theta)
        if np.any(s > 1.0):
            raise NotInBoundaryRegion("point not covered by patch %d" % k)
        return s, tau / self.tau0

    def pou_weights(self, x, y):
        """[(k, w_k(x))] over the patches containing the point x."""
        theta, _ = project_to_boundary(self.curve, x, y, tau0=self.tau0)
        theta = float(np.atleast_1d(theta)[0])
        res = []
        for k in range(self.K):
            s = float(self.s_of_theta(k, theta))
            if s <= 1.0:
                w = float(self.pou_theta(k, theta))
                if w > 0 or 0 < s < 1:
                    res.append((k, w))
        if not res:
            raise NotInBoundaryRegion("no patch contains the point")
        return res
