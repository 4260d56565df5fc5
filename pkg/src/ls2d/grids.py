"""Boundary grid, Cartesian and polar base grids, the approximation grid and
the cell decomposition used to separate adjacent from non-adjacent work."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .geometry import PatchCover, Scatterer, eta

EXTERIOR, BOUNDARY, INTERIOR = 0, 1, 2


# ----------------------------------------------------------------------------
# grid specification strings
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """``K x N1 x N2 + M1 x M2``: K patches of N1 x N2 nodes plus an M1 x M2
    base grid (Cartesian: M1 = M2 = 2n+1; polar: M1 angles, M2 radii)."""

    K: int
    N1: int
    N2: int
    M1: int
    M2: int

    _pattern = re.compile(r"^\s*(\d+)\s*[x×*]\s*(\d+)\s*[x×*]\s*(\d+)\s*\+\s*(\d+)\s*[x×*]\s*(\d+)\s*$")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        m = cls._pattern.match(text)
        if not m:
            raise ConfigError(f"malformed grid spec {text!r}")
        return cls(*map(int, m.groups()))

    def __str__(self):
        return f"{self.K}x{self.N1}x{self.N2}+{self.M1}x{self.M2}"

    @property
    def unknowns(self) -> int:
        return self.K * self.N1 * self.N2 + self.M1 * self.M2

    def refined(self, factor=2) -> "GridSpec":
        f = lambda n: (n - 1) * factor + 1
        return GridSpec(self.K, f(self.N1), f(self.N2), f(self.M1), f(self.M2))


# ----------------------------------------------------------------------------
# Newton-Cotes
# ----------------------------------------------------------------------------

def newton_cotes_panel(Q=5):
    """Closed Newton-Cotes weights on [0, 1] with Q equispaced points."""
    x = np.linspace(0.0, 1.0, Q)
    V = np.vander(x, Q, increasing=True).T
    moments = 1.0 / np.arange(1, Q + 1)
    return np.linalg.solve(V, moments)


def composite_newton_cotes(n_points, length=1.0, Q=5):
    """Composite closed Newton-Cotes weights on ``n_points`` equispaced nodes."""
    if (n_points - 1) % (Q - 1):
        raise ConfigError(f"node count {n_points} incompatible with {Q}-point Newton-Cotes")
    panels = (n_points - 1) // (Q - 1)
    w = np.zeros(n_points)
    pw = newton_cotes_panel(Q) * (length / panels)
    for p in range(panels):
        w[p * (Q - 1): p * (Q - 1) + Q] += pw
    return w


# ----------------------------------------------------------------------------
# boundary grid
# ----------------------------------------------------------------------------

@dataclass
class BoundaryGrid:
    cover: PatchCover
    N1: int
    N2: int
    Q: int = 5

    def __post_init__(self):
        if self.N1 < 5:
            raise ConfigError("N1 must be at least 5")
        if (self.N2 - 1) % (self.Q - 1):
            raise ConfigError(f"N2={self.N2} must satisfy N2 = 1 mod {self.Q - 1}")
        c = self.cover
        K = c.K
        self.s = np.linspace(0.0, 1.0, self.N1)
        self.t = np.linspace(0.0, 1.0, self.N2)
        self.ds = 1.0 / (self.N1 - 1)
        self.dt = 1.0 / (self.N2 - 1)
        S, T = np.meshgrid(self.s, self.t, indexing="ij")
        self.theta = np.stack([c.theta(k, self.s) for k in range(K)])
        xs, ys, jac = [], [], []
        for k in range(K):
            x, y = c.xi(k, S, T)
            xs.append(x)
            ys.append(y)
            jac.append(c.jacobian(k, S, T))
        self.x = np.stack(xs)
        self.y = np.stack(ys)
        self.jac = np.stack(jac)
        self.pou = np.stack([c.pou(k, self.s) for k in range(K)])
        self.eta_t = eta(c.tau0 * self.t, c.tau0)
        trap = np.full(self.N1, self.ds)
        trap[[0, -1]] *= 0.5
        self.nc = composite_newton_cotes(self.N2, Q=self.Q)
        self.weights = trap[None, :, None] * self.nc[None, None, :] * self.jac * self.eta_t[None, None, :] * self.pou[:, :, None]

    @property
    def K(self):
        return self.cover.K

    @property
    def size(self) -> int:
        return self.K * self.N1 * self.N2

    @property
    def depth(self):
        return np.broadcast_to(self.cover.tau0 * self.t, self.x.shape)

    def flat(self, arr):
        return np.asarray(arr).reshape(-1)


def nonadjacent_quadrature_weights(bgrid: BoundaryGrid) -> np.ndarray:
    """Per-node weights (trapezoid x Newton-Cotes x Jacobian x eta x w_k)."""
    return bgrid.weights.reshape(-1)


# ----------------------------------------------------------------------------
# base grids
# ----------------------------------------------------------------------------

def classify(scatterer: Scatterer, x, y):
    """(class, depth) for base nodes: exterior / boundary-region / interior."""
    ins = scatterer.inside(x, y)
    depth = np.full(np.shape(x), np.inf)
    if np.any(ins):
        depth[ins] = scatterer.depth(x[ins], y[ins])
    cls = np.where(~ins, EXTERIOR, np.where(np.isfinite(depth), BOUNDARY, INTERIOR))
    return cls, depth


def classify_node(scatterer: Scatterer, x, y) -> str:
    cls, _ = classify(scatterer, np.atleast_1d(float(x)), np.atleast_1d(float(y)))
    return {EXTERIOR: "exterior", BOUNDARY: "boundary", INTERIOR: "interior"}[int(cls[0])]


@dataclass
class CartesianBaseGrid:
    """Nodes (cx + i h, cy + j h), -n <= i, j <= n, on [cx-a, cx+a] x [cy-a, cy+a]."""

    scatterer: Scatterer
    n: int
    a: float
    cx: float = 0.0
    cy: float = 0.0
    kind = "cartesian"

    def __post_init__(self):
        self.h = self.a / self.n
        g = np.arange(-self.n, self.n + 1) * self.h
        self.X, self.Y = np.meshgrid(self.cx + g, self.cy + g, indexing="ij")
        x0, x1, y0, y1 = self.scatterer.curve.bounding_box()
        if not (x0 > self.cx - self.a and x1 < self.cx + self.a and y0 > self.cy - self.a and y1 < self.cy + self.a):
            raise ConfigError("scatterer not strictly inside the base square")
        self.cls, self.depth = classify(self.scatterer, self.X, self.Y)

    @property
    def shape(self):
        return self.X.shape

    @property
    def size(self):
        return self.X.size


def default_cartesian_halfside(scatterer: Scatterer, margin=0.05):
    x0, x1, y0, y1 = scatterer.curve.bounding_box()
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    half = 0.5 * max(x1 - x0, y1 - y0)
    return half * (1 + margin), cx, cy


@dataclass
class PolarBaseGrid:
    """Polar grid: ``n_theta`` uniform angles times piecewise-Chebyshev radii.

    Each of ``n_int`` equal radial intervals carries its two endpoints and
    ``Nc`` Chebyshev points a_j = alpha^-1(beta_j), beta_j = cos(pi (j - 1/2)/Nc);
    neighbouring intervals share endpoints, giving n_int (Nc + 1) + 1 radii.
    """

    scatterer: Scatterer
    n_theta: int
    n_int: int
    R: float
    Nc: int = 7
    cx: float = 0.0
    cy: float = 0.0
    kind = "polar"

    def __post_init__(self):
        self.edges = np.linspace(0.0, self.R, self.n_int + 1)
        beta = np.cos(np.pi * (np.arange(1, self.Nc + 1) - 0.5) / self.Nc)
        self.beta = beta
        radii = [0.0]
        self.cheb_index = np.zeros((self.n_int, self.Nc), dtype=int)
        for I in range(self.n_int):
            a, b = self.edges[I], self.edges[I + 1]
            inner = 0.5 * (a + b) + 0.5 * (b - a) * beta[::-1]  # increasing radius
            start = len(radii)
            radii.extend(inner.tolist())
            self.cheb_index[I] = np.arange(start, start + self.Nc)[::-1]  # node for beta_j
            radii.append(b)
        self.r = np.array(radii)
        self.interval_of_node = np.minimum(np.searchsorted(self.edges, self.r, side="right") - 1, self.n_int - 1)
        self.theta = np.arange(self.n_theta) * (2 * np.pi / self.n_theta)
        self.Th, self.Rr = np.meshgrid(self.theta, self.r, indexing="ij")
        self.X = self.cx + self.Rr * np.cos(self.Th)
        self.Y = self.cy + self.Rr * np.sin(self.Th)
        x0, x1, y0, y1 = self.scatterer.curve.bounding_box(2048)
        _, bx, by = self.scatterer.curve.samples(4096)
        if np.hypot(bx - self.cx, by - self.cy).max() > self.R * (1 + 1e-12):
            raise ConfigError("scatterer not inside the polar base disc")
        self.cls, self.depth = classify(self.scatterer, self.X, self.Y)

    @property
    def n_r(self):
        return self.r.size

    @property
    def shape(self):
        return self.X.shape

    @property
    def size(self):
        return self.X.size

    @property
    def L_max(self):
        return (self.n_theta - 1) // 2


def polar_intervals_from_M2(M2, Nc=7):
    if (M2 - 1) % (Nc + 1):
        raise ConfigError(f"M2={M2} must equal n_int*(Nc+1)+1 with Nc={Nc}")
    return (M2 - 1) // (Nc + 1)


def default_polar_radius(scatterer: Scatterer):
    """Centre and radius of the base disc: centred on the bounding box, radius
    equal to the farthest boundary point (exactly 1 for the unit disc)."""
    cx, cy = scatterer.curve.center()
    _, bx, by = scatterer.curve.samples(8192)
    R = float(np.hypot(bx - cx, by - cy).max())
    if scatterer.curve.name == "disc":
        R = scatterer.curve.radius
    return cx, cy, R


# ----------------------------------------------------------------------------
# approximation grid
# ----------------------------------------------------------------------------

@dataclass
class ApproxGrid:
    """Unknown layout: all boundary nodes, then base nodes inside the scatterer."""

    bgrid: BoundaryGrid
    base: object
    nominal_unknowns: int

    def __post_init__(self):
        cls = self.base.cls.reshape(-1)
        self.base_inside = np.flatnonzero(cls != EXTERIOR)
        self.base_boundary = np.flatnonzero(cls == BOUNDARY)
        self.base_interior = np.flatnonzero(cls == INTERIOR)
        self.NB = self.bgrid.size
        self.size = self.NB + self.base_inside.size
        self.x = np.concatenate([self.bgrid.x.reshape(-1), self.base.X.reshape(-1)[self.base_inside]])
        self.y = np.concatenate([self.bgrid.y.reshape(-1), self.base.Y.reshape(-1)[self.base_inside]])
        # position of base nodes inside the unknown vector (or -1)
        self.base_slot = np.full(self.base.size, -1)
        self.base_slot[self.base_inside] = self.NB + np.arange(self.base_inside.size)

    def split(self, v):
        return v[: self.NB], v[self.NB:]

    def base_field(self, v, fill=0.0):
        """Scatter the base part of an unknown vector onto the full base grid."""
        out = np.full(self.base.size, fill, dtype=np.result_type(v, complex))
        out[self.base_inside] = v[self.NB:]
        return out.reshape(self.base.shape)


def build_grids(scatterer: Scatterer, spec: GridSpec, backend: str, overlap=0.1, Nc=7):
    """Construct (BoundaryGrid, base grid, ApproxGrid) for a grid spec."""
    cover = PatchCover(scatterer.curve, scatterer.tau0, K=spec.K, overlap=overlap)
    bgrid = BoundaryGrid(cover, spec.N1, spec.N2)
    if backend == "pct":
        if spec.M1 != spec.M2 or spec.M1 % 2 == 0:
            raise ConfigError("Cartesian base grid needs M1 = M2 odd")
        a, cx, cy = default_cartesian_halfside(scatterer)
        base = CartesianBaseGrid(scatterer, (spec.M1 - 1) // 2, a, cx, cy)
    elif backend == "atm":
        n_int = polar_intervals_from_M2(spec.M2, Nc)
        cx, cy, R = default_polar_radius(scatterer)
        base = PolarBaseGrid(scatterer, spec.M1, n_int, R, Nc, cx, cy)
    else:
        raise ConfigError(f"unknown backend {backend!r}")
    return bgrid, base, ApproxGrid(bgrid, base, spec.unknowns)


# ----------------------------------------------------------------------------
# cells
# ----------------------------------------------------------------------------

@dataclass
class CellDecomposition:
    """L x L cells of side H covering the square [x0, x0+A] x [y0, y0+A]."""

    x0: float
    y0: float
    A: float
    L: int

    @property
    def H(self):
        return self.A / self.L

    def cell_of(self, x, y):
        i = np.clip(np.floor((np.asarray(x) - self.x0) / self.H).astype(int), 0, self.L - 1)
        j = np.clip(np.floor((np.asarray(y) - self.y0) / self.H).astype(int), 0, self.L - 1)
        return i, j

    def adjacent(self, ci, cj, di, dj):
        """True when cells (ci, cj) and (di, dj) belong to each other's 3x3 block."""
        return (np.abs(np.asarray(ci) - di) <= 1) & (np.abs(np.asarray(cj) - dj) <= 1)

    def center(self, i, j):
        return self.x0 + (np.asarray(i) + 0.5) * self.H, self.y0 + (np.asarray(j) + 0.5) * self.H


def default_cells(scatterer: Scatterer, n_unknowns: int, L=None, margin=0.02):
    x0, x1, y0, y1 = scatterer.curve.bounding_box()
    side = max(x1 - x0, y1 - y0) * (1 + margin)
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    if L is None:
        L = max(4, math.ceil(math.sqrt(n_unknowns) / 8))
    return CellDecomposition(cx - side / 2, cy - side / 2, side, int(L))


# ----------------------------------------------------------------------------
# distance classes
# ----------------------------------------------------------------------------

def distance_class_index(i: int, j: int) -> int:
    if not (0 <= j <= i):
        raise ValueError("distance class index needs 0 <= j <= i")
    return i * (i + 1) // 2 + j + 1


@dataclass(frozen=True)
class DistanceClassTable:
    """Representatives (i, j), 0 <= j <= i, in index-law order, with the
    symmetric orbit of lattice offsets for each."""

    k: int
    reps: list = field(init=False)
    offsets: list = field(init=False)

    def __post_init__(self):
        reps = []
        i = 0
        while len(reps) < self.k:
            for j in range(i + 1):
                reps.append((i, j))
            i += 1
        reps = reps[: self.k]
        offs = []
        for (i, j) in reps:
            pts = {(sa * a, sb * b) for a, b in ((i, j), (j, i)) for sa in (1, -1) for sb in (1, -1)}
            offs.append(sorted(pts))
        object.__setattr__(self, "reps", reps)
        object.__setattr__(self, "offsets", offs)
