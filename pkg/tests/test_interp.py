import numpy as np
import pytest

from ls2d.base_atm import angular_fourier
from ls2d.errors import TargetOutsideOmega
from ls2d.geometry import Circle, Scatterer, constant_contrast
from ls2d.grids import GridSpec, build_grids
from ls2d.interp import (BoundaryFieldInterpolator, PolarEvaluator, base_boundary_interp,
                         cartesian_interpolation_matrix, fft_refined_interpolate)

f = lambda x, y: np.exp(1j * (2 * x + 1.3 * y)) * np.cos(x * y)
g = lambda x, y: np.exp(1j * (x - 0.5 * y))


def test_cartesian_interpolation_to_boundary_nodes(disc):
    b, base, _ = build_grids(disc, GridSpec.parse("2x65x33+129x129"), "pct")
    M = cartesian_interpolation_matrix(base, b.x.ravel(), b.y.ravel())
    assert np.abs(M @ f(base.X, base.Y).ravel() - f(b.x.ravel(), b.y.ravel())).max() < 1e-11
    with pytest.raises(TargetOutsideOmega):
        cartesian_interpolation_matrix(base, np.array([5.0]), np.array([0.0]))


def test_polar_modal_evaluator(disc):
    b, base, _ = build_grids(disc, GridSpec.parse("2x65x33+129x65"), "atm")
    L = base.L_max
    modes = angular_fourier(f(base.X, base.Y), L).values
    E = PolarEvaluator(base, b.x.ravel(), b.y.ravel(), L)
    assert np.abs(E(modes) - f(b.x.ravel(), b.y.ravel())).max() < 1e-10


def test_boundary_to_base_interpolation(disc):
    b, base, ag = build_grids(disc, GridSpec.parse("2x65x33+129x65"), "atm")
    idx = ag.base_boundary
    tx, ty = base.X.ravel()[idx], base.Y.ravel()[idx]
    BI = BoundaryFieldInterpolator(b, tx, ty)
    assert np.abs(BI(g(b.x, b.y)) - g(tx, ty)).max() < 1e-9
    assert np.allclose(BI.matrix.sum(axis=1), 1.0)


def test_partition_of_unity_mode_agrees_on_resolved_grid(disc):
    b, base, _ = build_grids(disc, GridSpec(2, 257, 33, 33, 33), "pct")
    tx, ty = b.x[0, 40:200:40, 5] * 0.999, b.y[0, 40:200:40, 5] * 0.999
    direct = base_boundary_interp(g(b.x, b.y), b, tx, ty, mode="direct")
    pou = base_boundary_interp(g(b.x, b.y), b, tx, ty, mode="pou")
    assert np.abs(direct - g(tx, ty)).max() < 1e-10
    assert np.abs(pou - g(tx, ty)).max() < 1e-7


def test_fft_refined_interpolation_is_exact_for_periodic_data(disc):
    _, base, _ = build_grids(disc, GridSpec.parse("2x17x9+65x65"), "pct")
    per = lambda x, y: np.exp(1j * np.pi * (2 * (x - base.cx + base.a) / base.a + 3 * (y - base.cy + base.a) / base.a))
    tx, ty = np.array([0.11, -0.42, 0.73]), np.array([0.05, 0.61, -0.2])
    assert np.abs(fft_refined_interpolate(per(base.X, base.Y), base, tx, ty) - per(tx, ty)).max() < 1e-9
