import math

import numpy as np
import pytest

from ls2d.boundary_quad import (ChangeOfVariable, RegularNear, SingularQuadrature, SplitNewtonCotes, eta_s, lagrange_weights,
                                nc_split_weights, stencil, trig_poly_interpolate)
from ls2d.geometry import Circle, PatchCover
from ls2d.grids import BoundaryGrid, composite_newton_cotes

from radial_reference import radial_potential


def test_change_of_variable_is_odd_monotone_and_flat_at_zero():
    W = 0.2
    cov = ChangeOfVariable(W)
    tau = np.linspace(-np.pi, np.pi, 201)
    rho = cov.rho(tau)
    assert rho[0] == pytest.approx(-W) and rho[-1] == pytest.approx(W)
    assert np.allclose(rho, -rho[::-1], atol=1e-15)
    assert np.all(np.diff(rho) >= 0)
    h = 1e-2
    assert cov.drho(h) < 1e-8 and cov.rho(h) < 1e-11
    s = np.array([-0.15, -1e-4, 0.0, 0.03, 0.19])
    assert np.allclose(cov.rho(cov.rho_inverse(s)), s, atol=1e-14)
    # interior trapezoid nodes; the two endpoints (where the window vanishes) are omitted
    tau, w = cov.nodes(40)
    assert w.sum() + cov.drho(np.pi) * (2 * np.pi / 40) == pytest.approx(2 * W, rel=1e-12)


def test_window_values():
    W = 0.2
    assert eta_s(0.0, W) == 1.0
    assert eta_s(W, W) == 0.0
    assert eta_s(-W, W) == 0.0
    assert 0 < eta_s(0.1, W) < 1


def test_lagrange_weights_reproduce_polynomials():
    u = np.array([0.3, 2.7, 5.5])
    d = 6
    w = lagrange_weights(u, d)
    nodes = np.arange(d + 1)
    for p in range(d + 1):
        assert np.allclose(w @ nodes**p, u**p, rtol=1e-12)
    st, ws = stencil(np.array([0.2, 10.0, 19.9]), 5, 21)
    assert st.min() >= 0 and st.max() + 5 <= 20


def test_split_newton_cotes_integrates_polynomials_on_both_sides():
    n = 17
    split = SplitNewtonCotes(n)
    t = split.levels
    for j in range(n):
        for p in range(5):
            assert split.weights[j] @ t**p == pytest.approx(1 / (p + 1), rel=1e-12)
    # whole-panel splits use grid levels only and reduce to the composite rule
    assert np.allclose(nc_split_weights(n, 8), composite_newton_cotes(n), atol=1e-14)


def test_trig_interpolation_of_periodic_samples():
    n = 64
    s = np.arange(n) / n
    f = lambda x: np.exp(np.sin(2 * np.pi * x)) * np.cos(4 * np.pi * x)
    q = np.array([0.013, 0.37, 0.9])
    assert np.allclose(trig_poly_interpolate(f(s), q), f(q), atol=1e-9)


def test_annulus_boundary_integral_against_radial_quadrature():
    k, tau0 = 2 * math.pi, 0.25
    cover = PatchCover(Circle(1.0), tau0, K=2)
    g = BoundaryGrid(cover, 33, 17)
    S = SingularQuadrature(g, k, W=0.2, n_tau=80)
    th = np.broadcast_to(g.theta[:, :, None], g.x.shape).reshape(-1)
    R = RegularNear(g, k, 0.2, g.x.ravel(), g.y.ravel(), th, None, store=False)
    v = np.ones(g.size)
    A = (S.apply(v) + R.apply(v)).reshape(g.x.shape)
    from ls2d.geometry import eta
    dens = lambda r: np.where((r <= 1.0) & (r >= 1 - tau0), eta(1 - np.minimum(r, 1.0), tau0), 0.0)
    for j in (0, 8, 16):
        ref = radial_potential(k, 1 - tau0 * j / 16, g=dens)
        assert np.abs(A[:, :, j] - ref).max() < 1e-4
