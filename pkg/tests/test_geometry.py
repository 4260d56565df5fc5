import math

import numpy as np
import pytest

from ls2d.errors import ConfigError, NoProjection
from ls2d.geometry import (ArclengthCurve, Bean, Circle, Ellipse, PatchCover, Scatterer, constant_contrast,
                           eta, extended_density, inside, make_curve, max_tau0, project_to_boundary)


def test_cutoff_branch_values():
    tau0 = 0.3
    assert eta(-0.1, tau0) == 1.0
    assert eta(0.0, tau0) == 1.0
    assert eta(tau0, tau0) == 0.0
    assert eta(0.5, tau0) == 0.0
    # flat to all orders at both ends, so values there round to exactly 0 or 1
    v = eta(np.linspace(1e-3, tau0 - 1e-3, 50), tau0)
    assert np.all((v >= 0) & (v <= 1)) and np.all(np.diff(v) <= 0)
    inner = eta(np.linspace(0.05, tau0 - 0.05, 50), tau0)
    assert np.all((inner > 0) & (inner < 1)) and np.all(np.diff(inner) < 0)


def test_cutoff_is_flat_at_both_ends():
    tau0 = 0.3
    for h in (1e-2, 5e-3):
        assert abs(eta(h, tau0) - 1.0) < 1e-6
        assert eta(tau0 - h, tau0) < 1e-6


@pytest.mark.parametrize("curve", [Circle(1.0), Ellipse(1.0, 0.6), Bean(), make_curve("bean")])
def test_curve_derivatives_by_finite_differences(curve):
    t = np.linspace(0.1, 6.0, 11)
    h = 1e-6
    x1, y1 = curve.point(t + h)
    x0, y0 = curve.point(t - h)
    dx, dy = curve.d1(t)
    assert np.allclose((x1 - x0) / (2 * h), dx, atol=1e-7)
    assert np.allclose((y1 - y0) / (2 * h), dy, atol=1e-7)
    a1, b1 = curve.d1(t + h)
    a0, b0 = curve.d1(t - h)
    ddx, ddy = curve.d2(t)
    assert np.allclose((a1 - a0) / (2 * h), ddx, atol=1e-6)
    assert np.allclose((b1 - b0) / (2 * h), ddy, atol=1e-6)


def test_arclength_curve_has_constant_speed_and_same_trace():
    base = Bean()
    c = ArclengthCurve(base)
    u = np.linspace(0, 2 * np.pi, 301)
    sp = c.speed(u)
    assert np.ptp(sp) < 1e-10 * sp.mean()
    assert c.length == pytest.approx(2 * np.pi * sp.mean(), rel=1e-12)
    # same point set: every arclength sample lies on the original curve
    x, y = c.point(u)
    tb = c.param(u)
    bx, by = base.point(tb)
    assert np.allclose(x, bx) and np.allclose(y, by)
    assert np.all(np.diff(tb) > 0)


def test_make_curve_reparametrizes_only_noncircular():
    assert isinstance(make_curve("disc"), Circle)
    assert isinstance(make_curve("bean"), ArclengthCurve)
    assert isinstance(make_curve("bean", arclength=False), Bean)
    with pytest.raises(ConfigError):
        make_curve("triangle")


def test_projection_unit_circle():
    t, tau = project_to_boundary(Circle(1.0), np.array([0.9]), np.array([0.0]))
    assert t[0] == pytest.approx(0.0, abs=1e-14)
    assert tau[0] == pytest.approx(0.1, abs=1e-14)


def test_projection_bean_matches_dense_search(rng):
    curve = make_curve("bean")
    tau0 = 0.08
    u = rng.uniform(0, 2 * np.pi, 40)
    d = rng.uniform(0, tau0, 40)
    px, py = curve.point(u)
    nx, ny = curve.normal(u)
    x, y = px - d * nx, py - d * ny
    t, tau = project_to_boundary(curve, x, y, tau0=tau0)
    ts = np.linspace(0, 2 * np.pi, 1_000_000, endpoint=False)
    sx, sy = curve.point(ts)
    for i in range(x.size):
        dist = np.hypot(sx - x[i], sy - y[i])
        assert abs(dist.min() - tau[i]) < 1e-8
    assert np.allclose(tau, d, atol=1e-10)


def test_projection_rejects_points_outside_tube():
    with pytest.raises(NoProjection):
        project_to_boundary(Circle(1.0), np.array([0.2]), np.array([0.0]), tau0=0.3)


def test_inside_and_extended_density():
    c = Circle(1.0)
    x = np.array([0.0, 0.95, 1.2, 0.5])
    y = np.zeros(4)
    ins = inside(c, x, y)
    assert list(ins) == [True, True, False, True]
    depth = np.array([np.inf, 0.05, np.inf, np.inf])
    E = extended_density(np.ones(4), depth, ins, 0.3)
    assert E[0] == 1.0 and E[2] == 0.0 and E[3] == 1.0
    assert E[1] == pytest.approx(1 - eta(0.05, 0.3))


@pytest.mark.parametrize("K", [2, 3, 4])
def test_partition_of_unity_sums_to_one(K):
    cover = PatchCover(make_curve("bean"), 0.08, K=K)
    th = np.linspace(0, 2 * np.pi, 1001)
    total = sum(cover.pou_theta(k, th) for k in range(K))
    assert np.allclose(total, 1.0, atol=1e-14)
    s = np.linspace(0, 1, 201)
    for k in range(K):
        w = cover.pou(k, s)
        assert w[0] == 0.0 and w[-1] == 0.0


def test_tau0_limits():
    bean = make_curve("bean")
    limit = max_tau0(bean, safety=1.0)
    assert 0.08 < limit < 0.09  # tip radius of curvature of the bean
    with pytest.raises(ConfigError):
        Scatterer(bean, 0.2, constant_contrast(1.2))
    with pytest.raises(ConfigError):
        Scatterer(Circle(1.0), 0.0, constant_contrast(1.2))
    Scatterer(Circle(1.0), 0.3, constant_contrast(1.2))
