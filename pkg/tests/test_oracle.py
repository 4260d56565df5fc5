import math

import numpy as np
import pytest

from ls2d.oracle import (DiscSeriesSolution, brute_force_potential, disc_exact_field, disc_exact_volume_potential,
                         disc_series_potential)


@pytest.mark.parametrize("kappa", [2.0, 2 * math.pi, 25.0])
def test_interface_continuity(kappa):
    assert DiscSeriesSolution(kappa, math.sqrt(2.0)).continuity_residual() <= 1e-10


@pytest.mark.parametrize("kappa", [2.0, 2 * math.pi])
def test_lippmann_schwinger_balance(kappa):
    sol = DiscSeriesSolution(kappa, math.sqrt(2.0))
    x = np.array([0.3, 0.0, 0.9, 1.5, -0.5, 1.0])
    y = np.array([0.2, 0.0, -0.3, 0.4, 0.7, 0.0])
    res = sol.field(x, y) + kappa**2 * disc_series_potential(sol, x, y) - np.exp(1j * kappa * x)
    assert np.abs(res).max() <= 1e-8


def test_zero_contrast_gives_incident_field():
    x, y = np.array([0.2, 2.0]), np.array([0.1, -1.0])
    assert np.allclose(disc_exact_field(3.0, 1.0, 1.0, x, y), np.exp(3j * x), atol=1e-13)


def test_modal_decay():
    sol = DiscSeriesSolution(2 * math.pi, math.sqrt(2.0))
    b = np.abs(sol.coef_out)
    L = sol.L
    tail = b[np.abs(sol.ells) > math.ceil(2 * math.pi) + 15]
    assert tail.max() < 1e-12 * b.max()


def test_volume_potential_against_brute_force():
    k, m = 2.0, -1.0
    for (x, y) in [(0.3, 0.2), (0.0, 0.0), (1.5, 0.4)]:
        e = disc_exact_volume_potential(k, m, 1.0, np.array([x]), np.array([y]))[0]
        bf = brute_force_potential(lambda px, py: m * np.exp(1j * k * px), k, x, y)
        assert abs(e - bf) <= 1e-9
