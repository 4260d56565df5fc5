import mpmath
import numpy as np
import pytest

from ls2d import specfun


@pytest.mark.parametrize("ell", [-7, -2, -1, 0, 1, 3, 20])
@pytest.mark.parametrize("x", [1e-3, 0.7, 5.0, 33.0])
def test_cylinder_functions_match_mpmath(ell, x):
    j = complex(mpmath.besselj(ell, x))
    y = complex(mpmath.bessely(ell, x))
    assert specfun.bessel_j(ell, x) == pytest.approx(j.real, rel=1e-12, abs=1e-300)
    assert specfun.bessel_y(ell, x) == pytest.approx(y.real, rel=1e-12)
    assert specfun.hankel1(ell, x) == pytest.approx(j + 1j * y, rel=1e-12)


def test_negative_order_reflection():
    x = np.linspace(0.1, 9.0, 17)
    for ell in range(1, 6):
        assert np.allclose(specfun.bessel_j(-ell, x), (-1) ** ell * specfun.bessel_j(ell, x), rtol=0, atol=1e-15)
        assert np.allclose(specfun.hankel1(-ell, x), (-1) ** ell * specfun.hankel1(ell, x), rtol=1e-14)


def test_fast_paths_and_green():
    x = np.geomspace(1e-4, 50, 40)
    assert np.allclose(specfun.h0(x), specfun.hankel1(0, x), rtol=1e-14)
    assert np.allclose(specfun.h1(x), specfun.hankel1(1, x), rtol=1e-14)
    assert np.allclose(specfun.green(2.0, x), 0.25j * specfun.hankel1(0, 2.0 * x), rtol=1e-14)


def test_domain_errors():
    with pytest.raises(ValueError):
        specfun.bessel_j(0, -1.0)
    with pytest.raises(ValueError):
        specfun.bessel_y(0, 0.0)
    with pytest.raises(ValueError):
        specfun.chebyshev_t(3, 1.5)


def test_chebyshev_recurrence_matches_cosine_form():
    beta = np.cos(np.linspace(0, np.pi, 23))
    M = specfun.chebyshev_matrix(9, beta)
    for n in range(9):
        expect = np.cos(n * np.arccos(np.clip(beta, -1, 1)))
        assert np.allclose(M[:, n], expect, atol=1e-14)
        assert np.allclose(specfun.chebyshev_t(n, beta), expect, atol=1e-14)
