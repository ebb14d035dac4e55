from fractions import Fraction
from math import factorial

import numpy as np
import pytest
import scipy.integrate

from cornerfem.quadrature import gauss_jacobi01, graded_gauss01, triangle_rule


def exact_monomial(i, j):
    # Dirichlet integral over the unit simplex
    return Fraction(factorial(i) * factorial(j), factorial(i + j + 2))


@pytest.mark.parametrize("degree", [4, 6])
def test_triangle_rule_exact_on_monomials(degree):
    bary, w = triangle_rule(degree)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(bary >= 0)
    # reference triangle (0,0), (1,0), (0,1): x = l1, y = l2
    x, y = bary[:, 1], bary[:, 2]
    for i in range(degree + 1):
        for j in range(degree + 1 - i):
            approx = 0.5 * np.sum(w * x**i * y**j)
            assert approx == pytest.approx(float(exact_monomial(i, j)), abs=1e-12)


def test_degree_six_is_not_exact_at_degree_eight():
    bary, w = triangle_rule(6)
    x = bary[:, 1]
    assert abs(0.5 * np.sum(w * x**8) - float(exact_monomial(8, 0))) > 1e-8


def test_triangle_rule_rejects_unknown_degree():
    with pytest.raises(ValueError):
        triangle_rule(5)


@pytest.mark.parametrize("beta", [-0.9998, -0.5, 0.0, 1.3])
def test_gauss_jacobi_moments(beta):
    t, w = gauss_jacobi01(8, beta)
    for k in range(10):
        assert np.sum(w * t**k) == pytest.approx(1.0 / (k + beta + 1), rel=1e-12)


def test_gauss_jacobi_rejects_nonintegrable_weight():
    with pytest.raises(ValueError):
        gauss_jacobi01(4, -1.0)


def test_graded_rule_on_weak_singularity():
    t, w = graded_gauss01(8, 0.15, 30)
    ref, _ = scipy.integrate.quad(np.cos, 0, 1, weight="alg", wvar=(-0.3, 0.0))
    # each layer sits 1/5.67 of its length away from the singularity, which
    # caps 8-point Gauss at about 1e-7
    assert np.sum(w * t**-0.3 * np.cos(t)) == pytest.approx(ref, rel=1e-6)
