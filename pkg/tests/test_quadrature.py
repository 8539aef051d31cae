import math
from itertools import product

import numpy as np
import pytest

from rtesplit.quadrature import DEGREE5, conical_rule, tet_points
from rtesplit.spatial_mesh import build_spatial_mesh


def monomial_exact(a, b, c):
    # integral of x^a y^b z^c over the unit reference tetrahedron
    return math.factorial(a) * math.factorial(b) * math.factorial(c) / math.factorial(a + b + c + 3)


def integrate(rule, a, b, c):
    bary, w = rule
    x, y, z = bary[:, 1], bary[:, 2], bary[:, 3]
    return np.sum(w * x**a * y**b * z**c) / 6.0


def test_degree5_rule_is_exact():
    assert DEGREE5[1].sum() == pytest.approx(1.0, abs=1e-14)
    for a, b, c in product(range(6), repeat=3):
        if a + b + c <= 5:
            assert integrate(DEGREE5, a, b, c) == pytest.approx(monomial_exact(a, b, c), abs=1e-15)


def test_degree5_rule_is_not_degree6():
    assert abs(integrate(DEGREE5, 6, 0, 0) - monomial_exact(6, 0, 0)) > 1e-8


@pytest.mark.parametrize("n", [2, 3, 4])
def test_conical_rule_degree(n):
    rule = conical_rule(n)
    assert rule[1].sum() == pytest.approx(1.0)
    for a, b, c in product(range(2 * n), repeat=3):
        if a + b + c <= 2 * n - 1:
            assert integrate(rule, a, b, c) == pytest.approx(monomial_exact(a, b, c), abs=1e-14)


def test_rules_agree_on_smooth_function():
    f = lambda x, y, z: np.exp(x + 2 * y) * np.cos(z)  # noqa: E731
    vals = []
    for rule in (DEGREE5, conical_rule(8)):
        bary, w = rule
        vals.append(np.sum(w * f(bary[:, 1], bary[:, 2], bary[:, 3])))
    assert vals[0] == pytest.approx(vals[1], rel=1e-4)


def test_tet_points_integrate_over_cube():
    m = build_spatial_mesh(3)
    pts, w = tet_points(m, DEGREE5)
    assert w.sum() == pytest.approx(1.0)
    assert np.sum(w * pts[..., 0] ** 2 * pts[..., 1]) == pytest.approx(1 / 6, abs=1e-14)
