from math import gamma, pi

import numpy as np
import pytest

from mcdtheory.quadrature import ball_rule, sphere_area, sphere_rule


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_sphere_rule_area_and_moments(k):
    rule = sphere_rule(k)
    area = 2 * pi ** (k / 2) / gamma(k / 2)
    assert rule.weights.sum() == pytest.approx(area, rel=1e-13)
    assert np.allclose(np.linalg.norm(rule.nodes, axis=1), 1.0)
    W2 = rule.nodes**2
    # uniform direction moments: E u_i^2 = 1/k, E u_i^4 = 3/(k(k+2)), E u_i^2 u_j^2 = 1/(k(k+2))
    assert rule.integrate(W2[:, 0]) == pytest.approx(area / k, rel=1e-12)
    assert rule.integrate(W2[:, 0] ** 2) == pytest.approx(3 * area / (k * (k + 2)), rel=1e-12)
    assert rule.integrate(W2[:, 0] * W2[:, 1]) == pytest.approx(area / (k * (k + 2)), rel=1e-12)
    assert abs(rule.integrate(rule.nodes[:, 0] ** 3)) < 1e-13


def test_sphere_rule_rescales():
    rule = sphere_rule(3, radius=2.0)
    assert rule.weights.sum() == pytest.approx(sphere_area(3, 2.0), rel=1e-13)
    assert np.allclose(np.linalg.norm(rule.nodes, axis=1), 2.0)


@pytest.mark.parametrize("k", [2, 3])
def test_ball_rule_integrates_gaussian_mass(k):
    from scipy.stats import chi2

    ball = ball_rule(k, 1.5)
    f = np.exp(-0.5 * np.sum(ball.nodes**2, axis=1)) / (2 * pi) ** (k / 2)
    assert ball.weights @ f == pytest.approx(chi2.cdf(1.5**2, k), rel=1e-12)
