from math import gamma as gamma_fn
from math import pi

import numpy as np
import pytest

from mcdtheory.core import TangentVector, ThetaParams, tangent_dim
from mcdtheory.elliptical import d_inv_matrix, d_matrix, elliptical_constants
from mcdtheory.errors import BadBandwidth, SingularDerivative
from mcdtheory.estimator import mcd_cstep
from mcdtheory.functional import (LambdaPrimeMap, invert_map, lambda_prime_analytic,
                                  lambda_prime_fd, lambda_value, make_kde,
                                  nonsingularity_report, plug_in_lambda_prime, psi, psi_coords,
                                  s_from_A, sandwich_covariance, solve_theta0,
                                  sphere_moments)
from mcdtheory.models import elliptical_model, get_model, get_radial, product_symmetric_model


def test_psi_special_points():
    th = ThetaParams(np.zeros(2), np.eye(2), 1.0)
    p = psi(np.zeros(2), th, 0.5)
    assert not p.v1.any() and np.allclose(p.v2, -np.eye(2)) and p.v3 == 0.5
    p = psi(np.array([1.0, 0.0]), th, 0.5)
    assert np.allclose(p.v1, [1, 0]) and np.allclose(p.v2, np.diag([0.0, -1.0])) and p.v3 == 0.5
    p = psi(np.array([2.0, 0.0]), th, 0.5)
    assert not p.v1.any() and not p.v2.any() and p.v3 == -0.5
    assert psi_coords(np.zeros((5, 2)), th, 0.5).shape == (5, tangent_dim(2))


@pytest.mark.parametrize("spec,k", [("gaussian", 2), ("student_t(5)", 3)])
def test_lambda_vanishes_at_theta0(spec, k):
    rad = get_radial(spec, k)
    c = elliptical_constants(rad, 0.5)
    lv = lambda_value(c.theta0(), elliptical_model(rad), 0.5)
    assert np.max(np.abs(lv.coords())) < 1e-8


def test_analytic_derivative_matches_blocks_and_fd(gauss2, gauss2_model):
    th = gauss2.theta0()
    lp = lambda_prime_analytic(th, gauss2_model, 0.5)
    assert np.max(np.abs(lp.matrix - d_matrix(gauss2))) < 1e-8
    assert np.max(np.abs(lp.block("h", "A"))) < 1e-10 and np.max(np.abs(lp.block("s", "h"))) < 1e-10
    fd = lambda_prime_fd(th, gauss2_model, 0.5)
    assert np.linalg.norm(lp.matrix - fd.matrix) / np.linalg.norm(lp.matrix) < 1e-3
    # d/ds of Lambda_3 is nu0
    assert lp.matrix[-1, -1] == pytest.approx(gauss2.nu0, rel=1e-12)
    assert np.max(np.abs(invert_map(lp).matrix - d_inv_matrix(gauss2))) < 1e-8


def test_invert_map_errors():
    eye = LambdaPrimeMap(2, np.eye(6))
    assert np.array_equal(invert_map(eye).matrix, np.eye(6))
    M = np.eye(6)
    M[2] = 0
    with pytest.raises(SingularDerivative) as info:
        invert_map(LambdaPrimeMap(2, M))
    assert info.value.condition > 1e12


@pytest.mark.parametrize("k", [2, 3, 4])
def test_sphere_moment_identities(k):
    rad = get_radial("gaussian", k)
    c = elliptical_constants(rad, 0.5)
    nu0, second, fourth = sphere_moments(c.theta0(), elliptical_model(rad))
    area = 2 * pi ** (k / 2) / gamma_fn(k / 2)
    base = area * rad.h(c.r**2) * c.r**k
    assert np.allclose(second, base * c.rho0 / k, rtol=1e-8)
    assert fourth[0, 0] == pytest.approx(3 * base * c.rho0**3 / (k * (k + 2)), rel=1e-8)
    assert fourth[0, 1] == pytest.approx(base * c.rho0**3 / (k * (k + 2)), rel=1e-8)
    assert nu0 == pytest.approx(area * rad.h(c.r**2) * c.r ** (k - 1) * c.alpha, rel=1e-8)


def test_nonsingularity_report():
    for spec in ("gaussian", "student_t(5)"):
        rad = get_radial(spec, 3)
        c = elliptical_constants(rad, 0.75)
        rep = nonsingularity_report(elliptical_model(rad), c.theta0(), 0.75, decomposition=True)
        assert rep.passed and rep.decomposition["residual"] < 1e-8
        assert rep.odd_moment_max < 1e-10
    rad = get_radial("uniform_ball", 2)
    r = np.sqrt(0.5)
    alpha = np.sqrt(r**2 / 4)  # E|X|^2 1{|X|<=r} / (k gamma) for the uniform disc
    rep = nonsingularity_report(elliptical_model(rad), ThetaParams(np.zeros(2), alpha * np.eye(2), r / alpha), 0.5)
    assert not rep.cond_h and np.max(np.abs(rep.cond_h_margins)) < 1e-8
    assert rep.null_trace is not None and abs(rep.null_trace) < 1e-8


def test_s_from_A_relation(gauss2, gauss2_model, rng):
    th = gauss2.theta0()
    lp = lambda_prime_analytic(th, gauss2_model, 0.5)
    for _ in range(5):
        A = rng.standard_normal((2, 2))
        A = A + A.T
        s = s_from_A(th, gauss2_model, A)
        out = lp.apply(TangentVector(np.zeros(2), A, s))
        assert abs(out.s) < 1e-8


def test_product_symmetric_derivative_fd():
    model = product_symmetric_model("logistic", 2)
    # the analytic form holds at the functional itself, where Lambda vanishes
    theta = solve_theta0(model, 0.5, ThetaParams(np.zeros(2), 1.3 * np.eye(2), 1.2))
    assert np.max(np.abs(lambda_value(theta, model, 0.5).coords())) < 1e-8
    lp = lambda_prime_analytic(theta, model, 0.5)
    fd = lambda_prime_fd(theta, model, 0.5)
    assert np.linalg.norm(lp.matrix - fd.matrix) / np.linalg.norm(lp.matrix) < 1e-3


def test_kde_and_bandwidth(rng):
    X = rng.standard_normal((500, 2))
    kde = make_kde(X)
    g = np.linspace(-6, 6, 121)
    G = np.stack(np.meshgrid(g, g), axis=-1)
    assert kde(G).sum() * (g[1] - g[0]) ** 2 == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(BadBandwidth):
        make_kde(X, -1.0)
    with pytest.raises(BadBandwidth):
        make_kde(X, "silverman")


def test_plug_in_oracle_and_sandwich(gauss2_model):
    rad = get_radial("gaussian", 2)
    c = elliptical_constants(rad, 0.75)
    X = elliptical_model(rad).sample(np.random.default_rng(7), 4000)
    fit = mcd_cstep(X, 0.75, restarts=10)
    oracle = plug_in_lambda_prime(X, fit, density=gauss2_model)
    assert np.array_equal(oracle.matrix, lambda_prime_analytic(fit.theta(), gauss2_model, 0.75).matrix)
    lp = plug_in_lambda_prime(X, fit)
    rel = np.linalg.norm(lp.matrix - d_matrix(c)) / np.linalg.norm(d_matrix(c))
    assert rel < 0.15
    cov = sandwich_covariance(X, fit, lp)
    assert np.allclose(cov, cov.T)
    assert 0.7 < np.mean(np.diag(cov)[:2]) / c.tau < 1.3


def test_product_model_registry():
    m = get_model("product_symmetric(laplace,normal)", 2)
    assert m.pdf(np.zeros(2)) == pytest.approx(0.5 / np.sqrt(2 * pi))
