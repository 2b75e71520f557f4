"""Closed-form theory of the MCD at elliptically contoured densities.

Everything is computed for the spherical generator ``h`` (``mu = 0``,
``Sigma = I``) and transferred to general ``(mu, Sigma)`` by affine
equivariance. Radial integrals are one-dimensional adaptive quadratures of
``c_k * h(s^2) s^(k-1+p)`` with ``c_k = 2 pi^(k/2) / Gamma(k/2)``.
"""

from dataclasses import asdict, dataclass
from math import gamma as gamma_fn
from math import isfinite, pi

import numpy as np
from scipy import integrate, optimize

from .core import (
    TangentVector,
    ThetaParams,
    commutation_matrix,
    coords_to_tangent,
    kron,
    pds_inv_sqrt,
    pds_matrix,
    pds_sqrt,
    tangent_dim,
    tangent_to_coords,
    vec,
)
from .errors import BadFraction, BoundaryUndefined, BracketError, QuadratureError, SingularDerivative
from .models import RadialDensity

QUAD_RTOL = 1e-13


def sphere_constant(k):
    """Surface area of the unit sphere in R^k."""
    return 2 * pi ** (k / 2) / gamma_fn(k / 2)


def _radial_integral(model, a, b, power):
    """``c_k * int_a^b h(s^2) s^(k-1+power) ds`` (``b`` may be ``inf``)."""
    k = model.k
    if b > model.support:
        b = model.support
    if a >= b:
        return 0.0

    def f(s):
        return float(model.h(s * s)) * s ** (k - 1 + power)

    if isfinite(b):
        val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    else:
        val, err = integrate.quad(f, a, np.inf, epsabs=1e-15, epsrel=QUAD_RTOL, limit=400)
    if not err <= 1e-9 * max(abs(val), 1e-3):
        raise QuadratureError(f"radial integral did not converge (estimate {val}, error {err})")
    return sphere_constant(k) * val


def radial_mass(model, R):
    return _radial_integral(model, 0.0, R, 0)


def truncated_radial_moment(model, r, p):
    """``E[1{|X| <= r} |X|^p]`` for the spherical law with generator ``h``."""
    if p < 0:
        raise ValueError("moment order must be non-negative")
    return _radial_integral(model, 0.0, r, p)


def _check_fraction(gamma):
    if not 0 < gamma < 1:
        raise BadFraction(f"gamma must lie strictly between 0 and 1, got {gamma}")


def r_gamma(model, gamma, r_max=1e6):
    """Radius of the centred ball holding probability ``gamma``."""
    _check_fraction(gamma)
    hi = min(1.0, model.support)
    while radial_mass(model, hi) < gamma:
        if hi >= model.support or hi > r_max:
            raise BracketError(f"mass {gamma} not reached within radius {hi:g}")
        hi = min(2 * hi, model.support)
    lo = 0.0
    r = optimize.brentq(lambda R: radial_mass(model, R) - gamma, lo, hi, xtol=1e-15, rtol=1e-15,
                        maxiter=200)
    # Newton polish
    for _ in range(3):
        dens = sphere_constant(model.k) * float(model.h(r * r)) * r ** (model.k - 1)
        resid = radial_mass(model, r) - gamma
        if dens <= 0 or abs(resid) < 1e-15:
            break
        r_new = r - resid / dens
        if not lo < r_new < hi:
            break
        r = r_new
    return float(r)


def alpha_gamma(model, gamma, r=None):
    """Scale factor ``alpha`` with ``Sigma0 = alpha^2 Sigma``."""
    r = r_gamma(model, gamma) if r is None else r
    a2 = truncated_radial_moment(model, r, 2) / (gamma * model.k)
    if not a2 > 0:
        raise QuadratureError("alpha^2 is not positive")
    return float(np.sqrt(a2))


def theta0_elliptical(mu, sigma, model, gamma):
    """MCD functional ``(mu, alpha Sigma^(1/2), r/alpha)`` at an elliptical law."""
    r = r_gamma(model, gamma)
    a = alpha_gamma(model, gamma, r)
    return ThetaParams(np.asarray(mu, dtype=float), a * pds_sqrt(pds_matrix(sigma)), r / a)


def nu_zero(model, gamma, r=None, alpha=None):
    """Mass of the boundary measure at the spherical functional."""
    r = r_gamma(model, gamma) if r is None else r
    alpha = alpha_gamma(model, gamma, r) if alpha is None else alpha
    return float(sphere_constant(model.k) * model.h(r * r) * r ** (model.k - 1) * alpha)


def betas(k, gamma, alpha, rho0, nu0):
    """Coefficients of the derivative at the spherical functional."""
    b1 = (rho0 * nu0 / k - gamma) / alpha
    b2 = 2 * rho0**3 * nu0 / (alpha * k * (k + 2)) - 2 * gamma / alpha
    b3 = rho0**3 * nu0 / (alpha * k * (k + 2)) - rho0 * nu0 / (k * alpha)
    b4 = rho0**2 * nu0 / k - nu0
    b5 = rho0 * nu0 / (k * alpha)
    b6 = nu0
    return b1, b2, b3, b4, b5, b6


@dataclass(frozen=True)
class EllipticalConstants:
    gamma: float
    k: int
    r: float
    alpha: float
    rho0: float
    nu0: float
    beta1: float
    beta2: float
    beta3: float
    beta4: float
    beta5: float
    beta6: float
    pi: float
    kappa1: float
    kappa2: float
    kappa3: float
    kappa4: float
    lambda1: float
    lambda2: float
    lambda3: float
    tau: float
    sigma1: float
    sigma2: float
    sigma_rho_sq: float
    m0: float
    m2: float
    m4: float

    @property
    def betas(self):
        return (self.beta1, self.beta2, self.beta3, self.beta4, self.beta5, self.beta6)

    def theta0(self):
        return ThetaParams(np.zeros(self.k), self.alpha * np.eye(self.k), self.rho0)

    def to_json_dict(self):
        out = asdict(self)
        out.pop("m0")
        return out


def expansion_coefficients(k, gamma, r, alpha, beta):
    """``pi``, the four kappas and three lambdas from the closed forms."""
    b1, b2, b3, b4, b5, b6 = beta
    pi_ = -1.0 / (alpha * b1)
    kappa = (
        -r**2 / (k * gamma),
        (alpha * b2 + 2 * gamma) / (k * gamma * alpha * b2),
        -2.0 / (alpha * b2),
        (r**2 - k * alpha**2) / k,
    )
    lam = (
        -r / (2 * k * gamma * alpha**3),
        r**3 / (2 * k * gamma * alpha**3) - 1.0 / b6,
        gamma / b6 + r / (2 * k * alpha**3) * (k * alpha**2 - r**2),
    )
    return pi_, kappa, lam


def expansion_coefficients_from_betas(k, gamma, alpha, beta):
    """Same coefficients read off the inverse derivative (no closed forms)."""
    b1, b2, b3, b4, b5, b6 = beta
    pi_ = -1.0 / (alpha * b1)
    kappa = (
        2 * alpha / b2 + k * alpha**2 * (b3 * b6 - b4 * b5) / (gamma * b2 * b6)
        - alpha**2 * b4 / (gamma * b6),
        (b4 * b5 - b3 * b6) / (gamma * b2 * b6),
        -2.0 / (alpha * b2),
        alpha**2 * b4 / b6,
    )
    lam = (
        -b5 / (2 * alpha * gamma * b6),
        alpha * (b2 + k * b3 + k * b5) / (2 * gamma * b6),
        -alpha * (b2 + k * b3) / (2 * b6),
    )
    return pi_, kappa, lam


def asymptotic_variances(k, gamma, r, alpha, nu0, kappa, lam, m4):
    """``tau``, ``sigma1``, ``sigma2`` and ``sigma_rho^2`` from the closed forms."""
    denom = k * gamma * alpha - r * nu0
    if denom == 0:
        raise SingularDerivative("k*gamma*alpha equals r*nu0; the location block is singular")
    tau = k**2 * gamma * alpha**4 / denom**2
    k3 = kappa[2]
    sigma1 = k3**2 * m4 / (k * (k + 2))
    sigma2 = (-2.0 / k * sigma1 + m4 / (k**2 * gamma**2)
              - (gamma * r**4 - 2 * k * gamma * r**2 * alpha**2 + k**2 * gamma * alpha**4
                 + 2 * k * r**2 * alpha**2 - r**4) / (gamma * k**2))
    # second moment of l1*1*|x|^2 + l2*1 + l3, using E 1|X|^2 = k gamma alpha^2
    l1, l2, l3 = lam
    sigma_rho_sq = (l1**2 * m4 + 2 * l1 * (l2 + l3) * k * gamma * alpha**2
                    + l2 * (l2 + 2 * l3) * gamma + l3**2)
    return tau, sigma1, sigma2, sigma_rho_sq


def summand_variances(model, r, kappa, lam, pi_):
    """Variances of the iid summands of the expansion, by radial quadrature.

    Uses ``E[u_i^2 u_j^2] = (1 + 2 delta_ij) / (k (k+2))`` for the uniform
    direction ``u = X/|X|`` and integrates everything radial directly,
    including the untrimmed tail.
    """
    k = model.k
    k1, k2, k3, k4 = kappa
    l1, l2, l3 = lam

    def inner(fn):
        return integrate_radial(model, fn, 0.0, r)

    tail = integrate_radial(model, lambda s: np.ones_like(s), r, np.inf)
    e_ell2 = inner(lambda s: (k3 * s**2) ** 2)
    e_m2 = inner(lambda s: (k1 + k2 * s**2 + k4) ** 2) + k4**2 * tail
    e_ellm = inner(lambda s: k3 * s**2 * (k1 + k2 * s**2 + k4))
    sigma1 = e_ell2 / (k * (k + 2))
    sigma2 = e_ell2 / (k * (k + 2)) + e_m2 + 2.0 / k * e_ellm
    sigma_rho_sq = inner(lambda s: (l1 * s**2 + l2 + l3) ** 2) + l3**2 * tail
    tau = pi_**2 * inner(lambda s: s**2) / k
    return tau, sigma1, sigma2, sigma_rho_sq


def integrate_radial(model, fn, a, b):
    """``E[1{a < |X| <= b} fn(|X|)]`` for the spherical law."""
    k = model.k
    if b > model.support:
        b = model.support
    if a >= b:
        return 0.0

    def f(s):
        return float(fn(np.float64(s)) * model.h(s * s)) * s ** (k - 1)

    val, err = integrate.quad(f, a, b, epsabs=1e-15, epsrel=QUAD_RTOL, limit=400)
    if not err <= 1e-9 * max(abs(val), 1e-3):
        raise QuadratureError(f"radial integral did not converge (estimate {val}, error {err})")
    return sphere_constant(k) * val


def elliptical_constants(model, gamma, check=True):
    """All constants of the theory for a spherical generator and fraction ``gamma``.

    With ``check`` the sign conditions (beta1 < 0, beta2 < 0, beta6 > 0) are
    enforced; a violation means the derivative is singular.
    """
    if not isinstance(model, RadialDensity):
        raise TypeError("elliptical_constants expects a RadialDensity")
    _check_fraction(gamma)
    k = model.k
    r = r_gamma(model, gamma)
    m0 = truncated_radial_moment(model, r, 0)
    m2 = truncated_radial_moment(model, r, 2)
    m4 = truncated_radial_moment(model, r, 4)
    alpha = float(np.sqrt(m2 / (k * gamma)))
    rho0 = r / alpha
    nu0 = nu_zero(model, gamma, r, alpha)
    beta = betas(k, gamma, alpha, rho0, nu0)
    if check:
        b1, b2, _, _, _, b6 = beta
        scale = max(abs(gamma / alpha), 1e-300)
        if not (b1 < -1e-10 * scale and b2 < -1e-10 * scale and b6 > 0):
            raise SingularDerivative(
                f"sign conditions fail (beta1={b1:.6g}, beta2={b2:.6g}, beta6={b6:.6g}); "
                "the generator is not strictly decreasing near r(gamma)", 0.0 if b6 <= 0 else np.inf)
    pi_, kappa, lam = expansion_coefficients(k, gamma, r, alpha, beta)
    tau, s1, s2, srho = asymptotic_variances(k, gamma, r, alpha, nu0, kappa, lam, m4)
    return EllipticalConstants(
        float(gamma), k, r, alpha, rho0, nu0, *beta, pi_, *kappa, *lam, tau, s1, s2, srho, m0, m2, m4)


# -- the derivative at the spherical functional -----------------------------------

def d_map(t, c):
    b1, b2, b3, b4, b5, b6 = c.betas
    k = t.k
    trA = np.trace(t.A)
    return TangentVector(b1 * t.h, b2 * t.A + (b3 * trA + b4 * t.s) * np.eye(k), b5 * trA + b6 * t.s)


def d_inv_map(t, c):
    b1, b2, b3, b4, b5, b6 = c.betas
    a, g = c.alpha, c.gamma
    k = t.k
    trB = np.trace(t.A)
    A = t.A / b2 + (a * (b3 * b6 - b4 * b5) / (2 * g * b2 * b6) * trB
                    + a * b4 / (2 * g * b6) * t.s) * np.eye(k)
    s = a * b5 / (2 * g * b6) * trB - a * (b2 + k * b3) / (2 * g * b6) * t.s
    return TangentVector(t.h / b1, A, s)


def _matrix_of(fn, c):
    k = c.k
    d = tangent_dim(k)
    return np.column_stack([tangent_to_coords(fn(coords_to_tangent(e, k), c)) for e in np.eye(d)])


def d_matrix(c):
    """Matrix of the derivative in tangent coordinates."""
    return _matrix_of(d_map, c)


def d_inv_matrix(c):
    return _matrix_of(d_inv_map, c)


# -- limiting covariances and influence functions ------------------------------------

def general_covariance(sigma, c):
    """Limiting covariances of the location and of ``vec`` of the scatter estimate."""
    sigma = pds_matrix(sigma)
    k = sigma.shape[0]
    K = commutation_matrix(k)
    v = vec(sigma)
    cov_vec = c.sigma1 * (np.eye(k * k) + K) @ kron(sigma, sigma) + c.sigma2 * np.outer(v, v)
    return c.tau * sigma, cov_vec


@dataclass(frozen=True)
class InfluenceValue:
    mu: np.ndarray
    sigma: np.ndarray
    rho: float


def influence(x, c, boundary_tol=1e-12):
    """Influence functions of location, scatter and radius at the spherical law."""
    x = np.asarray(x, dtype=float)
    norm = float(np.sqrt(x @ x))
    if abs(norm - c.r) < boundary_tol:
        raise BoundaryUndefined(f"|x| = {norm} lies on the trimming boundary r = {c.r}")
    ind = 1.0 if norm <= c.r else 0.0
    k = x.shape[0]
    I = np.eye(k)
    if_mu = c.pi * ind * x
    if_sigma = ind * ((c.kappa1 + c.kappa2 * norm**2) * I + c.kappa3 * np.outer(x, x)) + c.kappa4 * I
    if_rho = c.lambda1 * ind * norm**2 + c.lambda2 * ind + c.lambda3
    return InfluenceValue(if_mu, if_sigma, float(if_rho))


def influence_from_inverse(x, c):
    """``-D^inv Psi(x, theta0)``, with the scatter block scaled by ``2 alpha``."""
    from .functional import psi

    p = psi(x, c.theta0(), c.gamma)
    t = d_inv_map(TangentVector(p.v1, p.v2, p.v3), c)
    return InfluenceValue(-t.h, -2 * c.alpha * t.A, -t.s)


def influence_general(x, mu, sigma, c):
    """Influence functions at ``(mu, Sigma)`` by transferring the spherical ones."""
    root = pds_sqrt(sigma)
    z = pds_inv_sqrt(sigma) @ (np.asarray(x, dtype=float) - np.asarray(mu, dtype=float))
    v = influence(z, c)
    return InfluenceValue(root @ v.mu, root @ v.sigma @ root, v.rho)
