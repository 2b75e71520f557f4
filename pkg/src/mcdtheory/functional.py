"""Estimating equations of the MCD functional and their derivative.

For ``theta = (m, G, r)`` and ``z = G^-1 (y - m)`` the score is

    Psi(y, theta) = 1{|z| <= r} * (z, z z' - I, 1) - (0, 0, gamma)

and ``Lambda(theta) = E Psi(X, theta)``. The derivative of ``Lambda`` at the
functional ``theta0`` reduces to integrals over the sphere ``|w| = rho0``
against ``nu(dw) = det(G0) f(G0 w + m0) sigma(dw)``. Linear maps on the
tangent space are stored as matrices in the coordinates of
:mod:`mcdtheory.core`.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    TangentVector,
    ThetaParams,
    block_slices,
    coords_to_tangent,
    pds_matrix,
    sym_matrix,
    tangent_dim,
    tangent_to_coords,
)
from .errors import BadBandwidth, DegenerateMatrix, QuadratureError, ShapeError, SingularDerivative
from .models import DensityModel
from .quadrature import ball_rule, default_sphere_sizes, sphere_rule


def _pdf_of(density):
    if isinstance(density, DensityModel):
        return density.pdf
    if callable(density):
        return density
    raise TypeError(f"expected a DensityModel or a callable density, got {type(density)!r}")


# -- Psi ---------------------------------------------------------------------

@dataclass(frozen=True)
class PsiValue:
    v1: np.ndarray
    v2: np.ndarray
    v3: float

    def coords(self):
        return tangent_to_coords(TangentVector(self.v1, self.v2, self.v3))

    def as_tangent(self):
        return TangentVector(self.v1, self.v2, self.v3)


def psi(y, theta, gamma):
    """Score of a single point; the indicator is inclusive at the boundary."""
    y = np.asarray(y, dtype=float)
    if y.shape != (theta.k,):
        raise ShapeError(f"point has shape {y.shape}, expected ({theta.k},)")
    z = np.linalg.solve(theta.G, y - theta.m)
    k = theta.k
    if np.sqrt(z @ z) <= theta.r:
        return PsiValue(z, sym_matrix(np.outer(z, z) - np.eye(k)), 1.0 - gamma)
    return PsiValue(np.zeros(k), np.zeros((k, k)), -float(gamma))


def psi_coords(Y, theta, gamma):
    """Scores of all rows of ``Y`` as an ``(n, tangent_dim(k))`` array."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    k = theta.k
    Z = np.linalg.solve(theta.G, (Y - theta.m).T).T
    inside = np.sqrt(np.sum(Z * Z, axis=1)) <= theta.r
    iu = np.triu_indices(k)
    ZZ = Z[:, iu[0]] * Z[:, iu[1]] - (iu[0] == iu[1])
    ind = inside.astype(float)[:, None]
    return np.hstack([ind * Z, ind * ZZ, ind - gamma])


# -- Lambda by volume quadrature --------------------------------------------

@dataclass(frozen=True)
class QuadSpec:
    """Resolution of the ball quadrature used for Lambda.

    The result is computed twice, the second time with 1.5x as many nodes per
    direction; the difference serves as the error estimate.
    """

    n_radial: int = 48
    n_polar: Optional[int] = None
    n_azimuth: Optional[int] = None
    tol: float = 1e-8

    def sizes(self, k):
        dp, da = default_sphere_sizes(k)
        return (self.n_radial,
                dp if self.n_polar is None else self.n_polar,
                da if self.n_azimuth is None else self.n_azimuth)


@dataclass(frozen=True)
class LambdaValue:
    v1: np.ndarray
    v2: np.ndarray
    v3: float
    error: float

    def coords(self):
        return tangent_to_coords(TangentVector(self.v1, self.v2, self.v3))


def _lambda_coords(theta, pdf, gamma, n_radial, n_polar, n_azimuth):
    k = theta.k
    rule = ball_rule(k, theta.r, n_radial, sphere_rule(k, 1.0, n_polar, n_azimuth))
    Z = rule.nodes
    Y = theta.m + Z @ theta.G
    w = rule.weights * np.linalg.det(theta.G) * pdf(Y)
    iu = np.triu_indices(k)
    v1 = w @ Z
    v2 = w @ (Z[:, iu[0]] * Z[:, iu[1]] - (iu[0] == iu[1]))
    v3 = w.sum() - gamma
    return np.concatenate([v1, v2, [v3]])


def lambda_value(theta, density, gamma, quad=QuadSpec()):
    """Integrate Psi(., theta) against the density; raises QuadratureError if the
    error estimate exceeds ``quad.tol``."""
    pdf = _pdf_of(density)
    k = theta.k
    nr, npol, naz = quad.sizes(k)
    coarse = _lambda_coords(theta, pdf, gamma, nr, npol, naz)
    fine = _lambda_coords(theta, pdf, gamma, (3 * nr) // 2,
                          (3 * npol) // 2 if npol else npol, (3 * naz) // 2)
    err = float(np.max(np.abs(fine - coarse)))
    if not err <= quad.tol:
        raise QuadratureError(f"Lambda quadrature error estimate {err:.3g} exceeds {quad.tol:.3g}")
    t = coords_to_tangent(fine, k)
    return LambdaValue(t.h, t.A, t.s, err)


# -- the derivative -------------------------------------------------------------

@dataclass(frozen=True)
class LambdaPrimeMap:
    """Linear map on the tangent space, stored in tangent coordinates."""

    k: int
    matrix: np.ndarray

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        d = tangent_dim(self.k)
        if M.shape != (d, d):
            raise ShapeError(f"map for k={self.k} must be {d}x{d}, got {M.shape}")
        if not np.all(np.isfinite(M)):
            raise ValueError("map has non-finite entries")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    def apply(self, t):
        return coords_to_tangent(self.matrix @ tangent_to_coords(t), self.k)

    def condition(self):
        return float(np.linalg.cond(self.matrix))

    def block(self, row, col):
        """Sub-matrix between blocks named ``'h'``, ``'A'`` or ``'s'``."""
        sl = dict(zip("hAs", block_slices(self.k)))
        return self.matrix[sl[row], sl[col]]


def boundary_measure(theta0, density, rule=None):
    """Nodes ``w`` on the sphere of radius ``theta0.r`` and the weights of ``nu``."""
    pdf = _pdf_of(density)
    k = theta0.k
    rule = sphere_rule(k) if rule is None else rule
    if rule.k != k:
        raise ShapeError(f"sphere rule is for k={rule.k}, parameter has k={k}")
    rule = rule.rescaled(theta0.r)
    W = rule.nodes
    nu = rule.weights * np.linalg.det(theta0.G) * pdf(theta0.m + W @ theta0.G)
    return W, nu


def _analytic_apply(W, nu, Ginv, rho0, gamma, t):
    k = W.shape[1]
    S = Ginv @ t.A + t.A @ Ginv
    factor = (W @ (Ginv @ t.h)) / rho0 + np.einsum("ni,ij,nj->n", W, S, W) / (2 * rho0) + t.s
    fnu = factor * nu
    d1 = -gamma * (Ginv @ t.h) + fnu @ W
    d2 = -gamma * S + np.einsum("n,ni,nj->ij", fnu, W, W) - fnu.sum() * np.eye(k)
    d3 = fnu.sum()
    return tangent_to_coords(TangentVector(d1, sym_matrix(d2), d3))


def lambda_prime_analytic(theta0, density, gamma, rule=None):
    """Derivative of Lambda at ``theta0`` from the boundary-sphere integrals.

    The interior terms use ``P(E) = gamma`` and ``Lambda(theta0) = 0``, so the
    result is the derivative only when ``theta0`` solves the estimating
    equations (see :func:`solve_theta0`).
    """
    k = theta0.k
    W, nu = boundary_measure(theta0, density, rule)
    Ginv = np.linalg.inv(theta0.G)
    d = tangent_dim(k)
    cols = [_analytic_apply(W, nu, Ginv, theta0.r, gamma, coords_to_tangent(e, k))
            for e in np.eye(d)]
    return LambdaPrimeMap(k, np.column_stack(cols))


def lambda_prime_fd(theta0, density, gamma, step=1e-4, quad=QuadSpec(tol=1e-7)):
    """Central differences of :func:`lambda_value` along each coordinate direction."""
    if not step > 0:
        raise ValueError("step must be positive")
    k = theta0.k
    d = tangent_dim(k)
    cols = []
    for e in np.eye(d):
        t = coords_to_tangent(e, k)
        up = lambda_value(theta0.shifted(t, step), density, gamma, quad).coords()
        dn = lambda_value(theta0.shifted(t, -step), density, gamma, quad).coords()
        cols.append((up - dn) / (2 * step))
    return LambdaPrimeMap(k, np.column_stack(cols))


def invert_map(lp, max_condition=1e12):
    """Matrix inverse of a derivative map; SingularDerivative if ill-conditioned."""
    M = lp.matrix
    cond = float(np.linalg.cond(M))
    if not cond < max_condition:
        raise SingularDerivative(f"derivative is singular (condition number {cond:.3g})", cond)
    Minv = np.linalg.inv(M)
    resid = np.max(np.abs(M @ Minv - np.eye(len(M))))
    if not resid < 1e-9:
        raise SingularDerivative(f"inverse round-trip residual {resid:.3g} too large", cond)
    return LambdaPrimeMap(lp.k, Minv)


def solve_theta0(density, gamma, theta_init, tol=1e-12, max_iter=50, rule=None,
                 quad=QuadSpec()):
    """Newton iteration for Lambda(theta) = 0 using the analytic derivative.

    Only a root of the estimating equations is found; whether it is the
    determinant-minimizing functional is the caller's concern.
    """
    theta = theta_init
    for _ in range(max_iter):
        val = lambda_value(theta, density, gamma, quad).coords()
        if np.max(np.abs(val)) < tol:
            return theta
        lp = lambda_prime_analytic(theta, density, gamma, rule)
        step = np.linalg.solve(lp.matrix, -val)
        t = coords_to_tangent(step, theta.k)
        # keep G positive definite and r positive
        frac = 1.0
        while frac > 1e-6:
            try:
                cand = theta.shifted(t, frac)
                break
            except (DegenerateMatrix, ValueError):
                frac /= 2
        else:
            raise QuadratureError("Newton step left the parameter space")
        theta = cand
    val = lambda_value(theta, density, gamma, quad).coords()
    if np.max(np.abs(val)) < 100 * tol:
        return theta
    raise QuadratureError(f"Newton iteration did not converge (|Lambda| = {np.max(np.abs(val)):.3g})")


# -- non-singularity diagnostics ------------------------------------------------

@dataclass
class NonsingularityReport:
    """Sphere moments of ``nu`` and the sufficient conditions for invertibility.

    Margins are relative: ``second - gamma*rho0`` over ``gamma*rho0`` and so
    on; a condition passes when its smallest absolute margin exceeds ``tol``.
    """

    k: int
    gamma: float
    rho0: float
    nu0: float
    second: np.ndarray
    fourth: np.ndarray
    M: np.ndarray
    cond_h_margins: np.ndarray
    cond_anm_margins: np.ndarray
    property_m_margin: float
    odd_moment_max: float
    map_condition: float
    null_trace: Optional[float] = None
    decomposition: Optional[dict] = None
    tol: float = 1e-8

    @property
    def cond_h(self):
        return bool(np.min(np.abs(self.cond_h_margins)) > self.tol)

    @property
    def cond_anm(self):
        if self.cond_anm_margins.size == 0:
            return True
        return bool(np.min(np.abs(self.cond_anm_margins)) > self.tol)

    @property
    def property_m(self):
        return bool(self.property_m_margin > self.tol)

    @property
    def passed(self):
        return self.cond_h and self.cond_anm and self.property_m

    def to_dict(self):
        return {
            "k": self.k, "gamma": self.gamma, "rho0": self.rho0, "nu0": self.nu0,
            "second_moments": self.second.tolist(), "fourth_moments": self.fourth.tolist(),
            "M": self.M.tolist(),
            "cond_h": self.cond_h, "cond_h_margins": self.cond_h_margins.tolist(),
            "cond_anm": self.cond_anm, "cond_anm_margins": self.cond_anm_margins.tolist(),
            "property_m": self.property_m, "property_m_margin": self.property_m_margin,
            "odd_moment_max": self.odd_moment_max, "map_condition": self.map_condition,
            "null_trace": self.null_trace, "decomposition": self.decomposition,
            "passed": self.passed,
        }


def sphere_moments(theta0, density, rule=None):
    """``nu0``, ``int w_i^2 dnu`` and ``int w_i^2 w_j^2 dnu`` on the boundary sphere."""
    W, nu = boundary_measure(theta0, density, rule)
    W2 = W * W
    return float(nu.sum()), nu @ W2, np.einsum("n,ni,nj->ij", nu, W2, W2)


def m_matrix(nu0, second, fourth, gamma, rho0):
    k = len(second)
    return fourth - np.outer(second, second) / nu0 - 2 * gamma * rho0 * np.eye(k)


def _odd_moment_max(W, nu):
    k = W.shape[1]
    vals = [np.abs(nu @ W).max()]
    iu = np.triu_indices(k, 1)
    if iu[0].size:
        vals.append(np.abs(nu @ (W[:, iu[0]] * W[:, iu[1]])).max())
    vals.append(np.abs(np.einsum("n,ni,nj,nl->ijl", nu, W, W, W)).max())
    return float(max(vals))


def nonsingularity_report(density, theta0, gamma, rule=None, decomposition=False, tol=1e-8):
    """Evaluate the sufficient conditions for an invertible derivative at ``theta0``."""
    k = theta0.k
    rho0 = theta0.r
    W, nu = boundary_measure(theta0, density, rule)
    W2 = W * W
    nu0 = float(nu.sum())
    second = nu @ W2
    fourth = np.einsum("n,ni,nj->ij", nu, W2, W2)
    M = m_matrix(nu0, second, fourth, gamma, rho0)
    target = gamma * rho0
    cond_h = (second - target) / target
    off = ~np.eye(k, dtype=bool)
    cond_anm = (fourth[off] - target) / target
    if k == 1:
        prop = 1.0
    else:
        # orthonormal basis of the zero-sum hyperplane
        Q = np.linalg.svd(np.ones((1, k)))[2][1:].T
        sv = np.linalg.svd(M @ Q, compute_uv=False)
        prop = float(sv.min() / max(np.linalg.norm(M, 2), np.finfo(float).tiny))
    lp = lambda_prime_analytic(theta0, density, gamma, rule)
    u, sv, vt = np.linalg.svd(lp.matrix)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    null_trace = None
    if sv[-1] <= 1e-8 * sv[0]:
        t = coords_to_tangent(vt[-1], k)
        null_trace = float(np.trace(np.linalg.solve(theta0.G, t.A)))
    dec = None
    if decomposition:
        c2 = float(M[off].mean()) if k > 1 else 0.0
        c1 = float(np.diag(M).mean() - c2)
        resid = float(np.linalg.norm(M - c1 * np.eye(k) - c2 * np.ones((k, k))))
        dec = {"c1": c1, "c2": c2, "residual": resid}
    return NonsingularityReport(k, float(gamma), float(rho0), nu0, second, fourth, M, cond_h,
                                cond_anm, prop, _odd_moment_max(W, nu), cond, null_trace, dec, tol)


def s_from_A(theta0, density, A, rule=None):
    """The ``s`` that makes the third derivative component vanish for ``h = 0``
    at a point-symmetric density."""
    W, nu = boundary_measure(theta0, density, rule)
    Ginv = np.linalg.inv(theta0.G)
    S = Ginv @ A + A @ Ginv
    q = np.einsum("ni,ij,nj->n", W, S, W)
    return float(-(nu @ q) / (2 * theta0.r * nu.sum()))


# -- plug-in estimate -------------------------------------------------------------

@dataclass(frozen=True)
class ProductKDE:
    """Gaussian product-kernel density estimate with per-coordinate bandwidths."""

    data: np.ndarray
    bandwidth: np.ndarray
    chunk: int = 256

    def __call__(self, Y):
        Y = np.asarray(Y, dtype=float)
        shape = Y.shape[:-1]
        Y = Y.reshape(-1, Y.shape[-1])
        b = self.bandwidth
        norm = 1.0 / (len(self.data) * np.prod(b) * (2 * np.pi) ** (len(b) / 2))
        out = np.empty(len(Y))
        for start in range(0, len(Y), self.chunk):
            U = (Y[start:start + self.chunk, None, :] - self.data[None]) / b
            out[start:start + self.chunk] = np.exp(-0.5 * np.sum(U * U, axis=2)).sum(axis=1)
        return (out * norm).reshape(shape)


def default_bandwidth(X):
    n, k = X.shape
    return n ** (-1.0 / (k + 4)) * X.std(axis=0, ddof=1)


def make_kde(X, bandwidth="auto"):
    X = np.asarray(X, dtype=float)
    if isinstance(bandwidth, str):
        if bandwidth != "auto":
            raise BadBandwidth(f"bandwidth must be positive or 'auto', got {bandwidth!r}")
        b = default_bandwidth(X)
    else:
        b = np.broadcast_to(np.asarray(bandwidth, dtype=float), (X.shape[1],)).copy()
    if not np.all(b > 0) or not np.all(np.isfinite(b)):
        raise BadBandwidth(f"bandwidth must be positive, got {b}")
    return ProductKDE(X, b)


def plug_in_lambda_prime(X, fit, bandwidth="auto", rule=None, density=None):
    """Estimated derivative at the fitted parameter.

    The density on the fitted boundary ellipsoid comes from a product-kernel
    estimate unless an explicit ``density`` is given.
    """
    try:
        theta = ThetaParams(fit.T, pds_matrix(fit.G), fit.r_hat)
    except ValueError as exc:
        raise DegenerateMatrix(f"fit is degenerate: {exc}") from exc
    dens = make_kde(X, bandwidth) if density is None else density
    return lambda_prime_analytic(theta, dens, fit.gamma, rule)


def sandwich_scores(X, fit, lp):
    """``Z_i = Lambda'^-1 Psi(X_i, theta_hat)`` in tangent coordinates."""
    inv = invert_map(lp)
    P = psi_coords(X, fit.theta(), fit.gamma)
    return P @ inv.matrix.T


def sandwich_covariance(X, fit, lp):
    """Sample covariance of the sandwich scores; estimates the limiting
    covariance of ``sqrt(n) (theta_hat - theta0)``."""
    Z = sandwich_scores(X, fit, lp)
    return np.atleast_2d(np.cov(Z, rowvar=False))
