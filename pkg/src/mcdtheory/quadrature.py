"""Quadrature on spheres and balls in R^k.

The unit sphere S^{k-1} is built recursively: writing a point as
``(x, sqrt(1 - x^2) u)`` with ``u`` on S^{k-2}, the surface measure factors as
``(1 - x^2)^{(k-3)/2} dx dsigma_{k-2}(u)``. The ``x`` integral uses
Gauss-Jacobi nodes for that weight (plain Gauss-Legendre when k = 3); the
circle S^1 uses the equispaced trapezoid rule, which is spectrally accurate
for smooth periodic integrands.
"""

from dataclasses import dataclass
from math import gamma as gamma_fn
from math import pi

import numpy as np
from scipy.special import roots_jacobi

from .errors import ShapeError

DEFAULT_CIRCLE_NODES = 256


def sphere_area(k, radius=1.0):
    """Surface area of the sphere of given radius in R^k."""
    return 2 * pi ** (k / 2) / gamma_fn(k / 2) * radius ** (k - 1)


def default_sphere_sizes(k):
    """(polar nodes per level, azimuth nodes) used when no size is given."""
    if k <= 2:
        return 0, DEFAULT_CIRCLE_NODES
    if k == 3:
        return 32, 64
    if k == 4:
        return 24, 48
    return 12, 24


def _unit_sphere(k, n_polar, n_azimuth):
    if k == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    if k == 2:
        t = 2 * pi * np.arange(n_azimuth) / n_azimuth
        return np.column_stack([np.cos(t), np.sin(t)]), np.full(n_azimuth, 2 * pi / n_azimuth)
    a = (k - 3) / 2
    x, wx = roots_jacobi(n_polar, a, a)
    inner, w_inner = _unit_sphere(k - 1, n_polar, n_azimuth)
    scale = np.sqrt(np.clip(1 - x**2, 0.0, None))
    nodes = np.concatenate(
        [np.repeat(x, len(inner))[:, None], (scale[:, None, None] * inner[None]).reshape(-1, k - 1)],
        axis=1,
    )
    weights = np.outer(wx, w_inner).ravel()
    return nodes, weights


@dataclass(frozen=True)
class SphereRule:
    """Nodes on the sphere of radius ``radius`` and weights summing to its area."""

    nodes: np.ndarray
    weights: np.ndarray
    radius: float

    @property
    def k(self):
        return self.nodes.shape[1]

    def rescaled(self, radius):
        f = radius / self.radius
        return SphereRule(self.nodes * f, self.weights * f ** (self.k - 1), float(radius))

    def integrate(self, values):
        """Integrate values given at the nodes (leading axis) against surface measure."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def sphere_rule(k, radius=1.0, n_polar=None, n_azimuth=None):
    """Product rule on the sphere of ``radius`` in R^k.

    For k = 2 the rule is the ``n_azimuth``-point trapezoid rule; for k >= 3 it
    integrates polynomials of degree ``min(2 n_polar - 1, n_azimuth - 1)``
    exactly.
    """
    if k < 1:
        raise ShapeError("k must be >= 1")
    dp, da = default_sphere_sizes(k)
    n_polar = dp if n_polar is None else n_polar
    n_azimuth = da if n_azimuth is None else n_azimuth
    nodes, weights = _unit_sphere(k, n_polar, n_azimuth)
    rule = SphereRule(nodes, weights, 1.0)
    return rule if radius == 1.0 else rule.rescaled(radius)


@dataclass(frozen=True)
class BallRule:
    """Nodes and weights for integrals over the ball ``|z| <= radius``."""

    nodes: np.ndarray
    weights: np.ndarray
    radius: float


def ball_rule(k, radius, n_radial=48, sphere=None):
    """Gauss-Legendre in the radius times a unit-sphere rule."""
    sphere = sphere_rule(k) if sphere is None else sphere
    if sphere.radius != 1.0:
        sphere = sphere.rescaled(1.0)
    x, wx = np.polynomial.legendre.leggauss(n_radial)
    rho = 0.5 * radius * (x + 1)
    wrho = 0.5 * radius * wx * rho ** (k - 1)
    nodes = (rho[:, None, None] * sphere.nodes[None]).reshape(-1, k)
    weights = np.outer(wrho, sphere.weights).ravel()
    return BallRule(nodes, weights, float(radius))
