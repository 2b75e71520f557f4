"""Density models: spherical generators, elliptical and product-symmetric densities.

Names accepted by :func:`get_model`::

    gaussian
    student_t(nu)            or  student_t  with nu=...
    uniform_ball(radius)     or  uniform_ball  (radius 1)
    product_symmetric(m1,...,mk)  with marginals from MARGINALS

A single marginal name in ``product_symmetric`` is repeated for every
coordinate.
"""

import re
from dataclasses import dataclass, field
from math import lgamma, pi
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from .core import pds_inv_sqrt, pds_matrix, pds_sqrt
from .errors import UnknownModel


@dataclass(frozen=True)
class RadialDensity:
    """Spherical density ``f(x) = h(|x|^2)`` on R^k with non-increasing ``h``.

    ``support`` is the radius beyond which ``h`` vanishes (``inf`` if none);
    ``sample(rng, n)`` draws ``n`` points from the spherical law.
    """

    name: str
    k: int
    h: Callable[[np.ndarray], np.ndarray]
    support: float = np.inf
    sample: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return self.h(np.sum(x * x, axis=-1))


def _unit_directions(rng, n, k):
    z = rng.standard_normal((n, k))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def gaussian_radial(k):
    c = (2 * pi) ** (-k / 2)

    def h(t):
        return c * np.exp(-0.5 * np.asarray(t, dtype=float))

    def sample(rng, n):
        return rng.standard_normal((n, k))

    return RadialDensity("gaussian", k, h, sample=sample)


def student_t_radial(k, nu):
    if not nu > 0:
        raise ValueError(f"degrees of freedom must be positive, got {nu}")
    logc = lgamma((nu + k) / 2) - lgamma(nu / 2) - (k / 2) * np.log(nu * pi)

    def h(t):
        return np.exp(logc - 0.5 * (nu + k) * np.log1p(np.asarray(t, dtype=float) / nu))

    def sample(rng, n):
        z = rng.standard_normal((n, k))
        w = rng.chisquare(nu, size=n)
        return z / np.sqrt(w / nu)[:, None]

    return RadialDensity(f"student_t({nu:g})", k, h, sample=sample, params={"nu": float(nu)})


def uniform_ball_radial(k, radius=1.0):
    vol = np.exp((k / 2) * np.log(pi) + k * np.log(radius) - gammaln(k / 2 + 1))
    R2 = radius * radius

    def h(t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= R2, 1.0 / vol, 0.0)

    def sample(rng, n):
        u = _unit_directions(rng, n, k)
        return u * (radius * rng.random(n) ** (1 / k))[:, None]

    return RadialDensity(f"uniform_ball({radius:g})", k, h, support=float(radius), sample=sample,
                         params={"radius": float(radius)})


@dataclass(frozen=True)
class DensityModel:
    """A density on R^k, optionally with a sampler.

    Elliptical models carry their spherical generator in ``radial`` together
    with ``mu`` and ``sigma``; ``point_symmetric`` records symmetry about
    ``mu``.
    """

    name: str
    k: int
    pdf: Callable[[np.ndarray], np.ndarray]
    sampler: Optional[Callable] = None
    radial: Optional[RadialDensity] = None
    mu: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None
    point_symmetric: bool = False

    def sample(self, rng, n):
        if self.sampler is None:
            raise UnknownModel(f"model {self.name!r} has no sampler")
        return self.sampler(rng, n)


def elliptical_model(radial, mu=None, sigma=None):
    k = radial.k
    mu = np.zeros(k) if mu is None else np.asarray(mu, dtype=float)
    sigma = np.eye(k) if sigma is None else pds_matrix(sigma)
    root = pds_sqrt(sigma)
    iroot = pds_inv_sqrt(sigma)
    scale = 1.0 / np.sqrt(np.linalg.det(sigma))

    def pdf(x):
        z = (np.asarray(x, dtype=float) - mu) @ iroot
        return scale * radial.h(np.sum(z * z, axis=-1))

    def sampler(rng, n):
        return mu + radial.sample(rng, n) @ root

    return DensityModel(radial.name, k, pdf, sampler if radial.sample else None, radial, mu, sigma, point_symmetric=True)


def _std_normal_pdf(x):
    return np.exp(-0.5 * x * x) / np.sqrt(2 * pi)


def _logistic_pdf(x):
    e = np.exp(-np.abs(x))
    return e / (1 + e) ** 2


MARGINALS = {
    "normal": (_std_normal_pdf, lambda rng, n: rng.standard_normal(n)),
    "logistic": (_logistic_pdf, lambda rng, n: rng.logistic(size=n)),
    "laplace": (lambda x: 0.5 * np.exp(-np.abs(x)), lambda rng, n: rng.laplace(size=n)),
    "cauchy": (lambda x: 1.0 / (pi * (1 + x * x)), lambda rng, n: rng.standard_cauchy(n)),
}


def product_symmetric_model(marginals, k=None, mu=None, scale=None):
    """Density of ``mu + scale @ Z`` where Z has independent symmetric marginals."""
    if isinstance(marginals, str):
        marginals = [marginals]
    marginals = list(marginals)
    if k is None:
        k = len(marginals)
    if len(marginals) == 1:
        marginals = marginals * k
    if len(marginals) != k:
        raise ValueError(f"{len(marginals)} marginals given for dimension {k}")
    for m in marginals:
        if m not in MARGINALS:
            raise UnknownModel(f"unknown marginal {m!r}; choose from {sorted(MARGINALS)}")
    pdfs = [MARGINALS[m][0] for m in marginals]
    samplers = [MARGINALS[m][1] for m in marginals]
    mu = np.zeros(k) if mu is None else np.asarray(mu, dtype=float)
    scale = np.eye(k) if scale is None else pds_matrix(scale)
    inv = np.linalg.inv(scale)
    jac = 1.0 / abs(np.linalg.det(scale))

    def pdf(x):
        z = (np.asarray(x, dtype=float) - mu) @ inv.T
        out = np.full(z.shape[:-1], jac)
        for i, g in enumerate(pdfs):
            out = out * g(z[..., i])
        return out

    def sampler(rng, n):
        z = np.column_stack([s(rng, n) for s in samplers])
        return mu + z @ scale.T

    name = f"product_symmetric({','.join(marginals)})"
    return DensityModel(name, k, pdf, sampler, None, mu, scale @ scale.T, point_symmetric=True)


_SPEC = re.compile(r"^\s*([a-z_]+)\s*(?:\(([^)]*)\))?\s*$")

MODEL_NAMES = ("gaussian", "student_t", "uniform_ball", "product_symmetric")


def parse_model_spec(spec):
    """Split ``'student_t(5)'`` into ``('student_t', ['5'])``."""
    m = _SPEC.match(spec)
    if not m:
        raise UnknownModel(f"cannot parse model spec {spec!r}")
    name, args = m.group(1), m.group(2)
    args = [a.strip() for a in args.split(",")] if args else []
    return name, args


def get_radial(spec, k, nu=None, radius=None):
    """Spherical generator for an elliptical registry entry."""
    name, args = parse_model_spec(spec)
    if name == "gaussian":
        return gaussian_radial(k)
    if name == "student_t":
        if args:
            nu = float(args[0])
        if nu is None:
            raise ValueError("student_t needs degrees of freedom (nu)")
        return student_t_radial(k, float(nu))
    if name == "uniform_ball":
        if args:
            radius = float(args[0])
        return uniform_ball_radial(k, 1.0 if radius is None else float(radius))
    raise UnknownModel(f"{spec!r} is not an elliptical model; choose from "
                       "gaussian, student_t, uniform_ball")


def get_model(spec, k, nu=None, radius=None, marginals=None, mu=None, sigma=None):
    """Look up a density model by name (see module docstring)."""
    name, args = parse_model_spec(spec)
    if name == "product_symmetric":
        marginals = args or marginals or ["normal"]
        return product_symmetric_model(marginals, k, mu=mu,
                                       scale=None if sigma is None else pds_sqrt(sigma))
    if name not in MODEL_NAMES:
        raise UnknownModel(f"unknown model {spec!r}; choose from {', '.join(MODEL_NAMES)}")
    return elliptical_model(get_radial(spec, k, nu=nu, radius=radius), mu, sigma)
