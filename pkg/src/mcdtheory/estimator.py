"""Empirical Minimum Covariance Determinant estimation.

For a sample of ``n`` points and trimming fraction ``gamma`` the MCD keeps the
``h = ceil(n * gamma)`` points whose trimmed covariance (divisor ``h``) has the
smallest determinant. ``mcd_exact`` enumerates all size-h subsets;
``mcd_cstep`` runs concentration steps from random (k+1)-point starts.
"""

import csv
import math
from dataclasses import dataclass
from math import comb

import numpy as np

from . import _kernels
from .core import PD_RTOL, pds_sqrt, sym_matrix
from .errors import (
    BadFraction,
    DegenerateMatrix,
    DegenerateSample,
    DegenerateSubset,
    ShapeError,
    TooLarge,
)

MAX_ENUMERATION = 10**6


def subset_size(n, gamma):
    """``ceil(n * gamma)``, robust to floating point noise in the product."""
    if not 0 < gamma <= 1:
        raise BadFraction(f"gamma must lie in (0, 1], got {gamma}")
    return max(1, math.ceil(round(n * gamma, 9)))


def as_samples(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeError(f"samples must be an (n, k) array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("samples contain non-finite values")
    return X


def load_csv(path, header=False):
    """Read observations (one per row, comma separated) from ``path``.

    Raises ``ValueError`` naming the offending line on malformed input.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        width = None
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                raise ValueError(f"line {lineno}: cannot parse {row!r} as numbers") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ValueError(f"line {lineno}: expected {width} columns, got {len(values)}")
            if not all(math.isfinite(v) for v in values):
                raise ValueError(f"line {lineno}: non-finite value")
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no observations")
    return np.array(rows, dtype=float)


def trimmed_moments(X, subset, require_pd=False):
    """Mean and covariance (divisor ``len(subset)``) of the selected rows.

    With ``require_pd`` a rank-deficient covariance raises DegenerateSubset.
    """
    X = as_samples(X)
    idx = np.asarray(subset, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("subset must be non-empty")
    P = X[idx]
    T = P.mean(axis=0)
    D = P - T
    C = sym_matrix(D.T @ D / len(idx))
    if require_pd:
        w = np.linalg.eigvalsh(C)
        if w[-1] <= 0 or w[0] <= PD_RTOL * w[-1]:
            raise DegenerateSubset(
                f"covariance of the {len(idx)} selected points is singular (eigenvalues {w})")
    return T, C


def mahalanobis(X, T, C):
    """Mahalanobis distances ``sqrt((x-T)' C^-1 (x-T))`` of all rows of ``X``."""
    X = as_samples(X)
    w = np.linalg.eigvalsh(sym_matrix(C))
    if w[-1] <= 0 or w[0] <= PD_RTOL * w[-1]:
        raise DegenerateMatrix("scatter matrix is singular")
    d2 = _kernels.mahalanobis_sq(X, np.asarray(T, float), np.linalg.inv(C))
    return np.sqrt(np.maximum(d2, 0.0))


def coverage_radius(T, C, X, gamma):
    """Smallest radius whose ellipsoid E(T, C, r) holds ceil(n*gamma) points."""
    X = as_samples(X)
    d = mahalanobis(X, T, C)
    h = subset_size(len(d), gamma)
    return float(np.partition(d, h - 1)[h - 1])


@dataclass(frozen=True)
class McdFit:
    subset: np.ndarray
    T: np.ndarray
    C: np.ndarray
    G: np.ndarray
    r_hat: float
    det_C: float
    exact: bool
    n: int
    gamma: float

    @property
    def h(self):
        return len(self.subset)

    @property
    def k(self):
        return len(self.T)

    def theta(self):
        from .core import ThetaParams
        return ThetaParams(self.T, self.G, self.r_hat)

    def to_dict(self):
        return {
            "T": self.T.tolist(),
            "C": self.C.tolist(),
            "B": self.G.tolist(),
            "r_hat": self.r_hat,
            "det_C": self.det_C,
            "subset": [int(i) for i in self.subset],
            "h": self.h,
            "n": self.n,
            "gamma": self.gamma,
            "method": "exact" if self.exact else "cstep",
        }


def _make_fit(X, subset, gamma, exact):
    subset = np.sort(np.asarray(subset, dtype=np.int64))
    T, C = trimmed_moments(X, subset, require_pd=True)
    G = pds_sqrt(C)
    r_hat = coverage_radius(T, C, X, gamma)
    return McdFit(subset, T, C, G, r_hat, float(np.linalg.det(C)), exact, len(X), float(gamma))


def _check_sizes(X, gamma):
    n, k = X.shape
    h = subset_size(n, gamma)
    if h < k + 1:
        raise ValueError(f"need h = ceil(n*gamma) >= k+1 = {k + 1}, got h = {h}")
    return n, k, h


def mcd_exact(X, gamma, accel=None):
    """Global MCD by enumerating every subset of size ``ceil(n*gamma)``."""
    X = as_samples(X)
    n, k, h = _check_sizes(X, gamma)
    total = comb(n, h)
    if total > MAX_ENUMERATION:
        raise TooLarge(f"C({n}, {h}) = {total} subsets exceeds the {MAX_ENUMERATION} limit")
    subset, det, n_degenerate = _kernels.exact_search(X, h, accel=accel)
    if not np.isfinite(det):
        raise DegenerateSample(f"all {total} subsets of size {h} have a singular covariance")
    return _make_fit(X, subset, gamma, exact=True)


def restart_rng(seed, restart, attempt=0):
    """Independent generator for one restart, keyed by ``(seed, restart, attempt)``."""
    return np.random.default_rng([int(seed), int(restart), int(attempt)])


def mcd_cstep(X, gamma, restarts=50, seed=0, max_iter=100, rtol=1e-12,
              max_attempts=10, accel=None, return_chains=False):
    """Approximate MCD by concentration steps from random (k+1)-point starts.

    A start whose chain hits a singular covariance is redrawn (up to
    ``max_attempts`` times). The best determinant over restarts wins; ties keep
    the lexicographically smallest subset. With ``return_chains`` the per-chain
    determinant sequences are returned as well.
    """
    X = as_samples(X)
    n, k, h = _check_sizes(X, gamma)
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best, best_det = None, np.inf
    chains = []
    for rep in range(restarts):
        for attempt in range(max_attempts):
            rng = restart_rng(seed, rep, attempt)
            start = rng.choice(n, size=k + 1, replace=False)
            subset, dets, status = _kernels.cstep_chain(X, start, h, max_iter, rtol, accel=accel)
            if status != _kernels.DEGENERATE:
                break
        else:
            continue
        chains.append(dets)
        det = dets[-1]
        if best is None or det < best_det * (1 - _kernels.TIE_RTOL) or (
            det <= best_det * (1 + _kernels.TIE_RTOL) and tuple(subset) < tuple(best)
        ):
            best, best_det = subset, det
    if best is None:
        raise DegenerateSample(f"all {restarts} restarts ended in a singular covariance")
    fit = _make_fit(X, best, gamma, exact=False)
    return (fit, chains) if return_chains else fit


def separation_check(fit, X, rtol=1e-9):
    """True iff the fitted subset is exactly the h points closest to ``fit.T``.

    Points at distance equal to ``r_hat`` (within ``rtol``) may fall on
    either side.
    """
    X = as_samples(X)
    d = mahalanobis(X, fit.T, fit.C)
    tol = rtol * max(fit.r_hat, 1.0)
    inside = np.zeros(len(d), dtype=bool)
    inside[fit.subset] = True
    if np.any(d[inside] > fit.r_hat + tol):
        return False
    if np.any(d[~inside] < d[inside].max() - tol):
        return False
    return True
