"""Linear-algebra primitives and the parameter/tangent types.

A parameter ``theta = (m, G, r)`` holds a location, the symmetric square
root of the scatter matrix, and a coverage radius. Derivatives act on
tangent vectors ``(h, A, s)`` in R^k x S(k) x R, which are flattened to
``tangent_dim(k) = k + k(k+1)/2 + 1`` coordinates as

    (h_1..h_k, A_11, A_12, .., A_1k, A_22, .., A_kk, s)

i.e. the upper triangle of ``A`` row by row, without sqrt(2) weights.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMatrix, ShapeError

PD_RTOL = 1e-10


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def sym_matrix(M):
    """Return ``(M + M') / 2`` as a read-only float array."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {M.shape}")
    return _readonly(0.5 * (M + M.T))


def pd_floor(eigvals):
    """Positive-definiteness floor: ``PD_RTOL`` times the largest eigenvalue."""
    return PD_RTOL * max(float(np.max(eigvals)), 0.0)


def pds_matrix(M):
    """Symmetrize ``M`` and check that it is positive definite."""
    S = sym_matrix(M)
    w = np.linalg.eigvalsh(S)
    if not np.all(np.isfinite(w)) or w[0] <= pd_floor(w) or w[-1] <= 0:
        raise DegenerateMatrix(f"matrix is not positive definite (eigenvalues {w})")
    return S


def pds_sqrt(C):
    """Unique symmetric positive definite square root of ``C``."""
    S = sym_matrix(C)
    w, V = np.linalg.eigh(S)
    if not np.all(np.isfinite(w)) or w[-1] <= 0 or w[0] <= pd_floor(w):
        raise DegenerateMatrix(f"matrix is not positive definite (eigenvalues {w})")
    return sym_matrix((V * np.sqrt(w)) @ V.T)


def pds_inv_sqrt(C):
    S = sym_matrix(C)
    w, V = np.linalg.eigh(S)
    if not np.all(np.isfinite(w)) or w[-1] <= 0 or w[0] <= pd_floor(w):
        raise DegenerateMatrix(f"matrix is not positive definite (eigenvalues {w})")
    return sym_matrix((V / np.sqrt(w)) @ V.T)


def vec(M):
    """Stack the columns of a square matrix: entry ``(j*k + i)`` is ``M[i, j]``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {M.shape}")
    return M.reshape(-1, order="F").copy()


def unvec(v, k):
    return np.asarray(v, dtype=float).reshape((k, k), order="F").copy()


def commutation_matrix(k):
    """The k^2 x k^2 permutation ``K`` with ``K @ vec(A) == vec(A.T)``.

    Built block-wise: block ``(i, j)`` is the unit matrix with a one at
    position ``(j, i)``.
    """
    if k < 1:
        raise ShapeError("k must be >= 1")
    K = np.zeros((k * k, k * k))
    for i in range(k):
        for j in range(k):
            K[i * k + j, j * k + i] = 1.0
    return K


def kron(M, N):
    """Kronecker product of two k x k matrices (block ``(i, j)`` is ``M[i, j] * N``)."""
    M = np.asarray(M, dtype=float)
    N = np.asarray(N, dtype=float)
    if M.ndim != 2 or N.ndim != 2 or M.shape[0] != M.shape[1] or N.shape != M.shape:
        raise ShapeError(f"kron expects two k x k matrices, got {M.shape} and {N.shape}")
    return np.kron(M, N)


@dataclass(frozen=True)
class ThetaParams:
    """Location ``m``, symmetric PD shape ``G`` (with ``G @ G`` the scatter) and radius ``r``."""

    m: np.ndarray
    G: np.ndarray
    r: float

    def __post_init__(self):
        m = _readonly(np.atleast_1d(self.m))
        if m.ndim != 1:
            raise ShapeError("m must be a vector")
        G = pds_matrix(self.G)
        if G.shape[0] != m.shape[0]:
            raise ShapeError(f"G is {G.shape}, m has length {m.shape[0]}")
        r = float(self.r)
        if not (r > 0 and np.isfinite(r)):
            raise ValueError(f"radius must be positive and finite, got {r}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "r", r)

    @property
    def k(self):
        return self.m.shape[0]

    @property
    def scatter(self):
        return self.G @ self.G

    def shifted(self, t, step=1.0):
        """Return ``theta + step * t`` for a tangent vector ``t``."""
        return ThetaParams(self.m + step * t.h, self.G + step * t.A, self.r + step * t.s)


@dataclass(frozen=True)
class TangentVector:
    h: np.ndarray
    A: np.ndarray
    s: float

    def __post_init__(self):
        h = _readonly(np.atleast_1d(self.h))
        A = sym_matrix(self.A)
        if h.ndim != 1 or A.shape[0] != h.shape[0]:
            raise ShapeError(f"inconsistent tangent shapes h={h.shape}, A={A.shape}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "s", float(self.s))

    @property
    def k(self):
        return self.h.shape[0]

    @classmethod
    def zero(cls, k):
        return cls(np.zeros(k), np.zeros((k, k)), 0.0)


def tangent_dim(k):
    return k + k * (k + 1) // 2 + 1


def dim_from_tangent(d):
    """Invert ``tangent_dim``; raises ShapeError if ``d`` is not a valid size."""
    for k in range(1, d + 1):
        if tangent_dim(k) == d:
            return k
        if tangent_dim(k) > d:
            break
    raise ShapeError(f"{d} is not a tangent-space dimension")


def tangent_to_coords(t):
    k = t.k
    iu = np.triu_indices(k)
    return np.concatenate([t.h, t.A[iu], [t.s]])


def coords_to_tangent(c, k=None):
    c = np.asarray(c, dtype=float)
    if c.ndim != 1:
        raise ShapeError("tangent coordinates must be a flat vector")
    if k is None:
        k = dim_from_tangent(c.shape[0])
    if c.shape[0] != tangent_dim(k):
        raise ShapeError(f"expected {tangent_dim(k)} coordinates for k={k}, got {c.shape[0]}")
    h = c[:k]
    A = np.zeros((k, k))
    iu = np.triu_indices(k)
    A[iu] = c[k:-1]
    A = A + np.triu(A, 1).T
    return TangentVector(h, A, c[-1])


def coord_labels(k, names=("h", "A", "s")):
    """Human-readable names of the tangent coordinates, e.g. ``h1``, ``A12``, ``s``."""
    hn, An, sn = names
    labels = [f"{hn}{i + 1}" for i in range(k)]
    labels += [f"{An}{i + 1}{j + 1}" for i, j in zip(*np.triu_indices(k))]
    labels.append(sn)
    return labels


def block_slices(k):
    """Slices of the h-, A- and s-blocks inside tangent coordinates."""
    q = k * (k + 1) // 2
    return slice(0, k), slice(k, k + q), slice(k + q, k + q + 1)
