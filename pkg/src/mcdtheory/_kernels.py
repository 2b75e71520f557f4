"""Hot loops of the empirical MCD, each with a numba and a numpy variant.

The numba variants are plain loops compiled with ``@njit``; the numpy variants
are vectorized and serve as the fallback when numba is disabled (see
``_numba``). Both must return identical subsets on non-tied inputs.

Status codes returned by the C-step chain:
    0  converged (relative det change below tolerance or subset unchanged)
    1  iteration cap reached
    2  degenerate covariance encountered
"""

import itertools
from math import comb

import numpy as np

from ._numba import njit, use_numba
from .core import PD_RTOL

CONVERGED, MAX_ITER, DEGENERATE = 0, 1, 2
TIE_RTOL = 1e-12


# -- Mahalanobis distances ---------------------------------------------------

@njit(cache=True)
def _mahalanobis_sq_nb(X, T, Cinv):
    n, k = X.shape
    out = np.empty(n)
    d = np.empty(k)
    for i in range(n):
        for a in range(k):
            d[a] = X[i, a] - T[a]
        acc = 0.0
        for a in range(k):
            row = 0.0
            for b in range(k):
                row += Cinv[a, b] * d[b]
            acc += d[a] * row
        out[i] = acc
    return out


def _mahalanobis_sq_np(X, T, Cinv):
    D = X - T
    return np.einsum("ij,jk,ik->i", D, Cinv, D)


def mahalanobis_sq(X, T, Cinv, accel=None):
    accel = use_numba() if accel is None else accel
    if accel:
        return _mahalanobis_sq_nb(np.ascontiguousarray(X, dtype=float), np.asarray(T, float),
                                  np.ascontiguousarray(Cinv, dtype=float))
    return _mahalanobis_sq_np(X, T, Cinv)


# -- subset moments -----------------------------------------------------------

@njit(cache=True)
def _subset_cov_nb(X, idx, T, C):
    h = idx.shape[0]
    k = X.shape[1]
    for a in range(k):
        acc = 0.0
        for i in range(h):
            acc += X[idx[i], a]
        T[a] = acc / h
    for a in range(k):
        for b in range(a, k):
            acc = 0.0
            for i in range(h):
                acc += (X[idx[i], a] - T[a]) * (X[idx[i], b] - T[b])
            C[a, b] = acc / h
            C[b, a] = C[a, b]


@njit(cache=True)
def _is_degenerate_nb(C):
    w = np.linalg.eigvalsh(C)
    return w[-1] <= 0.0 or w[0] <= PD_RTOL * w[-1]


# -- exhaustive search --------------------------------------------------------

@njit(cache=True)
def _exact_search_nb(X, h):
    n, k = X.shape
    idx = np.arange(h)
    best = idx.copy()
    best_det = np.inf
    n_degenerate = 0
    T = np.empty(k)
    C = np.empty((k, k))
    while True:
        _subset_cov_nb(X, idx, T, C)
        if _is_degenerate_nb(C):
            n_degenerate += 1
        else:
            det = np.linalg.det(C)
            if det < best_det * (1.0 - TIE_RTOL):
                best_det = det
                best[:] = idx
        # next combination in lexicographic order
        i = h - 1
        while i >= 0 and idx[i] == n - h + i:
            i -= 1
        if i < 0:
            break
        idx[i] += 1
        for j in range(i + 1, h):
            idx[j] = idx[j - 1] + 1
    return best, best_det, n_degenerate


def _exact_search_np(X, h, chunk=20000):
    n, k = X.shape
    best, best_det, n_degenerate = None, np.inf, 0
    combos = itertools.combinations(range(n), h)
    total = comb(n, h)
    done = 0
    while done < total:
        m = min(chunk, total - done)
        idx = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, m)),
                          dtype=np.int64, count=m * h).reshape(m, h)
        done += m
        P = X[idx]
        D = P - P.mean(axis=1, keepdims=True)
        C = np.einsum("mia,mib->mab", D, D) / h
        C = 0.5 * (C + np.swapaxes(C, 1, 2))
        w = np.linalg.eigvalsh(C)
        degenerate = (w[:, -1] <= 0) | (w[:, 0] <= PD_RTOL * w[:, -1])
        n_degenerate += int(degenerate.sum())
        dets = np.where(degenerate, np.inf, np.linalg.det(C))
        # first index at which a new strict minimum is reached, scanning in order
        for j in np.flatnonzero(dets < best_det * (1.0 - TIE_RTOL)):
            if dets[j] < best_det * (1.0 - TIE_RTOL):
                best_det = dets[j]
                best = idx[j].copy()
    if best is None:
        best = np.arange(h)
    return best, best_det, n_degenerate


def exact_search(X, h, accel=None):
    """Return ``(subset, det, n_degenerate)`` minimizing det over all size-h subsets.

    Ties within a relative 1e-12 keep the lexicographically first subset.
    ``det`` is ``inf`` when every subset is degenerate.
    """
    accel = use_numba() if accel is None else accel
    X = np.ascontiguousarray(X, dtype=float)
    if accel:
        best, det, nd = _exact_search_nb(X, h)
    else:
        best, det, nd = _exact_search_np(X, h)
    return np.asarray(best, dtype=np.int64), float(det), int(nd)


# -- concentration steps ------------------------------------------------------

@njit(cache=True)
def _cstep_chain_nb(X, start, h, max_iter, rtol):
    n, k = X.shape
    dets = np.full(max_iter + 1, np.nan)
    idx = np.sort(start)
    T = np.empty(k)
    C = np.empty((k, k))
    _subset_cov_nb(X, idx, T, C)
    if _is_degenerate_nb(C):
        return idx, dets[:0], DEGENERATE
    count = 0
    if idx.shape[0] == h:
        dets[0] = np.linalg.det(C)
        count = 1
    status = MAX_ITER
    for it in range(max_iter):
        d2 = _mahalanobis_sq_nb(X, T, np.linalg.inv(C))
        new = np.sort(np.argsort(d2, kind="mergesort")[:h])
        _subset_cov_nb(X, new, T, C)
        if _is_degenerate_nb(C):
            return new, dets[:count], DEGENERATE
        det = np.linalg.det(C)
        dets[count] = det
        count += 1
        same = new.shape[0] == idx.shape[0]
        if same:
            for j in range(new.shape[0]):
                if new[j] != idx[j]:
                    same = False
                    break
        idx = new
        if same or (count >= 2 and abs(dets[count - 2] - det) <= rtol * abs(dets[count - 2])):
            status = CONVERGED
            break
    return idx, dets[:count], status


def _subset_moments_np(X, idx):
    P = X[idx]
    T = P.mean(axis=0)
    D = P - T
    C = D.T @ D / len(idx)
    return T, 0.5 * (C + C.T)


def _degenerate_np(C):
    w = np.linalg.eigvalsh(C)
    return w[-1] <= 0 or w[0] <= PD_RTOL * w[-1]


def _cstep_chain_np(X, start, h, max_iter, rtol):
    idx = np.sort(start)
    T, C = _subset_moments_np(X, idx)
    if _degenerate_np(C):
        return idx, np.empty(0), DEGENERATE
    dets = [np.linalg.det(C)] if len(idx) == h else []
    status = MAX_ITER
    for _ in range(max_iter):
        d2 = _mahalanobis_sq_np(X, T, np.linalg.inv(C))
        new = np.sort(np.argsort(d2, kind="stable")[:h])
        T, C = _subset_moments_np(X, new)
        if _degenerate_np(C):
            return new, np.asarray(dets), DEGENERATE
        det = np.linalg.det(C)
        dets.append(det)
        same = len(new) == len(idx) and np.array_equal(new, idx)
        idx = new
        if same or (len(dets) >= 2 and abs(dets[-2] - det) <= rtol * abs(dets[-2])):
            status = CONVERGED
            break
    return idx, np.asarray(dets), status


def cstep_chain(X, start, h, max_iter=100, rtol=1e-12, accel=None):
    """Run concentration steps from the subset ``start``.

    Returns ``(subset, dets, status)`` where ``dets`` lists det(C) after every
    step (and of ``start`` itself when it already has ``h`` points).
    """
    accel = use_numba() if accel is None else accel
    X = np.ascontiguousarray(X, dtype=float)
    start = np.asarray(start, dtype=np.int64)
    if accel:
        idx, dets, status = _cstep_chain_nb(X, start, h, max_iter, rtol)
    else:
        idx, dets, status = _cstep_chain_np(X, start, h, max_iter, rtol)
    return np.asarray(idx, dtype=np.int64), np.asarray(dets, dtype=float), int(status)
