import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcdtheory import _kernels
from mcdtheory.errors import BadFraction, DegenerateSample, TooLarge
from mcdtheory.estimator import (coverage_radius, load_csv, mahalanobis, mcd_cstep, mcd_exact,
                                 separation_check, subset_size, trimmed_moments)


def brute_force(X, h):
    best, best_det = None, np.inf
    for s in itertools.combinations(range(len(X)), h):
        C = np.cov(X[list(s)], rowvar=False, bias=True)
        d = np.linalg.det(np.atleast_2d(C))
        if d < best_det * (1 - 1e-12):
            best, best_det = s, d
    return np.array(best), best_det


def test_subset_size():
    assert subset_size(4, 0.75) == 3
    assert subset_size(20, 0.75) == 15
    assert subset_size(10, 0.3) == 3  # 10*0.3 = 3.0000000000000004
    with pytest.raises(BadFraction):
        subset_size(10, 0.0)


def test_four_point_example():
    fit = mcd_exact(np.array([0.0, 1.0, 2.0, 10.0]), 0.75)
    assert fit.subset.tolist() == [0, 1, 2]
    assert fit.C[0, 0] == pytest.approx(2 / 3, rel=1e-15)
    assert fit.T[0] == pytest.approx(1.0)
    assert fit.r_hat == pytest.approx(np.sqrt(1.5))


def test_exact_matches_brute_force(rng):
    X = rng.standard_normal((12, 2))
    fit = mcd_exact(X, 0.6)
    subset, det = brute_force(X, 8)
    assert fit.subset.tolist() == subset.tolist()
    assert fit.det_C == pytest.approx(det, rel=1e-12)


@pytest.mark.parametrize("accel", [True, False])
def test_kernel_variants_agree(rng, accel):
    X = rng.standard_normal((14, 2))
    sub, det, _ = _kernels.exact_search(X, 10, accel=accel)
    ref, ref_det, _ = _kernels.exact_search(X, 10, accel=not accel)
    assert sub.tolist() == ref.tolist() and det == pytest.approx(ref_det, rel=1e-12)
    Y = rng.standard_normal((300, 3))
    a = _kernels.cstep_chain(Y, np.arange(4), 225, accel=accel)
    b = _kernels.cstep_chain(Y, np.arange(4), 225, accel=not accel)
    assert a[0].tolist() == b[0].tolist() and a[2] == b[2]
    assert np.allclose(a[1], b[1], rtol=1e-10, equal_nan=True)


def test_cstep_determinants_never_increase(rng):
    X = rng.standard_normal((200, 2))
    fit, chains = mcd_cstep(X, 0.75, restarts=20, seed=3, return_chains=True)
    for dets in chains:
        d = dets[np.isfinite(dets)]
        assert np.all(np.diff(d) <= 1e-12 * d[:-1])
    assert separation_check(fit, X)


def test_cstep_is_deterministic(rng):
    X = rng.standard_normal((150, 3))
    a = mcd_cstep(X, 0.5, restarts=10, seed=5)
    b = mcd_cstep(X, 0.5, restarts=10, seed=5)
    assert a.subset.tolist() == b.subset.tolist() and a.det_C == b.det_C


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_affine_equivariance(seed):
    r = np.random.default_rng(seed)
    X = r.standard_normal((10, 2))
    A = r.standard_normal((2, 2)) + 3 * np.eye(2)
    b = r.standard_normal(2)
    f1 = mcd_exact(X, 0.7)
    f2 = mcd_exact(X @ A.T + b, 0.7)
    assert f1.subset.tolist() == f2.subset.tolist()
    assert np.allclose(f2.T, A @ f1.T + b)
    assert np.allclose(f2.C, A @ f1.C @ A.T)
    assert f2.r_hat == pytest.approx(f1.r_hat, rel=1e-9)


def test_moments_and_radius(rng):
    X = rng.standard_normal((40, 2))
    T, C = trimmed_moments(X, np.arange(30))
    assert np.allclose(C, np.cov(X[:30], rowvar=False, bias=True))
    d = mahalanobis(X, T, C)
    assert coverage_radius(T, C, X, 0.75) == pytest.approx(np.sort(d)[29])


def test_errors(tmp_path):
    with pytest.raises(TooLarge):
        mcd_exact(np.random.default_rng(0).standard_normal((60, 2)), 0.5)
    line = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
    with pytest.raises(DegenerateSample):
        mcd_exact(line, 0.5)
    with pytest.raises(DegenerateSample):
        mcd_cstep(line, 0.5, restarts=3)
    p = tmp_path / "bad.csv"
    p.write_text("x,y\n1,2\n3\n")
    with pytest.raises(ValueError, match="line 3"):
        load_csv(p, header=True)
    p.write_text("x,y\n1,2\n3,4\n")
    assert load_csv(p, header=True).shape == (2, 2)
