"""Monte-Carlo checks of the asymptotic theory at spherical models.

Every replication draws its sample from a generator keyed by
``(seed, replication)``, so reports are reproducible and independent of the
order (or process) in which replications run.
"""

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .elliptical import elliptical_constants, integrate_radial
from .errors import DegenerateSample, SingularDerivative, UnknownModel
from .estimator import mcd_cstep, mcd_exact
from .functional import plug_in_lambda_prime, sandwich_covariance
from .models import DensityModel, elliptical_model, get_model, get_radial

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    model: str = "gaussian"
    k: int = 2
    n: int = 2000
    reps: int = 1000
    gamma: float = 0.75
    seed: int = 0
    estimator: str = "cstep"
    restarts: int = 10
    nu: Optional[float] = None
    ladder: tuple = (200, 800, 3200)
    density: str = "kde"
    bandwidth: object = "auto"
    workers: int = 1

    def validate(self):
        if self.n < 4 * self.k:
            raise ValueError(f"n = {self.n} is below 4k = {4 * self.k}")
        if self.reps < 2:
            raise ValueError("need at least 2 replications")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.estimator not in ("cstep", "exact"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.density not in ("kde", "oracle"):
            raise ValueError(f"density must be 'kde' or 'oracle', got {self.density!r}")
        if any(n < 4 * self.k for n in self.ladder):
            raise ValueError("every ladder rung needs n >= 4k")
        return self

    def radial(self):
        return get_radial(self.model, self.k, nu=self.nu)


@dataclass
class SimReport:
    kind: str
    config: dict
    theory: dict
    statistics: dict
    checks: dict
    failures: int
    estimates: list = field(default_factory=list, repr=False)

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks.values())

    def to_dict(self, include_estimates=False):
        out = {
            "kind": self.kind,
            "config": self.config,
            "theory": self.theory,
            "statistics": self.statistics,
            "checks": self.checks,
            "failures": self.failures,
            "passed": self.passed,
        }
        if include_estimates:
            out["estimates"] = self.estimates
        return out


def _check(value, lo, hi):
    return {"value": float(value), "lo": lo, "hi": hi, "passed": bool(lo <= value <= hi)}


def rep_seed(seed, rep):
    """Integer seed for replication ``rep`` (used by the C-step restarts)."""
    return int(np.random.SeedSequence([int(seed), int(rep)]).generate_state(1)[0])


def rep_rng(seed, rep):
    return np.random.default_rng([int(seed), int(rep), 1])


def sample_elliptical(model, mu, sigma, n, seed, k=None, nu=None):
    """``n`` draws of ``mu + Sigma^(1/2) Z`` with Z from a registry model.

    ``seed`` is an int, a sequence of ints, or a numpy Generator.
    """
    if isinstance(model, str):
        k = len(mu) if k is None else k
        try:
            model = get_model(model, k, nu=nu, mu=mu, sigma=sigma)
        except ValueError as exc:
            raise UnknownModel(str(exc)) from exc
    elif not isinstance(model, DensityModel):
        model = elliptical_model(model, mu, sigma)
    if model.sampler is None:
        raise UnknownModel(f"model {model.name!r} has no sampler")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return model.sample(rng, n)


def _fit(X, config, seed):
    if config.estimator == "exact":
        return mcd_exact(X, config.gamma)
    return mcd_cstep(X, config.gamma, restarts=config.restarts, seed=seed)


def _estimate(args):
    config, n, rep = args
    radial = config.radial()
    X = radial.sample(rep_rng(config.seed, rep), n)
    try:
        fit = _fit(X, config, rep_seed(config.seed, rep))
    except DegenerateSample:
        return rep, None, X
    return rep, fit, X


def _run(config, n, fn):
    """Apply ``fn(rep, fit, X)`` to each replication; results ordered by rep."""
    jobs = [(config, n, rep) for rep in range(config.reps)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            fitted = list(pool.map(_estimate, jobs, chunksize=8))
    else:
        fitted = map(_estimate, jobs)
    return [fn(rep, fit, X) for rep, fit, X in fitted]


def _theta_vector(fit, k):
    iu = np.triu_indices(k)
    return np.concatenate([fit.T, fit.C[iu], [fit.r_hat]])


def _labels(k):
    iu = np.triu_indices(k)
    return ([f"mu_{i + 1}" for i in range(k)]
            + [f"sigma_{i + 1}{j + 1}" for i, j in zip(*iu)] + ["rho"])


def _theory_dict(c):
    return {key: val for key, val in c.to_json_dict().items()}


def diag_rho_correlation(model, c):
    """Limiting correlation of a diagonal scatter entry with the radius.

    Unlike the pairs covered by asymptotic independence this one is not zero;
    the CLT report lists it next to its empirical value.
    """
    k = model.k

    def inner(s):
        sigma_ii = c.kappa1 + c.kappa2 * s * s + c.kappa3 * s * s / k + c.kappa4
        return sigma_ii * (c.lambda1 * s * s + c.lambda2 + c.lambda3)

    cov = (integrate_radial(model, inner, 0.0, c.r)
           + c.kappa4 * c.lambda3 * integrate_radial(model, np.ones_like, c.r, np.inf))
    return cov / np.sqrt((2 * c.sigma1 + c.sigma2) * c.sigma_rho_sq)


def clt_check(config):
    """Empirical covariance of sqrt(n)(theta_hat - theta0) against the limits."""
    config.validate()
    k, n = config.k, config.n
    radial = config.radial()
    c = elliptical_constants(radial, config.gamma)
    iu = np.triu_indices(k)
    center = np.concatenate([np.zeros(k), (c.alpha**2 * np.eye(k))[iu], [c.rho0]])

    rows = _run(config, n, lambda rep, fit, X: None if fit is None else _theta_vector(fit, k))
    failures = sum(r is None for r in rows)
    est = np.array([r for r in rows if r is not None])
    V = np.sqrt(n) * (est - center)
    cov = np.cov(V, rowvar=False)
    corr = np.corrcoef(V, rowvar=False)
    labels = _labels(k)
    pos = {lab: i for i, lab in enumerate(labels)}

    stats = {
        "labels": labels,
        "mean": V.mean(axis=0).tolist(),
        "covariance": cov.tolist(),
        "var_mu_over_tau": [cov[i, i] / c.tau for i in range(k)],
        "var_rho_over_sigma_rho_sq": cov[-1, -1] / c.sigma_rho_sq,
    }
    checks = {"var_mu1_over_tau": _check(cov[0, 0] / c.tau, 0.85, 1.15)}
    diag = [pos[f"sigma_{i + 1}{i + 1}"] for i in range(k)]
    offd = [pos[f"sigma_{i + 1}{j + 1}"] for i in range(k) for j in range(i + 1, k)]
    checks["var_sigma11_over_2sigma1_plus_sigma2"] = _check(
        cov[diag[0], diag[0]] / (2 * c.sigma1 + c.sigma2), 0.8, 1.2)
    if offd:
        checks["var_sigma12_over_sigma1"] = _check(cov[offd[0], offd[0]] / c.sigma1, 0.8, 1.2)
    checks["var_rho_over_sigma_rho_sq"] = _check(cov[-1, -1] / c.sigma_rho_sq, 0.8, 1.2)

    # pairs that are asymptotically uncorrelated
    pairs = []
    mu_idx = list(range(k))
    for i in mu_idx:
        pairs += [(i, j) for j in diag + offd + [pos["rho"]]]
    pairs += [(i, j) for i in diag for j in offd]
    pairs += [(i, pos["rho"]) for i in offd]
    pairs += [(i, j) for a, i in enumerate(offd) for j in offd[a + 1:]]
    cross = {f"{labels[i]}~{labels[j]}": float(corr[i, j]) for i, j in pairs}
    stats["cross_correlations"] = cross
    stats["sigma_11~rho"] = {"empirical": float(corr[diag[0], pos["rho"]]),
                             "theory": float(diag_rho_correlation(radial, c))}
    worst = max(abs(v) for v in cross.values())
    checks["max_abs_cross_correlation"] = _check(worst, 0.0, 0.1)
    return SimReport("clt", _config_dict(config), _theory_dict(c), stats, checks, failures,
                     estimates=[None if r is None else r.tolist() for r in rows])


def _expansion_sum(X, c):
    """The iid sums of the asymptotic expansion, scaled by 1/sqrt(n)."""
    n, k = X.shape
    sq = np.sum(X * X, axis=1)
    ind = (sq <= c.r**2).astype(float)
    iu = np.triu_indices(k)
    s_mu = c.pi * (ind @ X)
    outer = X[:, iu[0]] * X[:, iu[1]]
    eye = (iu[0] == iu[1]).astype(float)
    s_sigma = (ind * (c.kappa1 + c.kappa2 * sq)).sum() * eye + c.kappa3 * (ind @ outer) \
        + n * c.kappa4 * eye
    s_rho = np.sum(c.lambda1 * ind * sq + c.lambda2 * ind + c.lambda3)
    return np.concatenate([s_mu, s_sigma, [s_rho]]) / np.sqrt(n)


def expansion_remainder(config, ladder=None):
    """RMS and median size of sqrt(n)(theta_hat - theta0) minus its iid expansion."""
    config.validate()
    ladder = tuple(config.ladder if ladder is None else ladder)
    k = config.k
    c = elliptical_constants(config.radial(), config.gamma)
    iu = np.triu_indices(k)
    center = np.concatenate([np.zeros(k), (c.alpha**2 * np.eye(k))[iu], [c.rho0]])
    rungs = []
    failures = 0
    for n in ladder:
        def fn(rep, fit, X, n=n):
            if fit is None:
                return None
            dev = np.sqrt(n) * (_theta_vector(fit, k) - center)
            return dev - _expansion_sum(X, c), _theta_vector(fit, k) - center

        out = _run(replace(config, n=n), n, fn)
        failures += sum(o is None for o in out)
        R = np.array([o[0] for o in out if o is not None])
        E = np.array([o[1] for o in out if o is not None])
        norms = np.linalg.norm(R, axis=1)
        rungs.append({
            "n": n,
            "rms": float(np.sqrt(np.mean(norms**2))),
            "median_norm": float(np.median(norms)),
            "median_error_norm": float(np.median(np.linalg.norm(E, axis=1))),
            "component_rms": np.sqrt(np.mean(R**2, axis=0)).tolist(),
        })
    rms = [r["rms"] for r in rungs]
    inversions = [i for i in range(1, len(rms)) if rms[i] > rms[i - 1]]
    monotone = len(inversions) == 0 or (
        len(inversions) == 1 and rms[inversions[0]] <= 1.1 * rms[inversions[0] - 1])
    drop = 1 - rungs[-1]["median_norm"] / rungs[0]["median_norm"]
    errs = [r["median_error_norm"] for r in rungs]
    checks = {
        "rms_decreasing": {"value": float(len(inversions)), "lo": 0, "hi": 1,
                           "passed": bool(monotone)},
        "median_drop": _check(drop, 0.3, 1.0),
        "consistency": {"value": float(errs[-1] / errs[0]), "lo": 0.0, "hi": 1.0,
                        "passed": bool(all(b < a for a, b in zip(errs, errs[1:])))},
    }
    stats = {"rungs": rungs, "labels": _labels(k)}
    return SimReport("expansion", _config_dict(replace(config, ladder=ladder)), _theory_dict(c),
                     stats, checks, failures)


def plugin_check(config):
    """Median sandwich estimate of the location variance against ``tau``."""
    config.validate()
    k, n = config.k, config.n
    c = elliptical_constants(config.radial(), config.gamma)
    oracle = config.density == "oracle"
    true_model = elliptical_model(config.radial())

    def fn(rep, fit, X):
        if fit is None:
            return None
        try:
            lp = plug_in_lambda_prime(X, fit, bandwidth=config.bandwidth,
                                      density=true_model if oracle else None)
            cov = sandwich_covariance(X, fit, lp)
        except SingularDerivative:
            return "singular"
        return float(np.mean(np.diag(cov)[:k]))

    out = _run(config, n, fn)
    failures = sum(o is None or o == "singular" for o in out)
    vals = np.array([o for o in out if isinstance(o, float)])
    ratio = float(np.median(vals) / c.tau)
    band = (0.85, 1.15) if oracle else (0.7, 1.3)
    stats = {
        "mu_block_variance": vals.tolist(),
        "median_mu_block_variance": float(np.median(vals)),
        "singular": sum(o == "singular" for o in out),
    }
    checks = {"median_over_tau": _check(ratio, *band)}
    return SimReport("plugin", _config_dict(config), _theory_dict(c), stats, checks, failures)


def _config_dict(config):
    d = asdict(config)
    d["ladder"] = list(config.ladder)
    d.pop("workers")
    return d


def write_reps_csv(path, report, k):
    """Per-replication estimates of a CLT report as CSV."""
    iu = np.triu_indices(k)
    header = (["rep"] + [f"muhat_{i + 1}" for i in range(k)]
              + [f"sigmahat_{i + 1}{j + 1}" for i, j in zip(*iu)] + ["rhohat"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for rep, row in enumerate(report.estimates):
            if row is not None:
                w.writerow([rep] + [f"{v:.17g}" for v in row])
