"""Gaussian likelihood, ML fitting, universal kriging, simulation and cross-validation."""

from __future__ import annotations

import csv
import logging
import math
import warnings
import zlib
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import linalg, optimize
from scipy.stats import norm

from .errors import (
    DimensionMismatch,
    NonConvergence,
    NonpositiveSd,
    NotPositiveDefinite,
    RankDeficientDesign,
    StreamCovError,
)
from .models import (
    CovModel,
    ParamSpec,
    Separation,
    _Model,
    covariance_matrix,
    delta_lower_bound,
    record_separation,
)
from .network import Network, PointOnNetwork, SiteGeometry, site_geometry

__all__ = [
    "Dataset",
    "FitConfig",
    "FitResult",
    "PredictionResult",
    "FoldResult",
    "CVResult",
    "substream",
    "log_likelihood",
    "profile_beta",
    "profile_log_likelihood",
    "fit_ml",
    "krige",
    "crps_gaussian",
    "cross_validate",
    "simulate",
    "simulate_dataset",
]

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named purpose derived from one master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


# -- data ---------------------------------------------------------------------


@dataclass
class Dataset:
    """Space-time records on a network.

    Record ``r`` sits at ``sites[site_index[r]]`` at time ``times[r]`` with
    response ``z[r]`` and covariate row ``X[r]`` (intercept included).
    """

    net: Network
    sites: list[PointOnNetwork]
    site_index: np.ndarray
    times: np.ndarray
    z: np.ndarray
    X: np.ndarray
    covariate_names: list[str] = field(default_factory=list)
    metric: str = "auto"
    geometry_: SiteGeometry | None = field(default=None, repr=False)

    def __post_init__(self):
        self.site_index = np.asarray(self.site_index, dtype=int)
        self.times = np.asarray(self.times, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        X = np.asarray(self.X, dtype=float)
        self.X = X.reshape(-1, 1) if X.ndim == 1 else X
        n = len(self.z)
        if not (len(self.site_index) == len(self.times) == self.X.shape[0] == n):
            raise DimensionMismatch("responses, covariates, sites and times must have one row per record")
        if n and (self.site_index.min() < 0 or self.site_index.max() >= len(self.sites)):
            raise DimensionMismatch("site index out of range")
        keys = [self.net.point_key(p) for p in self.sites]
        pairs = set()
        for s, t in zip(self.site_index, self.times):
            key = (keys[s], float(t))
            if key in pairs:
                raise DimensionMismatch(f"duplicated (site, time) record at {self.sites[s]}, t={t}")
            pairs.add(key)
        if not self.covariate_names:
            self.covariate_names = ["intercept"] + [f"cov{k}" for k in range(1, self.X.shape[1])]

    @classmethod
    def from_records(cls, net, points, times, z, X=None, covariate_names=None, metric="auto") -> "Dataset":
        """Build from per-record points; identical locations share one site."""
        sites: list[PointOnNetwork] = []
        index_of: dict[tuple, int] = {}
        idx = []
        for p in points:
            key = net.point_key(p)
            if key not in index_of:
                index_of[key] = len(sites)
                sites.append(p)
            idx.append(index_of[key])
        n = len(idx)
        X = np.ones((n, 1)) if X is None else np.asarray(X, dtype=float)
        return cls(net, sites, np.array(idx), times, z, X, list(covariate_names or []), metric)

    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def geometry(self) -> SiteGeometry:
        if self.geometry_ is None:
            self.geometry_ = site_geometry(self.net, self.sites, self.metric)
        return self.geometry_

    @cached_property
    def separation(self) -> Separation:
        """Record-pair separations; reused by every likelihood evaluation."""
        return record_separation(self.geometry, self.site_index, self.times)

    @cached_property
    def site_keys(self) -> list[tuple]:
        return [self.net.point_key(p) for p in self.sites]

    def subset(self, rows) -> "Dataset":
        """Records ``rows`` (index array or boolean mask); site list and geometry are shared."""
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.nonzero(rows)[0]
        return Dataset(
            self.net,
            self.sites,
            self.site_index[rows],
            self.times[rows],
            self.z[rows],
            self.X[rows],
            list(self.covariate_names),
            self.metric,
            self.geometry_,
        )

    def canonical(self) -> "Dataset":
        """Records sorted by (site location, time); makes downstream results order-free."""
        keys = [repr(self.site_keys[s]) for s in self.site_index]
        order = sorted(range(self.n), key=lambda r: (keys[r], self.times[r]))
        return self.subset(np.array(order, dtype=int))

    @classmethod
    def read_csv(cls, net: Network, path: str | Path, metric: str = "auto") -> "Dataset":
        """Read ``site_edge,site_offset,time,response,cov1,...``; an intercept column is prepended."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            if header[:4] != ["site_edge", "site_offset", "time", "response"]:
                raise DimensionMismatch("observation CSV must start with site_edge,site_offset,time,response")
            rows = [r for r in reader if r and any(c.strip() for c in r)]
        points = [PointOnNetwork(r[0].strip(), float(r[1])) for r in rows]
        times = [float(r[2]) for r in rows]
        z = [float(r[3]) for r in rows]
        extra = header[4:]
        X = np.ones((len(rows), 1 + len(extra)))
        for j in range(len(extra)):
            X[:, j + 1] = [float(r[4 + j]) for r in rows]
        return cls.from_records(net, points, times, z, X, ["intercept"] + extra, metric)

    def write_csv(self, path: str | Path) -> None:
        names = self.covariate_names[1:]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["site_edge", "site_offset", "time", "response"] + names)
            for r in range(self.n):
                p = self.sites[self.site_index[r]]
                w.writerow([p.edge, repr(p.offset), repr(float(self.times[r])), repr(float(self.z[r]))]
                           + [repr(float(x)) for x in self.X[r, 1:]])


# -- likelihood ---------------------------------------------------------------


def _cholesky(S: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(S, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def _cholesky_jitter(S: np.ndarray) -> tuple[np.ndarray, int]:
    """Cholesky factor; on failure retry once with ``1e-10 * trace/n`` on the diagonal."""
    try:
        return _cholesky(S), 0
    except NotPositiveDefinite:
        jitter = 1e-10 * float(np.trace(S)) / S.shape[0]
        return _cholesky(S + jitter * np.eye(S.shape[0])), 1


def _gls(L: np.ndarray, X: np.ndarray, z: np.ndarray):
    Xt = linalg.solve_triangular(L, X, lower=True)
    zt = linalg.solve_triangular(L, z, lower=True)
    Q, R = np.linalg.qr(Xt)
    diag = np.abs(np.diag(R))
    if diag.size and diag.min() <= 1e-10 * max(diag.max(), 1e-300):
        raise RankDeficientDesign("design matrix is rank deficient")
    beta = linalg.solve_triangular(R, Q.T @ zt)
    return beta, Xt, zt


def _loglik_from_factor(L: np.ndarray, resid: np.ndarray) -> float:
    w = linalg.solve_triangular(L, resid, lower=True)
    n = len(resid)
    return float(-0.5 * n * LOG_2PI - np.sum(np.log(np.diag(L))) - 0.5 * w @ w)


def _sigma(data: Dataset, model: _Model) -> np.ndarray:
    C = model.covariance(data.separation)
    return 0.5 * (C + C.T)


def log_likelihood(data: Dataset, model: _Model, beta) -> float:
    """Gaussian log-likelihood at regression coefficients ``beta``."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.shape[0] != data.X.shape[1]:
        raise DimensionMismatch(f"beta has {beta.shape[0]} entries, design has {data.X.shape[1]} columns")
    L = _cholesky(_sigma(data, model))
    return _loglik_from_factor(L, data.z - data.X @ beta)


def profile_beta(data: Dataset, model: _Model) -> np.ndarray:
    """Generalised least squares coefficients under ``model``."""
    L = _cholesky(_sigma(data, model))
    return _gls(L, data.X, data.z)[0]


def profile_log_likelihood(data: Dataset, model: _Model, jitter: bool = False) -> tuple[float, np.ndarray, int]:
    """(log-likelihood at the GLS beta, beta, jitter retries)."""
    S = _sigma(data, model)
    L, retries = _cholesky_jitter(S) if jitter else (_cholesky(S), 0)
    beta = _gls(L, data.X, data.z)[0]
    return _loglik_from_factor(L, data.z - data.X @ beta), beta, retries


# -- fitting ------------------------------------------------------------------


@dataclass
class FitConfig:
    """Nelder-Mead settings; each restart begins at the previous best point.

    A run stops once the simplex values agree within ``fatol`` and its
    vertices within ``xatol`` (unbounded by default, since likelihood ridges
    toward limiting models would otherwise be followed indefinitely).
    Restarts continue while they gain more than ``restart_tol`` in
    log-likelihood.
    """

    maxiter: int = 3000
    restarts: int = 3
    xatol: float = math.inf
    fatol: float = 1e-6
    restart_tol: float = 1e-4
    profile_sigma2: bool = True
    data_start: bool = True
    raise_on_nonconvergence: bool = False


@dataclass
class FitResult:
    model: CovModel
    beta: np.ndarray
    loglik: float
    bic: float
    n_params: int
    n: int
    free: tuple[str, ...]
    converged: bool
    iterations: int
    n_evals: int
    jitter_retries: int
    initial_loglik: float
    leaves: int | None = None
    message: str = ""

    def row(self) -> dict:
        out = {"variant": self.model.variant, "LL": self.loglik, "BIC": self.bic, "n_params": self.n_params,
               "n": self.n, "converged": self.converged, "iterations": self.iterations, "leaves": self.leaves}
        out.update({k: v for k, v in self.model.params.items()})
        out["sigma2"] = self.model.sigma2
        out["nugget"] = self.model.nugget
        out.update({f"beta{k}": float(b) for k, b in enumerate(self.beta)})
        return out


def _softplus(x):
    return np.logaddexp(0.0, x)


def _softplus_inv(y):
    return y + np.log(-np.expm1(-y))


def _logit(p):
    return math.log(p) - math.log1p(-p)


def _expit(x):
    return 0.5 * (1.0 + math.tanh(0.5 * x))


_RAW_LIMIT = 15.0


class _Transform:
    """Maps the free parameters of a model to an unconstrained vector and back."""

    def __init__(self, model: CovModel, free: Sequence[str], leaves: int | None):
        specs = {s.name: s for s in model.param_specs()}
        specs["sigma2"] = ParamSpec("sigma2", 1.0, "pos")
        specs["nugget"] = ParamSpec("nugget", 0.0, "pos")
        self.specs = [specs[name] for name in free]
        self.leaves = leaves
        # tau depends on beta, so beta is decoded first
        self.order = sorted(range(len(self.specs)), key=lambda i: self.specs[i].kind == "tau")

    def _delta_lo(self) -> float:
        return float(delta_lower_bound(self.leaves)) if self.leaves is not None else 0.0

    def encode(self, values: dict) -> np.ndarray:
        raw = np.empty(len(self.specs))
        for i, s in enumerate(self.specs):
            v = values[s.name]
            if s.kind == "pos":
                raw[i] = math.log(max(v, 1e-10))
            elif s.kind == "neg":
                raw[i] = math.log(max(-v, 1e-10))
            elif s.kind == "interval":
                p = (v - s.lo) / (s.hi - s.lo)
                raw[i] = _logit(min(max(p, 1e-6), 1 - 1e-6))
            elif s.kind == "lower":
                raw[i] = math.log(max(v - s.lo, 1e-10))
            elif s.kind == "delta":
                raw[i] = math.log(max(v - self._delta_lo(), 1e-6))
            elif s.kind == "tau":
                raw[i] = float(_softplus_inv(max(v - values.get("beta", 0.0) / 2.0, 1e-10)))
        return raw

    def decode(self, raw: np.ndarray, base: dict) -> dict:
        out = dict(base)
        for i in self.order:
            s = self.specs[i]
            # past this the likelihood is flat to working precision
            x = min(max(float(raw[i]), -_RAW_LIMIT), _RAW_LIMIT)
            if s.kind == "pos":
                v = math.exp(x)
            elif s.kind == "neg":
                v = -math.exp(x)
            elif s.kind == "interval":
                v = s.lo + (s.hi - s.lo) * _expit(x)
            elif s.kind == "lower":
                v = s.lo + math.exp(x)
            elif s.kind == "delta":
                v = self._delta_lo() + math.exp(x)
            else:  # tau
                v = out.get("beta", 0.0) / 2.0 + float(_softplus(x))
            out[s.name] = v
        return out


def _model_from(model: CovModel, values: dict) -> CovModel:
    params = {k: values[k] for k in model.params}
    return CovModel(model.variant, params, values["sigma2"], values["nugget"],
                    model.kernel, model.phi, model.psi, model.free)


def default_free(model: CovModel) -> tuple[str, ...]:
    names = list(model.params)
    names.append("sigma2")
    if model.variant != "iid":
        names.append("nugget")
    return tuple(names)


def fit_ml(
    data: Dataset,
    model: CovModel,
    free: Sequence[str] | None = None,
    config: FitConfig | None = None,
) -> FitResult:
    """Maximise the profile log-likelihood over the free covariance parameters.

    Regression coefficients are profiled out by GLS at every step.  When
    ``sigma2`` is free and the nugget is free or zero, the sill is profiled
    out as well (the nugget is then searched as a ratio to the sill).  The
    search runs Nelder-Mead on log/logit-transformed parameters, restarting
    from the incumbent until the objective stops improving.
    """
    config = config or FitConfig()
    free = tuple(free if free is not None else (model.free if model.free is not None else default_free(model)))
    leaves = data.geometry.leaves if data.geometry.is_tree else None
    base = dict(model.params, sigma2=model.sigma2, nugget=model.nugget)
    if model.variant == "model3" and math.isnan(base["delta"]):
        if leaves is None:
            raise StreamCovError("model3 needs a tree to bound delta")
        base["delta"] = float(delta_lower_bound(leaves)) + 1.0
    if config.data_start and "sigma2" in free:
        # start the sill at the OLS residual variance, a tenth of it on the nugget
        resid = data.z - data.X @ np.linalg.lstsq(data.X, data.z, rcond=None)[0]
        v = float(np.var(resid)) or 1.0
        if "nugget" in free:
            base["sigma2"], base["nugget"] = 0.9 * v, 0.1 * v
        else:
            base["sigma2"] = v
    elif "nugget" in free and base["nugget"] <= 0:
        base["nugget"] = 0.1 * base["sigma2"]
    start_model = _model_from(model, base)
    start_model.validate(leaves)

    try:
        ll0, beta0, retries0 = profile_log_likelihood(data, start_model, jitter=True)
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite(f"covariance not positive definite at the initial point: {exc}") from exc
    p = data.X.shape[1]
    n = data.n

    def finish(m, beta, ll, converged, iters, evals, retries, msg):
        k = len(free) + p
        return FitResult(m, np.asarray(beta), ll, -2.0 * ll + k * math.log(n), k, n, free, converged,
                         iters, evals, retries, ll0, leaves, msg)

    if not free:
        return finish(start_model, beta0, ll0, True, 0, 1, retries0, "no free parameters")

    # sigma2 is profiled out analytically when the nugget scales with it
    profiled = config.profile_sigma2 and "sigma2" in free and ("nugget" in free or base["nugget"] == 0.0)
    if profiled:
        search = tuple(f for f in free if f != "sigma2")
        sbase = dict(base, sigma2=1.0, nugget=base["nugget"] / base["sigma2"])
    else:
        search, sbase = free, base
    retries = [retries0]
    n_evals = [0]

    def evaluate(values):
        m = _model_from(start_model, values)
        if profiled:
            ll, s2, _, r = _loglik_profiled_sigma2(data, m)
            m = _model_from(start_model, dict(values, sigma2=s2, nugget=values["nugget"] * s2))
        else:
            ll, _, r = profile_log_likelihood(data, m, jitter=True)
        retries[0] += r
        return ll, m

    iterations = 0
    converged = True
    message = "closed form"
    if search:
        tr = _Transform(start_model, search, leaves)

        def objective(raw):
            n_evals[0] += 1
            try:
                ll = evaluate(tr.decode(raw, sbase))[0]
            except (StreamCovError, ValueError, OverflowError, FloatingPointError):
                return 1e25
            return -ll if math.isfinite(ll) else 1e25

        x = tr.encode(sbase)
        best = objective(x)
        for attempt in range(config.restarts + 1):
            res = optimize.minimize(
                objective,
                x,
                method="Nelder-Mead",
                options={"maxiter": config.maxiter, "xatol": config.xatol, "fatol": config.fatol,
                         "adaptive": len(x) > 3},
            )
            iterations += int(res.nit)
            converged = bool(res.success)
            message = str(res.message)
            improved = best - res.fun
            if res.fun < best:
                x, best = res.x, float(res.fun)
            if attempt > 0 and improved < config.restart_tol:
                break
        values = tr.decode(x, sbase)
    else:
        values = sbase

    if not converged:
        if config.raise_on_nonconvergence:
            raise NonConvergence(message)
        warnings.warn(f"fit_ml did not converge: {message}", stacklevel=2)

    fitted = evaluate(values)[1]
    ll, beta, _ = profile_log_likelihood(data, fitted, jitter=True)
    if ll < ll0:  # never report worse than the starting point
        fitted, ll, beta = start_model, ll0, beta0
    return finish(fitted, beta, ll, converged, iterations, n_evals[0], retries[0], message)


def _loglik_profiled_sigma2(data: Dataset, model: _Model) -> tuple[float, float, np.ndarray, int]:
    """Log-likelihood maximised over sigma2 for a unit-sill model.

    ``model`` carries ``sigma2 = 1`` and the nugget-to-sill ratio; returns
    (log-likelihood, sigma2 estimate, GLS beta, jitter retries).
    """
    L, retries = _cholesky_jitter(_sigma(data, model))
    beta = _gls(L, data.X, data.z)[0]
    w = linalg.solve_triangular(L, data.z - data.X @ beta, lower=True)
    n = data.n
    s2 = float(w @ w) / n
    if not s2 > 0:
        raise NotPositiveDefinite("zero residual variance")
    ll = -0.5 * n * (LOG_2PI + math.log(s2) + 1.0) - float(np.sum(np.log(np.diag(L))))
    return ll, s2, beta, retries


# -- prediction ---------------------------------------------------------------


def crps_gaussian(mean, sd, y):
    """Continuous ranked probability score of N(mean, sd^2) at ``y`` (closed form)."""
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(~(sd > 0)):
        raise NonpositiveSd("standard deviation must be positive")
    w = (y - mean) / sd
    out = sd * (w * (2.0 * norm.cdf(w) - 1.0) + 2.0 * norm.pdf(w) - 1.0 / math.sqrt(math.pi))
    return out[()] if out.ndim == 0 else out


def _crps_or_abs(mean, sd, y):
    mean, sd, y = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mean, sd, y)))
    out = np.abs(y - mean)
    pos = sd > 0
    if np.any(pos):
        out = out.copy()
        out[pos] = crps_gaussian(mean[pos], sd[pos], y[pos])
    return out


@dataclass
class PredictionResult:
    mean: np.ndarray
    variance: np.ndarray
    observed: np.ndarray | None = None
    crps: np.ndarray | None = None

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(self.variance)

    @property
    def rmspe(self) -> float:
        if self.observed is None:
            raise ValueError("no observed values")
        return float(np.sqrt(np.mean((self.observed - self.mean) ** 2)))


def krige(
    train: Dataset,
    model: _Model,
    sites: Sequence[PointOnNetwork],
    times: Sequence[float],
    X0=None,
    beta=None,
    observed=None,
) -> PredictionResult:
    """Universal kriging predictions at records ``(sites[k], times[k])``.

    With ``beta=None`` the coefficients are estimated by GLS and the kriging
    variance carries the usual correction for that estimate; a supplied
    ``beta`` is treated as known.
    """
    sites = list(sites)
    times = np.asarray(times, dtype=float)
    m = len(sites)
    if len(times) != m:
        raise DimensionMismatch("sites and times must have equal length")
    X0 = np.ones((m, 1)) if X0 is None else np.atleast_2d(np.asarray(X0, dtype=float))
    if X0.shape != (m, train.X.shape[1]):
        raise DimensionMismatch(f"X0 must be {m} x {train.X.shape[1]}")

    ns = len(train.sites)
    geom = site_geometry(train.net, list(train.sites) + sites, train.metric)
    target_idx = ns + np.arange(m)
    S = covariance_matrix(model, geom, train.site_index, train.times)
    c0 = model.covariance(record_separation(geom, train.site_index, train.times, target_idx, times))
    var0 = np.diag(model.covariance(record_separation(geom, target_idx, times))).copy()

    L = _cholesky(S)
    known = beta is not None
    if known:
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        Xt = None
    else:
        beta, Xt, _ = _gls(L, train.X, train.z)
    A = linalg.solve_triangular(L, c0, lower=True)
    w = linalg.solve_triangular(L, train.z - train.X @ beta, lower=True)
    mean = X0 @ beta + A.T @ w
    var = var0 - np.sum(A * A, axis=0)
    if not known:
        G = Xt.T @ Xt
        Rm = X0.T - Xt.T @ A
        var = var + np.sum(Rm * np.linalg.solve(G, Rm), axis=0)

    if np.any(var < -1e-10):
        warnings.warn(f"negative kriging variance {var.min():.3g} clamped to 0", stacklevel=2)
    var = np.maximum(var, 0.0)

    if getattr(model, "nugget", 0.0) > 0:
        train_keys = {(repr(train.site_keys[s]), float(t)) for s, t in zip(train.site_index, train.times)}
        for p, t in zip(sites, times):
            if (repr(train.net.point_key(p)), float(t)) in train_keys:
                warnings.warn("target coincides with a training record while nugget > 0", stacklevel=2)
                break

    result = PredictionResult(mean, var)
    if observed is not None:
        result.observed = np.asarray(observed, dtype=float)
        result.crps = _crps_or_abs(mean, np.sqrt(var), result.observed)
    return result


# -- cross-validation ---------------------------------------------------------


@dataclass
class FoldResult:
    fold: int
    held_out_sites: list[str]
    n_train: int
    n_test: int
    loglik: float
    bic: float
    rmspe: float
    crps: float
    fit: FitResult | None = None
    prediction: PredictionResult | None = None

    def row(self) -> dict:
        return {"fold": self.fold, "n_train": self.n_train, "n_test": self.n_test,
                "LL": self.loglik, "BIC": self.bic, "RMSPE": self.rmspe, "CRPS": self.crps}


@dataclass
class CVResult:
    folds: list[FoldResult]
    assignment: dict[str, int]
    seed: int

    @property
    def mean(self) -> dict:
        keys = ("loglik", "bic", "rmspe", "crps")
        return {k: float(np.mean([getattr(f, k) for f in self.folds])) for k in keys}

    def rows(self) -> list[dict]:
        out = [f.row() for f in self.folds]
        m = self.mean
        out.append({"fold": "mean", "n_train": "", "n_test": "",
                    "LL": m["loglik"], "BIC": m["bic"], "RMSPE": m["rmspe"], "CRPS": m["crps"]})
        return out


def fold_assignment(data: Dataset, k: int, seed: int) -> np.ndarray:
    """Fold id per site: a seeded shuffle of sites in canonical location order."""
    used = np.unique(data.site_index)
    if k < 2 or k > len(used):
        raise ValueError(f"need 2 <= k <= {len(used)} folds")
    order = sorted(used, key=lambda s: repr(data.site_keys[s]))
    perm = substream(seed, "cv-folds").permutation(len(order))
    folds = np.full(len(data.sites), -1)
    for rank, pos in enumerate(perm):
        folds[order[pos]] = rank % k
    return folds


def cross_validate(
    data: Dataset,
    model: CovModel,
    k: int = 8,
    seed: int = 0,
    free: Sequence[str] | None = None,
    config: FitConfig | None = None,
    keep_fits: bool = False,
    warm_start: bool = True,
) -> CVResult:
    """K-fold cross-validation with whole sites held out.

    Each fold refits by ML on the remaining sites, then kriges every record
    of the held-out sites.  With ``warm_start`` fold ``f`` starts its search
    at the estimate of fold ``f - 1``.
    """
    data = data.canonical()
    folds = fold_assignment(data, k, seed)
    results = []
    start = model
    for f in range(k):
        test = folds[data.site_index] == f
        train = data.subset(~test)
        held = data.subset(test)
        fit = fit_ml(train, start, free=free, config=config)
        if warm_start:
            start = fit.model
            if config is None or config.data_start:
                config = replace(config or FitConfig(), data_start=False)
        pred = krige(
            train,
            fit.model,
            [held.sites[s] for s in held.site_index],
            held.times,
            held.X,
            observed=held.z,
        )
        results.append(
            FoldResult(
                f,
                sorted(str(data.sites[s]) for s in np.unique(held.site_index)),
                train.n,
                held.n,
                fit.loglik,
                fit.bic,
                pred.rmspe,
                float(np.mean(pred.crps)),
                fit if keep_fits else None,
                pred if keep_fits else None,
            )
        )
        log.info("fold %d: RMSPE=%.4f CRPS=%.4f", f, results[-1].rmspe, results[-1].crps)
    assignment = {str(data.sites[s]): int(folds[s]) for s in np.unique(data.site_index)}
    return CVResult(results, assignment, seed)


# -- simulation ---------------------------------------------------------------


def simulate(
    net: Network,
    sites: Sequence[PointOnNetwork],
    times: Sequence[float],
    model: _Model,
    seed: int,
    site_index=None,
    X=None,
    beta=None,
    metric: str = "auto",
) -> np.ndarray:
    """Draw ``X beta + L eps`` with ``L`` the Cholesky factor of the model covariance.

    Without ``site_index`` every site is observed at every time (site-major).
    """
    sites = list(sites)
    times = np.asarray(times, dtype=float)
    if site_index is None:
        site_index = np.repeat(np.arange(len(sites)), len(times))
        times = np.tile(times, len(sites))
    site_index = np.asarray(site_index, dtype=int)
    geom = site_geometry(net, sites, metric)
    L = _cholesky(covariance_matrix(model, geom, site_index, times))
    eps = np.random.default_rng(seed).standard_normal(len(site_index))
    z = L @ eps
    if X is not None:
        z = z + np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float)
    return z


def simulate_dataset(
    net: Network,
    sites: Sequence[PointOnNetwork],
    times: Sequence[float],
    model: _Model,
    seed: int,
    X=None,
    beta=None,
    covariate_names=None,
) -> Dataset:
    """Simulated :class:`Dataset` with every site observed at every time."""
    sites = list(sites)
    times = np.asarray(times, dtype=float)
    n = len(sites) * len(times)
    X = np.ones((n, 1)) if X is None else np.asarray(X, dtype=float)
    beta = np.zeros(X.shape[1]) if beta is None else np.asarray(beta, dtype=float)
    z = simulate(net, sites, times, model, seed, X=X, beta=beta)
    idx = np.repeat(np.arange(len(sites)), len(times))
    return Dataset(net, sites, idx, np.tile(times, len(sites)), z, X, list(covariate_names or []))
