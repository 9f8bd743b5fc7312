"""Space-time covariance models on networks and directed trees.

Every model exposes ``correlation(sep)`` (the unit-variance part ``C0``) and
``covariance(sep) = sigma2 * C0 + nugget * 1[same site]`` over a
:class:`Separation`, i.e. arrays of spatial/temporal lags for many record
pairs at once.  The closed-form building blocks (``cov_model1`` ...) are
also available as plain vectorised functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate

from .errors import (
    ConstraintViolation,
    DeltaTooSmallForTree,
    Divergent,
    HypothesisViolation,
    InvalidParams,
    NotATree,
    NotDirected,
    QuadratureFailure,
    UnknownParam,
    UnknownVariant,
)
from .functions import CM_FAMILIES, BF_FAMILIES, Kernel, ScalarFamily, eval_scalar
from .network import FlowKind, FlowRelation, Network, PointOnNetwork, SiteGeometry, site_geometry

__all__ = [
    "VARIANTS",
    "Separation",
    "SpaceTimeSeparation",
    "CovModel",
    "ConeModel",
    "ProductModel",
    "MixtureModel",
    "ConstantModel",
    "TemporalCovariance",
    "delta_lower_bound",
    "cov_model1",
    "cov_model2",
    "cov_model3",
    "cov_model4",
    "cov_model5",
    "cov_separable",
    "cov_tailup",
    "cov_taildown",
    "taildown_integral",
    "cov_gneiting_generic",
    "cov_scale_mixture_quadrature",
    "cov_halfnormal_cosine",
    "halfnormal_cosine_mixture",
    "gamma_powexp_mixture",
    "full_covariance",
    "record_separation",
    "covariance_matrix",
    "build_covariance_matrix",
]


# -- separations --------------------------------------------------------------


@dataclass
class Separation:
    """Lags for a block of record pairs; all arrays share one shape.

    ``connected``/``a``/``b``/``weight`` are ``None`` when the network has no
    flow direction.  Connected pairs carry ``a = 0, b = d``.
    """

    d: np.ndarray
    u: np.ndarray
    same_site: np.ndarray
    connected: np.ndarray | None = None
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    weight: np.ndarray | None = None
    leaves: int | None = None
    is_tree: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def directed(self) -> bool:
        return self.connected is not None

    def power(self, which: str, p: float) -> np.ndarray:
        """``d ** p`` or ``u ** p`` evaluated once per distinct lag value."""
        x = self.d if which == "d" else self.u
        key = ("unique", which)
        if key not in self._cache:
            x = np.asarray(x, dtype=float)
            self._cache[key] = np.unique(x, return_inverse=True)
        vals, inv = self._cache[key]
        return (vals**p)[inv].reshape(np.shape(x))


@dataclass(frozen=True)
class SpaceTimeSeparation:
    """Separation of a single pair of space-time records."""

    relation: FlowRelation
    u: float
    same_site: bool = False
    weight: float = 1.0

    def __post_init__(self):
        if self.u < 0:
            raise ValueError("time lag must be nonnegative")

    def as_arrays(self, leaves: int | None = None, directed: bool = True) -> Separation:
        rel = self.relation
        arr = lambda x: np.array(float(x))
        if not directed:
            return Separation(arr(rel.d), arr(self.u), np.array(self.same_site), leaves=leaves)
        return Separation(
            arr(rel.d),
            arr(self.u),
            np.array(self.same_site),
            np.array(rel.is_connected),
            arr(rel.a if not rel.is_connected else 0.0),
            arr(rel.b if not rel.is_connected else rel.d),
            arr(self.weight if rel.is_connected else 0.0),
            leaves,
        )


# -- closed-form building blocks ---------------------------------------------


def cov_model1(d, u, c, nu, kappa, beta, tau, b):
    """Gneiting-type model with powered-exponential time and Cauchy-like space."""
    d = np.asarray(d, dtype=float)
    u = np.asarray(u, dtype=float)
    s = kappa * d**b + 1.0
    return s ** (-tau) * np.exp(-c * (u**2 / s**beta) ** nu)


def cov_separable(d, u, c, nu, kappa, tau, b):
    """Model 1 with the space-time interaction switched off."""
    return cov_model1(d, u, c, nu, kappa, 0.0, tau, b)


def cov_model2(d, u, a, alpha, b, c, nu):
    """Gneiting-type model with hyperbolic-secant time generator."""
    d = np.asarray(d, dtype=float)
    u = np.asarray(u, dtype=float)
    s = d**b + 1.0
    x = c * u**a / np.sqrt(s)
    # 2^nu {e^x + e^-x}^-nu  ==  exp(nu (log 2 - x - log1p(e^-2x)))
    return s ** (-alpha) * np.exp(nu * (math.log(2.0) - x - np.log1p(np.exp(-2.0 * x))))


def delta_lower_bound(leaves: int) -> int:
    """Smallest admissible shape for the powered-linear-with-sill model on a tree."""
    return 2 * math.ceil(leaves / 2) + 1


def cov_model3(d, u, alpha, beta, nu, delta, leaves: int | None = None):
    """Powered linear with sill in the space-time distance; compactly supported."""
    if leaves is not None and delta < delta_lower_bound(leaves):
        raise DeltaTooSmallForTree(
            f"delta >= 2*ceil(m/2)+1 = {delta_lower_bound(leaves)} required for m = {leaves} leaves, got {delta}"
        )
    r = np.asarray(d, dtype=float) / alpha + np.asarray(u, dtype=float) / beta
    base = np.where(r < 1.0, 1.0 - np.minimum(r, 1.0) ** nu, 0.0)
    return base**delta


def _log1p_ratio(x):
    """log(1 + x) / x with its limit 1 at x = 0."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x / 2.0 + x * x / 3.0, np.log1p(safe) / safe)


def cov_model4(d, u, connected, weight, theta1, theta2, theta3, theta4):
    """Mariah tail-up x cosine plus exponential tail-down x exponential.

    ``connected`` and ``weight`` are the flow-connectivity flag and tail-up
    weight of each pair; ``d == 0`` selects the coincident-site branch.
    """
    d = np.asarray(d, dtype=float)
    u = np.asarray(u, dtype=float)
    connected = np.asarray(connected, dtype=bool)
    weight = np.asarray(weight, dtype=float)
    down = 0.5 * np.exp(-(d / theta3 + u / theta4))
    up = 0.5 * weight * _log1p_ratio(d / theta1) * np.cos(u / theta2)
    at_zero = 0.5 * np.cos(u / theta2) + 0.5 * np.exp(-u / theta4)
    return np.where(d == 0, at_zero, np.where(connected, up + down, down))


def cov_model5(d, u, theta1, theta2, theta3, theta4):
    """Gamma scale mixture of exponential tail-down and powered-exponential time."""
    d = np.asarray(d, dtype=float)
    u = np.asarray(u, dtype=float)
    return (1.0 / (d / theta1 + u**theta3 / theta2 + 1.0)) ** theta4


def cov_halfnormal_cosine(d, u, theta1, theta2):
    """Closed form of the half-normal mixture of exponential tail-down and cosine."""
    s = 1.0 + np.asarray(d, dtype=float) / theta1
    return np.exp(-(theta2**2) * np.asarray(u, dtype=float) ** 2 / s) / np.sqrt(s)


# -- tail-up / tail-down ------------------------------------------------------


def _quad(f, lo, hi=np.inf, epsabs=1e-10, epsrel=1e-10):
    val, err, info = integrate.quad(f, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=500, full_output=1)[:3]
    if not math.isfinite(val):
        raise Divergent(f"integral diverged on [{lo}, {hi}]")
    if err > max(epsabs, epsrel * abs(val)) * 100:
        raise QuadratureFailure(f"quadrature error estimate {err:.3g} for value {val:.6g}")
    return val


def taildown_integral(kernel: Kernel, a: float, b: float, epsabs: float = 1e-10) -> float:
    """``int_{max(a,b)}^inf g(y) g(y - |b - a|) dy`` by adaptive quadrature.

    Flow-connected pairs at distance ``d`` use ``a = 0, b = d``; the same
    integral with ``a = 0`` is also the tail-up moving-average covariance.
    """
    lo, hi = min(a, b), max(a, b)
    shift = hi - lo
    f = lambda y: float(kernel(y)) * float(kernel(y - shift))
    return _quad(f, hi, epsabs=epsabs, epsrel=epsabs)


def _tailup_unweighted(kernel: Kernel, d):
    d = np.asarray(d, dtype=float)
    if kernel.family == "exponential":
        return kernel.theta1**2 * kernel.theta2 / 2.0 * np.exp(-d / kernel.theta2)
    # Mariah, rescaled so the value at d = 0 is 1/2
    return 0.5 * _log1p_ratio(d / kernel.theta1)


def cov_tailup(rel: FlowRelation, weight: float, k: Kernel) -> float:
    """Tail-up covariance; zero for flow-unconnected pairs.

    The Mariah kernel is normalised so that the variance is 1/2.
    """
    if not rel.is_connected:
        return 0.0
    w = 1.0 if rel.kind is FlowKind.SAME else weight
    return float(w * _tailup_unweighted(k, rel.d))


@lru_cache(maxsize=200_000)
def _mariah_unit(a: float, b: float) -> float:
    # unit-scale Mariah kernel: g(s) = 1/2 / (1 + s)
    return taildown_integral(Kernel("mariah", 1.0), a, b)


def cov_taildown(rel: FlowRelation, k: Kernel) -> float:
    """Tail-down covariance for either flow relation.

    Exponential kernels use the closed form (identical in both branches);
    Mariah kernels are integrated numerically.
    """
    if k.family == "exponential":
        return float(k.theta1**2 * k.theta2 / 2.0 * math.exp(-rel.d / k.theta2))
    if rel.is_connected:
        a, b = 0.0, rel.d
    else:
        a, b = rel.a, rel.b
    return k.theta1 * _mariah_unit(a / k.theta1, b / k.theta1)


def _taildown_array(k: Kernel, sep: Separation):
    if k.family == "exponential":
        return k.theta1**2 * k.theta2 / 2.0 * np.exp(-sep.d / k.theta2)
    a = np.broadcast_to(sep.a, sep.d.shape)
    b = np.broadcast_to(sep.b, sep.d.shape)
    scale = k.theta1
    out = np.empty(sep.d.shape)
    for idx in np.ndindex(sep.d.shape):
        out[idx] = scale * _mariah_unit(round(a[idx] / scale, 12), round(b[idx] / scale, 12))
    return out


def _tailup_array(k: Kernel, sep: Separation):
    return np.where(sep.connected, sep.weight * _tailup_unweighted(k, sep.d), 0.0)


# -- Gneiting generic and scale mixtures --------------------------------------


def cov_gneiting_generic(d, u, phi: ScalarFamily, psi: ScalarFamily, alpha: float, a: float, b: float):
    """``psi(d^b)^-alpha * phi(u^(2a) / psi(d^b))``.

    Refuses to evaluate unless ``phi`` is completely monotone, ``psi`` a
    positive Bernstein function, ``alpha >= 1/2`` and ``a, b in (0, 1]``.
    """
    if not getattr(phi, "is_completely_monotone", False):
        raise HypothesisViolation("phi must be a completely monotone family")
    if not getattr(psi, "is_bernstein", False):
        raise HypothesisViolation("psi must be a positive Bernstein family")
    if not math.isfinite(float(phi(0.0))):
        raise HypothesisViolation(f"phi(0) is not finite for {phi.family}")
    if float(psi(0.0)) <= 0:
        raise HypothesisViolation("psi must be strictly positive")
    if alpha < 0.5:
        raise HypothesisViolation("alpha >= 1/2 required")
    if not (0 < a <= 1 and 0 < b <= 1):
        raise HypothesisViolation("a and b must lie in (0, 1]")
    d = np.asarray(d, dtype=float)
    u = np.asarray(u, dtype=float)
    s = eval_scalar(psi, d**b)
    return s ** (-alpha) * eval_scalar(phi, u ** (2 * a) / s)


def cov_scale_mixture_quadrature(
    C_S: Callable[[float, float], float],
    C_T: Callable[[float, float], float],
    density: Callable[[float], float],
    d: float,
    u: float,
    support: tuple[float, float] = (0.0, np.inf),
    tol: float = 1e-9,
) -> float:
    """``int C_S(d; a) C_T(u; a) dmu(a)`` over the mixing support."""
    f = lambda a: C_S(d, a) * C_T(u, a) * density(a)
    return _quad(f, support[0], support[1], epsabs=tol, epsrel=tol)


def halfnormal_cosine_mixture(theta1: float, theta2: float):
    """(spatial, temporal, density) for exponential tail-down x cosine under a half-normal law."""
    C_S = lambda d, a: math.exp(-(a**2) / theta1 * d)
    C_T = lambda u, a: math.cos(a * 2.0 * theta2 * u)
    density = lambda a: 2.0 / math.sqrt(math.pi) * math.exp(-(a**2))
    return C_S, C_T, density


def gamma_powexp_mixture(theta1: float, theta2: float, theta3: float, theta4: float, theta5: float = 1.0):
    """(spatial, temporal, density) whose mixture is model 5 with ``theta1*theta5, theta2*theta5``."""
    C_S = lambda d, a: math.exp(-a / theta1 * d)
    C_T = lambda u, a: math.exp(-a / theta2 * u**theta3)
    lognorm = theta4 * math.log(theta5) - math.lgamma(theta4)
    density = lambda a: math.exp(lognorm + (theta4 - 1.0) * math.log(a) - theta5 * a) if a > 0 else 0.0
    return C_S, C_T, density


# -- parameter catalogue ------------------------------------------------------


@dataclass(frozen=True)
class ParamSpec:
    """Domain of one parameter.

    ``kind`` drives both validation and the unconstrained reparameterisation
    used when fitting: ``pos`` (0, inf), ``interval`` (lo, hi] / [lo, hi],
    ``lower`` [lo, inf), ``neg`` (-inf, 0), ``tau`` [beta/2, inf), ``delta``
    [2 ceil(m/2) + 1, inf).
    """

    name: str
    default: float
    kind: str
    lo: float = 0.0
    hi: float = np.inf
    text: str = ""
    closed_lo: bool = False


def _pos(name, default):
    return ParamSpec(name, default, "pos", text=f"{name} > 0")


def _unit(name, default, closed_lo=False):
    text = f"0 <= {name} <= 1" if closed_lo else f"0 < {name} <= 1"
    return ParamSpec(name, default, "interval", 0.0, 1.0, text, closed_lo)


PARAM_SPECS: dict[str, tuple[ParamSpec, ...]] = {
    "model1": (
        _pos("c", 1.0),
        _unit("nu", 0.5),
        _pos("kappa", 1.0),
        _unit("beta", 0.5, closed_lo=True),
        ParamSpec("tau", 1.0, "tau", text="tau >= beta/2"),
        _unit("b", 0.5),
    ),
    "separable": (
        _pos("c", 1.0),
        _unit("nu", 0.5),
        _pos("kappa", 1.0),
        ParamSpec("tau", 1.0, "lower", 0.0, text="tau >= 0", closed_lo=True),
        _unit("b", 0.5),
    ),
    "model2": (
        _unit("a", 0.5),
        ParamSpec("alpha", 1.0, "lower", 0.5, text="alpha >= 1/2", closed_lo=True),
        _unit("b", 0.5),
        _pos("c", 1.0),
        _pos("nu", 1.0),
    ),
    "model3": (
        _pos("alpha", 10.0),
        _pos("beta", 10.0),
        _unit("nu", 0.5),
        ParamSpec("delta", math.nan, "delta", text="delta >= 2*ceil(m/2)+1"),
    ),
    "model4": (_pos("theta1", 1.0), _pos("theta2", 1.0), _pos("theta3", 1.0), _pos("theta4", 1.0)),
    "model5": (
        _pos("theta1", 1.0),
        _pos("theta2", 1.0),
        ParamSpec("theta3", 1.0, "interval", 0.0, 2.0, "0 < theta3 <= 2"),
        _pos("theta4", 1.0),
    ),
    "tailup": (_pos("range", 1.0),),
    "taildown": (_pos("range", 1.0),),
    "iid": (),
}

_SCALAR_SPECS: dict[str, tuple[ParamSpec, ...]] = {
    "CM_PowExp": (_pos("c", 1.0), _unit("nu", 0.5)),
    "CM_NegPow": (_pos("c", 1.0), ParamSpec("nu", -0.5, "neg", text="nu < 0")),
    "CM_Sech": (_pos("c", 1.0), _pos("nu", 1.0)),
    "CM_Cauchy": (_pos("c", 1.0), _pos("nu", 1.0), _unit("gamma", 0.5)),
    "BF_PowerPlusOne": (_pos("kappa", 1.0), _unit("beta", 0.5, closed_lo=True), _unit("lam", 0.5)),
    "BF_LogRatio": (
        _pos("kappa", 1.0),
        ParamSpec("beta", 2.0, "lower", 1.0, text="beta > 1"),
        _unit("lam", 0.5),
    ),
    "BF_PowerPlusBeta": (_unit("lam", 0.5), _pos("beta", 1.0)),
    "BF_ExpSaturate": (_pos("kappa", 1.0), ParamSpec("beta", 2.0, "lower", 1.0, text="beta > 1")),
}

_GNEITING_SPECS = (
    ParamSpec("alpha", 1.0, "lower", 0.5, text="alpha >= 1/2", closed_lo=True),
    _unit("a", 1.0),
    _unit("b", 1.0),
)

VARIANTS = tuple(PARAM_SPECS) + ("gneiting",)
FLOW_VARIANTS = ("model4", "tailup", "taildown")
TREE_VARIANTS = ("model3", "model4", "model5", "tailup", "taildown")


def _check_spec(spec: ParamSpec, value: float, params: Mapping[str, float], leaves: int | None):
    v = value
    if not math.isfinite(v):
        if spec.kind == "delta" and math.isnan(v):
            return
        raise ConstraintViolation(f"{spec.name} must be finite ({spec.text})")
    kind = spec.kind
    ok = True
    if kind == "pos":
        ok = v > 0
    elif kind == "neg":
        ok = v < 0
    elif kind == "interval":
        ok = (v >= spec.lo if spec.closed_lo else v > spec.lo) and v <= spec.hi
    elif kind == "lower":
        ok = v >= spec.lo if spec.closed_lo else v > spec.lo
    elif kind == "tau":
        ok = v >= params.get("beta", 0.0) / 2.0
    elif kind == "delta":
        ok = v > 0
        if leaves is not None and v < delta_lower_bound(leaves):
            raise DeltaTooSmallForTree(
                f"delta >= 2*ceil(m/2)+1 = {delta_lower_bound(leaves)} required for m = {leaves} leaves, got {v:g}"
            )
    if not ok:
        raise ConstraintViolation(f"{spec.text} violated: {spec.name} = {v:g}")


# -- model objects ------------------------------------------------------------


class _Model:
    sigma2: float
    nugget: float

    requires_flow = False
    requires_tree = False

    def correlation(self, sep: Separation) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def covariance(self, sep: Separation) -> np.ndarray:
        c = self.sigma2 * self.correlation(sep)
        if self.nugget:
            c = c + self.nugget * np.asarray(sep.same_site, dtype=float)
        return c

    def check_geometry(self, sep: Separation) -> None:
        if self.requires_flow and not sep.directed:
            raise NotDirected(f"{self!r} needs flow relations (directed tree)")
        if self.requires_tree and not sep.is_tree:
            raise NotATree(f"{self!r} is only valid on trees")


@dataclass
class CovModel(_Model):
    """A named model family with its parameter vector, sill and nugget.

    ``kernel`` selects ``exponential``/``mariah`` for ``tailup``/``taildown``;
    ``phi``/``psi`` name catalogue families for ``gneiting``, whose own
    parameters are stored as ``phi.<name>`` / ``psi.<name>``.  ``free`` lists
    the parameters :func:`streamcov.inference.fit_ml` may move (``None`` means
    all of them, including ``sigma2`` and ``nugget``).
    """

    variant: str
    params: dict[str, float] = field(default_factory=dict)
    sigma2: float = 1.0
    nugget: float = 0.0
    kernel: str | None = None
    phi: str | None = None
    psi: str | None = None
    free: tuple[str, ...] | None = None

    def __post_init__(self):
        self.variant = self.variant.lower()
        if self.variant not in VARIANTS:
            raise UnknownVariant(f"unknown model variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.variant in ("tailup", "taildown"):
            self.kernel = (self.kernel or "exponential").lower()
            if self.kernel not in ("exponential", "mariah"):
                raise InvalidParams(f"unknown kernel {self.kernel!r}")
        if self.variant == "gneiting":
            if self.phi not in CM_FAMILIES:
                raise HypothesisViolation(f"phi must be one of {CM_FAMILIES}")
            if self.psi not in BF_FAMILIES:
                raise HypothesisViolation(f"psi must be one of {BF_FAMILIES}")
        specs = self.param_specs()
        known = {s.name for s in specs}
        unknown = set(self.params) - known
        if unknown:
            raise UnknownParam(f"{self.variant} has no parameter(s) {sorted(unknown)}; expected {sorted(known)}")
        full = {}
        for s in specs:
            full[s.name] = float(self.params.get(s.name, s.default))
        self.params = full
        if self.free is not None:
            bad = set(self.free) - known - {"sigma2", "nugget"}
            if bad:
                raise UnknownParam(f"cannot free unknown parameter(s) {sorted(bad)}")
            self.free = tuple(self.free)
        self.validate()

    def __repr__(self) -> str:
        inner = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"CovModel({self.variant}:{inner};sigma2={self.sigma2:g};nugget={self.nugget:g})"

    # -- parameters -----------------------------------------------------------

    def param_specs(self) -> tuple[ParamSpec, ...]:
        if self.variant != "gneiting":
            return PARAM_SPECS[self.variant]
        phi = tuple(replace(s, name=f"phi.{s.name}", text=f"phi.{s.text}") for s in _SCALAR_SPECS[self.phi])
        psi = tuple(replace(s, name=f"psi.{s.name}", text=f"psi.{s.text}") for s in _SCALAR_SPECS[self.psi])
        return _GNEITING_SPECS + phi + psi

    def validate(self, leaves: int | None = None) -> None:
        """Raise :class:`ConstraintViolation` naming the first violated inequality."""
        if not (self.sigma2 >= 0) or not math.isfinite(self.sigma2):
            raise ConstraintViolation(f"sigma2 >= 0 violated: sigma2 = {self.sigma2}")
        if not (self.nugget >= 0) or not math.isfinite(self.nugget):
            raise ConstraintViolation(f"nugget >= 0 violated: nugget = {self.nugget}")
        for s in self.param_specs():
            _check_spec(s, self.params[s.name], self.params, leaves)

    def with_params(self, **updates) -> "CovModel":
        params = dict(self.params)
        sigma2 = updates.pop("sigma2", self.sigma2)
        nugget = updates.pop("nugget", self.nugget)
        params.update(updates)
        return CovModel(self.variant, params, sigma2, nugget, self.kernel, self.phi, self.psi, self.free)

    @property
    def requires_flow(self) -> bool:
        return self.variant in FLOW_VARIANTS

    @property
    def requires_tree(self) -> bool:
        return self.variant in TREE_VARIANTS

    def scalar_families(self) -> tuple[ScalarFamily, ScalarFamily]:
        pick = lambda prefix: {k.split(".", 1)[1]: v for k, v in self.params.items() if k.startswith(prefix)}
        return ScalarFamily(self.phi, pick("phi.")), ScalarFamily(self.psi, pick("psi."))

    # -- evaluation -----------------------------------------------------------

    def correlation(self, sep: Separation) -> np.ndarray:
        self.check_geometry(sep)
        p = self.params
        v = self.variant
        d, u = sep.d, sep.u
        if v == "model1":
            return cov_model1(d, u, **p)
        if v == "separable":
            return cov_separable(d, u, **p)
        if v == "model2":
            return cov_model2(d, u, **p)
        if v == "model3":
            delta = p["delta"]
            if math.isnan(delta):
                if sep.leaves is None:
                    raise InvalidParams("model3 needs delta or a leaf count")
                delta = delta_lower_bound(sep.leaves)
            return cov_model3(d, u, p["alpha"], p["beta"], p["nu"], delta, sep.leaves)
        if v == "model4":
            return cov_model4(d, u, sep.connected, sep.weight, **p)
        if v == "model5":
            x = d / p["theta1"] + sep.power("u", p["theta3"]) / p["theta2"] + 1.0
            return x ** (-p["theta4"])
        if v == "tailup":
            r = p["range"]
            k = Kernel("mariah", r) if self.kernel == "mariah" else Kernel("exponential", 1.0, r)
            c0 = 0.5 if self.kernel == "mariah" else r / 2.0
            return _tailup_array(k, sep) / c0 * np.ones_like(u)
        if v == "taildown":
            r = p["range"]
            if self.kernel == "exponential":
                return np.exp(-d / r) * np.ones_like(u)
            return 4.0 * _taildown_array(Kernel("mariah", r), sep) / r * np.ones_like(u)
        if v == "iid":
            return np.where(np.asarray(sep.same_site) & (np.asarray(u) == 0), 1.0, 0.0)
        phi, psi = self.scalar_families()
        return cov_gneiting_generic(d, u, phi, psi, p["alpha"], p["a"], p["b"])

    def check_geometry(self, sep: Separation) -> None:
        super().check_geometry(sep)
        if self.variant == "model3" and sep.leaves is not None:
            delta = self.params["delta"]
            if not math.isnan(delta) and delta < delta_lower_bound(sep.leaves):
                raise DeltaTooSmallForTree(
                    f"delta >= 2*ceil(m/2)+1 = {delta_lower_bound(sep.leaves)} required for "
                    f"m = {sep.leaves} leaves, got {delta:g}"
                )


@dataclass
class TemporalCovariance:
    """Purely temporal covariance: ``exponential`` exp(-u/s), ``cosine`` cos(u/s), ``gaussian`` exp(-(u/s)^2)."""

    family: str
    scale: float = 1.0

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "exponential":
            return np.exp(-u / self.scale)
        if self.family == "cosine":
            return np.cos(u / self.scale)
        if self.family == "gaussian":
            return np.exp(-((u / self.scale) ** 2))
        raise InvalidParams(f"unknown temporal family {self.family!r}")


@dataclass
class ConeModel(_Model):
    """Sums and products of tail-up, tail-down and temporal components.

    ``form`` 8: TD*T1 + TU + T2;  9: TU*T1 + TD + T2;  10: TU*T1 + TD*T2.
    """

    form: int
    tailup: Kernel
    taildown: Kernel
    temporal1: TemporalCovariance
    temporal2: TemporalCovariance
    sigma2: float = 1.0
    nugget: float = 0.0

    requires_flow = True
    requires_tree = True

    def correlation(self, sep: Separation) -> np.ndarray:
        self.check_geometry(sep)
        tu = _tailup_array(self.tailup, sep)
        td = _taildown_array(self.taildown, sep)
        t1, t2 = self.temporal1(sep.u), self.temporal2(sep.u)
        if self.form == 8:
            return td * t1 + tu + t2
        if self.form == 9:
            return tu * t1 + td + t2
        if self.form == 10:
            return tu * t1 + td * t2
        raise InvalidParams(f"unknown cone form {self.form}")


@dataclass
class ProductModel(_Model):
    """Elementwise product of two models' correlations."""

    first: _Model
    second: _Model
    sigma2: float = 1.0
    nugget: float = 0.0

    def correlation(self, sep: Separation) -> np.ndarray:
        return self.first.correlation(sep) * self.second.correlation(sep)


@dataclass
class MixtureModel(_Model):
    """Convex combination ``w * first + (1 - w) * second`` of full covariances."""

    weight: float
    first: _Model
    second: _Model

    @property
    def sigma2(self) -> float:
        return 1.0

    @property
    def nugget(self) -> float:
        return 0.0

    def correlation(self, sep: Separation) -> np.ndarray:
        w = self.weight
        return w * self.first.covariance(sep) + (1.0 - w) * self.second.covariance(sep)


@dataclass
class ConstantModel(_Model):
    value: float = 1.0
    sigma2: float = 1.0
    nugget: float = 0.0

    def correlation(self, sep: Separation) -> np.ndarray:
        return np.full(np.shape(sep.d), self.value, dtype=float)


# -- assembly -----------------------------------------------------------------


def full_covariance(model: _Model, sep: SpaceTimeSeparation | Separation, leaves: int | None = None) -> float:
    """``sigma2 * C0 + nugget * 1[same site]`` for one record pair (or a block)."""
    if isinstance(sep, SpaceTimeSeparation):
        arr = sep.as_arrays(leaves, directed=getattr(model, "requires_flow", False))
        return float(model.covariance(arr))
    return model.covariance(sep)


def record_separation(
    geom: SiteGeometry,
    site_i: Sequence[int],
    time_i: Sequence[float],
    site_j: Sequence[int] | None = None,
    time_j: Sequence[float] | None = None,
) -> Separation:
    """Expand site-level geometry to record pairs (rows ``i`` x columns ``j``)."""
    si = np.asarray(site_i, dtype=int)
    ti = np.asarray(time_i, dtype=float)
    sj = si if site_j is None else np.asarray(site_j, dtype=int)
    tj = ti if time_j is None else np.asarray(time_j, dtype=float)
    ix = np.ix_(si, sj)
    pick = lambda m: None if m is None else m[ix]
    return Separation(
        geom.d[ix],
        np.abs(ti[:, None] - tj[None, :]),
        geom.same[ix],
        pick(geom.connected),
        pick(geom.a),
        pick(geom.b),
        pick(geom.weight),
        geom.leaves,
        geom.is_tree,
    )


def covariance_matrix(model: _Model, geom: SiteGeometry, site_index, times) -> np.ndarray:
    """Symmetric record-level covariance matrix."""
    C = model.covariance(record_separation(geom, site_index, times))
    return 0.5 * (C + C.T)


def build_covariance_matrix(
    model: _Model,
    points: Sequence[PointOnNetwork],
    times: Sequence[float],
    net: Network,
    metric: str = "auto",
) -> np.ndarray:
    """Covariance among records ``(points[i], times[i])`` on ``net``."""
    if len(points) != len(times):
        raise ValueError("points and times must have equal length")
    geom = site_geometry(net, points, metric)
    return covariance_matrix(model, geom, np.arange(len(points)), times)
