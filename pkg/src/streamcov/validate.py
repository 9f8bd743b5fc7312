"""Randomised falsification checks for covariance validity.

These are not proofs: each check samples instances and reports the worst
statistic seen together with the instance that produced it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .models import _Model, covariance_matrix
from .network import Network, PointOnNetwork, SiteGeometry, random_points, random_tree, site_geometry

__all__ = [
    "ValidityReport",
    "random_instance",
    "check_pd",
    "check_cnd",
    "check_corollary1c",
    "check_schur_closure",
    "min_eigenvalue",
]


@dataclass
class ValidityReport:
    check: str
    instances: int
    worst: float
    tolerance: float
    passed: bool
    seed: int | None = None
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {
            "check": self.check,
            "instances": self.instances,
            "worst": self.worst,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "seed": self.seed,
        }

    def __str__(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.check}: worst={self.worst:.3e} tol={self.tolerance:.1e} over {self.instances} instances"


@dataclass
class Instance:
    net: Network
    sites: list[PointOnNetwork]
    site_index: np.ndarray
    times: np.ndarray
    geom: SiteGeometry


def random_instance(
    rng: np.random.Generator,
    net: Network | None = None,
    n_records: int = 40,
    max_edges: int = 15,
    max_times: int = 4,
) -> Instance:
    """Random sites/times on ``net`` (or on a fresh random directed tree)."""
    if net is None:
        net = random_tree(int(rng.integers(2, max_edges + 1)), rng)
    n_times = int(rng.integers(1, max_times + 1))
    n_sites = max(1, n_records // n_times)
    sites = random_points(net, n_sites, rng)
    if n_sites > 2 and rng.random() < 0.3:
        # a vertex site and a repeated site stress the same-site branches
        sites[0] = net.vertex_point(net.vertices[int(rng.integers(len(net.vertices)))])
        sites[-1] = sites[1]
    times = np.sort(rng.choice(np.arange(0.0, 3.0 * n_times), size=n_times, replace=False))
    times = times + rng.uniform(0.0, 0.5, size=n_times)
    site_index = np.repeat(np.arange(n_sites), n_times)
    t = np.tile(times, n_sites)
    return Instance(net, sites, site_index, t, site_geometry(net, sites))


def min_eigenvalue(C: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (C + C.T))[0])


def _pd_statistic(C: np.ndarray) -> tuple[float, float]:
    """(min eigenvalue, unit-free tolerance scale = trace / n)."""
    scale = float(np.trace(C)) / C.shape[0]
    return min_eigenvalue(C), max(scale, np.finfo(float).tiny)


def check_pd(
    model: _Model,
    net: Network | None = None,
    n_instances: int = 50,
    n_points: int = 40,
    seed: int = 0,
    tol: float = 1e-8,
) -> ValidityReport:
    """Minimum eigenvalue of random covariance matrices, relative to trace/n."""
    rng = np.random.default_rng(seed)
    worst = math.inf
    witness = None
    for k in range(n_instances):
        inst = random_instance(rng, net, n_points)
        C = covariance_matrix(model, inst.geom, inst.site_index, inst.times)
        lam, scale = _pd_statistic(C)
        rel = lam / scale
        if rel < worst:
            worst = rel
            witness = {"instance": k, "min_eigenvalue": lam, "scale": scale, "sites": [str(s) for s in inst.sites]}
    return ValidityReport("pd", n_instances, worst, -tol, worst >= -tol, seed, witness)


def check_cnd(
    psi: Callable,
    net: Network | None = None,
    n_instances: int = 50,
    n_points: int = 20,
    seed: int = 0,
    tol: float = 1e-8,
    points: Sequence[PointOnNetwork] | None = None,
) -> ValidityReport:
    """Largest centred quadratic form ``sum a_i a_j psi(d_ij)`` over unit ``a`` with ``sum a = 0``.

    The worst case over all admissible ``a`` is the top eigenvalue of ``psi(D)``
    restricted to the sum-zero subspace, so no coefficient sampling is needed.
    ``points`` fixes the point set (with ``net``) instead of sampling.
    """
    rng = np.random.default_rng(seed)
    worst = -math.inf
    witness = None
    runs = 1 if points is not None else n_instances
    for k in range(runs):
        if points is not None:
            g = net if net is not None else None
            pts = list(points)
        else:
            g = net if net is not None else random_tree(int(rng.integers(3, 16)), rng)
            pts = random_points(g, n_points, rng)
        D = site_geometry(g, pts, metric="auto").d
        F = np.asarray(psi(D), dtype=float)
        F = 0.5 * (F + F.T)
        n = F.shape[0]
        # orthonormal basis of {a : sum a = 0}
        Q = np.linalg.qr(np.column_stack([np.ones(n), np.eye(n)[:, : n - 1]]))[0][:, 1:]
        M = Q.T @ F @ Q
        w, V = np.linalg.eigh(0.5 * (M + M.T))
        if w[-1] > worst:
            worst = float(w[-1])
            witness = {"instance": k, "coefficients": (Q @ V[:, -1]).tolist(), "sites": [str(p) for p in pts]}
    return ValidityReport("cnd", runs, worst, tol, worst <= tol, seed, witness)


def check_corollary1c(
    C0: Callable,
    leaves: int,
    grid: Sequence[float] | None = None,
    tol: float = 1e-8,
    decay: float = 1e-3,
) -> ValidityReport:
    """Convexity of ``C0 ** (2 ceil(m/2))`` by second differences, and decay at the grid end."""
    grid = np.linspace(0.0, 10.0, 2001) if grid is None else np.asarray(grid, dtype=float)
    power = 2 * math.ceil(leaves / 2)
    h = np.asarray(C0(grid), dtype=float) ** power
    dx = np.diff(grid)
    # second divided differences on a possibly non-uniform grid
    second = 2.0 * (h[2:] * dx[:-1] - h[1:-1] * (dx[:-1] + dx[1:]) + h[:-2] * dx[1:]) / (
        dx[:-1] * dx[1:] * (dx[:-1] + dx[1:])
    )
    second = second * (dx[:-1] * dx[1:]).mean()  # scale to plain second differences
    worst = float(second.min()) if second.size else 0.0
    tail = float(C0(grid[-1]))
    convex = worst >= -tol
    decays = abs(tail) < decay
    k = int(np.argmin(second)) + 1 if second.size else 0
    return ValidityReport(
        "corollary1c",
        len(grid),
        worst,
        -tol,
        convex and decays,
        witness=None if convex else {"t": float(grid[k])},
        details={"power": power, "tail_value": tail, "convex": convex, "decays": decays},
    )


def check_schur_closure(
    model_a: _Model,
    model_b: _Model,
    net: Network | None = None,
    n_instances: int = 20,
    n_points: int = 40,
    seed: int = 0,
    tol: float = 1e-8,
) -> ValidityReport:
    """Eigenvalue test on the elementwise product of two models' covariance matrices."""
    rng = np.random.default_rng(seed)
    worst = math.inf
    witness = None
    for k in range(n_instances):
        inst = random_instance(rng, net, n_points)
        A = covariance_matrix(model_a, inst.geom, inst.site_index, inst.times)
        B = covariance_matrix(model_b, inst.geom, inst.site_index, inst.times)
        lam, scale = _pd_statistic(A * B)
        if lam / scale < worst:
            worst = lam / scale
            witness = {"instance": k, "min_eigenvalue": lam}
    return ValidityReport("schur", n_instances, worst, -tol, worst >= -tol, seed, witness)
