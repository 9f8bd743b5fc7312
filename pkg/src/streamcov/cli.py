"""Command-line front end.

Subcommands: ``fit``, ``predict``, ``cv``, ``simulate``, ``validate`` and
``surface``.  Exit status is 0 on success, 2 when a validity check fails
and 1 on any error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import StreamCovError, UnknownParam
from .functions import ScalarFamily
from .inference import Dataset, FitConfig, cross_validate, fit_ml, krige, simulate, substream
from .models import CovModel, Separation, delta_lower_bound
from .network import Network, PointOnNetwork, random_points, read_network
from .validate import ValidityReport, check_cnd, check_corollary1c, check_pd

__all__ = ["parse_model_spec", "format_model_spec", "parse_scalar_spec", "emit_surface", "build_parser", "main"]

_OPTION_KEYS = ("sigma2", "nugget", "kernel", "phi", "psi", "free", "fixed")


# -- model specification strings ----------------------------------------------


def _pairs(text: str, what: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in item:
            raise UnknownParam(f"expected key=value in {what}, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_model_spec(spec: str) -> CovModel:
    """Parse ``<variant>:<k=v,...>;sigma2=..;nugget=..``.

    Further ``;``-separated options: ``kernel=`` (tail-up/tail-down),
    ``phi=``/``psi=`` (gneiting families), and ``free=a,b`` or ``fixed=a,b``
    to choose which of the parameters, ``sigma2`` and ``nugget`` are fitted.
    Omitted parameters take their variant defaults.
    """
    head, _, rest = spec.strip().partition(";")
    variant, _, body = head.partition(":")
    params = {k: float(v) for k, v in _pairs(body, "model parameters").items()}
    opts: dict[str, str] = {}
    for seg in filter(None, (s.strip() for s in rest.split(";"))):
        k, sep, v = seg.partition("=")
        k = k.strip()
        if not sep or k not in _OPTION_KEYS:
            raise UnknownParam(f"unknown model option {seg!r}; expected one of {', '.join(_OPTION_KEYS)}")
        opts[k] = v.strip()
    if "free" in opts and "fixed" in opts:
        raise UnknownParam("give either free= or fixed=, not both")
    model = CovModel(
        variant.strip(),
        params,
        float(opts.get("sigma2", 1.0)),
        float(opts.get("nugget", 0.0)),
        opts.get("kernel"),
        opts.get("phi"),
        opts.get("psi"),
    )
    names = [s.name for s in model.param_specs()] + ["sigma2", "nugget"]
    if "free" in opts:
        model.free = tuple(n for n in opts["free"].split(",") if n)
    elif "fixed" in opts:
        fixed = {n for n in opts["fixed"].split(",") if n}
        bad = fixed - set(names)
        if bad:
            raise UnknownParam(f"cannot fix unknown parameter(s) {sorted(bad)}")
        model.free = tuple(n for n in names if n not in fixed and not (n == "nugget" and model.variant == "iid"))
    if model.free is not None:
        bad = set(model.free) - set(names)
        if bad:
            raise UnknownParam(f"cannot free unknown parameter(s) {sorted(bad)}")
    return model


def format_model_spec(model: CovModel) -> str:
    """Inverse of :func:`parse_model_spec` (floats written with ``repr``)."""
    body = ",".join(f"{k}={v!r}" for k, v in model.params.items())
    parts = [f"{model.variant}:{body}", f"sigma2={model.sigma2!r}", f"nugget={model.nugget!r}"]
    if model.variant in ("tailup", "taildown"):
        parts.append(f"kernel={model.kernel}")
    if model.variant == "gneiting":
        parts += [f"phi={model.phi}", f"psi={model.psi}"]
    if model.free is not None:
        parts.append("free=" + ",".join(model.free))
    return ";".join(parts)


def parse_scalar_spec(spec: str) -> ScalarFamily:
    """``BF_PowerPlusBeta:lam=0.5,beta=2`` -> :class:`ScalarFamily`."""
    name, _, body = spec.partition(":")
    return ScalarFamily(name.strip(), {k: float(v) for k, v in _pairs(body, "function parameters").items()})


# -- surfaces -----------------------------------------------------------------


def _grid_separation(model: CovModel, d, u, relation: str, weight: float, leaves: int | None) -> Separation:
    d = np.asarray(d, dtype=float)
    u = np.asarray(u, dtype=float)
    same = d == 0
    if relation == "connected":
        conn = np.ones(d.shape, dtype=bool)
        a, b, w = np.zeros_like(d), d, np.full(d.shape, float(weight))
    else:
        # unconnected pairs are placed symmetrically about their junction
        conn = same.copy()
        a, b, w = d / 2.0, d / 2.0, np.where(same, 1.0, 0.0)
    return Separation(d, u, same, conn, a, b, w, leaves, True)


def emit_surface(
    model: CovModel,
    dmax: float,
    umax: float,
    res: int | tuple[int, int],
    relation: str = "connected",
    weight: float = 1.0,
    leaves: int | None = None,
) -> tuple[list[tuple[float, float, float]], list[tuple[float, float]], list[tuple[float, float]]]:
    """Covariance surface ``sigma2 * C0(d, u)`` on a regular grid, plus the two marginals.

    Returns ``(grid, space, time)`` with rows ``(d, u, C)``, ``(d, C(d, 0))``
    and ``(u, C(0, u))``.  The nugget is left out.  ``relation`` and ``weight``
    choose the flow branch for flow-dependent models.
    """
    nd, nu = (res, res) if isinstance(res, int) else res
    if nd < 2 or nu < 2:
        raise ValueError("grid resolution must be at least 2 per axis")
    if relation not in ("connected", "unconnected"):
        raise ValueError("relation must be 'connected' or 'unconnected'")
    ds = np.linspace(0.0, float(dmax), nd)
    us = np.linspace(0.0, float(umax), nu)
    D, U = np.meshgrid(ds, us, indexing="ij")

    def evaluate(d, u):
        return model.sigma2 * model.correlation(_grid_separation(model, d, u, relation, weight, leaves))

    C = evaluate(D, U)
    grid = [(float(D[i, j]), float(U[i, j]), float(C[i, j])) for i in range(nd) for j in range(nu)]
    space = list(zip(ds.tolist(), evaluate(ds, np.zeros_like(ds)).tolist()))
    time = list(zip(us.tolist(), evaluate(np.zeros_like(us), us).tolist()))
    return grid, space, time


# -- I/O helpers --------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_rows(rows: Sequence[Sequence], header: Sequence[str], out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])


def _write_table(rows: Sequence[Sequence], header: Sequence[str], path: str | None) -> None:
    if path is None:
        _write_rows(rows, header, sys.stdout)
    else:
        with open(path, "w", newline="") as fh:
            _write_rows(rows, header, fh)


def _require_file(path: str) -> str:
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return path


def _read_targets(path: str) -> tuple[list[PointOnNetwork], np.ndarray, np.ndarray, np.ndarray | None]:
    """``site_edge,site_offset,time[,response][,cov1,...]``."""
    with open(_require_file(path), newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if header[:3] != ["site_edge", "site_offset", "time"]:
        raise ValueError("target CSV must start with site_edge,site_offset,time")
    has_y = len(header) > 3 and header[3] == "response"
    first_cov = 4 if has_y else 3
    sites = [PointOnNetwork(r[0].strip(), float(r[1])) for r in rows]
    times = np.array([float(r[2]) for r in rows])
    X = np.ones((len(rows), 1 + len(header) - first_cov))
    for j in range(first_cov, len(header)):
        X[:, 1 + j - first_cov] = [float(r[j]) for r in rows]
    y = np.array([float(r[3]) for r in rows]) if has_y else None
    return sites, times, X, y


# -- subcommands --------------------------------------------------------------


def _load(args) -> tuple[Network, Dataset, CovModel]:
    net = read_network(_require_file(args.network))
    data = Dataset.read_csv(net, _require_file(args.obs), metric=args.metric)
    model = parse_model_spec(args.model)
    if args.delta is not None and model.variant == "model3":
        model = model.with_params(delta=args.delta)
    model.validate(data.geometry.leaves if data.geometry.is_tree else None)
    return net, data, model


def _fit_config(args) -> FitConfig:
    return FitConfig(maxiter=args.maxiter, restarts=args.restarts)


def cmd_fit(args) -> int:
    net, data, model = _load(args)
    res = fit_ml(data, model, config=_fit_config(args))
    rows = [("spec", format_model_spec(res.model))]
    rows += [(k, v) for k, v in res.row().items()]
    _write_table(rows, ("key", "value"), args.out)
    return 0


def cmd_predict(args) -> int:
    net, data, model = _load(args)
    sites, times, X0, y = _read_targets(args.targets)
    pred = krige(data, model, sites, times, X0, observed=y)
    header = ["site_edge", "site_offset", "time", "mean", "variance", "sd"]
    rows = []
    for k, (p, t) in enumerate(zip(sites, times)):
        row = [p.edge, p.offset, float(t), pred.mean[k], pred.variance[k], pred.sd[k]]
        if y is not None:
            row += [y[k], pred.crps[k]]
        rows.append(row)
    if y is not None:
        header += ["response", "crps"]
    _write_table(rows, header, args.out)
    return 0


def cmd_cv(args) -> int:
    net, data, model = _load(args)
    res = cross_validate(data, model, k=args.folds, seed=args.seed, config=_fit_config(args))
    rows = [[r[h] for h in ("fold", "n_train", "n_test", "LL", "BIC", "RMSPE", "CRPS")] for r in res.rows()]
    _write_table(rows, ("fold", "n_train", "n_test", "LL", "BIC", "RMSPE", "CRPS"), args.out)
    return 0


def cmd_simulate(args) -> int:
    net = read_network(_require_file(args.network))
    model = parse_model_spec(args.model)
    if args.sites is not None:
        sites, _, _, _ = _read_targets(args.sites)
        # one entry per distinct location
        seen, uniq = set(), []
        for p in sites:
            if net.point_key(p) not in seen:
                seen.add(net.point_key(p))
                uniq.append(p)
        sites = uniq
    else:
        sites = random_points(net, args.n_sites, substream(args.seed, "sites"))
    times = np.arange(args.n_times, dtype=float)
    field_seed = int(substream(args.seed, "field").integers(2**63))
    z = simulate(net, sites, times, model, field_seed, metric=args.metric) + args.mean
    rows = []
    for k, p in enumerate(sites):
        for j, t in enumerate(times):
            rows.append([p.edge, p.offset, t, z[k * len(times) + j]])
    _write_table(rows, ("site_edge", "site_offset", "time", "response"), args.out)
    return 0


def cmd_validate(args) -> int:
    checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    net = read_network(_require_file(args.network)) if args.network else None
    model = parse_model_spec(args.model) if args.model else None
    leaves = args.leaves if args.leaves is not None else (net.leaf_count if net is not None and net.is_tree else None)
    if model is not None:
        model.validate(leaves)
    reports: list[ValidityReport] = []
    for c in checks:
        if c == "pd":
            if model is None:
                raise ValueError("check 'pd' needs --model")
            reports.append(check_pd(model, net, n_instances=args.instances, seed=args.seed))
        elif c == "cnd":
            if args.psi:
                psi = parse_scalar_spec(args.psi)
            elif model is not None and model.variant == "gneiting":
                psi = model.scalar_families()[1]
            else:
                raise ValueError("check 'cnd' needs --psi or a gneiting --model")
            reports.append(check_cnd(psi, net, n_instances=args.instances, seed=args.seed))
        elif c == "corollary1c":
            if model is None or model.variant != "model3":
                raise ValueError("check 'corollary1c' needs a model3 --model")
            if leaves is None:
                raise ValueError("check 'corollary1c' needs --leaves or a tree --network")
            p = model.params
            delta = delta_lower_bound(leaves) if math.isnan(p["delta"]) else p["delta"]
            profile = lambda t: np.maximum(1.0 - np.asarray(t) ** p["nu"], 0.0) ** delta
            reports.append(check_corollary1c(profile, leaves))
        else:
            raise ValueError(f"unknown check {c!r}; choose from pd, cnd, corollary1c")
    rows = [list(r.row().values()) for r in reports]
    header = list(reports[0].row()) if reports else ["check"]
    buf = io.StringIO()
    _write_rows(rows, header, buf)
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    for r in reports:
        print(r, file=sys.stderr)
    return 0 if all(r.passed for r in reports) else 2


def cmd_surface(args) -> int:
    model = parse_model_spec(args.model)
    res = tuple(args.res) if len(args.res) == 2 else args.res[0]
    grid, space, time = emit_surface(model, args.dmax, args.umax, res, args.relation, args.weight, args.leaves)
    if args.out is None:
        _write_table(grid, ("d", "u", "C"), None)
        return 0
    stem = Path(args.out)
    _write_table(grid, ("d", "u", "C"), str(stem))
    _write_table(space, ("d", "C"), str(stem.with_name(stem.stem + "_space.csv")))
    _write_table(time, ("u", "C"), str(stem.with_name(stem.stem + "_time.csv")))
    return 0


# -- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="streamcov", description="Space-time covariance models on stream networks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(sp):
        sp.add_argument("--network", required=True, help="network file (OUTLET / E lines)")
        sp.add_argument("--obs", required=True, help="CSV site_edge,site_offset,time,response[,cov...]")
        sp.add_argument("--model", required=True, help="model spec, e.g. 'model5:theta1=10;nugget=0.1'")
        sp.add_argument("--metric", default="auto", choices=("auto", "geodesic", "resistance"))
        sp.add_argument("--delta", type=float, default=None, help="override model3 delta")
        sp.add_argument("--maxiter", type=int, default=3000)
        sp.add_argument("--restarts", type=int, default=2)
        sp.add_argument("--out", default=None, help="output CSV (default stdout)")

    sp = sub.add_parser("fit", help="maximum likelihood fit")
    data_args(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("predict", help="universal kriging at target records")
    data_args(sp)
    sp.add_argument("--targets", required=True, help="CSV site_edge,site_offset,time[,response][,cov...]")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("cv", help="k-fold cross-validation over sites")
    data_args(sp)
    sp.add_argument("--folds", type=int, default=8)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_cv)

    sp = sub.add_parser("simulate", help="simulate a Gaussian field")
    sp.add_argument("--network", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sites", default=None, help="CSV of site locations (default: random)")
    sp.add_argument("--n-sites", type=int, default=20)
    sp.add_argument("--n-times", type=int, default=5)
    sp.add_argument("--mean", type=float, default=0.0)
    sp.add_argument("--metric", default="auto", choices=("auto", "geodesic", "resistance"))
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("validate", help="randomised validity checks")
    sp.add_argument("--checks", default="pd", help="comma list of pd, cnd, corollary1c")
    sp.add_argument("--model", default=None)
    sp.add_argument("--psi", default=None, help="Bernstein function for cnd, e.g. 'BF_PowerPlusBeta:lam=0.5,beta=2'")
    sp.add_argument("--network", default=None, help="fixed network (default: random trees)")
    sp.add_argument("--leaves", type=int, default=None)
    sp.add_argument("--instances", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("surface", help="covariance surface and marginals on a grid")
    sp.add_argument("--model", required=True)
    sp.add_argument("--dmax", type=float, default=5.0)
    sp.add_argument("--umax", type=float, default=5.0)
    sp.add_argument("--res", type=int, nargs="+", default=[51], help="points per axis (one or two values)")
    sp.add_argument("--relation", default="connected", choices=("connected", "unconnected"))
    sp.add_argument("--weight", type=float, default=1.0, help="tail-up weight for connected pairs")
    sp.add_argument("--leaves", type=int, default=None, help="leaf count for model3 without delta")
    sp.add_argument("--out", default=None, help="grid CSV; marginals go to <stem>_space.csv / <stem>_time.csv")
    sp.set_defaults(func=cmd_surface)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except (StreamCovError, ValueError, ArithmeticError, OSError, KeyError) as exc:
        print(f"streamcov {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
