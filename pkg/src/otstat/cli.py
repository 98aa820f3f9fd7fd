"""Command-line interface: ``otstat <subcommand> [flags]``.

Exit codes: 0 success, 2 input or validation error, 3 non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .barycenters import (
    BarycenterConfig,
    GLConfig,
    barycenter_1d_order_stats,
    barycenter_1d_quantile,
    gl_select_epsilon,
    sinkhorn_barycenter,
    smoothed_barycenter_1d,
)
from .exact import ConvergenceError, exact_w2_grid, geodesic_1d, w2_1d
from .experiments import (
    FAMILIES,
    AnalyticDistribution,
    RandomMeasureFamily,
    emit_report,
    j2_functional,
    rate_experiment,
    sample_family,
)
from .gpca import gpca, log_pca
from .measures import Grid, bin_to_grid, empirical_measure, quantile_curve, quantile_levels
from .sinkhorn import SinkhornConfig, SinkhornOverflow, cost_matrix, sinkhorn_divergence

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 2, 3


class NotConverged(Exception):
    """Raised after output is written when a solver hit its iteration cap."""


# --- argument helpers ---------------------------------------------------------


def _floats(text, name, count=None):
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if not vals or (count is not None and len(vals) not in count):
        raise ValueError(f"{name}: wrong number of values in {text!r}")
    return vals


def _ints(text, name):
    vals = _floats(text, name)
    if any(v != int(v) for v in vals):
        raise ValueError(f"{name}: expected integers, got {text!r}")
    return [int(v) for v in vals]


def _family(args) -> RandomMeasureFamily:
    if args.family == "gaussian-mixture-2":
        fam = RandomMeasureFamily.two_bumps()
    else:
        fam = RandomMeasureFamily(args.family)
    changes = {}
    if getattr(args, "mean_range", None):
        changes["mean_range"] = tuple(_floats(args.mean_range, "--mean-range", (2,)))
    if getattr(args, "std_range", None):
        changes["std_range"] = tuple(_floats(args.std_range, "--std-range", (2,)))
    if changes:
        fam = dataclasses.replace(fam, **changes)
    return fam


def _clouds(args) -> dict:
    """Point clouds from --input, or a seeded synthetic sample."""
    if args.input:
        return fileio.read_point_clouds(args.input)
    X = sample_family(_family(args), args.n, args.p, args.seed)
    return {f"u{i}": x[:, None] for i, x in enumerate(X)}


def _measures(clouds):
    return [empirical_measure(x) for x in clouds.values()]


def _one_dim(clouds, what):
    d = {x.shape[1] for x in clouds.values()}
    if d != {1}:
        raise ValueError(f"{what} needs 1D data")


def _grid(args, clouds) -> Grid:
    d = next(iter(clouds.values())).shape[1]
    pts = np.concatenate(list(clouds.values()))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.05 * np.maximum(hi - lo, 1e-9)
    mins = _floats(args.grid_min, "--grid-min", (1, d)) if args.grid_min is not None else lo - pad
    maxs = _floats(args.grid_max, "--grid-max", (1, d)) if args.grid_max is not None else hi + pad
    if args.grid_size is not None:
        counts = _ints(args.grid_size, "--grid-size")
    else:
        counts = [64] if d == 1 else [16]
    return Grid(np.broadcast_to(mins, d), np.broadcast_to(maxs, d), np.broadcast_to(counts, d))


def _grid_measures(args, clouds):
    grid = _grid(args, clouds)
    return grid, [bin_to_grid(m, grid) for m in _measures(clouds)]


def _need(clouds, k, what):
    if len(clouds) < k:
        raise ValueError(f"{what} needs at least {k} measures, got {len(clouds)}")


def _weights(args, n):
    if not getattr(args, "weights", None):
        return None
    w = np.array(_floats(args.weights, "--weights"))
    if w.size != n or np.any(w < 0) or w.sum() <= 0:
        raise ValueError(f"--weights must hold {n} nonnegative values, not all zero")
    return w / w.sum()


def _default_rho(N):
    return min(1e-4, 0.01 / N)


def _measure_rows(nodes, weights):
    nodes = np.asarray(nodes)
    if nodes.ndim == 2 and nodes.shape[1] == 1:
        nodes = nodes[:, 0]
    labels = nodes if nodes.ndim == 1 else np.arange(len(weights))
    return list(zip(labels, weights))


def _write_measure(args, nodes, weights, extra=None, title="measure"):
    if args.format == "csv":
        fileio.write_measure(args.out, nodes, weights)
    elif args.format == "json":
        rows = _measure_rows(nodes, weights)
        obj = {"nodes": [r[0] for r in rows], "weights": [r[1] for r in rows]}
        fileio.write_json(args.out, {**(extra or {}), "measure": obj})
    else:
        rows = _measure_rows(nodes, weights)
        fileio.svg_plot(args.out, [(title, [r[0] for r in rows], [r[1] for r in rows])],
                        title=title, xlabel="node", ylabel="weight")


# --- subcommands ----------------------------------------------------------------


def cmd_dist(args):
    clouds = _clouds(args)
    _need(clouds, 2, "dist")
    ids = list(clouds)
    d = next(iter(clouds.values())).shape[1]
    exact = args.exact_grid or d == 2
    if exact:
        grid, ms = _grid_measures(args, clouds)
        C = cost_matrix(grid)
    else:
        ms = _measures(clouds)
    rows = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            sq = exact_w2_grid(ms[i], ms[j], C)[0] if exact else w2_1d(ms[i], ms[j]) ** 2
            rows.append((ids[i], ids[j], float(np.sqrt(max(sq, 0.0))), sq))
    method = "exact-grid" if exact else "quantile"
    if args.format == "csv":
        fileio.write_csv(args.out, ["measure_a", "measure_b", "w2", "w2_squared"], rows)
    elif args.format == "json":
        fileio.write_json(args.out, {"method": method, "pairs": [
            {"measure_a": a, "measure_b": b, "w2": w, "w2_squared": s} for a, b, w, s in rows]})
    else:
        _one_dim(clouds, "svg output of dist")
        if exact:
            ms = [m.to_discrete() for m in ms]
        alpha = quantile_levels(args.levels)
        fileio.svg_plot(args.out, [(k, alpha, quantile_curve(m, args.levels).values)
                                   for k, m in zip(ids, ms)],
                        title="Quantile functions", xlabel="alpha", ylabel="quantile")


def cmd_geodesic(args):
    clouds = _clouds(args)
    _one_dim(clouds, "geodesic")
    _need(clouds, 2, "geodesic")
    mu, nu = _measures(clouds)[:2]
    ts = _floats(args.t, "--t")
    path = [(t, geodesic_1d(mu, nu, t, args.levels)) for t in ts]
    if args.format == "csv":
        rows = [(t, x, w) for t, m in path for x, w in zip(m.points, m.weights)]
        fileio.write_csv(args.out, ["t", "node", "weight"], rows)
    elif args.format == "json":
        fileio.write_json(args.out, {"levels": args.levels, "path": [
            {"t": t, "nodes": m.points, "weights": m.weights} for t, m in path]})
    else:
        alpha = quantile_levels(args.levels)
        fileio.svg_plot(args.out, [(f"t={t:g}", alpha, quantile_curve(m, args.levels).values)
                                   for t, m in path],
                        title="Geodesic quantile functions", xlabel="alpha", ylabel="quantile")


def cmd_sinkhorn(args):
    clouds = _clouds(args)
    _need(clouds, 2, "sinkhorn")
    grid, ms = _grid_measures(args, clouds)
    C = cost_matrix(grid)
    cfg = SinkhornConfig(args.eps, tol=args.tol, max_iter=args.max_iter, log_domain=args.log_domain)
    res = sinkhorn_divergence(ms[0], ms[1], C, cfg)
    out = {"value": res.value, "iterations": res.iterations, "marginal_err": res.marginal_err,
           "eps": res.eps, "converged": res.converged, "transport_cost": res.transport_cost}
    if args.format == "json":
        fileio.write_json(args.out, out)
    elif args.format == "csv":
        fileio.write_csv(args.out, list(out), [[int(v) if isinstance(v, bool) else v
                                                for v in out.values()]])
    else:
        if grid.dim != 1:
            raise ValueError("svg output of sinkhorn needs a 1D grid")
        x = grid.nodes[:, 0]
        U = res.plan.matrix
        fileio.svg_plot(args.out, [("r", x, ms[0].weights), ("q", x, ms[1].weights),
                                   ("plan column sums", x, U.sum(axis=0))],
                        title=f"Sinkhorn eps={args.eps:g}", xlabel="node", ylabel="weight")
    if not res.converged:
        raise NotConverged(f"marginal error {res.marginal_err:.3g} after {res.iterations} iterations")


def cmd_barycenter(args):
    clouds = _clouds(args)
    weights = _weights(args, len(clouds))
    if args.method == "sinkhorn":
        grid, ms = _grid_measures(args, clouds)
        rho = args.rho if args.rho is not None else _default_rho(grid.size)
        if args.eps is None:
            raise ValueError("--eps is required for --method sinkhorn")
        cfg = BarycenterConfig(args.eps, rho, None if weights is None else tuple(weights),
                               tol=args.tol, max_iter=args.max_iter)
        res = sinkhorn_barycenter(ms, cost_matrix(grid), cfg)
        extra = {"method": "sinkhorn", "eps": args.eps, "rho": rho, "iterations": res.iterations,
                 "converged": res.converged, "change": res.change, "interior": res.interior}
        _write_measure(args, grid.nodes, res.measure.weights, extra, "Sinkhorn barycenter")
        if not res.converged:
            raise NotConverged(f"iterate change {res.change:.3g} after {res.iterations} iterations")
        return
    _one_dim(clouds, f"--method {args.method}")
    if args.method == "quantile":
        bar = barycenter_1d_quantile(_measures(clouds), weights, args.levels)
    elif args.method == "order-stats":
        if weights is not None:
            raise ValueError("--weights is not supported by --method order-stats")
        bar = barycenter_1d_order_stats([x[:, 0] for x in clouds.values()])
    else:
        if args.bandwidth is None:
            raise ValueError("--bandwidth is required for --method kde")
        h = _floats(args.bandwidth, "--bandwidth", (1, len(clouds)))
        bar = smoothed_barycenter_1d([x[:, 0] for x in clouds.values()],
                                     h if len(h) > 1 else h[0], args.levels, weights)
    _write_measure(args, bar.points, bar.weights, {"method": args.method},
                   f"{args.method} barycenter")


def cmd_select_eps(args):
    clouds = _clouds(args)
    grid, ms = _grid_measures(args, clouds)
    rho = args.rho if args.rho is not None else _default_rho(grid.size)
    p = min(x.shape[0] for x in clouds.values())
    glcfg = GLConfig(tuple(_floats(args.eps_grid, "--eps-grid")), rho, len(ms), p, grid.size,
                     kappa=args.kappa, tol=args.tol, max_iter=args.max_iter)
    sel = gl_select_epsilon(ms, cost_matrix(grid), glcfg)
    if args.format == "json":
        fileio.write_json(args.out, {"eps_hat": sel.eps_hat, "rho": rho, "kappa": args.kappa,
                                     "n": len(ms), "p": p, "N": grid.size, "table": sel.table})
    elif args.format == "csv":
        fileio.write_csv(args.out, ["eps", "bias", "variance", "score", "iterations"],
                         [(r.eps, r.bias, r.variance, r.score, r.iterations) for r in sel.table])
    else:
        if grid.dim != 1:
            raise ValueError("svg output of select-eps needs a 1D grid")
        x = grid.nodes[:, 0]
        fileio.svg_plot(args.out, [(f"eps={e:g}", x, b.measure.weights)
                                   for e, b in sel.barycenters.items()],
                        title=f"Sinkhorn barycenters (selected eps={sel.eps_hat:g})",
                        xlabel="node", ylabel="weight")


def cmd_gpca(args):
    clouds = _clouds(args)
    _one_dim(clouds, "gpca")
    ms = _measures(clouds)
    if args.method == "log":
        res = log_pca(ms, args.components, args.levels)
    else:
        res = gpca(ms, args.components, args.levels, step=args.step, iters=args.iters)
    if args.out == "-":
        raise ValueError("gpca writes several files; --out must name a directory")
    out = Path(args.out)
    alpha = quantile_levels(args.levels)
    Phi = res.component_matrix()
    fileio.write_csv(out / "components.csv",
                     ["alpha", "base"] + [f"v{k + 1}" for k in range(res.K)],
                     np.column_stack([alpha, res.base.values, Phi.T]))
    fileio.write_csv(out / "scores.csv", ["measure_id"] + [f"t{k + 1}" for k in range(res.K)],
                     [[key, *row] for key, row in zip(clouds, res.scores)])
    fileio.write_json(out / "variance.json", {
        "method": args.method, "explained": res.explained, "total_variance": res.total_variance,
        "t_range": res.t_range, "converged": res.converged, "iterations": res.iterations})
    if args.format == "svg":
        fileio.svg_plot(out / "components.svg",
                        [(f"v{k + 1}", alpha, Phi[k]) for k in range(res.K)],
                        title="Principal directions", xlabel="alpha", ylabel="displacement")
    if not res.converged:
        raise NotConverged(f"gpca stopped after {res.iterations} iterations")


def cmd_rates(args):
    if args.input:
        raise ValueError("rates samples its own data; --input is not used")
    report = rate_experiment(_family(args), _ints(args.n_grid, "--n-grid"),
                             _ints(args.p_grid, "--p-grid"), args.replicates, args.seed,
                             M=args.levels)
    emit_report(report, args.format, args.out)


def cmd_j2(args):
    if args.input:
        raise ValueError("j2 takes an analytic distribution; --input is not used")
    dist = AnalyticDistribution(args.dist, tuple(_floats(args.params, "--params")))
    trunc = None
    if args.lo is not None or args.hi is not None:
        if args.lo is None or args.hi is None:
            raise ValueError("give both --lo and --hi")
        trunc = (args.lo, args.hi)
    value, diverged = j2_functional(dist, trunc)
    out = {"dist": args.dist, "params": list(dist.params), "value": value, "diverged": diverged}
    if args.format == "json":
        fileio.write_json(args.out, out)
    elif args.format == "csv":
        fileio.write_csv(args.out, ["dist", "value", "diverged"],
                         [[args.dist, value, str(diverged).lower()]])
    else:
        lo, hi = trunc or (dist.ppf(1e-6), dist.ppf(1 - 1e-6))
        x = np.linspace(lo, hi, 401)[1:-1]
        F, f = dist.cdf(x), dist.pdf(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            y = np.where(f > 0, F * (1 - F) / f, 0.0)
        fileio.svg_plot(args.out, [("F(1-F)/f", x, y)], title=f"J2 integrand, {args.dist}",
                        xlabel="x", ylabel="integrand")


# --- parser -------------------------------------------------------------------------

_DEFAULT_FORMAT = {"dist": "json", "geodesic": "csv", "sinkhorn": "json", "barycenter": "csv",
                   "select-eps": "json", "gpca": "csv", "rates": "csv", "j2": "json"}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    g = shared.add_argument_group("shared options")
    g.add_argument("--input", help="point-cloud CSV with header measure_id,x1[,x2]")
    g.add_argument("--grid-min", help="grid lower bound per axis (comma list)")
    g.add_argument("--grid-max", help="grid upper bound per axis (comma list)")
    g.add_argument("--grid-size", help="nodes per axis (comma list); default 64 in 1D, 16x16 in 2D")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="-", help="output path ('-' for stdout)")
    g.add_argument("--format", choices=("csv", "json", "svg"))
    s = shared.add_argument_group("synthetic input (used when --input is absent)")
    s.add_argument("--family", choices=FAMILIES, default="gaussian")
    s.add_argument("--n", type=int, default=10, help="number of measures")
    s.add_argument("--p", type=int, default=100, help="points per measure")
    s.add_argument("--mean-range", help="low,high of the random mean")
    s.add_argument("--std-range", help="low,high of the random std")

    parser = argparse.ArgumentParser(prog="otstat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", parents=[shared], help="pairwise W2 distances")
    p.add_argument("--exact-grid", action="store_true",
                   help="bin to the grid and use the exact discrete solver (always on in 2D)")
    p.add_argument("--levels", type=int, default=1000, help="quantile levels for svg plots")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("geodesic", parents=[shared], help="1D displacement interpolation")
    p.add_argument("--t", default="0,0.25,0.5,0.75,1", help="comma list of times in [0, 1]")
    p.add_argument("--levels", type=int, default=1000)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("sinkhorn", parents=[shared], help="entropic transport between two measures")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--log-domain", choices=("auto", "on", "off"), default="auto")
    p.set_defaults(func=cmd_sinkhorn)

    p = sub.add_parser("barycenter", parents=[shared], help="barycenter of the input measures")
    p.add_argument("--method", choices=("quantile", "order-stats", "kde", "sinkhorn"),
                   default="quantile")
    p.add_argument("--eps", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--weights", help="comma list, one per measure")
    p.add_argument("--bandwidth", help="KDE bandwidth, one value or one per measure")
    p.add_argument("--levels", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=5000)
    p.set_defaults(func=cmd_barycenter)

    p = sub.add_parser("select-eps", parents=[shared], help="data-driven choice of eps")
    p.add_argument("--eps-grid", required=True, help="ascending comma list of candidates")
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--rho", type=float)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=5000)
    p.set_defaults(func=cmd_select_eps)

    p = sub.add_parser("gpca", parents=[shared], help="geodesic PCA of 1D measures")
    p.add_argument("--components", type=int, default=2)
    p.add_argument("--levels", type=int, default=200)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--method", choices=("gpca", "log"), default="gpca")
    p.set_defaults(func=cmd_gpca)

    p = sub.add_parser("rates", parents=[shared], help="Monte-Carlo risk of the 1D barycenter")
    p.add_argument("--n-grid", default="8,16,32,64,128")
    p.add_argument("--p-grid", default="10000")
    p.add_argument("--replicates", type=int, default=64)
    p.add_argument("--levels", type=int, default=1024, help="levels of the reference curve")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("j2", parents=[shared], help="the J2 functional of an analytic law")
    p.add_argument("--dist", choices=("uniform", "gaussian", "triangular"), required=True)
    p.add_argument("--params", required=True, help="uniform a,b | gaussian mean,std | "
                                                   "triangular a,mode,b")
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.set_defaults(func=cmd_j2)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = _DEFAULT_FORMAT[args.command]
    try:
        args.func(args)
    except (NotConverged, ConvergenceError, SinkhornOverflow) as exc:
        print(f"otstat: not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ValueError, OSError, KeyError) as exc:
        print(f"otstat: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
