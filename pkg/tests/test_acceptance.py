"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (lines are collected in the
"acceptance criteria" summary section) or ``python tests/test_acceptance.py``.
"""

import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.special import ndtri

sys.path.insert(0, str(Path(__file__).parent))

from oracles import brute_force_barycenter_3  # noqa: E402
from otstat import (  # noqa: E402
    BarycenterConfig,
    Grid,
    QuantileCurve,
    SinkhornConfig,
    barycenter_1d_order_stats,
    barycenter_1d_quantile,
    clamp_interior,
    cost_matrix,
    empirical_measure,
    exact_w2_grid,
    exp_map,
    grid_measure,
    gpca,
    lipschitz_constant,
    log_map,
    log_pca,
    measure_from_quantile,
    quantile_curve,
    quantile_levels,
    sinkhorn_barycenter,
    sinkhorn_divergence,
    w2_1d,
    w2_1d_squared,
)
from otstat.cli import main  # noqa: E402
from otstat.experiments import (  # noqa: E402
    AnalyticDistribution,
    RandomMeasureFamily,
    j2_functional,
    rate_experiment,
)


def gaussian(m, s, M):
    return measure_from_quantile(QuantileCurve(m + s * ndtri(quantile_levels(M))))


def test_criterion_01_oracle_equivalence_1d(acceptance):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        N = int(rng.integers(2, 31))
        g = Grid.line(0, 1, N)
        r = grid_measure(g, rng.dirichlet(np.ones(N)))
        q = grid_measure(g, rng.dirichlet(np.ones(N)))
        exact, _ = exact_w2_grid(r, q, cost_matrix(g))
        worst = max(worst, abs(w2_1d_squared(r.to_discrete(), q.to_discrete()) - exact))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5
    acceptance(1, ok, f"max |w2_1d^2 - exact| = {worst:.2e} (<= 1e-9), {elapsed:.2f} s (< 5 s)")
    assert ok


def test_criterion_02_gaussian_closed_form(acceptance):
    d = w2_1d(gaussian(0, 1, 10_000), gaussian(2, 3, 10_000))
    err = abs(d - np.sqrt(8))
    ok = err <= 1e-3
    acceptance(2, ok, f"w2 = {d:.6f}, |w2 - sqrt(8)| = {err:.2e} (<= 1e-3)")
    assert ok


def random_grid(rng):
    if rng.random() < 0.5:
        return Grid.line(0, 1, int(rng.integers(4, 33)))
    a = int(rng.integers(2, 6))
    b = int(rng.integers(2, 32 // a + 1))
    return Grid((0, 0), (1, 1), (a, b))


def test_criterion_03_entropic_consistency(acceptance):
    rng = np.random.default_rng(3)
    worst, monotone, all_conv = 0.0, True, True
    for _ in range(20):
        g = random_grid(rng)
        C = cost_matrix(g)
        r = grid_measure(g, rng.dirichlet(np.ones(g.size)))
        q = grid_measure(g, rng.dirichlet(np.ones(g.size)))
        exact, _ = exact_w2_grid(r, q, C)
        eps = 1e-3 * np.median(C.matrix[C.matrix > 0])
        res = sinkhorn_divergence(r, q, C, SinkhornConfig(eps, tol=1e-9, max_iter=100_000))
        all_conv &= res.converged
        worst = max(worst, abs(res.transport_cost - exact) / exact)
        vals = [sinkhorn_divergence(r, q, C, SinkhornConfig(e, tol=1e-10, max_iter=100_000)).value
                for e in eps * np.logspace(0, 3, 8)]
        monotone &= bool(np.all(np.diff(vals) <= 1e-9))
    ok = worst <= 0.01 and monotone and all_conv
    acceptance(3, ok, f"max relative gap {worst:.2e} (<= 1e-2), non-increasing in eps: "
                      f"{monotone}, converged: {all_conv}")
    assert ok


def test_criterion_04_convexity_and_lipschitz(acceptance):
    rng = np.random.default_rng(4)
    slack, margin = np.inf, np.inf
    for _ in range(100):
        N = int(rng.integers(2, 16))
        g = Grid.line(0, 1, N)
        C = cost_matrix(g)
        eps = float(10 ** rng.uniform(-1.5, 0.5))
        r1, r2, q = (rng.dirichlet(np.ones(N)) for _ in range(3))
        cfg = SinkhornConfig(eps, tol=1e-13, max_iter=200_000)

        def W(r):
            return sinkhorn_divergence(grid_measure(g, r), grid_measure(g, q), C, cfg).value

        mid = W(0.5 * (r1 + r2))
        slack = min(slack, 0.5 * W(r1) + 0.5 * W(r2) - eps / 8 * np.sum((r1 - r2) ** 2) - mid)
        rho = float(rng.uniform(0.01, 0.99)) / N
        a = (1 - rho * N) * rng.dirichlet(np.ones(N)) + rho
        b = (1 - rho * N) * rng.dirichlet(np.ones(N)) + rho
        L = lipschitz_constant(rho, eps, C)
        margin = min(margin, L * np.linalg.norm(a - b) - abs(W(a) - W(b)))
    ok = slack >= -1e-8 and margin >= 0
    acceptance(4, ok, f"min convexity slack {slack:.2e} (>= -1e-8), "
                      f"min Lipschitz margin {margin:.2e} (>= 0)")
    assert ok


def test_criterion_05_barycenter_oracle(acceptance):
    t0 = time.perf_counter()
    g = Grid.line(0, 2, 3)
    C = cost_matrix(g)
    rho, eps = 1e-3, 0.5
    ms = [grid_measure(g, [0.7, 0.2, 0.1]), grid_measure(g, [0.1, 0.3, 0.6])]
    res = sinkhorn_barycenter(ms, C, BarycenterConfig(eps, rho, tol=1e-13, max_iter=200_000,
                                                      log_domain="off"))
    Q = [clamp_interior(m, rho).weights for m in ms]
    ref = brute_force_barycenter_3(Q, [0.5, 0.5], C.matrix, eps)
    dist = float(np.abs(res.measure.weights - ref).max())
    elapsed = time.perf_counter() - t0
    ok = dist <= 1e-4 and elapsed < 60
    acceptance(5, ok, f"L_inf to brute-force minimizer {dist:.2e} (<= 1e-4), "
                      f"{elapsed:.1f} s (< 60 s)")
    assert ok


def test_criterion_06_barycenter_geometry(acceptance):
    rng = np.random.default_rng(6)
    geo, ident = 0.0, 0.0
    for _ in range(100):
        p1, p2 = rng.integers(1, 13, size=2)
        mu = empirical_measure(rng.normal(size=p1) * 3)
        nu = empirical_measure(rng.normal(size=p2) + 2)
        # M divisible by both sample sizes makes the level discretization exact
        M = int(np.lcm(p1, p2)) * 4
        bar = barycenter_1d_quantile([mu, nu], M=M)
        half = 0.5 * w2_1d(mu, nu)
        geo = max(geo, abs(w2_1d(bar, mu) - half), abs(w2_1d(bar, nu) - half))
        n, p = rng.integers(1, 6), int(rng.integers(2, 20))
        X = rng.normal(size=(n, p))
        a = barycenter_1d_order_stats(X)
        b = barycenter_1d_quantile([empirical_measure(x) for x in X], M=p)
        ident = max(ident, float(np.abs(quantile_curve(a, p).values
                                        - quantile_curve(b, p).values).max()))
    ok = geo <= 1e-6 and ident <= 1e-12
    acceptance(6, ok, f"midpoint distance error {geo:.2e} (<= 1e-6), "
                      f"order-statistics identity error {ident:.2e} (<= 1e-12)")
    assert ok


def test_criterion_07_rate(acceptance):
    t0 = time.perf_counter()
    family = RandomMeasureFamily("gaussian", mean_range=(0.0, 4.0), std_range=(1.0, 1.0))
    rep = rate_experiment(family, (8, 16, 32, 64, 128), (10_000,), 64, 0)
    elapsed = time.perf_counter() - t0
    ok = -1.25 <= rep.slope_n <= -0.75 and rep.bound_holds(3.0) and elapsed < 600
    acceptance(7, ok, f"slope vs n {rep.slope_n:.3f} (in [-1.25, -0.75]), risk bound within "
                      f"3 SE: {rep.bound_holds(3.0)}, {elapsed:.1f} s (< 600 s)")
    assert ok


def test_criterion_08_j2(acceptance):
    u, u_div = j2_functional(AnalyticDistribution("uniform", (0, 1)))
    _, g_div = j2_functional(AnalyticDistribution("gaussian", (0, 1)))
    ok = abs(u - 1 / 6) <= 1e-9 and not u_div and g_div
    acceptance(8, ok, f"uniform |J2 - 1/6| = {abs(u - 1 / 6):.2e} (<= 1e-9), "
                      f"gaussian flagged divergent: {g_div}")
    assert ok


def test_criterion_09_gpca(acceptance):
    rng = np.random.default_rng(9)
    M = 400
    m, s = rng.uniform(-2, 2, 50), rng.uniform(0.5, 2, 50)
    ms = [gaussian(a, b, M) for a, b in zip(m, s)]
    free = log_pca(ms, 2, M)
    res = gpca(ms, 2, M)
    captured = float(free.explained.sum())
    c1 = abs(np.corrcoef(res.scores[:, 0], m)[0, 1])
    c2 = abs(np.corrcoef(res.scores[:, 1], s)[0, 1])
    bar = res.barycenter
    ratio = max(w2_1d(exp_map(bar, log_map(bar, nu, M)), nu) / (np.ptp(nu.points) / M)
                for nu in ms)
    ok = captured >= 0.999 and c1 >= 0.99 and c2 >= 0.99 and ratio <= 1
    acceptance(9, ok, f"captured {captured:.6f} (>= 0.999), |corr| {c1:.4f} and {c2:.4f} "
                      f"(>= 0.99), round trip error / (diameter/M) = {ratio:.2e} (<= 1)")
    assert ok


SELECT_ARGS = ["select-eps", "--family", "gaussian-mixture-2", "--n", "15", "--p", "50",
               "--grid-min", "-8", "--grid-max", "8", "--grid-size", "256",
               "--eps-grid", "0.18,1.94,9.5", "--seed", "0", "--format", "json"]


def test_criterion_10_gl_selection(acceptance, tmp_path):
    t0 = time.perf_counter()
    codes = [main(SELECT_ARGS + ["--out", str(tmp_path / f"run{k}.json")]) for k in (1, 2)]
    elapsed = time.perf_counter() - t0
    a, b = ((tmp_path / f"run{k}.json").read_bytes() for k in (1, 2))
    table = json.loads(a)["table"]
    full = [r["eps"] for r in table] == [0.18, 1.94, 9.5] and all(
        {"bias", "variance", "score", "iterations"} <= set(r) for r in table)
    ok = codes == [0, 0] and a == b and full and elapsed < 600
    acceptance(10, ok, f"exit codes {codes}, byte-identical: {a == b}, full table: {full}, "
                       f"eps_hat {json.loads(a)['eps_hat']}, {elapsed / 2:.1f} s per run (< 300 s)")
    assert ok


def cli_cases(tmp_path):
    src = tmp_path / "in.csv"
    rng = np.random.default_rng(11)
    lines = ["measure_id,x1"] + [f"m{i},{x:.17g}" for i in range(4) for x in rng.normal(i, 1, 30)]
    src.write_text("\n".join(lines) + "\n")
    inp = ["--input", str(src)]
    grid = ["--grid-min", "-4", "--grid-max", "8", "--grid-size", "24"]
    cases = {
        "dist": ["dist", *inp],
        "dist-exact": ["dist", *inp, *grid, "--exact-grid"],
        "geodesic": ["geodesic", *inp, "--levels", "50"],
        "sinkhorn": ["sinkhorn", *inp, *grid, "--eps", "0.5"],
        "barycenter": ["barycenter", *inp, "--levels", "50"],
        "barycenter-sinkhorn": ["barycenter", *inp, *grid, "--method", "sinkhorn",
                                "--eps", "0.5"],
        "select-eps": ["select-eps", *inp, *grid, "--eps-grid", "0.5,1,2"],
        "gpca": ["gpca", *inp, "--levels", "60"],
        "rates": ["rates", "--n-grid", "2,4", "--p-grid", "50", "--replicates", "4",
                  "--levels", "64", "--seed", "3"],
        "j2": ["j2", "--dist", "triangular", "--params", "0,0.3,1"],
        "synthetic": ["barycenter", "--family", "gaussian-mixture-2", "--n", "5", "--p", "40",
                      "--seed", "5", "--method", "order-stats"],
    }
    return cases


def test_criterion_11_cli_determinism(acceptance, tmp_path):
    mismatched, failed, runs = [], [], 0
    for name, args in cli_cases(tmp_path).items():
        for fmt in ("csv", "json", "svg"):
            outs = []
            for k in (1, 2):
                out = tmp_path / f"{name}.{fmt}.{k}"
                code = main(args + ["--format", fmt, "--out", str(out)])
                runs += 1
                if code != 0 or not out.exists():
                    failed.append(f"{name}/{fmt}")
                    continue
                files = sorted(out.iterdir()) if out.is_dir() else [out]
                outs.append([f.read_bytes() for f in files])
            if outs[0] != outs[1]:
                mismatched.append(f"{name}/{fmt}")
    ok = not mismatched and not failed
    acceptance(11, ok, f"{runs} runs over 8 subcommands x 3 formats, mismatched: "
                       f"{mismatched or 'none'}, failed: {sorted(set(failed)) or 'none'}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
