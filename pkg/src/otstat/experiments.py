"""Synthetic random-measure families and the Monte-Carlo rate harness.

Randomness is keyed, not sequential: every (cell, replicate, unit) draws from
its own ``SeedSequence`` built from the root seed plus integer keys, so a
cell's result does not depend on which other cells were run or in what order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, stats
from scipy.special import erfcx, ndtr, ndtri
from scipy.stats import qmc

from .barycenters import barycenter_1d_order_stats
from .exact import w2_1d_squared
from .measures import DiscreteMeasure, QuantileCurve, quantile_levels

FAMILIES = ("gaussian", "gaussian-mixture-2", "location-family")

# stream tags keep unit draws and population draws apart
_UNITS, _POPULATION = 0, 1

# cap on reference-curve Monte-Carlo draws held in memory at once
_CHUNK = 4096


@dataclass(frozen=True)
class RandomMeasureFamily:
    """Law of a random 1D measure.

    gaussian
        N(m, s^2) with m ~ U(mean_range), s ~ U(std_range).
    gaussian-mixture-2
        w N(m1, s1^2) + (1 - w) N(m2, s2^2) with m1 ~ U(mean_range),
        m2 ~ U(mean_range2), s1, s2 ~ U(std_range) and w = mixture_weights[0].
    location-family
        N(c, s^2) with c ~ U(mean_range) and fixed s = std_range[0].
    """

    kind: str = "gaussian"
    mean_range: tuple = (0.0, 4.0)
    std_range: tuple = (1.0, 3.0)
    mean_range2: tuple = (1.0, 3.0)
    mixture_weights: tuple = (0.5, 0.5)

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"unknown family {self.kind!r}; choose from {FAMILIES}")
        for name in ("mean_range", "std_range", "mean_range2"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValueError(f"{name} must be (low, high) with low <= high")
        if self.std_range[0] <= 0:
            raise ValueError("std_range must be positive")
        w = np.asarray(self.mixture_weights, dtype=float)
        if w.shape != (2,) or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise ValueError("mixture_weights must be two nonnegative numbers summing to 1")

    @classmethod
    def two_bumps(cls) -> "RandomMeasureFamily":
        """Two-bump mixtures with random means and spreads."""
        return cls("gaussian-mixture-2", mean_range=(-3.0, -1.0), std_range=(0.4, 1.0),
                   mean_range2=(1.0, 3.0), mixture_weights=(0.5, 0.5))

    def n_params(self) -> int:
        return {"gaussian": 2, "gaussian-mixture-2": 4, "location-family": 1}[self.kind]

    def params_from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Map points of [0, 1]^k to parameter vectors (rows)."""
        u = np.atleast_2d(u)

        def scale(col, rng):
            return rng[0] + (rng[1] - rng[0]) * u[:, col]

        if self.kind == "gaussian":
            return np.stack([scale(0, self.mean_range), scale(1, self.std_range)], axis=1)
        if self.kind == "location-family":
            return scale(0, self.mean_range)[:, None]
        return np.stack([scale(0, self.mean_range), scale(1, self.mean_range2),
                         scale(2, self.std_range), scale(3, self.std_range)], axis=1)

    def draw_params(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        return self.params_from_uniform(rng.random((n, self.n_params())))

    def sample(self, params: np.ndarray, p: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            m, s = params
            return m + s * rng.standard_normal(p)
        if self.kind == "location-family":
            return params[0] + self.std_range[0] * rng.standard_normal(p)
        m1, m2, s1, s2 = params
        first = rng.random(p) < self.mixture_weights[0]
        z = rng.standard_normal(p)
        return np.where(first, m1 + s1 * z, m2 + s2 * z)

    def cdf(self, params: np.ndarray, x: np.ndarray) -> np.ndarray:
        """CDFs for a batch of parameter rows at points ``x`` -> (batch, len(x))."""
        P = np.atleast_2d(params)
        x = np.asarray(x)[None, :]
        if self.kind == "gaussian":
            return ndtr((x - P[:, :1]) / P[:, 1:2])
        if self.kind == "location-family":
            return ndtr((x - P[:, :1]) / self.std_range[0])
        w = self.mixture_weights[0]
        return w * ndtr((x - P[:, :1]) / P[:, 2:3]) + (1 - w) * ndtr((x - P[:, 1:2]) / P[:, 3:4])

    def quantile_stats(self):
        """(E m, E s, Var m, Var s, Cov(m, s)) of the location-scale parameters,
        for the families where F^- = m + s z is affine in the normal score."""
        lo, hi = self.mean_range
        Em, Vm = 0.5 * (lo + hi), (hi - lo) ** 2 / 12
        if self.kind == "gaussian":
            slo, shi = self.std_range
            return Em, 0.5 * (slo + shi), Vm, (shi - slo) ** 2 / 12, 0.0
        if self.kind == "location-family":
            return Em, self.std_range[0], Vm, 0.0, 0.0
        return None


def unit_rng(seed, *keys) -> np.random.Generator:
    """Generator for the stream identified by (seed, *keys)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


def draw_units(family: RandomMeasureFamily, n: int, p: int, seed, keys=()):
    """Draw n measures from ``family`` and p points from each.

    Returns (params, samples) with shapes (n, k) and (n, p).
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be at least 1")
    params, samples = [], []
    for i in range(n):
        rng = unit_rng(seed, _UNITS, *keys, i)
        theta = family.draw_params(rng)[0]
        params.append(theta)
        samples.append(family.sample(theta, p, rng))
    return np.array(params), np.array(samples)


def sample_family(family: RandomMeasureFamily, n: int, p: int, seed: int) -> np.ndarray:
    return draw_units(family, n, p, seed)[1]


def _mixture_quantiles(family, params, alpha, grid_size=513, newton=2):
    """Quantile curves for a batch of parameter rows: invert CDFs tabulated on
    a coarse common grid, then polish with Newton steps kept inside the
    bracketing grid cell."""
    P = np.atleast_2d(params)
    spread = max(abs(family.mean_range[0]), abs(family.mean_range[1]),
                 abs(family.mean_range2[0]), abs(family.mean_range2[1]))
    span = spread + 10 * family.std_range[1]
    x = np.linspace(-span, span, grid_size)
    F = family.cdf(P, x)
    # one increasing sequence over all rows so a single np.interp serves the batch
    offset = 2.0 * np.arange(P.shape[0])[:, None]
    xp = (F + offset).ravel()
    fp = np.broadcast_to(x, F.shape).ravel()
    Q = np.interp((alpha[None, :] + offset).ravel(), xp, fp).reshape(P.shape[0], alpha.size)
    h = x[1] - x[0]
    lo, hi = Q - h, Q + h
    for _ in range(newton):
        Fq = _batch_cdf(family, P, Q)
        fq = _batch_pdf(family, P, Q)
        Q = np.clip(Q - (Fq - alpha[None, :]) / np.maximum(fq, 1e-300), lo, hi)
    return Q


def _batch_cdf(family, P, X):
    w = family.mixture_weights[0]
    return (w * ndtr((X - P[:, :1]) / P[:, 2:3])
            + (1 - w) * ndtr((X - P[:, 1:2]) / P[:, 3:4]))


def _batch_pdf(family, P, X):
    w = family.mixture_weights[0]
    z1 = (X - P[:, :1]) / P[:, 2:3]
    z2 = (X - P[:, 1:2]) / P[:, 3:4]
    c = 1.0 / np.sqrt(2 * np.pi)
    return c * (w * np.exp(-0.5 * z1 ** 2) / P[:, 2:3] + (1 - w) * np.exp(-0.5 * z2 ** 2) / P[:, 3:4])


@dataclass(frozen=True)
class ReferenceBarycenter:
    curve: QuantileCurve
    method: str
    gaussian: Optional[tuple] = None  # (mean, std) when the reference is N(mean, std^2)


def reference_barycenter(family: RandomMeasureFamily, M: int, draws: int = 2 ** 17,
                         seed: int = 0) -> ReferenceBarycenter:
    """Population barycenter E[F^-(alpha)] on M midpoint levels.

    Closed form for gaussian and location families. The mixture family uses
    scrambled-Sobol draws of the parameters (a randomized quasi-Monte-Carlo
    average), which is far less noisy than plain sampling at equal cost.
    """
    alpha = quantile_levels(M)
    stats_ = family.quantile_stats()
    if stats_ is not None:
        Em, Es = stats_[0], stats_[1]
        return ReferenceBarycenter(QuantileCurve(Em + Es * ndtri(alpha)), "analytic", (Em, Es))
    sobol = qmc.Sobol(family.n_params(), scramble=True, seed=np.random.default_rng([seed, 7919]))
    total = np.zeros(M)
    done = 0
    while done < draws:
        k = min(_CHUNK, draws - done)
        u = sobol.random(k)
        total += _mixture_quantiles(family, family.params_from_uniform(u), alpha).sum(axis=0)
        done += k
    return ReferenceBarycenter(QuantileCurve(total / draws), "quasi-monte-carlo")


def w2_sq_to_gaussian(measure: DiscreteMeasure, mean: float, std: float) -> float:
    """Exact W2^2 between a 1D discrete measure and N(mean, std^2)."""
    cw = np.concatenate(([0.0], np.cumsum(measure.weights)))
    cw[-1] = 1.0
    a, b = cw[:-1], cw[1:]
    za, zb = ndtri(a), ndtri(b)
    pa, pb = stats.norm.pdf(za), stats.norm.pdf(zb)
    # integrals over (a, b] of z(alpha) and z(alpha)^2
    I1 = pa - pb
    with np.errstate(invalid="ignore"):
        za_pa = np.where(np.isfinite(za), za * pa, 0.0)
        zb_pb = np.where(np.isfinite(zb), zb * pb, 0.0)
    I2 = (b - a) + za_pa - zb_pb
    x = measure.points - mean
    total = np.sum(x ** 2 * (b - a) - 2 * x * std * I1 + std ** 2 * I2)
    return float(max(total, 0.0))


def w2_sq_to_reference(measure: DiscreteMeasure, ref: ReferenceBarycenter) -> float:
    if ref.gaussian is not None:
        return w2_sq_to_gaussian(measure, *ref.gaussian)
    from .measures import measure_from_quantile
    return w2_1d_squared(measure, measure_from_quantile(ref.curve))


@dataclass(frozen=True)
class RateCell:
    n: int
    p: int
    replicates: int
    mean_risk: float
    stderr: float
    sampling_risk: float  # E W2^2(mu_p, mu_P), measured
    sampling_stderr: float
    bound: Optional[float]  # (1/n) int Var F^- + sampling_risk, when available


@dataclass(frozen=True)
class RateExperimentReport:
    family: dict
    reference: str
    seed: int
    replicates: int
    n_grid: tuple
    p_grid: tuple
    cells: list
    slope_n: Optional[float]
    slope_p: Optional[float]
    integrated_variance: Optional[float]

    def cell(self, n, p) -> RateCell:
        for c in self.cells:
            if c.n == n and c.p == p:
                return c
        raise KeyError((n, p))

    def bound_holds(self, k: float = 3.0) -> bool:
        """Measured risk <= bound + k standard errors, on every cell with a bound."""
        return all(c.mean_risk <= c.bound + k * np.hypot(c.stderr, c.sampling_stderr)
                   for c in self.cells if c.bound is not None)


def integrated_quantile_variance(family: RandomMeasureFamily) -> Optional[float]:
    """int_0^1 Var(F^-(alpha)) d alpha for location-scale families."""
    s = family.quantile_stats()
    if s is None:
        return None
    _, _, Vm, Vs, _ = s
    # int z = 0 and int z^2 = 1 over (0, 1), so the cross term drops
    return Vm + Vs


def loglog_slope(x, y) -> float:
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(x, y, 1)[0])


def rate_experiment(family: RandomMeasureFamily, n_grid: Sequence[int], p_grid: Sequence[int],
                    R: int, seed: int, M: int = 1024) -> RateExperimentReport:
    """Monte-Carlo risk of the order-statistics barycenter over an (n, p) grid.

    Each replicate samples n units of p points, forms the barycenter and
    measures W2^2 to the population barycenter. The sampling term of the risk
    bound is measured directly from p-point samples of the population
    barycenter (only when that barycenter is Gaussian).
    """
    n_grid, p_grid = tuple(sorted(set(map(int, n_grid)))), tuple(sorted(set(map(int, p_grid))))
    if not n_grid or not p_grid:
        raise ValueError("n and p grids must be nonempty")
    if R < 1:
        raise ValueError("need at least one replicate")
    ref = reference_barycenter(family, M, seed=seed)
    ivar = integrated_quantile_variance(family)
    cells = []
    for n in n_grid:
        for p in p_grid:
            risks = np.empty(R)
            samp = np.empty(R) if ref.gaussian is not None else None
            for rep in range(R):
                _, X = draw_units(family, n, p, seed, keys=(n, p, rep))
                risks[rep] = w2_sq_to_reference(barycenter_1d_order_stats(X), ref)
                if samp is not None:
                    rng = unit_rng(seed, _POPULATION, n, p, rep)
                    Y = ref.gaussian[0] + ref.gaussian[1] * rng.standard_normal(p)
                    samp[rep] = w2_sq_to_gaussian(barycenter_1d_order_stats([Y]), *ref.gaussian)
            se = float(risks.std(ddof=1) / np.sqrt(R)) if R > 1 else 0.0
            if samp is not None:
                s_mean = float(samp.mean())
                s_se = float(samp.std(ddof=1) / np.sqrt(R)) if R > 1 else 0.0
                bound = ivar / n + s_mean if ivar is not None else None
            else:
                s_mean = s_se = float("nan")
                bound = None
            cells.append(RateCell(n, p, R, float(risks.mean()), se, s_mean, s_se, bound))

    def fit(points):
        if len(points) < 2:
            return None
        xs, ys = zip(*points)
        if min(ys) <= 0:
            return None
        return loglog_slope(xs, ys)

    slope_n = fit([(c.n, c.mean_risk) for c in cells if c.p == p_grid[-1]])
    slope_p = fit([(c.p, c.mean_risk) for c in cells if c.n == n_grid[-1]])
    return RateExperimentReport(asdict(family), ref.method, int(seed), R, n_grid, p_grid,
                                cells, slope_n, slope_p, ivar)


# --- J2 functional ------------------------------------------------------------


@dataclass(frozen=True)
class AnalyticDistribution:
    """Closed-form 1D law: uniform(a, b), gaussian(mean, std) or triangular(a, mode, b)."""

    kind: str
    params: tuple

    def __post_init__(self):
        k, p = self.kind, tuple(float(v) for v in self.params)
        if k == "uniform" and not (len(p) == 2 and p[0] < p[1]):
            raise ValueError("uniform needs (a, b) with a < b")
        if k == "gaussian" and not (len(p) == 2 and p[1] > 0):
            raise ValueError("gaussian needs (mean, std) with std > 0")
        if k == "triangular" and not (len(p) == 3 and p[0] <= p[1] <= p[2] and p[0] < p[2]):
            raise ValueError("triangular needs (a, mode, b) with a <= mode <= b, a < b")
        if k not in ("uniform", "gaussian", "triangular"):
            raise ValueError(f"unknown distribution {k!r}")
        object.__setattr__(self, "params", p)

    @property
    def support(self):
        if self.kind == "gaussian":
            return -np.inf, np.inf
        return self.params[0], self.params[-1]

    def _frozen(self):
        p = self.params
        if self.kind == "uniform":
            return stats.uniform(loc=p[0], scale=p[1] - p[0])
        if self.kind == "gaussian":
            return stats.norm(loc=p[0], scale=p[1])
        return stats.triang(c=(p[1] - p[0]) / (p[2] - p[0]), loc=p[0], scale=p[2] - p[0])

    def cdf(self, x):
        return self._frozen().cdf(x)

    def pdf(self, x):
        return self._frozen().pdf(x)

    def ppf(self, q):
        return self._frozen().ppf(q)


def _j2_on(dist, lo, hi):
    def integrand(x):
        F = dist.cdf(x)
        f = dist.pdf(x)
        return F * (1 - F) / f if f > 0 else 0.0

    if dist.kind == "gaussian":
        m, s = dist.params

        def integrand(x):
            # Mills-ratio form: the tail mass over the density, without underflow
            a = abs(x - m) / s
            return s * ndtr(a) * np.sqrt(np.pi / 2) * erfcx(a / np.sqrt(2))

    pts = [dist.params[1]] if dist.kind == "triangular" and lo < dist.params[1] < hi else None
    value, _ = integrate.quad(integrand, lo, hi, points=pts, limit=500, epsabs=1e-13, epsrel=1e-12)
    return value


def j2_functional(dist: AnalyticDistribution, truncation=None):
    """int F (1 - F) / f over a truncation interval, with a divergence check.

    The interval is doubled about its center (and intersected with the
    support); a relative change above 1% flags the integral as divergent.

    Returns
    -------
    value : float
    diverged : bool
    """
    s_lo, s_hi = dist.support
    if truncation is None:
        if dist.kind == "gaussian":
            m, s = dist.params
            truncation = (m - 10 * s, m + 10 * s)
        else:
            truncation = (s_lo, s_hi)
    lo, hi = map(float, truncation)
    if not hi > lo:
        raise ValueError("truncation interval must have hi > lo")
    if lo < s_lo or hi > s_hi:
        raise ValueError(f"density is zero inside the truncation interval [{lo}, {hi}]")
    inner = np.linspace(lo, hi, 9)[1:-1]
    if np.any(dist.pdf(inner) <= 0):
        raise ValueError("density is zero inside the truncation interval")
    value = _j2_on(dist, lo, hi)
    c, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    wlo, whi = max(c - 2 * half, s_lo), min(c + 2 * half, s_hi)
    wide = _j2_on(dist, wlo, whi)
    diverged = abs(wide - value) > 0.01 * abs(value)
    return value, bool(diverged)


# --- report emission -----------------------------------------------------------

RISK_HEADER = ("n", "p", "replicates", "mean_risk", "stderr")


def emit_report(report: RateExperimentReport, format: str, path) -> None:
    """Serialize a rate report as csv, json or svg.

    The CSV holds one row per cell followed by one summary row whose ``n``
    and ``p`` fields read ``slope`` and whose ``mean_risk`` / ``stderr``
    columns carry the fitted log-log slopes versus n and versus p.
    """
    from . import fileio

    if format == "json":
        fileio.write_json(path, report)
    elif format == "csv":
        rows = [(c.n, c.p, c.replicates, c.mean_risk, c.stderr) for c in report.cells]
        rows.append(("slope", "slope", report.replicates,
                     _nan(report.slope_n), _nan(report.slope_p)))
        fileio.write_csv(path, RISK_HEADER, rows)
    elif format == "svg":
        series = []
        for p in report.p_grid:
            cells = [c for c in report.cells if c.p == p]
            series.append((f"p={p}", [c.n for c in cells], [c.mean_risk for c in cells]))
        fileio.svg_plot(path, series, title="Barycenter risk", xlabel="n",
                        ylabel="E W2^2", logx=True, logy=True)
    else:
        raise ValueError(f"unknown format {format!r}; use csv, json or svg")


def _nan(x):
    return float("nan") if x is None else x
