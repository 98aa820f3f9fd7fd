"""Barycenter estimators.

1D estimators work on quantile functions; grid estimators use entropic
transport and are computed with iterative Bregman projections.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .exact import ConvergenceError
from .measures import (
    DiscreteMeasure,
    GridMeasure,
    QuantileCurve,
    clamp_interior,
    empirical_measure,
    measure_from_quantile,
    quantile_curve,
    quantile_levels,
)
from .sinkhorn import CostMatrix, SinkhornConfig, _lse, lipschitz_constant, sinkhorn_divergence


def _simplex_weights(weights, n):
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
        raise ValueError(f"weights must be a probability vector of length {n}")
    return w / w.sum()


# --- one-dimensional estimators ---------------------------------------------


def barycenter_1d_quantile(measures: Sequence[DiscreteMeasure], weights=None,
                           M: int = 1000) -> DiscreteMeasure:
    """W2 barycenter in 1D: the measure whose quantile curve is the weighted
    average of the input curves on ``M`` midpoint levels."""
    return measure_from_quantile(barycenter_curve(measures, weights, M))


def barycenter_curve(measures, weights=None, M=1000) -> QuantileCurve:
    if len(measures) == 0:
        raise ValueError("need at least one measure")
    w = _simplex_weights(weights, len(measures))
    curves = np.array([quantile_curve(m, M).values for m in measures])
    return QuantileCurve(w @ curves)


def barycenter_1d_order_stats(samples) -> DiscreteMeasure:
    """Average the j-th order statistics across samples of equal size."""
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    sizes = {len(s) for s in samples}
    if len(sizes) != 1:
        raise ValueError(f"samples must have equal sizes, got {sorted(sizes)}")
    if 0 in sizes:
        raise ValueError("samples must be nonempty")
    X = np.sort(np.asarray(samples, dtype=float), axis=1)
    return empirical_measure(X.mean(axis=0))


def kde_quantiles(sample, h: float, alpha, iters: int = 64) -> np.ndarray:
    """Quantiles of a Gaussian kernel density estimate, by vectorized bisection."""
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    x = np.sort(np.asarray(sample, dtype=float))
    alpha = np.asarray(alpha, dtype=float)
    lo = np.full(alpha.shape, x[0] - 40 * h)
    hi = np.full(alpha.shape, x[-1] + 40 * h)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        F = ndtr((mid[:, None] - x[None, :]) / h).mean(axis=1)
        below = F < alpha
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def smoothed_barycenter_1d(samples, bandwidths, M: int = 1000, weights=None) -> DiscreteMeasure:
    """Barycenter of Gaussian-kernel-smoothed samples.

    ``bandwidths`` is a scalar or one value per sample.
    """
    n = len(samples)
    if n == 0:
        raise ValueError("need at least one sample")
    h = np.broadcast_to(np.asarray(bandwidths, dtype=float), (n,))
    if np.any(h <= 0):
        raise ValueError("bandwidths must be positive")
    w = _simplex_weights(weights, n)
    alpha = quantile_levels(M)
    curves = np.array([kde_quantiles(s, hi, alpha) for s, hi in zip(samples, h)])
    return measure_from_quantile(QuantileCurve(w @ curves))


# --- Sinkhorn barycenters ---------------------------------------------------


@dataclass(frozen=True)
class BarycenterConfig:
    eps: float
    rho: float
    weights: Optional[tuple] = None
    tol: float = 1e-7
    max_iter: int = 5000
    log_domain: str = "auto"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.log_domain not in ("auto", "on", "off"):
            raise ValueError("log_domain must be auto, on or off")


@dataclass(frozen=True)
class BarycenterResult:
    measure: GridMeasure
    iterations: int
    converged: bool
    change: float  # L1 distance between the last two iterates

    @property
    def interior(self) -> bool:
        return self.measure.interior


def _ibp_plain(Q, lam, C, eps, tol, max_iter):
    K = np.exp(-C / eps)
    n, N = Q.shape
    u = np.ones((n, N))
    r = np.full(N, 1.0 / N)
    change, it = np.inf, 0
    with np.errstate(divide="ignore", invalid="ignore"):
        for it in range(1, max_iter + 1):
            v = Q / (u @ K)
            Kv = v @ K.T
            r_new = np.exp(lam @ np.log(u * Kv))
            r_new /= r_new.sum()
            u = r_new[None, :] / Kv
            if not np.all(np.isfinite(u)):
                raise FloatingPointError("Bregman projections underflowed; use log domain")
            change = float(np.abs(r_new - r).sum())
            r = r_new
            if change <= tol:
                break
    return r, it, change


def _ibp_log(Q, lam, C, eps, tol, max_iter):
    n, N = Q.shape
    with np.errstate(divide="ignore"):
        logQ = np.log(Q)
    f = np.zeros((n, N))
    r = np.full(N, 1.0 / N)
    change, it = np.inf, 0
    for it in range(1, max_iter + 1):
        g = eps * (logQ - _lse((f[:, :, None] - C[None]) / eps, axis=1))
        A = f / eps + _lse((g[:, None, :] - C[None]) / eps, axis=2)
        logr = lam @ A
        logr -= _lse(logr, axis=0)
        f = f + eps * (logr[None, :] - A)
        r_new = np.exp(logr)
        change = float(np.abs(r_new - r).sum())
        r = r_new
        if change <= tol:
            break
    return r, it, change


def sinkhorn_barycenter(measures: Sequence[GridMeasure], C: CostMatrix,
                        cfg: BarycenterConfig) -> BarycenterResult:
    """Entropic barycenter of histograms on a common grid.

    Inputs are first clamped into the rho-interior simplex; the optimization
    itself runs over the full simplex. Whether the result stays above rho is
    reported through ``result.interior``.
    """
    if len(measures) == 0:
        raise ValueError("need at least one measure")
    for m in measures:
        if m.grid != C.grid:
            raise ValueError("all measures must live on the cost matrix grid")
    lam = _simplex_weights(cfg.weights, len(measures))
    keep = lam > 0
    Q = np.array([clamp_interior(m, cfg.rho).weights for m, k in zip(measures, keep) if k])
    lam = lam[keep]
    sk = SinkhornConfig(cfg.eps, log_domain=cfg.log_domain)
    solver = _ibp_log if sk.use_log(C.matrix) else _ibp_plain
    r, it, change = solver(Q, lam, C.matrix, cfg.eps, cfg.tol, cfg.max_iter)
    r = np.maximum(r, 0.0)
    return BarycenterResult(GridMeasure(C.grid, r / r.sum(), cfg.rho), it, change <= cfg.tol, change)


def barycenter_objective(r: GridMeasure, measures: Sequence[GridMeasure], C: CostMatrix,
                         eps: float, weights=None, rho: Optional[float] = None,
                         tol: float = 1e-10, max_iter: int = 100000) -> float:
    """Weighted mean of W_eps^2(r, q_i); inputs are clamped first when ``rho`` is given."""
    lam = _simplex_weights(weights, len(measures))
    cfg = SinkhornConfig(eps, tol=tol, max_iter=max_iter)
    total = 0.0
    for w, q in zip(lam, measures):
        if w == 0:
            continue
        if rho is not None:
            q = clamp_interior(q, rho)
        total += w * sinkhorn_divergence(r, q, C, cfg).value
    return total


def variance_bound(eps: float, rho: float, n: int, p: int, N: int, C) -> float:
    """Upper bound on E||r_eps - r_hat_eps||^2 for the empirical Sinkhorn barycenter."""
    if not (eps > 0 and n >= 1 and p >= 1 and N >= 1):
        raise ValueError("eps, n, p and N must be positive")
    Cm = np.asarray(getattr(C, "matrix", C))
    if Cm.shape != (N, N):
        raise ValueError("N does not match the cost matrix")
    L = lipschitz_constant(rho, eps, Cm)
    return (32 * L ** 2 / (eps ** 2 * n)
            + (2 * L / eps) * (np.sqrt(N / p) + 2 * rho * (N + np.sqrt(N))))


# --- Goldenshluger-Lepski selection -----------------------------------------


@dataclass(frozen=True)
class GLConfig:
    candidates: tuple
    rho: float
    n: int
    p: int
    N: int
    kappa: float = 1.0
    tol: float = 1e-7
    max_iter: int = 5000

    def __post_init__(self):
        c = tuple(float(e) for e in self.candidates)
        if len(c) < 2:
            raise ValueError("GL selection needs at least 2 candidate eps values")
        if any(e <= 0 for e in c) or any(b <= a for a, b in zip(c, c[1:])):
            raise ValueError("candidates must be positive and strictly ascending")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        object.__setattr__(self, "candidates", c)


@dataclass(frozen=True)
class GLRow:
    eps: float
    bias: float
    variance: float
    score: float
    iterations: int


@dataclass(frozen=True)
class GLSelection:
    eps_hat: float
    table: list
    barycenters: dict = field(repr=False)


def gl_select_epsilon(measures: Sequence[GridMeasure], C: CostMatrix,
                      glcfg: GLConfig) -> GLSelection:
    """Pick eps from a candidate list by pairwise comparison of barycenters.

    For each candidate ``e`` the bias proxy is

        B(e) = max_{e' <= e} [ ||r^{e'} - r^{e}||^2 - kappa (V(e') + V(e)) ]_+

    with V the variance bound; the selected value minimizes B + kappa V,
    ties going to the smaller eps.
    """
    bary, V = {}, {}
    for e in glcfg.candidates:
        res = sinkhorn_barycenter(measures, C, BarycenterConfig(
            e, glcfg.rho, tol=glcfg.tol, max_iter=glcfg.max_iter))
        if not res.converged:
            raise ConvergenceError(f"barycenter for eps={e:g} did not converge "
                                   f"(change {res.change:.3g} after {res.iterations} iterations)")
        bary[e] = res
        V[e] = variance_bound(e, glcfg.rho, glcfg.n, glcfg.p, glcfg.N, C)
    rows = []
    for i, e in enumerate(glcfg.candidates):
        r = bary[e].measure.weights
        B = 0.0
        for e2 in glcfg.candidates[: i + 1]:
            gap = float(np.sum((bary[e2].measure.weights - r) ** 2))
            B = max(B, gap - glcfg.kappa * (V[e2] + V[e]))
        rows.append(GLRow(e, B, V[e], B + glcfg.kappa * V[e], bary[e].iterations))
    best = min(rows, key=lambda row: row.score)  # min keeps the first (smallest eps) on ties
    return GLSelection(best.eps, rows, bary)
