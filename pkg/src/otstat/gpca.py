"""Geodesic PCA of one-dimensional measures.

Measures are mapped to the tangent space at their W2 barycenter through
quantile functions: a tangent vector is a displacement of the barycenter's
quantile curve, sampled on the same M midpoint levels. The inner product is
the level average <u, v> = mean(u * v).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .barycenters import barycenter_curve
from .measures import (
    DiscreteMeasure,
    QuantileCurve,
    measure_from_quantile,
    quantile_curve,
)

FEAS_TOL = 1e-12


@dataclass(frozen=True)
class TangentVector:
    base: QuantileCurve
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.base.M,):
            raise ValueError("tangent vector must have one value per base level")
        object.__setattr__(self, "values", v)

    @property
    def feasible(self) -> bool:
        return is_feasible(self.base, self, 1.0)

    def norm(self) -> float:
        return float(np.sqrt(np.mean(self.values ** 2)))


@dataclass(frozen=True)
class GpcaResult:
    """Principal directions at the barycenter.

    ``components`` holds K tangent vectors orthonormal for the level-average
    inner product, ``scores`` is (n, K), ``explained`` the captured share of
    the total tangent variance per component and ``t_range`` the half-width T
    of the largest interval [-T, T] on which each principal geodesic stays a
    valid quantile function.
    """

    base: QuantileCurve
    components: list
    scores: np.ndarray
    explained: np.ndarray
    t_range: np.ndarray
    total_variance: float
    converged: bool = True
    iterations: int = 0

    @property
    def barycenter(self) -> DiscreteMeasure:
        return measure_from_quantile(self.base)

    @property
    def K(self) -> int:
        return len(self.components)

    def component_matrix(self) -> np.ndarray:
        if not self.components:
            return np.zeros((0, self.base.M))
        return np.array([c.values for c in self.components])


def _is_nondecreasing(curve, tol=FEAS_TOL) -> bool:
    scale = max(1.0, float(np.abs(curve).max()))
    return bool(np.all(np.diff(curve) >= -tol * scale))


def is_feasible(bar: QuantileCurve, v: TangentVector, t: float) -> bool:
    """True iff bar + t v is nondecreasing."""
    if v.values.shape != (bar.M,):
        raise ValueError("level counts differ")
    return _is_nondecreasing(bar.values + t * v.values)


def feasible_interval(base: np.ndarray, v: np.ndarray):
    """Largest [lo, hi] of t such that base + t v is nondecreasing."""
    db, dv = np.diff(base), np.diff(v)
    lo, hi = -np.inf, np.inf
    small = FEAS_TOL * max(1.0, float(np.abs(v).max()))
    neg, pos = dv < -small, dv > small
    if np.any(neg):
        hi = float(np.min(db[neg] / -dv[neg]))
    if np.any(pos):
        lo = float(np.max(-db[pos] / dv[pos]))
    return lo, hi


def _half_width(base, v):
    lo, hi = feasible_interval(base, v)
    return max(0.0, min(-lo, hi))


def log_map(bar: DiscreteMeasure, nu: DiscreteMeasure, M: int) -> TangentVector:
    base = quantile_curve(bar, M)
    return TangentVector(base, quantile_curve(nu, M).values - base.values)


def exp_map(bar: DiscreteMeasure, v: TangentVector, t: float = 1.0) -> DiscreteMeasure:
    base = quantile_curve(bar, v.base.M)
    curve = base.values + t * v.values
    if not _is_nondecreasing(curve):
        raise ValueError(f"base + {t:g} v is not a quantile function (not nondecreasing)")
    return measure_from_quantile(QuantileCurve(curve))


def isotonic_project(values, weights=None) -> np.ndarray:
    """Weighted least-squares projection onto nondecreasing sequences (PAVA)."""
    y = np.asarray(values, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != y.shape:
        raise ValueError("values and weights must have equal lengths")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    # blocks as parallel stacks: mean, total weight, length
    means, wts, lens = [], [], []
    for yi, wi in zip(y, w):
        m, tw, ln = yi, wi, 1
        while means and means[-1] > m:
            pm, pw, pl = means.pop(), wts.pop(), lens.pop()
            m = (pm * pw + m * tw) / (pw + tw)
            tw += pw
            ln += pl
        means.append(m)
        wts.append(tw)
        lens.append(ln)
    return np.repeat(means, lens)


def _tangent_data(measures, M):
    if len(measures) < 2:
        raise ValueError("need at least 2 measures")
    Q = np.array([quantile_curve(m, M).values for m in measures])
    base = barycenter_curve(measures, None, M)
    return base, Q - base.values


def _sign_fix(phi):
    s = phi.sum()
    if abs(s) < 1e-9 * phi.size:
        s = phi[np.argmax(np.abs(phi))]
    return phi if s >= 0 else -phi


def _pca(V, K):
    n, M = V.shape
    _, S, Wt = np.linalg.svd(V, full_matrices=False)
    var = S ** 2 / (n * M)
    total = float(np.sum(V ** 2) / (n * M))
    phis = []
    tol = 1e-12 * max(total, 1e-300)
    for k in range(min(K, len(S))):
        if total == 0 or var[k] <= tol:
            break
        phis.append(_sign_fix(Wt[k] * np.sqrt(M)))
    return phis, var, total


def _result(base, V, phis, total, converged=True, iterations=0, scores=None, captured=None):
    M = base.M
    Phi = np.array(phis) if phis else np.zeros((0, M))
    if scores is None:
        scores = V @ Phi.T / M
    if captured is None:
        captured = np.mean(scores ** 2, axis=0) if phis else np.zeros(0)
    explained = captured / total if total > 0 else np.zeros(len(phis))
    t_range = np.array([_half_width(base.values, phi) for phi in phis])
    return GpcaResult(base, [TangentVector(base, phi) for phi in phis],
                      np.asarray(scores).reshape(V.shape[0], len(phis)),
                      np.asarray(explained), t_range, total, converged, iterations)


def log_pca(measures: Sequence[DiscreteMeasure], K: int, M: int) -> GpcaResult:
    """PCA of the log-mapped data, with no monotonicity constraint.

    Directions with zero variance are dropped, so ``result.K`` may be
    smaller than ``K`` (zero for identical inputs).
    """
    n = len(measures)
    if K < 0 or K > min(n - 1, M):
        raise ValueError(f"K must lie in [0, min(n - 1, M)] = [0, {min(n - 1, M)}]")
    base, V = _tangent_data(measures, M)
    phis, _, total = _pca(V, K)
    return _result(base, V, phis, total)


def _orthonormalize(Phi):
    M = Phi.shape[1]
    Qm, R = np.linalg.qr(Phi.T)
    Qm = Qm * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))
    return Qm.T * np.sqrt(M)


def _clipped_fit(base, V, Phi):
    """Scores clipped to each direction's feasible interval and the resulting
    reduction of squared residual, per component."""
    M = base.M
    T = V @ Phi.T / M
    Cs = np.empty_like(T)
    for k, phi in enumerate(Phi):
        lo, hi = feasible_interval(base.values, phi)
        Cs[:, k] = np.clip(T[:, k], lo, hi)
    gain = np.mean(2 * T * Cs - Cs ** 2, axis=0)
    return Cs, gain


def _repair(base, V, Phi):
    """Make each direction feasible at its extreme observed scores by
    projecting the two extreme curves onto the monotone cone."""
    M = base.M
    T = V @ Phi.T / M
    out = Phi.copy()
    for k in range(Phi.shape[0]):
        tmin, tmax = T[:, k].min(), T[:, k].max()
        if tmax - tmin <= 0:
            continue
        top = base.values + tmax * Phi[k]
        bottom = base.values + tmin * Phi[k]
        if _is_nondecreasing(top) and _is_nondecreasing(bottom):
            continue
        out[k] = (isotonic_project(top) - isotonic_project(bottom)) / (tmax - tmin)
    return out


def gpca(measures: Sequence[DiscreteMeasure], K: int, M: int, step: float = 1.0,
         iters: int = 200, tol: float = 1e-10) -> GpcaResult:
    """Geodesic PCA: principal directions whose geodesics stay in the cone of
    quantile functions at every observed score.

    Starts from :func:`log_pca`. If those directions are already feasible they
    are returned unchanged. Otherwise alternates a gradient step on the
    captured variance, isotonic repair of violated extreme curves and
    re-orthonormalization, keeping the best iterate. Scores are clipped to each
    direction's feasible interval, so the reported projections are always
    valid measures.
    """
    init = log_pca(measures, K, M)
    if init.K == 0:
        return init
    base, V = _tangent_data(measures, M)
    n = V.shape[0]
    Phi = init.component_matrix()
    if all(is_feasible(base, c, t) for k, c in enumerate(init.components)
           for t in init.scores[:, k]):
        return init

    best_Phi = Phi
    _, best_gain = _clipped_fit(base, V, Phi)
    best = prev = best_gain.sum()
    converged = False
    it = 0
    for it in range(1, iters + 1):
        T = V @ Phi.T / M
        grad = (V.T @ T).T / (n * M)  # d/dPhi of mean captured variance, up to a factor 2
        Phi = _orthonormalize(_repair(base, V, _orthonormalize(Phi + step * grad)))
        _, gain = _clipped_fit(base, V, Phi)
        if gain.sum() > best:
            best, best_Phi, best_gain = gain.sum(), Phi, gain
        if abs(gain.sum() - prev) <= tol * init.total_variance:
            converged = True
            break
        prev = gain.sum()

    order = np.argsort(-best_gain, kind="stable")
    Phi = np.array([_sign_fix(p) for p in best_Phi[order]])
    Cs, gain = _clipped_fit(base, V, Phi)
    return _result(base, V, list(Phi), init.total_variance, converged, it, Cs, gain)
