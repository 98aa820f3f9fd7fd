"""Entropic optimal transport on a fixed grid.

The regularized cost is ``<C, U> - eps * h(U)`` with ``h(U) = -sum U log U``
(``0 log 0 = 0``), minimized over couplings of ``(r, q)`` by alternating
marginal scaling. Values can be negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exact import TransportPlan
from .measures import Grid, GridMeasure


class SinkhornOverflow(FloatingPointError):
    """Plain-domain scaling broke down; rerun in the log domain."""


@dataclass(frozen=True)
class CostMatrix:
    grid: Grid
    matrix: np.ndarray

    @property
    def N(self) -> int:
        return self.matrix.shape[0]


def cost_matrix(grid: Grid) -> CostMatrix:
    x = grid.nodes
    C = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1)
    C.setflags(write=False)
    return CostMatrix(grid, C)


@dataclass(frozen=True)
class SinkhornConfig:
    eps: float
    tol: float = 1e-9
    max_iter: int = 10000
    log_domain: str = "auto"  # "auto", "on" or "off"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.log_domain not in ("auto", "on", "off"):
            raise ValueError("log_domain must be auto, on or off")

    def use_log(self, C: np.ndarray) -> bool:
        if self.log_domain == "auto":
            return self.eps < 0.01 * float(C.max())
        return self.log_domain == "on"


@dataclass(frozen=True)
class SinkhornResult:
    value: float
    plan: TransportPlan
    f: np.ndarray  # dual potentials: U = exp((f_i + g_j - C_ij) / eps)
    g: np.ndarray
    iterations: int
    marginal_err: float
    converged: bool
    eps: float
    transport_cost: float  # <C, U> without the entropy term


def entropy(U: np.ndarray) -> float:
    pos = U[U > 0]
    return float(-np.sum(pos * np.log(pos)))


def regularized_cost(U: np.ndarray, C: np.ndarray, eps: float) -> float:
    return float(np.sum(C * U)) - eps * entropy(U)


def _safe_log(a):
    with np.errstate(divide="ignore"):
        return np.log(a)


def _solve_plain(r, q, C, eps, tol, max_iter):
    K = np.exp(-C / eps)
    a = np.ones_like(r)
    b = np.ones_like(q)
    err = np.inf
    it = 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for it in range(1, max_iter + 1):
            Ka = K.T @ a
            b = np.where(q > 0, q / Ka, 0.0)
            Kb = K @ b
            a = np.where(r > 0, r / Kb, 0.0)
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                raise SinkhornOverflow("scaling overflowed; use the log-domain solver")
            err = float(np.abs(b * (K.T @ a) - q).sum())
            if err <= tol:
                break
    U = a[:, None] * K * b[None, :]
    f = eps * _safe_log(a)
    g = eps * _safe_log(b)
    return U, f, g, it, err


def _lse(x, axis):
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def _log_sweeps(logr, logq, C, eps, tol, max_iter, f, g, check_every=5):
    err = np.inf
    it = 0
    while it < max_iter:
        for _ in range(min(check_every, max_iter - it)):
            g = eps * (logq - _lse((f[:, None] - C) / eps, axis=0))
            f = eps * (logr - _lse((g[None, :] - C) / eps, axis=1))
            it += 1
        col = np.exp(_lse((f[:, None] + g[None, :] - C) / eps, axis=0))
        err = float(np.abs(col - np.exp(logq)).sum())
        if err <= tol:
            break
    return f, g, it, err


def _solve_log(r, q, C, eps, tol, max_iter, f=None, g=None, scaling=0.5, stage_iter=50):
    """Log-domain scaling. Without a warm start, eps is annealed from max(C)
    down to its target, each stage warm-starting the next. Annealing may use
    at most half of ``max_iter``."""
    logr, logq = _safe_log(r), _safe_log(q)
    used = 0
    budget = max_iter // 2
    if f is None or g is None:
        f, g = np.zeros_like(r), np.zeros_like(q)
        stage = float(C.max())
        while stage * scaling > eps and used < budget:
            stage *= scaling
            f, g, it, _ = _log_sweeps(logr, logq, C, stage, max(tol, 1e-6),
                                      min(stage_iter, budget - used), f, g)
            used += it
    f, g, it, err = _log_sweeps(logr, logq, C, eps, tol, max_iter - used, f.copy(), g.copy())
    U = np.exp((f[:, None] + g[None, :] - C) / eps)
    return U, f, g, used + it, err


def sinkhorn_plan(r, q, C, cfg: SinkhornConfig, warm=None):
    """Array-level solver: returns (U, f, g, iterations, marginal_err, converged)."""
    r = np.asarray(r, dtype=float)
    q = np.asarray(q, dtype=float)
    C = np.asarray(C, dtype=float)
    if cfg.use_log(C):
        f0, g0 = warm if warm is not None else (None, None)
        out = _solve_log(r, q, C, cfg.eps, cfg.tol, cfg.max_iter, f0, g0)
    else:
        out = _solve_plain(r, q, C, cfg.eps, cfg.tol, cfg.max_iter)
    U, f, g, it, err = out
    return U, f, g, it, err, err <= cfg.tol


def sinkhorn_divergence(r: GridMeasure, q: GridMeasure, C: CostMatrix,
                        cfg: SinkhornConfig) -> SinkhornResult:
    """Entropic transport between two histograms on ``C``'s grid.

    The returned plan has exact row marginals; the column marginal violation
    (L1) is reported as ``marginal_err``. ``converged`` is False when
    ``max_iter`` was reached first.
    """
    if r.grid != C.grid or q.grid != C.grid:
        raise ValueError("measures must live on the cost matrix grid")
    U, f, g, it, err, ok = sinkhorn_plan(r.weights, q.weights, C.matrix, cfg)
    value = regularized_cost(U, C.matrix, cfg.eps)
    return SinkhornResult(value, TransportPlan(r.weights, q.weights, U), f, g, it, err, ok,
                          cfg.eps, float(np.sum(C.matrix * U)))


def lipschitz_constant(rho: float, eps: float, C) -> float:
    """Lipschitz constant of r -> W_eps^2(r, q) on the rho-interior simplex."""
    Cm = np.asarray(getattr(C, "matrix", C), dtype=float)
    N = Cm.shape[0]
    if not 0 < rho < 1.0 / N:
        raise ValueError(f"rho must lie in (0, 1/N) = (0, {1.0 / N:g})")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    # max over (l, k) of |C_ml - C_kl| for each row m
    spread = np.maximum(Cm - Cm.min(axis=0), Cm.max(axis=0) - Cm).max(axis=1)
    terms = 2 * eps * np.log(N) + spread - 2 * eps * np.log(rho)
    return float(np.sqrt(np.sum(terms ** 2)))
