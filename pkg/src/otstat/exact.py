"""Exact (unregularized) optimal transport.

One-dimensional distances and geodesics go through quantile functions; the
discrete problem on a shared grid is solved by the transportation simplex.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .measures import (
    DiscreteMeasure,
    GridMeasure,
    _require_1d,
    measure_from_quantile,
    quantile_curve,
    QuantileCurve,
)

DEFAULT_SIZE_CAP = 1024


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its stopping rule."""


@dataclass(frozen=True)
class TransportPlan:
    r: np.ndarray
    q: np.ndarray
    matrix: np.ndarray

    def cost(self, C) -> float:
        return float(np.sum(np.asarray(C) * self.matrix))

    def marginal_error(self) -> float:
        return float(max(np.abs(self.matrix.sum(1) - self.r).max(),
                         np.abs(self.matrix.sum(0) - self.q).max()))


def _breakpoint_pieces(mu: DiscreteMeasure, nu: DiscreteMeasure):
    """Quantile values of mu and nu on the pieces between merged CDF jumps."""
    _require_1d(mu)
    _require_1d(nu)
    cmu, cnu = np.cumsum(mu.weights), np.cumsum(nu.weights)
    cmu[-1] = cnu[-1] = 1.0
    edges = np.union1d(np.concatenate(([0.0], cmu)), cnu)
    edges = edges[edges <= 1.0]
    # breakpoints that differ only by cumsum rounding would leave slivers
    # whose contribution, once square-rooted, is far above machine precision
    tol = 4 * np.finfo(float).eps * max(mu.size, nu.size)
    keep = np.concatenate(([True], np.diff(edges) > tol))
    keep[-1] = True
    edges = edges[keep]
    if edges.size > 2 and edges[-1] - edges[-2] <= tol:
        edges = np.delete(edges, -2)
    lengths = np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    a = mu.points[np.minimum(np.searchsorted(cmu, mid), mu.size - 1)]
    b = nu.points[np.minimum(np.searchsorted(cnu, mid), nu.size - 1)]
    return lengths, a, b


def w2_1d_squared(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    lengths, a, b = _breakpoint_pieces(mu, nu)
    return float(np.sum(lengths * (a - b) ** 2))


def w2_1d(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Exact W2 between 1D discrete measures by piecewise-constant integration
    of the squared quantile difference."""
    return float(np.sqrt(w2_1d_squared(mu, nu)))


def monotone_plan_cost(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Cost of the sorted (north-west corner) coupling between two 1D measures."""
    _require_1d(mu)
    _require_1d(nu)
    r, q = mu.weights.copy(), nu.weights.copy()
    i = j = 0
    total = 0.0
    while i < r.size and j < q.size:
        m = min(r[i], q[j])
        total += m * (mu.points[i] - nu.points[j]) ** 2
        r[i] -= m
        q[j] -= m
        if r[i] <= q[j]:
            i += 1
        else:
            j += 1
    return total


def geodesic_1d(mu: DiscreteMeasure, nu: DiscreteMeasure, t: float, M: int) -> DiscreteMeasure:
    """Point at time ``t`` on the W2 geodesic from ``mu`` to ``nu``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    qa, qb = quantile_curve(mu, M).values, quantile_curve(nu, M).values
    return measure_from_quantile(QuantileCurve((1 - t) * qa + t * qb))


def gaussian_w2_1d(m1: float, s1: float, m2: float, s2: float) -> float:
    if s1 <= 0 or s2 <= 0:
        raise ValueError("standard deviations must be positive")
    return float(np.hypot(m1 - m2, s1 - s2))


# --- transportation simplex -------------------------------------------------


def _northwest_corner(r, q):
    m, n = r.size, q.size
    s, d = r.copy(), q.copy()
    basis, flows = [], []
    i = j = 0
    while i < m and j < n:
        x = min(s[i], d[j])
        basis.append((i, j))
        flows.append(x)
        # move along rows first on ties so the basis keeps m + n - 1 cells
        if (s[i] <= d[j] and i < m - 1) or j == n - 1:
            d[j] -= x
            s[i] = 0.0
            i += 1
        else:
            s[i] -= x
            d[j] = 0.0
            j += 1
    return basis, flows


def _tree_adjacency(basis, m):
    adj = {}
    for k, (i, j) in enumerate(basis):
        adj.setdefault(i, []).append((m + j, k))
        adj.setdefault(m + j, []).append((i, k))
    return adj


def _potentials(basis, C, m, n, adj):
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    queue = deque([0])
    seen = {0}
    while queue:
        node = queue.popleft()
        for other, k in adj[node]:
            if other in seen:
                continue
            i, j = basis[k]
            if node < m:
                v[j] = C[i, j] - u[i]
            else:
                u[i] = C[i, j] - v[j]
            seen.add(other)
            queue.append(other)
    return u, v


def _tree_path(adj, start, goal):
    """Edge indices along the unique tree path from ``start`` to ``goal``."""
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for other, k in adj[node]:
            if other not in parent:
                parent[other] = (node, k)
                queue.append(other)
    path = []
    node = goal
    while parent[node] is not None:
        node, k = parent[node]
        path.append(k)
    return path[::-1]


def transport_simplex(r, q, C, max_iter=None, degenerate_streak=50):
    """Solve min <C, U> over couplings of (r, q) exactly.

    Basic feasible solutions are spanning trees of the bipartite row/column
    graph. Entering cells are chosen by most negative reduced cost; after
    ``degenerate_streak`` consecutive zero-step pivots Bland's rule takes over
    until the objective strictly decreases, which rules out cycling.

    Returns
    -------
    value : float
    U : ndarray, shape (len(r), len(q))
    """
    r = np.asarray(r, dtype=float)
    q = np.asarray(q, dtype=float)
    C = np.asarray(C, dtype=float)
    if C.shape != (r.size, q.size):
        raise ValueError("cost matrix shape does not match marginals")
    if abs(r.sum() - q.sum()) > 1e-9:
        raise ValueError("marginals must carry the same mass")
    rows, cols = np.flatnonzero(r > 0), np.flatnonzero(q > 0)
    rr, qq = r[rows], q[cols]
    Cs = C[np.ix_(rows, cols)]
    m, n = rr.size, qq.size
    scale = max(1.0, float(np.abs(Cs).max()))
    tol = 1e-12 * scale
    if max_iter is None:
        max_iter = 50 * (m + n) ** 2 + 1000

    basis, flows = _northwest_corner(rr, qq)
    flows = np.array(flows)
    streak = 0
    for _ in range(max_iter):
        adj = _tree_adjacency(basis, m)
        u, v = _potentials(basis, Cs, m, n, adj)
        reduced = Cs - u[:, None] - v[None, :]
        if streak < degenerate_streak:
            flat = int(np.argmin(reduced))
            if reduced.flat[flat] >= -tol:
                break
        else:
            candidates = np.flatnonzero(reduced.ravel() < -tol)
            if candidates.size == 0:
                break
            flat = int(candidates[0])
        ei, ej = divmod(flat, n)
        path = _tree_path(adj, ei, m + ej)
        # path runs row ei -> column ej; its cells alternate -, +, -, ...
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flows[k] for k in minus)
        ties = [k for k in minus if flows[k] <= theta]
        leave = min(ties, key=lambda k: basis[k][0] * n + basis[k][1])
        for k in minus:
            flows[k] -= theta
        for k in plus:
            flows[k] += theta
        basis[leave] = (ei, ej)
        flows[leave] = theta
        streak = streak + 1 if theta <= 0 else 0
    else:
        raise ConvergenceError(f"transportation simplex did not terminate in {max_iter} pivots")

    U = np.zeros((r.size, q.size))
    for (i, j), x in zip(basis, flows):
        U[rows[i], cols[j]] += max(x, 0.0)
    U[U < 1e-15] = 0.0
    return float(np.sum(C * U)), U


def exact_w2_grid(r: GridMeasure, q: GridMeasure, C, size_cap: int = DEFAULT_SIZE_CAP):
    """Squared unregularized W2 between two histograms on the same grid.

    ``C`` is a :class:`~otstat.sinkhorn.CostMatrix` or a plain array.
    """
    if r.grid != q.grid:
        raise ValueError("measures live on different grids")
    Cm = np.asarray(getattr(C, "matrix", C), dtype=float)
    N = r.grid.size
    if Cm.shape != (N, N):
        raise ValueError("cost matrix does not match the grid")
    if N > size_cap:
        raise ValueError(f"grid size {N} exceeds the exact-solver cap {size_cap}")
    value, U = transport_simplex(r.weights, q.weights, Cm)
    return value, TransportPlan(r.weights, q.weights, U)
