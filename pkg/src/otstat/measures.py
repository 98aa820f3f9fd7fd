"""Measure representations: discrete point clouds, regular grids, histograms
on grids and discretized quantile functions.

All objects are immutable; operations return new objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

SUM_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure on R^d.

    ``support`` has shape (k, d) and ``weights`` shape (k,). Use
    :func:`empirical_measure` to build one from raw points; the constructor
    expects already merged, normalized data.
    """

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        if support.ndim == 1:
            support = support[:, None]
        weights = np.asarray(self.weights, dtype=float)
        if support.ndim != 2 or support.shape[0] == 0:
            raise ValueError("support must be a nonempty (k, d) array")
        if weights.shape != (support.shape[0],):
            raise ValueError("weights must have one entry per support point")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > SUM_TOL:
            raise ValueError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "support", _readonly(support))
        object.__setattr__(self, "weights", _readonly(weights))

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    @property
    def size(self) -> int:
        return self.support.shape[0]

    @property
    def points(self) -> np.ndarray:
        """Support as a flat vector (1D measures only)."""
        _require_1d(self)
        return self.support[:, 0]

    def shift(self, c) -> "DiscreteMeasure":
        return DiscreteMeasure(self.support + np.atleast_1d(c), self.weights)

    def mean(self) -> np.ndarray:
        return self.weights @ self.support


def _require_1d(measure: DiscreteMeasure):
    if measure.dim != 1:
        raise ValueError(f"expected a 1D measure, got dimension {measure.dim}")


def empirical_measure(points, weights=None) -> DiscreteMeasure:
    """Build a measure from a point cloud, merging repeated points.

    Parameters
    ----------
    points : array-like, shape (k,) or (k, d)
    weights : array-like, shape (k,), optional
        Nonnegative masses; uniform when omitted. Renormalized to sum 1.
    """
    if isinstance(points, (list, tuple)) and points and np.ndim(points[0]) == 1:
        lengths = {len(p) for p in points}
        if len(lengths) > 1:
            raise ValueError("points have mixed dimensions")
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise ValueError("empty point list")
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError("points must be a (k,) or (k, d) array")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    k = pts.shape[0]
    if weights is None:
        w = np.full(k, 1.0 / k)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (k,):
            raise ValueError("weights must match the number of points")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if w.sum() <= 0:
            raise ValueError("weights are all zero")
    # np.unique sorts rows lexicographically, which gives the sorted 1D support
    uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=w, minlength=uniq.shape[0])
    keep = merged > 0
    uniq, merged = uniq[keep], merged[keep]
    return DiscreteMeasure(uniq, merged / merged.sum())


@dataclass(frozen=True)
class QuantileCurve:
    """Generalized inverse CDF sampled at the midpoint levels (k - 1/2)/M."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a quantile curve needs at least 2 levels")
        if np.any(np.diff(v) < -1e-12 * max(1.0, np.abs(v).max())):
            raise ValueError("quantile values must be nondecreasing")
        object.__setattr__(self, "values", _readonly(np.maximum.accumulate(v)))

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def levels(self) -> np.ndarray:
        return quantile_levels(self.M)


def quantile_levels(M: int) -> np.ndarray:
    return (np.arange(1, M + 1) - 0.5) / M


def quantile_function(measure: DiscreteMeasure, alpha) -> np.ndarray:
    """Left-continuous inverse F^-(a) = inf{x : F(x) >= a} at arbitrary levels."""
    _require_1d(measure)
    cw = np.cumsum(measure.weights)
    idx = np.searchsorted(cw, np.asarray(alpha, dtype=float), side="left")
    return measure.points[np.minimum(idx, measure.size - 1)]


def quantile_curve(measure: DiscreteMeasure, M: int) -> QuantileCurve:
    if M < 2:
        raise ValueError("M must be at least 2")
    return QuantileCurve(quantile_function(measure, quantile_levels(M)))


def measure_from_quantile(curve: QuantileCurve) -> DiscreteMeasure:
    """Uniform atoms 1/M at the curve values."""
    return empirical_measure(curve.values)


@dataclass(frozen=True)
class Grid:
    """Regular grid in dimension 1 or 2; nodes are listed row-major."""

    mins: tuple
    maxs: tuple
    counts: tuple
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mins = tuple(float(v) for v in np.atleast_1d(self.mins))
        maxs = tuple(float(v) for v in np.atleast_1d(self.maxs))
        counts = tuple(int(v) for v in np.atleast_1d(self.counts))
        if not (len(mins) == len(maxs) == len(counts)) or len(mins) not in (1, 2):
            raise ValueError("grid must be 1D or 2D with matching bounds/counts")
        for lo, hi, c in zip(mins, maxs, counts):
            if c < 2 or not hi > lo:
                raise ValueError("each axis needs max > min and at least 2 nodes")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)
        object.__setattr__(self, "counts", counts)
        axes = self.axes()
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
        object.__setattr__(self, "nodes", _readonly(nodes))

    @classmethod
    def line(cls, lo: float, hi: float, n: int) -> "Grid":
        return cls((lo,), (hi,), (n,))

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.maxs) - np.array(self.mins)) / (np.array(self.counts) - 1)

    def axes(self):
        return [np.linspace(lo, hi, c) for lo, hi, c in zip(self.mins, self.maxs, self.counts)]


@dataclass(frozen=True)
class GridMeasure:
    """Histogram on a :class:`Grid`: a weight vector in the simplex."""

    grid: Grid
    weights: np.ndarray
    rho: Optional[float] = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} weights, got shape {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("grid weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > SUM_TOL:
            raise ValueError("grid weights must sum to 1")
        object.__setattr__(self, "weights", _readonly(w))

    @property
    def interior(self) -> bool:
        """True iff every entry is at least the recorded ``rho``."""
        return self.rho is not None and bool(self.weights.min() >= self.rho * (1 - 1e-12))

    def to_discrete(self) -> DiscreteMeasure:
        return empirical_measure(self.grid.nodes, self.weights)


def grid_measure(grid: Grid, weights, rho=None) -> GridMeasure:
    """Normalize arbitrary nonnegative weights onto ``grid``."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be nonnegative and not all zero")
    return GridMeasure(grid, w / w.sum(), rho)


def bin_to_grid(measure: DiscreteMeasure, grid: Grid) -> GridMeasure:
    """Assign each atom to its nearest grid node (ties: lowest node index)."""
    if measure.dim != grid.dim:
        raise ValueError(f"measure dimension {measure.dim} != grid dimension {grid.dim}")
    x = measure.support
    lo, hi, h = np.array(grid.mins), np.array(grid.maxs), grid.spacing
    outside = np.maximum(lo - x, x - hi).max(axis=1)
    if np.any(outside > h.max() * (1 + 1e-12)):
        bad = x[np.argmax(outside)]
        raise ValueError(f"point {bad.tolist()} lies more than one spacing outside the grid")
    flat = np.zeros(x.shape[0], dtype=np.int64)
    for axis, coords in enumerate(grid.axes()):
        n = coords.size
        below = np.clip(np.searchsorted(coords, x[:, axis], side="right") - 1, 0, n - 2)
        d_lo = np.abs(x[:, axis] - coords[below])
        d_hi = np.abs(coords[below + 1] - x[:, axis])
        idx = np.where(d_hi < d_lo, below + 1, below)
        flat = flat * n + idx
    w = np.bincount(flat, weights=measure.weights, minlength=grid.size)
    return GridMeasure(grid, w / w.sum())


def clamp_interior(q: GridMeasure, rho: float) -> GridMeasure:
    """Affine map (1 - rho N) q + rho pushing ``q`` into the interior simplex."""
    N = q.grid.size
    if not 0 < rho < 1.0 / N:
        raise ValueError(f"rho must lie in (0, 1/N) = (0, {1.0 / N:g}), got {rho}")
    w = (1 - rho * N) * q.weights + rho
    return GridMeasure(q.grid, w / w.sum(), rho)
