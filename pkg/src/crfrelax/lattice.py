"""Approximate high-dimensional Gaussian filtering on the permutohedral lattice.

Implements the classic splat / blur / slice pipeline for sums of the form
``out_a = sum_b exp(-||f_a - f_b||^2 / 2) v_b`` (features pre-divided by their
bandwidths, so the kernel is a unit Gaussian), plus a level-ordered variant
that restricts the sum to pairs whose scalar levels satisfy a >= b or a <= b
comparison after discretising the levels into a fixed number of bins.

The pipeline introduces a global scale factor relative to the exact sum (it
approaches ~0.6 for large point counts); callers that need the exact scale
must align it themselves.
"""

from dataclasses import dataclass

import numpy as np

GREATER_EQUAL = "greater_equal"
LESS_EQUAL = "less_equal"


@dataclass(frozen=True)
class OrderedFilterConfig:
    """Settings for the level-ordered filter variant."""

    n_bins: int = 16
    comparison: str = GREATER_EQUAL

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError(f"need at least 2 level bins, got {self.n_bins}")
        if self.comparison not in (GREATER_EQUAL, LESS_EQUAL):
            raise ValueError(f"unknown comparison {self.comparison!r}")


class _RowLookup:
    """Exact lookup of integer rows via lexicographic binary search."""

    def __init__(self, rows):
        self._rows = rows
        self._fields = [("", rows.dtype)] * rows.shape[1]
        view = np.ascontiguousarray(rows).view(self._fields).ravel()
        self._order = np.argsort(view, kind="stable")
        self._sorted = view[self._order]
        self._n = rows.shape[0]

    def find(self, queries):
        """Return the row index of each query, or ``len(rows)`` if absent."""
        qv = np.ascontiguousarray(queries).view(self._fields).ravel()
        pos = np.searchsorted(self._sorted, qv)
        inside = pos < self._n
        cand = np.where(inside, self._order[np.minimum(pos, self._n - 1)], 0)
        hit = inside & np.all(self._rows[cand] == queries, axis=1)
        return np.where(hit, cand, self._n)


class PermutohedralLattice:
    """Precomputed splat/blur/slice structure for a fixed set of feature points.

    The structure depends only on the features; the same lattice can filter
    any number of value arrays. Instances are immutable after construction and
    safe to share across threads (each filter call allocates its own scratch).
    """

    def __init__(self, dimension, offsets, weights, blur_left, blur_right):
        self.dimension = dimension
        self.n_points = offsets.shape[0]
        self.n_vertices = blur_left.shape[1]
        self.offsets = offsets          # (N, d+1) vertex index per enclosing simplex corner
        self.weights = weights          # (N, d+1) barycentric weights, rows sum to 1
        self.blur_left = blur_left      # (d+1, V) neighbour indices; V marks "missing"
        self.blur_right = blur_right


def build_lattice(features):
    """Embed ``features`` (N x d) and return the reusable lattice structure."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim == 1:
        f = f[:, None]
    if f.ndim != 2 or f.shape[0] < 1:
        raise ValueError("features must be a non-empty N x d array")
    if not np.all(np.isfinite(f)):
        raise ValueError("features must be finite")
    n, d = f.shape
    dp1 = d + 1

    # Canonical embedding: scale so that the lattice's axis-aligned blur
    # approximates a unit Gaussian in feature space.
    scale = np.sqrt(2.0 / 3.0) * dp1 / np.sqrt(
        np.arange(1, d + 1, dtype=np.float64) * np.arange(2, d + 2, dtype=np.float64)
    )
    cf = f * scale
    elevated = np.empty((n, dp1))
    running = np.zeros(n)
    for i in range(d, 0, -1):
        ci = cf[:, i - 1]
        elevated[:, i] = running - i * ci
        running = running + ci
    elevated[:, 0] = running

    # Round each point to the nearest remainder-0 lattice point.
    v = elevated / dp1
    up = np.ceil(v) * dp1
    down = np.floor(v) * dp1
    greedy = np.where(up - elevated < elevated - down, up, down).astype(np.int64)

    # Rank coordinates by descending differential; ties broken by index.
    diff = elevated - greedy
    order = np.argsort(-diff, axis=1, kind="stable")
    rank = np.empty((n, dp1), dtype=np.int64)
    np.put_along_axis(rank, order, np.broadcast_to(np.arange(dp1), (n, dp1)).copy(), axis=1)

    # Walk back onto the sum-zero hyperplane.
    excess = greedy.sum(axis=1) // dp1
    rank = rank + excess[:, None]
    low = rank < 0
    high = rank > d
    rank = rank + np.where(low, dp1, 0) - np.where(high, dp1, 0)
    greedy = greedy + np.where(low, dp1, 0) - np.where(high, dp1, 0)

    # Barycentric coordinates inside the enclosing simplex.
    t = (elevated - greedy) / dp1
    bary = np.zeros((n, dp1 + 1))
    rows = np.arange(n)
    for i in range(dp1):
        bary[rows, d - rank[:, i]] += t[:, i]
        bary[rows, dp1 - rank[:, i]] -= t[:, i]
    bary[:, 0] += 1.0 + bary[:, dp1]
    weights = np.ascontiguousarray(bary[:, :dp1])

    # Keys of the d+1 enclosing vertices (first d coordinates suffice; they
    # determine the last one through the sum-zero constraint).
    keys = np.empty((n, dp1, d), dtype=np.int64)
    for r in range(dp1):
        keys[:, r, :] = greedy[:, :d] + r - np.where(rank[:, :d] > d - r, dp1, 0)
    vertices, inverse = np.unique(keys.reshape(n * dp1, d), axis=0, return_inverse=True)
    offsets = inverse.reshape(n, dp1).astype(np.int64)

    # Blur neighbour tables along each of the d+1 lattice axes.
    n_vertices = vertices.shape[0]
    lookup = _RowLookup(vertices)
    blur_left = np.empty((dp1, n_vertices), dtype=np.int64)
    blur_right = np.empty((dp1, n_vertices), dtype=np.int64)
    for axis in range(dp1):
        step = np.ones(d, dtype=np.int64)
        if axis < d:
            step[axis] = -d
        blur_left[axis] = lookup.find(vertices + step)
        blur_right[axis] = lookup.find(vertices - step)

    return PermutohedralLattice(d, offsets, weights, blur_left, blur_right)


def _splat(lat, values):
    """Barycentric accumulation of point values onto lattice vertices."""
    n, k = values.shape
    size = lat.n_vertices + 1  # extra zero row backs missing blur neighbours
    acc = np.zeros((size, k))
    idx = lat.offsets.ravel()
    contrib = lat.weights[:, :, None] * values[:, None, :]
    flat = contrib.reshape(-1, k)
    for col in range(k):
        acc[:, col] = np.bincount(idx, weights=flat[:, col], minlength=size)
    return acc


def _blur(lat, acc):
    """One (1, 2, 1) pass along every lattice axis, centre weight kept at 1."""
    nv = lat.n_vertices
    for axis in range(lat.dimension + 1):
        left = acc[lat.blur_left[axis]]
        right = acc[lat.blur_right[axis]]
        nxt = np.zeros_like(acc)
        nxt[:nv] = acc[:nv] + 0.5 * (left + right)
        acc = nxt
    return acc


def _slice_scale(d):
    return 1.0 / (1.0 + 2.0 ** (-d))


def filter_values(lat, values):
    """Apply the Gaussian filter to ``values`` (N or N x k), self term included.

    Linear in ``values``; the output approximates ``sum_b k(f_a, f_b) v_b`` up
    to the lattice's global scale factor.
    """
    vals = np.asarray(values, dtype=np.float64)
    single = vals.ndim == 1
    if single:
        vals = vals[:, None]
    if vals.shape[0] != lat.n_points:
        raise ValueError(
            f"values have {vals.shape[0]} rows, lattice was built for {lat.n_points}"
        )
    acc = _blur(lat, _splat(lat, vals))
    out = np.einsum("ni,nik->nk", lat.weights, acc[lat.offsets])
    out *= _slice_scale(lat.dimension)
    return out[:, 0] if single else out


def level_bins(levels, n_bins, comparison):
    """Discretise levels in [0, 1] into bins matching the ordered splat rule.

    The greater-equal variant uses the interval [h/(H-1), (h+1)/(H-1)), the
    less-equal variant uses ((h-1)/(H-1), h/(H-1)].
    """
    lv = np.asarray(levels, dtype=np.float64)
    if comparison == GREATER_EQUAL:
        bins = np.floor(lv * (n_bins - 1))
    elif comparison == LESS_EQUAL:
        bins = np.ceil(lv * (n_bins - 1))
    else:
        raise ValueError(f"unknown comparison {comparison!r}")
    return np.clip(bins, 0, n_bins - 1).astype(np.int64)


def filter_ordered(lat, values, levels, cfg):
    """Level-ordered Gaussian filter.

    Approximates ``sum_b k(f_a, f_b) v_b 1[y_a >= y_b]`` (greater-equal) or
    the mirrored ``<=`` sum, where the comparison is taken between the bin
    indices of the levels. Values are splatted per bin, blurred per bin, and
    sliced at each point's own bin after accumulating over admissible bins.
    """
    vals = np.asarray(values, dtype=np.float64)
    single = vals.ndim == 1
    if single:
        vals = vals[:, None]
    if vals.shape[1] != 1:
        raise ValueError("ordered filtering expects a single value column")
    if vals.shape[0] != lat.n_points:
        raise ValueError(
            f"values have {vals.shape[0]} rows, lattice was built for {lat.n_points}"
        )
    lv = np.asarray(levels, dtype=np.float64).reshape(-1)
    if lv.shape[0] != lat.n_points:
        raise ValueError("levels must have one entry per point")
    if np.any(lv < 0.0) or np.any(lv > 1.0):
        raise ValueError("levels must lie in [0, 1]")

    h = level_bins(lv, cfg.n_bins, cfg.comparison)
    size = lat.n_vertices + 1
    combined = lat.offsets * cfg.n_bins + h[:, None]  # (N, d+1) flattened (vertex, bin)
    contrib = (lat.weights * vals).ravel()
    acc = np.bincount(combined.ravel(), weights=contrib, minlength=size * cfg.n_bins)
    acc = acc.reshape(size, cfg.n_bins)

    acc = _blur(lat, acc)
    if cfg.comparison == GREATER_EQUAL:
        acc = np.cumsum(acc, axis=1)
    else:
        acc = np.cumsum(acc[:, ::-1], axis=1)[:, ::-1]

    sliced = acc[lat.offsets, h[:, None]]
    out = (lat.weights * sliced).sum(axis=1) * _slice_scale(lat.dimension)
    return out if single else out[:, None]
