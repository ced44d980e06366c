"""Brute-force reference implementations used by the test suite.

Everything here is written as plain double loops straight from the energy
definitions and shares no code with the fast paths; independence is the whole
point. Budgets guard the exponential routines.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OracleBudget:
    max_points: int = 256
    max_labels: int = 8
    max_states: int = 1_000_000
    max_clique: int = 16


DEFAULT_BUDGET = OracleBudget()


def _check_points(n, budget):
    if n > budget.max_points:
        raise ValueError(f"{n} points exceed the oracle budget of {budget.max_points}")


def gaussian_kernel(fa, fb):
    return math.exp(-0.5 * float(((fa - fb) ** 2).sum()))


def naive_gaussian_sum(features, values, budget=DEFAULT_BUDGET):
    """Exact double-loop evaluation of the unit-bandwidth Gaussian sum."""
    features = np.asarray(features, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    n = features.shape[0]
    _check_points(n, budget)
    out = np.zeros_like(values, dtype=np.float64)
    for a in range(n):
        for b in range(n):
            out[a] += gaussian_kernel(features[a], features[b]) * values[b]
    return out


def _bin_of(level, n_bins, comparison):
    if comparison == "greater_equal":
        h = math.floor(level * (n_bins - 1))
    elif comparison == "less_equal":
        h = math.ceil(level * (n_bins - 1))
    else:
        raise ValueError(f"unknown comparison {comparison!r}")
    return min(max(h, 0), n_bins - 1)


def naive_ordered_sum(features, values, levels, comparison="greater_equal",
                      n_bins=None, kernel=None, budget=DEFAULT_BUDGET):
    """Indicator-weighted Gaussian sum, optionally with discretised levels.

    ``kernel`` may supply a precomputed pairwise weight matrix; by default the
    exact Gaussian on ``features`` is used.
    """
    features = np.asarray(features, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    levels = np.asarray(levels, dtype=np.float64)
    n = features.shape[0]
    _check_points(n, budget)
    if n_bins is not None:
        marks = [_bin_of(levels[a], n_bins, comparison) for a in range(n)]
    else:
        marks = list(levels)
    out = np.zeros(n)
    for a in range(n):
        for b in range(n):
            if comparison == "greater_equal":
                keep = marks[a] >= marks[b]
            else:
                keep = marks[a] <= marks[b]
            if not keep:
                continue
            w = kernel[a, b] if kernel is not None else gaussian_kernel(features[a], features[b])
            out[a] += w * values[b]
    return out


def _pair_kernel(model, a, b):
    total = 0.0
    for feats, spec in zip(model.features, model.kernels):
        total += spec.weight * gaussian_kernel(feats[a], feats[b])
    return total


def oracle_energy(model, labels, budget=DEFAULT_BUDGET):
    """Term-by-term re-evaluation of the discrete energy."""
    labels = np.asarray(labels, dtype=np.int64)
    n, m = model.space.n_pixels, model.space.n_labels
    _check_points(n, budget)
    total = 0.0
    for a in range(n):
        total += model.unaries[a, labels[a]]
    for a in range(n):
        for b in range(n):
            if a != b and labels[a] != labels[b]:
                total += _pair_kernel(model, a, b)
    for p, members in enumerate(model.cliques.members):
        first = labels[members[0]]
        if any(labels[c] != first for c in members):
            total += model.cliques.costs[p]
    return float(total)


def oracle_qp_objective(model, y, z, budget=DEFAULT_BUDGET):
    """Direct expansion of the relaxed quadratic objective."""
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    n, m = model.space.n_pixels, model.space.n_labels
    _check_points(n, budget)
    total = float((model.unaries * y).sum())
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            k = _pair_kernel(model, a, b)
            for i in range(m):
                for j in range(m):
                    if i != j:
                        total += k * y[a, i] * y[b, j]
    for p, members in enumerate(model.cliques.members):
        cost = model.cliques.costs[p]
        for i in range(m):
            total += cost * z[p, i]
            total += cost * (1.0 - z[p, i]) * sum(1.0 - y[c, i] for c in members)
        total -= cost * (m - 1)
    return total


def oracle_lp_objective(model, y, budget=DEFAULT_BUDGET):
    """Direct expansion of the piecewise-linear objective."""
    y = np.asarray(y, dtype=np.float64)
    n, m = model.space.n_pixels, model.space.n_labels
    _check_points(n, budget)
    total = float((model.unaries * y).sum())
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            k = _pair_kernel(model, a, b)
            for i in range(m):
                total += k * abs(y[a, i] - y[b, i]) / 2.0
    for p, members in enumerate(model.cliques.members):
        worst = 0.0
        for i in range(m):
            for c in members:
                for d in members:
                    worst = max(worst, abs(y[c, i] - y[d, i]))
        total += model.cliques.costs[p] * worst
    return total


def oracle_dual_objective(a_alpha, u_mu, beta, gamma, phi, anchor, lam):
    """Naive expansion of the proximal dual objective from its products."""
    total = 0.0
    n, m = phi.shape
    for a in range(n):
        for i in range(m):
            r = a_alpha[a, i] + u_mu[a, i] + beta[a] + gamma[a, i] - phi[a, i]
            total += 0.5 * lam * r * r + r * anchor[a, i]
    for a in range(n):
        total -= beta[a]
    return total


def exhaustive_map(model, budget=DEFAULT_BUDGET):
    """Global optimum by full enumeration; first minimiser in scan order wins."""
    n, m = model.space.n_pixels, model.space.n_labels
    if m ** n > budget.max_states:
        raise ValueError("label-state count exceeds the oracle budget")
    best_x, best_e = None, math.inf
    for assignment in itertools.product(range(m), repeat=n):
        e = oracle_energy(model, np.array(assignment), budget)
        if e < best_e:
            best_x, best_e = np.array(assignment, dtype=np.int64), e
    return best_x, best_e


def fd_gradient(objective, point, eps=1e-6):
    """Central finite differences, one coordinate at a time."""
    point = np.asarray(point, dtype=np.float64)
    flat = point.ravel()
    grad = np.zeros_like(flat)
    for idx in range(flat.shape[0]):
        bump = np.zeros_like(flat)
        bump[idx] = eps
        hi = objective((flat + bump).reshape(point.shape))
        lo = objective((flat - bump).reshape(point.shape))
        grad[idx] = (hi - lo) / (2.0 * eps)
    return grad.reshape(point.shape)


def grid_step_search(objective, resolution=1000):
    """Argmin of a scalar function over a uniform grid on [0, 1]."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    best_d, best_v = 0.0, math.inf
    for k in range(resolution):
        d = k / (resolution - 1)
        v = objective(d)
        if v < best_v:
            best_d, best_v = d, v
    return best_d, best_v


def enumerate_simplex_projection(v):
    """Projection onto the simplex by trying every support set."""
    v = np.asarray(v, dtype=np.float64)
    m = v.shape[0]
    best, best_d = None, math.inf
    for mask in itertools.product([0, 1], repeat=m):
        support = [i for i in range(m) if mask[i]]
        if not support:
            continue
        shift = (sum(v[i] for i in support) - 1.0) / len(support)
        w = np.zeros(m)
        ok = True
        for i in support:
            w[i] = v[i] - shift
            if w[i] < -1e-12:
                ok = False
                break
        if not ok:
            continue
        d = float(((w - v) ** 2).sum())
        if d < best_d:
            best, best_d = w, d
    return best


def enumerate_nonneg_qp(q_matrix, h, grid=None):
    """Minimise 0.5 x^T Q x - h^T x over x >= 0 by support enumeration.

    Singular supports fall back to a least-squares stationary point; callers
    should only use bounded instances.
    """
    q_matrix = np.asarray(q_matrix, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    m = h.shape[0]

    def value(x):
        return 0.5 * float(x @ q_matrix @ x) - float(h @ x)

    best, best_v = np.zeros(m), 0.0
    for mask in itertools.product([0, 1], repeat=m):
        support = [i for i in range(m) if mask[i]]
        if not support:
            continue
        sub_q = q_matrix[np.ix_(support, support)]
        sub_h = h[support]
        sol, *_ = np.linalg.lstsq(sub_q, sub_h, rcond=None)
        if np.any(sol < -1e-10):
            continue
        x = np.zeros(m)
        for pos, i in enumerate(support):
            x[i] = max(sol[pos], 0.0)
        v = value(x)
        if v < best_v:
            best, best_v = x, v
    return best, best_v
