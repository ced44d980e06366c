"""Proximal minimisation of the piecewise-linear relaxation.

Each outer round solves the proximal subproblem anchored at the current
feasible point by block coordinate descent on the smooth dual: the
(beta, gamma) block has a closed form for beta and per-pixel nonnegative QPs
for gamma (solved by multiplicative updates), while the (alpha, mu) block
takes one Frank-Wolfe step whose conditional gradient needs only ordered
kernel sums and per-clique extremes. Dual variables are held purely through
their aggregated products, so storage stays linear in pixels times labels.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .model import EnergyTrace, lp_objective, validate_simplex_rows


@dataclass
class LpOptions:
    outer_iters: int = 5
    inner_iters: int = 10
    gamma_iters: int = 50
    lam: float = 0.1
    n_bins: int = 16
    gamma_start: float = 1e-3
    stabiliser: float = 1e-6
    track_energy: object = None

    def __post_init__(self):
        if min(self.outer_iters, self.inner_iters, self.gamma_iters) < 1:
            raise ValueError("iteration counts must be at least 1")
        if self.lam <= 0:
            raise ValueError("the proximal weight must be positive")
        if self.n_bins < 2:
            raise ValueError("need at least 2 level bins")


@dataclass
class LpDualState:
    """Aggregated dual products; the individual multipliers are never stored."""

    a_alpha: np.ndarray   # (A alpha), pairwise block product
    u_mu: np.ndarray      # (U mu), clique block product
    beta: np.ndarray      # per-pixel equality multipliers
    gamma: np.ndarray     # per-entry nonnegativity multipliers
    lam: float
    anchor: np.ndarray    # proximal anchor y^k
    phi: np.ndarray       # unary block, kept for reassembly

    @classmethod
    def zeros(cls, phi, anchor, lam):
        n, m = phi.shape
        return cls(
            np.zeros((n, m)), np.zeros((n, m)), np.zeros(n), np.zeros((n, m)),
            float(lam), anchor, phi,
        )

    def residual(self):
        return self.a_alpha + self.u_mu + self.beta[:, None] + self.gamma - self.phi

    def ytilde(self):
        """Primal recovery from the dual products (infeasible in general)."""
        return self.lam * self.residual() + self.anchor

    def dual_objective(self):
        r = self.residual()
        return float(
            0.5 * self.lam * (r * r).sum() + (r * self.anchor).sum() - self.beta.sum()
        )


def beta_optimal(state):
    """Closed-form equality-block optimum: minus the label mean of the rest."""
    partial = state.a_alpha + state.u_mu + state.gamma - state.phi
    return -partial.mean(axis=1)


def gamma_qp_solve(h, lam, n_labels, iters, start=1e-3, stabiliser=1e-6):
    """Multiplicative updates for the per-pixel nonnegative QPs.

    Minimises ``0.5 gamma^T Q gamma - <h, gamma>`` over ``gamma >= 0`` rowwise,
    with ``Q = lam (I - J/M)`` applied in O(M) through its identity-plus-ones
    split. Starts from a strictly positive uniform point so every support is
    reachable; each update keeps the objective non-increasing.
    """
    h = np.asarray(h, dtype=np.float64)
    squeeze = h.ndim == 1
    if squeeze:
        h = h[None, :]
    m = int(n_labels)
    if m == 1:
        out = np.zeros_like(h)
        return out[0] if squeeze else out
    gamma = np.full_like(h, float(start))
    h_pos = np.maximum(h, 0.0)
    h_neg = np.maximum(-h, 0.0)
    for _ in range(int(iters)):
        total = gamma.sum(axis=1, keepdims=True)
        q_negative = (lam / m) * (total - gamma)
        q_absolute = lam * ((1.0 - 1.0 / m) * gamma + (total - gamma) / m)
        gamma = gamma * (2.0 * q_negative + h_pos + stabiliser) / (
            q_absolute + h_neg + stabiliser
        )
    return gamma[0] if squeeze else gamma


def _gamma_objective_rows(gamma, h, lam, m):
    total = gamma.sum(axis=1)
    quad = 0.5 * lam * ((gamma * gamma).sum(axis=1) - total * total / m)
    return quad - (gamma * h).sum(axis=1)


def clique_conditional_gradient(cliques, ytilde):
    """Clique block of the conditional gradient.

    For every clique, the label with the widest member spread receives +C_p at
    its smallest member entry and -C_p at its largest; constant cliques emit
    nothing. Ties resolve to the first entry in member-scan order.
    """
    out = np.zeros_like(ytilde)
    costs = cliques.costs
    for p, members in enumerate(cliques.members):
        block = ytilde[members]
        spread = block.max(axis=0) - block.min(axis=0)
        label = int(np.argmax(spread))
        if spread[label] <= 0.0:
            continue
        column = block[:, label]
        out[members[int(np.argmin(column))], label] += costs[p]
        out[members[int(np.argmax(column))], label] -= costs[p]
    return out


def lp_conditional_gradient(model, ytilde, pairwise, n_bins=None):
    """Products (A s_alpha, U s_mu) of the dual conditional gradient."""
    as_alpha = pairwise.ordered_signed_difference(ytilde, n_bins=n_bins)
    us_mu = clique_conditional_gradient(model.cliques, ytilde)
    return as_alpha, us_mu


def lp_optimal_step(state, as_alpha, us_mu):
    """Exact line minimum of the dual objective along the Frank-Wolfe segment."""
    direction = (as_alpha - state.a_alpha) + (us_mu - state.u_mu)
    denom = state.lam * float((direction * direction).sum())
    if denom <= 1e-300:
        return 0.0
    step = -float((state.ytilde() * direction).sum()) / denom
    return min(1.0, max(0.0, step))


def simplex_project(v):
    """Euclidean projection of a vector onto the probability simplex."""
    return simplex_project_rows(np.asarray(v, dtype=np.float64)[None, :])[0]


def simplex_project_rows(values):
    """Rowwise Euclidean projection onto the probability simplex."""
    v = np.asarray(values, dtype=np.float64)
    m = v.shape[1]
    u = np.sort(v, axis=1)[:, ::-1]
    css = (np.cumsum(u, axis=1) - 1.0) / np.arange(1, m + 1)
    rho = np.sum(u > css, axis=1) - 1
    tau = css[np.arange(v.shape[0]), rho]
    return np.maximum(v - tau[:, None], 0.0)


def prox_subproblem(model, y_anchor, opts, pairwise, record_dual=None):
    """Dual block-coordinate descent for one proximal subproblem.

    Runs ``opts.inner_iters`` rounds of {(beta, gamma) block, one Frank-Wolfe
    step on (alpha, mu)} from zero duals and returns the final infeasible
    primal estimate together with the dual state. ``record_dual``, if given,
    is a list collecting (stage, dual objective) pairs after every block.
    """
    m = model.space.n_labels
    state = LpDualState.zeros(model.unaries, y_anchor, opts.lam)
    if record_dual is not None:
        record_dual.append(("init", state.dual_objective()))
    for _ in range(opts.inner_iters):
        # (beta, gamma) block: per-pixel QPs with beta eliminated in closed form.
        partial = state.a_alpha + state.u_mu - state.phi
        q_partial = opts.lam * (partial - partial.mean(axis=1, keepdims=True))
        h = -q_partial - state.anchor
        fresh = gamma_qp_solve(
            h, opts.lam, m, opts.gamma_iters, opts.gamma_start, opts.stabiliser
        )
        # The restart point can sit above the previous optimum when the inner
        # budget is small; keep the better of the two so the dual never rises.
        worse = _gamma_objective_rows(fresh, h, opts.lam, m) > _gamma_objective_rows(
            state.gamma, h, opts.lam, m
        )
        fresh[worse] = state.gamma[worse]
        state.gamma = fresh
        state.beta = beta_optimal(state)
        if record_dual is not None:
            record_dual.append(("beta_gamma", state.dual_objective()))

        # (alpha, mu) block: one Frank-Wolfe step in product space.
        ytilde = state.ytilde()
        as_alpha, us_mu = lp_conditional_gradient(
            model, ytilde, pairwise, n_bins=opts.n_bins
        )
        delta = lp_optimal_step(state, as_alpha, us_mu)
        state.a_alpha = state.a_alpha + delta * (as_alpha - state.a_alpha)
        state.u_mu = state.u_mu + delta * (us_mu - state.u_mu)
        if record_dual is not None:
            record_dual.append(("frank_wolfe", state.dual_objective()))
    return state.ytilde(), state


def lp_minimise(model, y0, opts=None, pairwise=None):
    """Proximal descent on the piecewise-linear relaxation.

    Parameters
    ----------
    model : CrfModel
    y0 : ndarray
        Feasible starting point, e.g. the unary argmin vertex or the output of
        a faster solver.
    opts : LpOptions, optional
    pairwise : operator, optional
        Exact or lattice backend; defaults to the exact one.

    Returns
    -------
    (ndarray, EnergyTrace)
        Feasible final point and the relaxation value per outer iteration.
    """
    opts = opts or LpOptions()
    op = pairwise if pairwise is not None else model.pairwise_exact()
    y = validate_simplex_rows(y0).copy()
    start = time.perf_counter()
    trace = EnergyTrace()

    def snapshot(k):
        energy = float("nan")
        if opts.track_energy is not None:
            energy = float(opts.track_energy(y))
        trace.record(k, time.perf_counter() - start, lp_objective(model, y, op), energy)

    snapshot(0)
    for k in range(opts.outer_iters):
        ytilde, _ = prox_subproblem(model, y, opts, op)
        y = simplex_project_rows(ytilde)
        snapshot(k + 1)
    return y, trace
