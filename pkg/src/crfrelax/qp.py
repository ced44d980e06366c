"""Frank-Wolfe descent on the quadratic relaxation.

Each iteration assembles the gradient from cached products, takes the
separable conditional gradient (per-pixel vertex plus per-clique box corner),
and moves by the closed-form optimal step along the segment. The single
expensive kernel product per iteration is the one needed by the step size;
the gradient caches are then incremented from it, so the filter suite runs
exactly once per iteration after initialisation.
"""

import time
from dataclasses import dataclass

import numpy as np

from .model import (
    EnergyTrace,
    RelaxedLabeling,
    consistent_auxiliary,
    one_hot,
    _psi_product,
)

UNARY_ARGMIN = "unary_argmin"
UNIFORM = "uniform"


@dataclass
class QpOptions:
    max_iters: int = 100
    tol: float = 1e-6
    tol_window: int = 5
    init: str = UNARY_ARGMIN
    track_energy: object = None  # optional callable y -> float, recorded in the trace

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.init not in (UNARY_ARGMIN, UNIFORM):
            raise ValueError(f"unknown init mode {self.init!r}")


@dataclass
class QpState:
    """Current iterate plus the incrementally maintained gradient products."""

    y: np.ndarray
    z: np.ndarray
    two_psi_y: np.ndarray        # 2 Psi y, updated from the step's direction product
    clique_pressure: np.ndarray  # H^T C z, scattered to pixels
    t: int
    trace: EnergyTrace


def _clique_pressure(cliques, z):
    if cliques.n_cliques == 0:
        return np.zeros((cliques.assignments.shape[0], z.shape[1] if z.ndim == 2 else 1))
    return cliques.broadcast(cliques.costs[:, None] * z)


def qp_init(model, opts, pairwise):
    n, m = model.space.n_pixels, model.space.n_labels
    if opts.init == UNARY_ARGMIN:
        y = one_hot(np.argmin(model.unaries, axis=1), m)
    else:
        y = np.full((n, m), 1.0 / m)
    z = consistent_auxiliary(model.cliques, y)
    two_psi_y = 2.0 * _psi_product(pairwise, y)
    return QpState(y, z, two_psi_y, _clique_pressure(model.cliques, z), 0, EnergyTrace())


def qp_gradient(model, y, z, pairwise=None):
    """Gradient of the relaxed quadratic objective at an arbitrary (y, z)."""
    op = pairwise if pairwise is not None else model.pairwise_exact()
    cliques = model.cliques
    grad_y = model.unaries + 2.0 * _psi_product(op, y)
    if cliques.n_cliques:
        grad_y = grad_y + cliques.broadcast(cliques.costs[:, None] * (z - 1.0))
        grad_z = cliques.costs[:, None] * (
            1.0 + cliques.sum_rows(y) - cliques.sizes[:, None]
        )
    else:
        grad_z = np.zeros((0, y.shape[1]))
    return grad_y, grad_z


def qp_gradient_cached(model, state):
    """Gradient assembled from the state's incremental products."""
    cliques = model.cliques
    grad_y = model.unaries + state.two_psi_y
    if cliques.n_cliques:
        ones_pressure = cliques.broadcast(
            np.broadcast_to(cliques.costs[:, None], state.z.shape).copy()
        )
        grad_y = grad_y + state.clique_pressure - ones_pressure
        grad_z = cliques.costs[:, None] * (
            1.0 + cliques.sum_rows(state.y) - cliques.sizes[:, None]
        )
    else:
        grad_z = np.zeros((0, state.y.shape[1]))
    return grad_y, grad_z


def qp_conditional_gradient(grad_y, grad_z):
    """Feasible-set vertex minimising the linearised objective.

    Per-pixel: one-hot at the row argmin (lowest index wins ties). Per clique
    entry: 1 exactly where the gradient is strictly negative.
    """
    s_y = one_hot(np.argmin(grad_y, axis=1), grad_y.shape[1])
    s_z = (grad_z < 0.0).astype(np.float64)
    return s_y, s_z


def _objective(model, y, z, two_psi_y):
    value = float((model.unaries * y).sum() + 0.5 * (y * two_psi_y).sum())
    cliques = model.cliques
    if cliques.n_cliques:
        costs = cliques.costs[:, None]
        shortfall = cliques.sizes[:, None] - cliques.sum_rows(y)
        value += float((costs * z).sum() + ((1.0 - z) * costs * shortfall).sum())
        value -= float((y.shape[1] - 1) * cliques.costs.sum())
    return value


def qp_optimal_step(model, state, s_y, s_z, pairwise):
    """Closed-form minimiser of the objective along the segment to (s_y, s_z).

    Returns (delta, psi_u, direction u, direction v); ``psi_u`` is the one
    kernel product of the iteration and is reused to update the caches.
    """
    u = s_y - state.y
    v = s_z - state.z
    psi_u = _psi_product(pairwise, u)
    cliques = model.cliques
    if cliques.n_cliques:
        costs = cliques.costs[:, None]
        hu = cliques.sum_rows(u)
        chu = costs * hu
        quad = float((u * psi_u).sum() + (v * chu).sum())
        lin = float(
            (model.unaries * u).sum()
            + (u * state.two_psi_y).sum()
            + (costs * v).sum()
            - ((1.0 - state.z) * chu).sum()
            - (v * costs * (cliques.sizes[:, None] - cliques.sum_rows(state.y))).sum()
        )
    else:
        quad = float((u * psi_u).sum())
        lin = float((model.unaries * u).sum() + (u * state.two_psi_y).sum())

    if quad > 1e-300:
        delta = min(1.0, max(0.0, -lin / (2.0 * quad)))
    else:
        # Non-convex or linear along the segment: the minimum sits at an end.
        delta = 1.0 if quad + lin < 0.0 else 0.0
    return delta, psi_u, u, v


def qp_minimise(model, opts=None, pairwise=None):
    """Run the descent until convergence or the iteration cap.

    Parameters
    ----------
    model : CrfModel
    opts : QpOptions, optional
    pairwise : operator, optional
        Exact or lattice backend; defaults to the exact one.

    Returns
    -------
    (RelaxedLabeling, EnergyTrace)
        Final iterate and the per-iteration objective trace. Objectives are
        non-increasing; iterates stay inside the feasible product set.
    """
    opts = opts or QpOptions()
    op = pairwise if pairwise is not None else model.pairwise_exact()
    start = time.perf_counter()
    state = qp_init(model, opts, op)

    def snapshot(value):
        energy = float("nan")
        if opts.track_energy is not None:
            energy = float(opts.track_energy(state.y))
        state.trace.record(state.t, time.perf_counter() - start, value, energy)

    history = [_objective(model, state.y, state.z, state.two_psi_y)]
    snapshot(history[0])

    for t in range(1, opts.max_iters + 1):
        state.t = t
        grad_y, grad_z = qp_gradient_cached(model, state)
        s_y, s_z = qp_conditional_gradient(grad_y, grad_z)
        if np.array_equal(s_y, state.y) and np.array_equal(s_z, state.z):
            break
        delta, psi_u, u, v = qp_optimal_step(model, state, s_y, s_z, op)
        state.y = state.y + delta * u
        state.z = state.z + delta * v
        state.two_psi_y = state.two_psi_y + 2.0 * delta * psi_u
        if model.cliques.n_cliques:
            state.clique_pressure = state.clique_pressure + delta * _clique_pressure(
                model.cliques, v
            )
        history.append(_objective(model, state.y, state.z, state.two_psi_y))
        snapshot(history[-1])
        w = opts.tol_window
        if len(history) > w:
            drop = history[-1 - w] - history[-1]
            if drop < opts.tol * max(1.0, abs(history[-1 - w])):
                break

    return RelaxedLabeling(state.y, state.z), state.trace
