"""Energy model for dense pairwise labelling problems with sparse cliques.

The energy of a labelling ``x`` is the sum of per-pixel unary costs, a Potts
pairwise term over all ordered pixel pairs weighted by Gaussian feature
affinities, and a constant penalty per clique that is not label-uniform.
Relaxed quadratic and piecewise-linear surrogates of the same energy are
provided; both coincide with the discrete energy on integral points.
"""

from dataclasses import dataclass, field

import numpy as np

from . import operators

BILATERAL = "bilateral"
SPATIAL = "spatial"

_FEATURE_DIMS = {BILATERAL: 5, SPATIAL: 2}


@dataclass(frozen=True)
class LabelSpace:
    n_pixels: int
    n_labels: int

    def __post_init__(self):
        if self.n_pixels < 1 or self.n_labels < 1:
            raise ValueError("need at least one pixel and one label")


@dataclass(frozen=True)
class KernelSpec:
    """One Gaussian affinity kernel: weight, per-dimension bandwidths, kind."""

    weight: float
    bandwidths: tuple
    feature_kind: str

    def __post_init__(self):
        if self.feature_kind not in _FEATURE_DIMS:
            raise ValueError(f"unknown feature kind {self.feature_kind!r}")
        if len(self.bandwidths) != _FEATURE_DIMS[self.feature_kind]:
            raise ValueError(
                f"{self.feature_kind} kernels need "
                f"{_FEATURE_DIMS[self.feature_kind]} bandwidths"
            )
        if self.weight < 0:
            raise ValueError("kernel weight must be nonnegative")
        if any(b <= 0 for b in self.bandwidths):
            raise ValueError("bandwidths must be positive")

    @classmethod
    def bilateral(cls, weight, sigma_spatial, sigma_color):
        return cls(weight, (sigma_spatial,) * 2 + (sigma_color,) * 3, BILATERAL)

    @classmethod
    def spatial(cls, weight, sigma):
        return cls(weight, (sigma,) * 2, SPATIAL)


class CliqueSet:
    """Disjoint pixel groups carrying one uniformity penalty each.

    ``assignments`` maps each pixel to its clique index or -1. Disjointness is
    structural; every clique must have at least three members.
    """

    def __init__(self, assignments, costs, variances=None):
        self.assignments = np.asarray(assignments, dtype=np.int64)
        self.costs = np.atleast_1d(np.asarray(costs, dtype=np.float64))
        self.variances = (
            np.zeros_like(self.costs)
            if variances is None
            else np.atleast_1d(np.asarray(variances, dtype=np.float64))
        )
        self.n_cliques = self.costs.shape[0]
        if self.variances.shape != self.costs.shape:
            raise ValueError("one variance per clique required")
        if np.any(self.costs < 0):
            raise ValueError("clique costs must be nonnegative")
        if self.assignments.min(initial=-1) < -1 or self.assignments.max(initial=-1) >= self.n_cliques:
            raise ValueError("clique assignments out of range")
        self.members = [
            np.flatnonzero(self.assignments == p) for p in range(self.n_cliques)
        ]
        self.sizes = np.array([len(m) for m in self.members], dtype=np.int64)
        if np.any(self.sizes < 3):
            raise ValueError("every clique needs at least three members")

    @classmethod
    def empty(cls, n_pixels):
        out = cls.__new__(cls)
        out.assignments = np.full(n_pixels, -1, dtype=np.int64)
        out.costs = np.zeros(0)
        out.variances = np.zeros(0)
        out.n_cliques = 0
        out.members = []
        out.sizes = np.zeros(0, dtype=np.int64)
        return out

    def sum_rows(self, values):
        """Per-clique sums of member rows: ``(H v)`` with shape (R, M)."""
        values = np.asarray(values, dtype=np.float64)
        out = np.zeros((self.n_cliques, values.shape[1]))
        mask = self.assignments >= 0
        np.add.at(out, self.assignments[mask], values[mask])
        return out

    def broadcast(self, per_clique):
        """Scatter per-clique rows back to member pixels: ``(H^T v)``."""
        per_clique = np.asarray(per_clique, dtype=np.float64)
        n = self.assignments.shape[0]
        out = np.zeros((n, per_clique.shape[1]))
        mask = self.assignments >= 0
        out[mask] = per_clique[self.assignments[mask]]
        return out


def segment_members(segments, min_size=3):
    """Turn raw segment ids (0 = unassigned) into dense clique assignments.

    Segments smaller than ``min_size`` (never below 3) are dropped. Returns
    (assignments, kept_segment_ids).
    """
    segments = np.asarray(segments, dtype=np.int64).reshape(-1)
    min_size = max(int(min_size), 3)
    ids, counts = np.unique(segments[segments > 0], return_counts=True)
    kept = ids[counts >= min_size]
    remap = {int(s): p for p, s in enumerate(kept)}
    assignments = np.full(segments.shape[0], -1, dtype=np.int64)
    for s, p in remap.items():
        assignments[segments == s] = p
    return assignments, kept


@dataclass
class CrfModel:
    """Immutable bundle of everything that defines one energy function."""

    space: LabelSpace
    unaries: np.ndarray
    kernels: tuple
    features: tuple
    cliques: CliqueSet
    gamma: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        self.unaries = np.asarray(self.unaries, dtype=np.float64)
        if self.unaries.shape != (self.space.n_pixels, self.space.n_labels):
            raise ValueError("unaries must be n_pixels x n_labels")
        if not np.all(np.isfinite(self.unaries)):
            raise ValueError("unaries must be finite")
        if len(self.kernels) < 1:
            raise ValueError("at least one kernel required")
        if len(self.features) != len(self.kernels):
            raise ValueError("one feature set per kernel required")
        self.features = tuple(np.asarray(f, dtype=np.float64) for f in self.features)
        for f in self.features:
            if f.shape[0] != self.space.n_pixels:
                raise ValueError("feature rows must match pixel count")
        if self.cliques.assignments.shape[0] != self.space.n_pixels:
            raise ValueError("clique assignments must match pixel count")

    @property
    def kernel_weights(self):
        return [k.weight for k in self.kernels]

    def pairwise_exact(self, **kwargs):
        return operators.ExactGaussianPairwise(
            list(self.features), self.kernel_weights, **kwargs
        )

    def pairwise_lattice(self, n_bins=16):
        return operators.LatticeGaussianPairwise(
            list(self.features), self.kernel_weights, n_bins=n_bins
        )

    @classmethod
    def from_features(cls, unaries, kernels, features, cliques=None, gamma=0.0, eta=1.0):
        unaries = np.asarray(unaries, dtype=np.float64)
        space = LabelSpace(*unaries.shape)
        if cliques is None:
            cliques = CliqueSet.empty(space.n_pixels)
        return cls(space, unaries, tuple(kernels), tuple(features), cliques, gamma, eta)

    @classmethod
    def from_image(cls, image, unaries, kernels, segments=None, gamma=0.0, eta=1.0,
                   min_region=3):
        """Build a model from an H x W x 3 image, computing features and, when
        ``segments`` is given, clique costs from the colour variance rule."""
        image = np.asarray(image, dtype=np.float64)
        unaries = np.asarray(unaries, dtype=np.float64)
        n = image.shape[0] * image.shape[1]
        if unaries.shape[0] != n:
            raise ValueError("unary rows must match image pixel count")
        features = tuple(compute_features(image, k) for k in kernels)
        if segments is None:
            cliques = CliqueSet.empty(n)
        else:
            assignments, _ = segment_members(segments, min_region)
            flat = image.reshape(n, -1)
            members = [np.flatnonzero(assignments == p)
                       for p in range(assignments.max() + 1)]
            variances = np.array([clique_variance(flat[m]) for m in members])
            costs = np.array([clique_cost(v, gamma, eta) for v in variances])
            cliques = CliqueSet(assignments, costs, variances)
        return cls.from_features(unaries, kernels, features, cliques, gamma, eta)


@dataclass
class RelaxedLabeling:
    """Row-stochastic label weights plus the per-clique auxiliary block."""

    y: np.ndarray
    z: np.ndarray

    def validate(self, atol=1e-9):
        if np.any(self.y < -atol) or np.any(np.abs(self.y.sum(axis=1) - 1.0) > atol):
            raise ValueError("y is not row-stochastic")
        if self.z.size and (np.any(self.z < -atol) or np.any(self.z > 1 + atol)):
            raise ValueError("z entries must lie in [0, 1]")


@dataclass
class DiscreteLabeling:
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)


@dataclass
class EnergyTrace:
    """Per-iteration (wall-clock seconds, objective, discrete energy) records."""

    iterations: list = field(default_factory=list)
    times: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    energies: list = field(default_factory=list)

    def record(self, iteration, seconds, objective, energy=float("nan")):
        self.iterations.append(int(iteration))
        self.times.append(float(seconds))
        self.objectives.append(float(objective))
        self.energies.append(float(energy))

    def rows(self):
        return list(zip(self.iterations, self.times, self.energies, self.objectives))


def compute_features(image, spec):
    """Bandwidth-divided feature rows for one kernel over an H x W x 3 image."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("image must be H x W x 3")
    h, w = image.shape[:2]
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    pos = np.stack([xx.ravel(), yy.ravel()], axis=1).astype(np.float64)
    bw = np.asarray(spec.bandwidths, dtype=np.float64)
    if spec.feature_kind == SPATIAL:
        return pos / bw
    colors = image.reshape(h * w, 3)
    return np.concatenate([pos / bw[:2], colors / bw[2:]], axis=1)


def clique_cost(variance, gamma, eta):
    """Uniformity penalty: ``gamma * exp(-variance / eta)``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return float(gamma) * float(np.exp(-float(variance) / float(eta)))


def clique_variance(colors):
    """Mean over channels of the per-channel colour variance."""
    colors = np.asarray(colors, dtype=np.float64)
    return float(colors.var(axis=0).mean())


def one_hot(labels, n_labels):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], n_labels))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def consistent_auxiliary(cliques, y):
    """Auxiliary block matching ``y``: 0 where a clique is uniform at a label."""
    n_labels = y.shape[1]
    if cliques.n_cliques == 0:
        return np.zeros((0, n_labels))
    z = np.ones((cliques.n_cliques, n_labels))
    for p, members in enumerate(cliques.members):
        uniform = np.all(y[members] == 1.0, axis=0)
        z[p, uniform] = 0.0
    return z


def relax_labeling(model, labels):
    y = one_hot(labels, model.space.n_labels)
    return RelaxedLabeling(y, consistent_auxiliary(model.cliques, y))


def round_argmax(y):
    """Highest-weight label per row; ties go to the lowest label index."""
    return np.argmax(np.asarray(y), axis=1).astype(np.int64)


def validate_simplex_rows(y, atol=1e-9):
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < -atol) or np.any(np.abs(y.sum(axis=1) - 1.0) > max(atol, 1e-9)):
        raise ValueError("rows must lie on the probability simplex")
    return y


def _psi_product(op, values):
    """Potts-compatibility transform of the kernel product: row sum minus own."""
    p = op.apply(values)
    return p.sum(axis=1, keepdims=True) - p


def discrete_energy(model, labels, pairwise=None):
    """Exact energy of an integral labelling."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != model.space.n_pixels:
        raise ValueError("labelling length must match pixel count")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= model.space.n_labels:
        raise ValueError("labels out of range")
    op = pairwise if pairwise is not None else model.pairwise_exact()
    y = one_hot(labels, model.space.n_labels)
    unary = model.unaries[np.arange(labels.shape[0]), labels].sum()
    pair = float((y * _psi_product(op, y)).sum())
    clique = 0.0
    for p, members in enumerate(model.cliques.members):
        if np.any(labels[members] != labels[members[0]]):
            clique += model.cliques.costs[p]
    return float(unary + pair + clique)


def qp_objective(model, y, z=None, pairwise=None):
    """Quadratic relaxation value at (y, z).

    The clique block is normalised so that on integral, consistent points the
    value equals the discrete energy.
    """
    if isinstance(y, RelaxedLabeling):
        y, z = y.y, y.z
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (model.space.n_pixels, model.space.n_labels):
        raise ValueError("y must be n_pixels x n_labels")
    op = pairwise if pairwise is not None else model.pairwise_exact()
    value = float((model.unaries * y).sum() + (y * _psi_product(op, y)).sum())
    cliques = model.cliques
    if cliques.n_cliques:
        if z is None or np.asarray(z).shape != (cliques.n_cliques, y.shape[1]):
            raise ValueError("z must be n_cliques x n_labels")
        z = np.asarray(z, dtype=np.float64)
        costs = cliques.costs[:, None]
        shortfall = cliques.sizes[:, None] - cliques.sum_rows(y)
        value += float((costs * z).sum())
        value += float(((1.0 - z) * costs * shortfall).sum())
        value -= float((y.shape[1] - 1) * cliques.costs.sum())
    return value


def lp_objective(model, y, pairwise=None):
    """Piecewise-linear relaxation value at ``y`` (no proximal term)."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (model.space.n_pixels, model.space.n_labels):
        raise ValueError("y must be n_pixels x n_labels")
    op = pairwise if pairwise is not None else model.pairwise_exact()
    value = float((model.unaries * y).sum()) + float(op.abs_difference_sum(y))
    for p, members in enumerate(model.cliques.members):
        block = y[members]
        value += model.cliques.costs[p] * float((block.max(axis=0) - block.min(axis=0)).max())
    return value
