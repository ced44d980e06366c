"""Dense CRF MAP inference through continuous relaxations.

Energies combine per-pixel unary costs, Potts pairwise terms with Gaussian
feature affinities over all pixel pairs, and constant penalties on
non-uniform pixel cliques. Three inference routes share one model:

* ``qp_minimise`` - Frank-Wolfe descent on a quadratic relaxation;
* ``lp_minimise`` - proximal block-coordinate descent on a piecewise-linear
  relaxation;
* ``mf_minimise`` - the parallel mean-field baseline.

All three run with either an exact dense pairwise backend or permutohedral
lattice filtering with per-iteration cost linear in pixels times labels.
"""

from .config import PRESETS, RunConfig
from .lattice import (
    GREATER_EQUAL,
    LESS_EQUAL,
    OrderedFilterConfig,
    PermutohedralLattice,
    build_lattice,
    filter_ordered,
    filter_values,
)
from .lp import (
    LpDualState,
    LpOptions,
    beta_optimal,
    gamma_qp_solve,
    lp_conditional_gradient,
    lp_minimise,
    lp_optimal_step,
    prox_subproblem,
    simplex_project,
    simplex_project_rows,
)
from .meanfield import MeanFieldState, mf_minimise, mf_update
from .model import (
    CliqueSet,
    CrfModel,
    DiscreteLabeling,
    EnergyTrace,
    KernelSpec,
    LabelSpace,
    RelaxedLabeling,
    clique_cost,
    clique_variance,
    compute_features,
    consistent_auxiliary,
    discrete_energy,
    lp_objective,
    one_hot,
    qp_objective,
    relax_labeling,
    round_argmax,
)
from .operators import ExactGaussianPairwise, LatticeGaussianPairwise
from .qp import (
    QpOptions,
    QpState,
    qp_conditional_gradient,
    qp_gradient,
    qp_minimise,
    qp_optimal_step,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
