"""Run configuration and the cross-validated parameter presets."""

import dataclasses
import json
from dataclasses import dataclass

from .model import KernelSpec

SOLVERS = ("mf5", "qp", "lp", "mf5_clique", "qp_clique", "lp_clique")


@dataclass
class RunConfig:
    solver: str = "mf5"
    # pixel-compatibility parameters: bilateral (w1, sigma1, sigma2), spatial (w2, sigma3)
    w1: float = 10.0
    w2: float = 3.0
    sigma1: float = 20.0
    sigma2: float = 10.0
    sigma3: float = 3.0
    # clique parameters
    gamma: float = 1.0
    eta: float = 100.0
    min_region: int = 3
    grid_block: int = 0  # 0 = no grid generator; clique solvers then need a map
    # solver options
    qp_max_iters: int = 100
    qp_tol: float = 1e-6
    lp_outer: int = 5
    lp_inner: int = 10
    lp_gamma_iters: int = 50
    lp_lambda: float = 0.1
    mf_iters: int = 5
    n_bins: int = 16
    # evaluation engine: exact Gram below the limit, lattice filtering above
    engine: str = "auto"
    exact_limit: int = 4096
    seed: int = 0
    ignore_label: int = -1  # -1 = nothing ignored in the metrics

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r}; choose from {SOLVERS}")
        if self.engine not in ("auto", "exact", "lattice"):
            raise ValueError(f"unknown engine {self.engine!r}")

    @property
    def uses_cliques(self):
        return self.solver.endswith("_clique")

    def kernels(self):
        return (
            KernelSpec.bilateral(self.w1, self.sigma1, self.sigma2),
            KernelSpec.spatial(self.w2, self.sigma3),
        )

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        preset = data.pop("preset", None)
        base = dict(PRESETS[preset]) if preset else {}
        base.update(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(base) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**base)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# Cross-validated parameter presets shipped as config defaults, one object per
# dataset/solver row. Clique rows carry the uniformity-penalty parameters and
# the minimum region size.
PRESETS = {
    "msrc_mf5": dict(solver="mf5", sigma3=4.10, w2=77.047, sigma1=47.79,
                     sigma2=4.69, w1=100.0),
    "msrc_qp": dict(solver="qp", sigma3=2.36, w2=22.89, sigma1=48.73,
                    sigma2=6.52, w1=60.50),
    "msrc_mf5_clique": dict(solver="mf5_clique", sigma3=6.53, w2=4.46, sigma1=50.0,
                            sigma2=9.74, w1=11.56, min_region=10,
                            gamma=54.88, eta=876.08),
    "msrc_qp_clique": dict(solver="qp_clique", sigma3=3.74, w2=17.67, sigma1=39.76,
                           sigma2=9.49, w1=54.56, min_region=100,
                           gamma=19.71, eta=109.0),
    "pascal_mf5": dict(solver="mf5", sigma3=1.00, w2=29.19, sigma1=17.82,
                       sigma2=6.14, w1=32.56),
    "pascal_qp": dict(solver="qp", sigma3=1.00, w2=100.0, sigma1=19.11,
                      sigma2=6.08, w1=55.19),
    "pascal_mf5_clique": dict(solver="mf5_clique", sigma3=1.20, w2=76.38, sigma1=16.32,
                              sigma2=38.10, w1=1.45, min_region=27,
                              gamma=20.71, eta=467.36),
    "pascal_qp_clique": dict(solver="qp_clique", sigma3=1.00, w2=99.53, sigma1=13.30,
                             sigma2=7.89, w1=100.00, min_region=97,
                             gamma=100.0, eta=139.70),
}
