"""Batch front end: `crfrelax solve ...` and `crfrelax oracle-check ...`.

Exit codes: 0 success, 2 input error, 3 solver failure.
"""

import argparse
import os
import sys

import numpy as np

from . import io as problem_io
from . import oracle
from .config import SOLVERS, RunConfig
from .lattice import filter_values
from .lp import LpDualState, LpOptions, lp_minimise, lp_optimal_step
from .meanfield import mf_minimise
from .model import discrete_energy, one_hot, round_argmax
from .qp import QpOptions, qp_gradient, qp_minimise
from .synthetic import random_image_model, random_small_model

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3


def build_parser():
    parser = argparse.ArgumentParser(prog="crfrelax")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one solver on one problem")
    solve.add_argument("--image", required=True)
    solve.add_argument("--unaries", required=True)
    solve.add_argument("--solver", choices=SOLVERS)
    solve.add_argument("--superpixels")
    solve.add_argument("--grid-block", type=int)
    solve.add_argument("--gt")
    solve.add_argument("--config")
    solve.add_argument("--preset")
    solve.add_argument("--out", required=True)

    check = sub.add_parser("oracle-check", help="run a brute-force validation suite")
    check.add_argument("--suite", required=True,
                       choices=sorted(ORACLE_SUITES) + ["all"])
    check.add_argument("--seed", type=int, default=0)
    return parser


def _resolve_config(args):
    if args.config:
        config = RunConfig.from_file(args.config)
    elif args.preset:
        config = RunConfig.from_dict({"preset": args.preset})
    else:
        config = RunConfig(solver=args.solver or "mf5")
    changes = {}
    if args.solver:
        changes["solver"] = args.solver
    if args.grid_block:
        changes["grid_block"] = args.grid_block
    return config.replace(**changes) if changes else config


def _pick_engine(model, config):
    n = model.space.n_pixels
    if config.engine == "exact" or (config.engine == "auto" and n <= config.exact_limit):
        return model.pairwise_exact()
    return model.pairwise_lattice(config.n_bins)


def _solve(model, config, engine):
    # Trace energies stay exact regardless of the solver's engine.
    trace_op = model.pairwise_exact()

    def energy_of(y):
        return discrete_energy(model, round_argmax(y), pairwise=trace_op)

    base = config.solver.replace("_clique", "")
    if base == "mf5":
        return mf_minimise(model, iters=config.mf_iters, pairwise=engine)
    if base == "qp":
        opts = QpOptions(max_iters=config.qp_max_iters, tol=config.qp_tol,
                         track_energy=energy_of)
        relaxed, trace = qp_minimise(model, opts, pairwise=engine)
        return relaxed.y, trace
    opts = LpOptions(outer_iters=config.lp_outer, inner_iters=config.lp_inner,
                     gamma_iters=config.lp_gamma_iters, lam=config.lp_lambda,
                     n_bins=config.n_bins, track_energy=energy_of)
    y0 = one_hot(np.argmin(model.unaries, axis=1), model.space.n_labels)
    return lp_minimise(model, y0, opts, pairwise=engine)


def cmd_solve(args):
    try:
        config = _resolve_config(args)
        model, shape = problem_io.load_problem(
            args.image, args.unaries, config, args.superpixels
        )
        truth = problem_io.read_labeling(args.gt) if args.gt else None
        if truth is not None and truth.shape[0] != model.space.n_pixels:
            raise ValueError("ground truth length does not match the image")
    except (OSError, ValueError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    try:
        engine = _pick_engine(model, config)
        y, trace = _solve(model, config, engine)
        labels = round_argmax(y)
    except Exception as exc:  # pragma: no cover - diagnostics only
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    os.makedirs(args.out, exist_ok=True)
    problem_io.write_labeling(
        os.path.join(args.out, "labeling.csv"),
        os.path.join(args.out, "labeling.png"),
        labels, shape,
    )
    problem_io.write_trace(os.path.join(args.out, "trace.csv"), trace)
    if truth is not None:
        accuracy, mean_iou = problem_io.metrics(labels, truth, config.ignore_label)
        problem_io.write_metrics(
            os.path.join(args.out, "metrics.json"), accuracy, mean_iou
        )
    print(f"{config.solver}: energy {trace.energies[-1]:.6g}, outputs in {args.out}")
    return EXIT_OK


def _check_filtering(seed):
    rng = np.random.default_rng(seed)
    checks = []
    model = random_image_model(rng, 8, 8, 3)
    lattice_op = model.pairwise_lattice()
    for trial in range(3):
        values = rng.uniform(0, 1, size=model.space.n_pixels)
        fast = np.zeros_like(values)
        exact = np.zeros_like(values)
        for feats, spec in zip(model.features, model.kernels):
            exact += spec.weight * oracle.naive_gaussian_sum(feats, values)
        for lat, w in zip(lattice_op.lattices, lattice_op.weights):
            fast += w * filter_values(lat, values)
        scale = float(fast @ exact / (fast @ fast))
        err = float(np.linalg.norm(scale * fast - exact) / np.linalg.norm(exact))
        checks.append((f"filter aligned error {err:.3f} < 0.15 (trial {trial})", err < 0.15))
    return checks


def _check_gradient(seed):
    rng = np.random.default_rng(seed)
    checks = []
    for trial in range(3):
        model = random_small_model(rng, n_pixels=5, n_labels=3)
        y = rng.dirichlet(np.ones(3), size=5)
        z = rng.uniform(0.1, 0.9, size=(model.cliques.n_cliques, 3))
        grad_y, _ = qp_gradient(model, y, z)
        fd_y = oracle.fd_gradient(lambda q: oracle.oracle_qp_objective(model, q, z), y)
        err = float(np.max(np.abs(fd_y - grad_y)) / max(1.0, np.max(np.abs(grad_y))))
        checks.append((f"gradient vs central differences err {err:.2e} (trial {trial})",
                       err < 1e-5))
    return checks


def _check_step(seed):
    rng = np.random.default_rng(seed)
    model = random_small_model(rng, n_pixels=6, n_labels=3)
    state = LpDualState.zeros(model.unaries, np.full((6, 3), 1 / 3), 0.1)
    state.a_alpha = rng.normal(size=(6, 3))
    target = state.a_alpha + rng.normal(size=(6, 3))
    delta = lp_optimal_step(state, target, state.u_mu)

    def along(d):
        return oracle.oracle_dual_objective(
            state.a_alpha + d * (target - state.a_alpha), state.u_mu, state.beta,
            state.gamma, state.phi, state.anchor, state.lam,
        )

    _, grid_value = oracle.grid_step_search(along)
    ok = along(delta) <= grid_value + 1e-9
    return [(f"lp closed-form step beats a 1000-point grid (delta {delta:.4f})", ok)]


def _check_map(seed):
    rng = np.random.default_rng(seed)
    model = random_small_model(rng, n_pixels=5, n_labels=2)
    _, best_energy = oracle.exhaustive_map(model)
    relaxed, _ = qp_minimise(model)
    energy = discrete_energy(model, round_argmax(relaxed.y))
    return [(f"qp rounded energy {energy:.4f} >= optimum {best_energy:.4f}",
             energy >= best_energy - 1e-9)]


ORACLE_SUITES = {
    "filtering": _check_filtering,
    "gradient": _check_gradient,
    "step": _check_step,
    "map": _check_map,
}


def cmd_oracle_check(args):
    names = sorted(ORACLE_SUITES) if args.suite == "all" else [args.suite]
    failures = 0
    for name in names:
        for label, ok in ORACLE_SUITES[name](args.seed):
            print(f"[{name}] {'PASS' if ok else 'FAIL'}: {label}")
            failures += 0 if ok else 1
    return EXIT_OK if failures == 0 else EXIT_SOLVER


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "solve":
        return cmd_solve(args)
    return cmd_oracle_check(args)


if __name__ == "__main__":
    sys.exit(main())
