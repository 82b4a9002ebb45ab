"""Command-line harness: fit models, reproduce the benchmark figures, run checks.

Commands
--------
fit        fit the configured model, write the matrix CSV + metadata sidecar
reproduce  write the CSV inputs for one of the benchmark figures
           (fig3 | fig45 | fig6 | fig7)
check      run the consistency suite (stationarity, projection equivalence,
           error bound, weighted optimality, metric condition, Jacobians)
           and exit nonzero on any failure

All outputs are deterministic given the config and seed; re-running a
command overwrites its outputs byte for byte.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from . import io
from .config import ConfigError, ExperimentConfig
from .dictionary import monomial_dictionary
from .edmd import FitError, build_snapshots, fit, sample_uniform
from .evaluation import (
    difference_grid,
    error_grid,
    mean_error_over_time,
    timestep_sweep,
    trajectory_error_series,
)
from .manifold import (
    check_metric_condition,
    coordinate_metric,
    coordinate_reconstruction,
    geometric_metric,
    build_projector,
    project_closest,
    project_coordinate,
    projection_bound_check,
)
from .surrogate import Surrogate

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# shared plumbing


def _fit_from_config(config: ExperimentConfig, strict: bool = False):
    system = config.system()
    dictionary = config.dictionary()
    points = sample_uniform(system.domain, config.m, config.seed)
    snapshots = build_snapshots(system, points, config.dt, tol=config.snapshot_tol,
                                seed=config.seed, strict=strict)
    model = fit(snapshots, dictionary, ridge=config.ridge)
    return system, dictionary, snapshots, model


def _surrogates(config: ExperimentConfig, system, snapshots, model, kinds=None):
    out = []
    for kind in kinds or config.projector_kinds:
        metric = None
        if kind == "closest_point":
            # an explicit closest-point projector takes its weight from a
            # matrix CSV named in the config
            if not config.metric_file:
                raise ConfigError(
                    "projector kind 'closest_point' needs metric_file in [projector]")
            from .manifold import Metric
            metric = Metric(io.read_matrix_csv(config.metric_file))
        projector = build_projector(kind, model=model, snapshots=snapshots,
                                    box=system.domain, metric=metric,
                                    solver_config=config.solver_config())
        out.append(Surrogate(model, projector))
    return out


# --------------------------------------------------------------------------
# fit


def cmd_fit(config: ExperimentConfig, args) -> int:
    dictionary = config.dictionary()
    if config.m < dictionary.size and not args.force:
        print(f"error: m={config.m} snapshots cannot determine N={dictionary.size} "
              "observables (rank-deficient regression); pass --force to proceed",
              file=sys.stderr)
        return 1
    system, dictionary, snapshots, model = _fit_from_config(config, strict=args.strict)
    out = Path(config.out_dir)
    kpath = out / "koopman_matrix.csv"
    io.write_koopman(kpath, model)
    io.write_snapshots(out / "snapshots.csv", snapshots)
    print(f"fitted {dictionary.name} on {system.name}: N={dictionary.size} m={model.m}")
    print(f"residual_rms={model.residual_rms:.6e}")
    print(f"condition_number={model.condition_number:.6e}")
    status = 0
    if args.verify:
        err = _verify_invariant_fit(config, model)
        if err is None:
            print("verify: no closed-form reference for this system/dictionary",
                  file=sys.stderr)
            status = 1
        else:
            ok = err <= 1e-6
            print(f"verify: |K - expm(dt*A)|_F = {err:.6e} -> {'ok' if ok else 'FAIL'}")
            status = 0 if ok else 1
    io.write_manifest(out / "manifest-fit.txt", "fit", config.source_text,
                      config.seed, [kpath])
    return status


def _verify_invariant_fit(config: ExperimentConfig, model):
    """Frobenius distance to the matrix exponential, where one exists.

    Covers the linear-growth benchmark system with the observable triple
    (x, v, x^2), whose lifted dynamics are exactly linear.
    """
    if config.system_name != "example1":
        return None
    want = [(1, 0), (0, 1), (2, 0)]
    if [tuple(r) for r in model.dictionary.exponents] != want:
        return None
    lam = config.system_params.get("lambda", 1.0)
    gen = np.array([[1.0, 0.0, 0.0], [0.0, lam, -lam], [0.0, 0.0, 2.0]])
    return float(np.linalg.norm(model.matrix - expm(config.dt * gen)))


# --------------------------------------------------------------------------
# reproduce


def reproduce_fig3(config: ExperimentConfig, threads: int = 1):
    """Duffing long-horizon comparison: two projected rollouts, one lifted."""
    config = config.override(system_name="duffing", system_params={})
    system = config.system()
    points = sample_uniform(system.domain, config.m, config.seed)
    snapshots = build_snapshots(system, points, config.dt, tol=config.snapshot_tol,
                                seed=config.seed)
    v3 = monomial_dictionary(3, 2)
    v5 = monomial_dictionary(5, 2)
    m3 = fit(snapshots, v3, ridge=config.ridge)
    m5 = fit(snapshots, v5, ridge=config.ridge)
    surrogates = [
        Surrogate(m3, build_projector("coordinate", model=m3)),
        Surrogate(m5, build_projector("coordinate", model=m5)),
        Surrogate(m5, build_projector("none")),
    ]
    out = Path(config.out_dir)
    written = []
    for s in surrogates:
        roll = s.rollout(np.asarray(config.rollout_x0), config.rollout_steps,
                         domain=system.domain)
        path = out / f"fig3_rollout_{s.descriptor.replace('/', '_')}.csv"
        io.write_rollout(path, roll)
        written.append(path)
    x0_grid = system.domain.grid(config.mean_error_grid)
    series = mean_error_over_time(surrogates, system, x0_grid, config.mean_error_steps)
    path = out / "fig3_mean_error.csv"
    io.write_mean_error(path, series)
    written.append(path)
    return written


def reproduce_fig45(config: ExperimentConfig, threads: int = 1):
    """Pendulum one-step error heatmaps for orders 2 and 3, plus differences."""
    config = config.override(system_name="pendulum", system_params={})
    system = config.system()
    points = sample_uniform(system.domain, config.m, config.seed)
    snapshots = build_snapshots(system, points, config.dt, tol=config.snapshot_tol,
                                seed=config.seed)
    out = Path(config.out_dir)
    written = []
    for degree in (2, 3):
        dictionary = monomial_dictionary(degree, 2)
        model = fit(snapshots, dictionary, ridge=config.ridge)
        coord, geo = _surrogates(config, system, snapshots, model,
                                 kinds=("coordinate", "geometric"))
        grids = {}
        for s in (coord, geo):
            grid = error_grid(s, system, config.grid_resolution, threads=threads)
            path = out / f"fig45_grid_{s.descriptor.replace('/', '_')}.csv"
            io.write_grid(path, grid)
            written.append(path)
            grids[s.projector.label] = grid
        diff = difference_grid(grids["geometric"], grids["coordinate"])
        path = out / f"fig45_diff_{dictionary.name}.csv"
        io.write_grid(path, diff)
        written.append(path)
    return written


def reproduce_fig6(config: ExperimentConfig, threads: int = 1):
    """Pendulum one-step error medians across the time-step ladder."""
    config = config.override(system_name="pendulum", system_params={})
    system = config.system()
    out = Path(config.out_dir)
    written = []
    for degree in (2, 3):
        dictionary = monomial_dictionary(degree, 2)
        sweep = timestep_sweep(system, dictionary, ("coordinate", "geometric"),
                               config.dt_ladder, m=config.m, seed=config.seed,
                               n_eval=config.n_eval, ridge=config.ridge,
                               snapshot_tol=config.snapshot_tol,
                               solver_config=config.solver_config())
        path = out / f"fig6_sweep_{dictionary.name}.csv"
        io.write_sweep(path, sweep)
        written.append(path)
    return written


def reproduce_fig7(config: ExperimentConfig, threads: int = 1):
    """Lorenz one-step errors along a trajectory, reconstructed vs geometric."""
    config = config.override(system_name="lorenz", system_params={},
                             degree=4, exclude_labels=("x",))
    system, dictionary, snapshots, model = _fit_from_config(config)
    out = Path(config.out_dir)
    written = []
    for s in _surrogates(config, system, snapshots, model,
                         kinds=("coordinate", "geometric")):
        series = trajectory_error_series(s, system, np.asarray(config.trajectory_x0),
                                         config.trajectory_steps)
        path = out / f"fig7_series_{s.projector.label}.csv"
        io.write_series(path, series)
        written.append(path)
    return written


_REPRODUCERS = {
    "fig3": reproduce_fig3,
    "fig45": reproduce_fig45,
    "fig6": reproduce_fig6,
    "fig7": reproduce_fig7,
}


def cmd_reproduce(config: ExperimentConfig, args) -> int:
    written = _REPRODUCERS[args.figure](config, threads=args.threads)
    for path in written:
        print(path)
    io.write_manifest(Path(config.out_dir) / f"manifest-{args.figure}.txt",
                      f"reproduce {args.figure}", config.source_text,
                      config.seed, written)
    return 0


# --------------------------------------------------------------------------
# check


def run_checks(config: ExperimentConfig):
    """The consistency suite; yields (name, status, detail) with status in
    {"PASS", "FAIL", "SKIP"}."""
    results = []
    system, dictionary, snapshots, model = _fit_from_config(config)
    rng = np.random.default_rng(config.seed + 1)
    n = dictionary.size

    # Jacobian versus central finite differences
    pts = sample_uniform(system.domain, 100, config.seed + 2)
    worst = 0.0
    for x in pts:
        jac = dictionary.jacobian(x)
        fd = np.empty_like(jac)
        h = 1e-6
        for k in range(dictionary.d):
            e = np.zeros(dictionary.d)
            e[k] = h
            fd[:, k] = (dictionary.evaluate(x + e) - dictionary.evaluate(x - e)) / (2 * h)
        worst = max(worst, np.linalg.norm(fd - jac) / max(1.0, np.linalg.norm(jac)))
    results.append(("jacobian-fd", "PASS" if worst <= 1e-6 else "FAIL",
                    f"max relative deviation {worst:.3e}"))

    # stationarity of the (possibly ridge-regularized) normal equations
    psi_x = dictionary.evaluate_batch(snapshots.x_points).T
    psi_y = dictionary.evaluate_batch(snapshots.y_points).T
    gram = psi_x @ psi_x.T / snapshots.m + config.ridge * np.eye(n)
    cross = psi_y @ psi_x.T / snapshots.m
    resid = model.matrix @ gram - cross
    scale = np.linalg.norm(model.matrix) * np.linalg.norm(gram)
    rel = np.linalg.norm(resid) / scale
    results.append(("normal-equation-stationarity", "PASS" if rel <= 1e-8 else "FAIL",
                    f"relative residual {rel:.3e}"))

    # weighted optimality: the unweighted minimizer solves every weighted problem
    worst = 0.0
    for _ in range(20):
        a = rng.normal(size=(n, n))
        w = a.T @ a
        rel = (np.linalg.norm(w @ resid)
               / (np.linalg.norm(w) * np.linalg.norm(gram) * max(np.linalg.norm(model.matrix), 1.0)))
        worst = max(worst, rel)
    results.append(("weighted-optimality", "PASS" if worst <= 1e-8 else "FAIL",
                    f"worst relative weighted residual {worst:.3e}"))

    # coordinate projection equals the closest-point projection under the
    # block coordinate weight
    if dictionary.coordinate_indices is None:
        results.append(("coordinate-equivalence", "SKIP",
                        "dictionary has no coordinate observables"))
    else:
        cmet = coordinate_metric(dictionary)
        recon = coordinate_reconstruction(dictionary)
        cfg = config.solver_config()
        worst = 0.0
        for _ in range(200):
            x0 = rng.uniform(system.domain.lo, system.domain.hi)
            z = dictionary.evaluate(x0) + rng.uniform(-0.1, 0.1, n)
            xc, _ = project_coordinate(dictionary, recon, z)
            res = project_closest(dictionary, cmet, z, cfg, seeds=[recon(z)])
            worst = max(worst, float(np.max(np.abs(res.x - xc))))
        results.append(("coordinate-equivalence", "PASS" if worst <= 1e-6 else "FAIL",
                        f"worst state deviation {worst:.3e} over 200 points"))

    # projection error bound: at most twice the propagation error, in W
    geo = build_projector("geometric", model=model, snapshots=snapshots,
                          box=system.domain, solver_config=config.solver_config())
    test_points = sample_uniform(system.domain, min(config.n_eval, 500), config.seed + 3)
    report = projection_bound_check(model, geo.metric, geo, test_points, system)
    detail = (f"{len(report.violations)} violations over {report.n_points} points, "
              f"{report.n_converged} converged, max ratio {report.max_ratio:.3f}")
    if report.n_converged < report.n_points:
        detail += f" ({report.n_points - report.n_converged} non-converged searches)"
    results.append(("projection-bound", "PASS" if report.ok else "FAIL", detail))

    # metric condition on a probe grid
    probes = system.domain.grid(10 if system.dimension <= 2 else 5)
    rep = check_metric_condition(dictionary, geo.metric, probes)
    results.append(("metric-condition-geometric", "PASS" if rep.ok else "FAIL",
                    f"min |det| {rep.min_abs_det:.3e}"))
    if dictionary.coordinate_indices is not None:
        rep = check_metric_condition(dictionary, coordinate_metric(dictionary), probes)
        results.append(("metric-condition-coordinate", "PASS" if rep.ok else "FAIL",
                        f"min |det| {rep.min_abs_det:.3e}"))

    # every projector named in the config builds and completes one step
    try:
        surrogates = _surrogates(config, system, snapshots, model)
        for s in surrogates:
            s.step(system.domain.center)
        results.append(("projector-construction", "PASS",
                        "kinds: " + ", ".join(s.projector.label for s in surrogates)))
    except Exception as exc:  # report, never crash the suite
        results.append(("projector-construction", "FAIL", str(exc)))
    return results


def cmd_check(config: ExperimentConfig, args) -> int:
    results = run_checks(config)
    failed = False
    for name, status, detail in results:
        print(f"{status} {name}: {detail}")
        failed = failed or status == "FAIL"
    return 1 if failed else 0


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kooplift",
        description="Koopman surrogate models with manifold reprojection")
    parser.add_argument("--config", type=Path, help="experiment config file (INI)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", type=Path, help="override the output directory")
    parser.add_argument("--strict", action="store_true",
                        help="escalate data-quality warnings to errors")
    parser.add_argument("--force", action="store_true",
                        help="proceed past rank-deficiency refusals")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for grid evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the configured model and write it out")
    p_fit.add_argument("--verify", action="store_true",
                       help="compare against the closed-form lifted dynamics "
                            "when one exists")
    p_fit.set_defaults(func=cmd_fit)

    p_rep = sub.add_parser("reproduce", help="write the CSVs behind one benchmark figure")
    p_rep.add_argument("figure", choices=sorted(_REPRODUCERS))
    p_rep.set_defaults(func=cmd_reproduce)

    p_chk = sub.add_parser("check", help="run the consistency suite")
    p_chk.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = (ExperimentConfig.from_file(args.config) if args.config
                  else ExperimentConfig())
        if args.seed is not None:
            config = config.override(seed=args.seed)
        if args.out is not None:
            config = config.override(out_dir=str(args.out))
        return args.func(config, args)
    except (ConfigError, FitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
