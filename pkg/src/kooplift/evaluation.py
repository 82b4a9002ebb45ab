"""Error metrics and experiment sweeps for fitted surrogates.

Everything here compares surrogate predictions against tightly integrated
reference flows: one-step error fields on grids, mean rollout error over
time, time-step ladders and per-trajectory one-step error series.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary
from .dynamics import DynamicalSystem, flow, flow_batch, flow_trajectory
from .edmd import FitError, build_snapshots, fit, sample_uniform
from .manifold import ClosestPointConfig, build_projector
from .surrogate import StepError, Surrogate

__all__ = [
    "one_step_error",
    "ErrorGrid",
    "error_grid",
    "difference_grid",
    "MeanErrorSeries",
    "mean_error_over_time",
    "SweepResult",
    "timestep_sweep",
    "ErrorSeries",
    "trajectory_error_series",
]

log = logging.getLogger(__name__)


def one_step_error(surrogate: Surrogate, system: DynamicalSystem, x_hat,
                   flow_tol: float = 1e-12) -> float:
    """State-space distance between one surrogate step and the true flow.

    A failed step (degenerate reconstruction, strict non-convergence) comes
    back as +inf so grids and series stay well defined.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    truth = flow(system, x_hat, surrogate.dt, rel_tol=flow_tol, abs_tol=flow_tol).state
    try:
        predicted = surrogate.step(x_hat)
    except StepError:
        return float("inf")
    return float(np.linalg.norm(predicted - truth))


@dataclass(frozen=True)
class ErrorGrid:
    """Per-node error values on a uniform grid over the domain.

    ``converged`` marks nodes whose projection converged (identically True
    for coordinate and pass-through projectors).
    """

    axes: tuple
    values: np.ndarray
    metric_name: str
    surrogate_descriptor: str
    converged: np.ndarray | None = None

    def __post_init__(self):
        shape = tuple(len(a) for a in self.axes)
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} does not match axes {shape}")

    @property
    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def error_grid(surrogate: Surrogate, system: DynamicalSystem, resolution,
               flow_tol: float = 1e-12, threads: int = 1) -> ErrorGrid:
    """Evaluate the one-step error on a uniform grid over the system domain.

    Reference states for all nodes are integrated in one stacked solve at
    the same tight tolerance used by :func:`one_step_error`. Grid nodes are
    independent work items; ``threads`` > 1 evaluates them in a pool with a
    deterministic by-index reduction.
    """
    axes = tuple(system.domain.axes(resolution))
    nodes = system.domain.grid(resolution)
    truth, _ = flow_batch(system, nodes, surrogate.dt, rel_tol=flow_tol, abs_tol=flow_tol)

    def node_error(j):
        try:
            result = surrogate.step_result(nodes[j])
        except StepError:
            return float("inf"), False
        return float(np.linalg.norm(result.x - truth[j])), result.converged

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(node_error, range(nodes.shape[0])))
    else:
        rows = [node_error(j) for j in range(nodes.shape[0])]
    shape = tuple(len(a) for a in axes)
    values = np.asarray([r[0] for r in rows]).reshape(shape)
    converged = np.asarray([r[1] for r in rows], dtype=bool).reshape(shape)
    return ErrorGrid(axes=axes, values=values, metric_name="one_step_error",
                     surrogate_descriptor=surrogate.descriptor, converged=converged)


def difference_grid(a: ErrorGrid, b: ErrorGrid) -> ErrorGrid:
    """Node-wise difference a - b of two grids over the same axes."""
    if len(a.axes) != len(b.axes) or any(
            not np.array_equal(ax, bx) for ax, bx in zip(a.axes, b.axes)):
        raise ValueError("grids are defined on different axes")
    conv = None
    if a.converged is not None and b.converged is not None:
        conv = a.converged & b.converged
    return ErrorGrid(axes=a.axes, values=a.values - b.values,
                     metric_name=f"{a.metric_name}_difference",
                     surrogate_descriptor=f"{a.surrogate_descriptor} - {b.surrogate_descriptor}",
                     converged=conv)


@dataclass(frozen=True)
class MeanErrorSeries:
    """Mean rollout error against the true flow, per step."""

    times: np.ndarray
    errors: np.ndarray
    diverged_count: int
    descriptor: str


def mean_error_over_time(surrogates, system: DynamicalSystem, x0_set, n_steps: int,
                         flow_tol: float = 1e-10) -> list[MeanErrorSeries]:
    """Average trajectory error over a set of initial conditions.

    Rollouts that diverge keep contributing their last finite error from the
    divergence step onward, and the number of diverged rollouts is reported
    per surrogate.
    """
    x0s = np.atleast_2d(np.asarray(x0_set, dtype=float))
    dt = surrogates[0].dt
    if any(abs(s.dt - dt) > 1e-15 for s in surrogates):
        raise ValueError("surrogates must share the same time step")
    truths = [flow_trajectory(system, x0, dt, n_steps, rel_tol=flow_tol, abs_tol=flow_tol)
              for x0 in x0s]
    out = []
    for surrogate in surrogates:
        per_step = np.zeros((x0s.shape[0], n_steps + 1))
        diverged = 0
        for i, x0 in enumerate(x0s):
            roll = surrogate.rollout(x0, n_steps, domain=system.domain)
            errs = np.linalg.norm(roll.states - truths[i][: roll.states.shape[0]], axis=1)
            if roll.diverged_at is not None:
                diverged += 1
            # carry the last finite error forward over the diverged tail
            per_step[i, : errs.size] = errs
            per_step[i, errs.size:] = errs[-1]
        out.append(MeanErrorSeries(
            times=np.arange(n_steps + 1) * dt,
            errors=per_step.mean(axis=0),
            diverged_count=diverged,
            descriptor=surrogate.descriptor))
    return out


@dataclass(frozen=True)
class SweepResult:
    """Median one-step error per projector across a ladder of time steps."""

    dts: np.ndarray
    kinds: tuple
    medians: dict
    q25: dict
    q75: dict


def timestep_sweep(system: DynamicalSystem, dictionary: Dictionary, projector_kinds,
                   dts, m: int, seed: int, n_eval: int = 500, ridge: float = 0.0,
                   snapshot_tol: float = 1e-12,
                   solver_config: ClosestPointConfig | None = None) -> SweepResult:
    """Refit the model at each time step and record one-step error quantiles.

    Training points are drawn fresh per time step (seed offset by the ladder
    index); the evaluation points are shared across the ladder so the trend
    in the medians is not sampling noise. A failed fit leaves NaN entries
    for that time step and the sweep continues.
    """
    dts = np.asarray(list(dts), dtype=float)
    kinds = tuple(projector_kinds)
    if solver_config is None:
        solver_config = ClosestPointConfig(box=system.domain)
    eval_points = sample_uniform(system.domain, n_eval, seed + 90001)
    medians = {k: np.full(dts.size, np.nan) for k in kinds}
    q25 = {k: np.full(dts.size, np.nan) for k in kinds}
    q75 = {k: np.full(dts.size, np.nan) for k in kinds}

    for i, dt in enumerate(dts):
        try:
            points = sample_uniform(system.domain, m, seed + 1000 * i)
            snapshots = build_snapshots(system, points, float(dt), tol=snapshot_tol,
                                        seed=seed + 1000 * i)
            model = fit(snapshots, dictionary, ridge=ridge)
        except FitError as exc:
            log.warning("fit failed at dt=%g: %s; entry marked missing", dt, exc)
            continue
        truth, _ = flow_batch(system, eval_points, float(dt), rel_tol=1e-12, abs_tol=1e-12)
        for kind in kinds:
            projector = build_projector(kind, model=model, snapshots=snapshots,
                                        box=system.domain, solver_config=solver_config)
            surrogate = Surrogate(model, projector)
            errs = np.empty(n_eval)
            for j in range(n_eval):
                try:
                    predicted = surrogate.step(eval_points[j])
                    errs[j] = np.linalg.norm(predicted - truth[j])
                except StepError:
                    errs[j] = np.inf
            medians[kind][i] = np.median(errs)
            q25[kind][i] = np.quantile(errs, 0.25)
            q75[kind][i] = np.quantile(errs, 0.75)
    return SweepResult(dts=dts, kinds=kinds, medians=medians, q25=q25, q75=q75)


@dataclass(frozen=True)
class ErrorSeries:
    """One-step errors evaluated along a reference trajectory."""

    times: np.ndarray
    errors: np.ndarray
    flagged: int
    descriptor: str


def trajectory_error_series(surrogate: Surrogate, system: DynamicalSystem, x0,
                            n_steps: int, flow_tol: float = 1e-12) -> ErrorSeries:
    """One-step error at each point of the true trajectory from x0.

    Evaluating along the truth isolates projector quality from error
    accumulation: the step always starts from an exact trajectory point.
    Degenerate reconstructions contribute +inf and are counted in
    ``flagged``.
    """
    truth = flow_trajectory(system, x0, surrogate.dt, n_steps,
                            rel_tol=flow_tol, abs_tol=flow_tol)
    errors = np.empty(n_steps)
    flagged = 0
    for k in range(n_steps):
        try:
            predicted = surrogate.step(truth[k])
            errors[k] = np.linalg.norm(predicted - truth[k + 1])
        except StepError:
            errors[k] = np.inf
            flagged += 1
    return ErrorSeries(times=np.arange(n_steps) * surrogate.dt, errors=errors,
                       flagged=flagged, descriptor=surrogate.descriptor)
