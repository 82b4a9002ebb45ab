"""Weighted metrics on the lifted space and projections back onto the manifold.

The lifted image of the state box is a d-dimensional embedded manifold in
R^N. A fitted transition matrix generally propagates lifted points off this
manifold, so every prediction step ends with a projection back onto it:

* coordinate projection reads designated lifted components and re-lifts;
* closest-point projection minimizes a W-weighted distance to the manifold
  with a damped Gauss-Newton search;
* the geometric metric builds W from the inverse covariance of the fitted
  model's lifted one-step residuals, making the closest-point projection a
  maximum-likelihood estimate under Gaussian residuals.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .dictionary import Dictionary
from .dynamics import Box, DynamicalSystem, flow_batch
from .edmd import KoopmanApproximation, SnapshotSet

__all__ = [
    "Metric",
    "ReconstructionMap",
    "ReconstructionError",
    "ClosestPointConfig",
    "ProjectionResult",
    "Projector",
    "MetricConditionReport",
    "BoundCheckReport",
    "coordinate_metric",
    "geometric_metric",
    "check_metric_condition",
    "project_coordinate",
    "project_closest",
    "projection_bound_check",
    "coordinate_reconstruction",
    "ratio_reconstruction",
    "default_reconstruction",
    "build_projector",
]

log = logging.getLogger(__name__)


class ReconstructionError(RuntimeError):
    """State recovery from a lifted point is undefined at this point."""


@dataclass(frozen=True)
class Metric:
    """Symmetric positive-semidefinite weight on the ambient lifted space."""

    weight: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weight must be a square matrix")
        scale = np.linalg.norm(w)
        if scale > 0 and np.linalg.norm(w - w.T) > 1e-12 * scale:
            raise ValueError("weight must be symmetric")
        w = 0.5 * (w + w.T)
        evals = np.linalg.eigvalsh(w)
        if scale > 0 and evals[0] < -1e-10 * scale:
            raise ValueError(f"weight is not positive semidefinite (min eig {evals[0]:.3g})")
        object.__setattr__(self, "weight", w)
        if self.normalized:
            # guard against mislabeled weights; the loose window tolerates the
            # re-measurement drift of an eigenvalue product at condition 1e11+
            det = self.pseudodeterminant()
            if not np.isfinite(det) or abs(det - 1.0) > 1e-3:
                raise ValueError(
                    f"normalized flag requires unit pseudodeterminant, got {det:.6g}")

    @property
    def n(self) -> int:
        return self.weight.shape[0]

    def norm(self, u) -> float:
        """Seminorm sqrt(u^T W u)."""
        u = np.asarray(u, dtype=float)
        return float(np.sqrt(max(u @ self.weight @ u, 0.0)))

    def pseudodeterminant(self, rcond: float = 1e-12) -> float:
        """Product of the singular values above rcond times the largest."""
        svals = np.abs(np.linalg.eigvalsh(self.weight))
        cut = rcond * svals.max() if svals.max() > 0 else 0.0
        kept = svals[svals > cut]
        return float(np.prod(kept)) if kept.size else 0.0

    def scaled(self, alpha: float) -> "Metric":
        return Metric(alpha * self.weight, normalized=False)


@dataclass(frozen=True)
class ReconstructionMap:
    """Rule recovering the state from a lifted point (inverse of the lift on-manifold)."""

    fn: callable
    description: str = ""

    def __call__(self, z) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(z, dtype=float)), dtype=float)


def coordinate_reconstruction(dictionary: Dictionary) -> ReconstructionMap:
    """Read the state straight out of the coordinate components."""
    idx = dictionary.coordinate_indices
    if idx is None:
        raise ReconstructionError(
            f"dictionary {dictionary.name!r} has no coordinate observables")
    indices = np.asarray(idx, dtype=int)
    return ReconstructionMap(lambda z: z[indices], description="coordinate readout")


def ratio_reconstruction(dictionary: Dictionary, numerator: str, denominator: str,
                         direct: dict, min_denominator: float = 1e-8) -> ReconstructionMap:
    """Recover one coordinate as the ratio of two lifted components.

    ``direct`` maps state-coordinate index to the label read verbatim; the
    remaining coordinate equals component ``numerator`` divided by component
    ``denominator``. Raises when the denominator component is within
    ``min_denominator`` of zero, naming the degenerate component.
    """
    labels = list(dictionary.labels)
    try:
        num_i = labels.index(numerator)
        den_i = labels.index(denominator)
        direct_idx = {coord: labels.index(lab) for coord, lab in direct.items()}
    except ValueError as exc:
        raise ReconstructionError(f"label missing from dictionary: {exc}") from exc
    ratio_coord = next(i for i in range(dictionary.d) if i not in direct)

    def fn(z):
        den = z[den_i]
        if abs(den) < min_denominator:
            raise ReconstructionError(
                f"reconstruction denominator component {denominator!r} is "
                f"degenerate ({den:.3g})")
        x = np.empty(dictionary.d)
        for coord, comp in direct_idx.items():
            x[coord] = z[comp]
        x[ratio_coord] = z[num_i] / den
        return x

    return ReconstructionMap(fn, description=f"{numerator}/{denominator} ratio readout")


def default_reconstruction(dictionary: Dictionary) -> ReconstructionMap:
    """Coordinate readout when available, else the x = xz/z style fallback.

    The fallback covers three-dimensional dictionaries that dropped the
    first coordinate but kept x*z, y and z, recovering x as xz/z. The
    re-lift of the recovered state fills every remaining component.
    """
    if dictionary.coordinate_indices is not None:
        return coordinate_reconstruction(dictionary)
    labs = set(dictionary.labels)
    if dictionary.d == 3 and {"x*z", "y", "z"} <= labs:
        return ratio_reconstruction(dictionary, "x*z", "z", direct={1: "y", 2: "z"})
    raise ReconstructionError(
        f"no reconstruction rule for dictionary {dictionary.name!r}")


# --------------------------------------------------------------------------
# metrics


def coordinate_metric(dictionary: Dictionary) -> Metric:
    """Block weight selecting exactly the coordinate components.

    Its pseudodeterminant is already 1 (d unit singular values), so no
    normalization is applied.
    """
    idx = dictionary.coordinate_indices
    if idx is None:
        raise ValueError(
            f"dictionary {dictionary.name!r} lacks coordinate observables; "
            "the coordinate metric is undefined")
    w = np.zeros((dictionary.size, dictionary.size))
    w[idx, idx] = 1.0
    return Metric(w, normalized=False)


def geometric_metric(model: KoopmanApproximation, snapshots: SnapshotSet,
                     cond_threshold: float = 1e12, tau: float = 1e-10,
                     zero_rms: float = 1e-8) -> Metric:
    """Inverse residual covariance, volume-normalized to unit determinant.

    The covariance of the lifted one-step residuals K Psi(x_j) - Psi(y_j)
    is estimated over the given snapshots (training data by default; pass a
    held-out set for an out-of-sample estimate). The returned weight is
    det(Sigma)^(1/N) Sigma^(-1), which is scale free and has determinant 1.

    A residual spread at relative machine-noise level (an invariant
    dictionary) yields the identity weight with a logged notice; a condition
    number above ``cond_threshold`` adds ``tau * trace/N`` to the diagonal.
    """
    dictionary = model.dictionary
    n = dictionary.size
    psi_x = dictionary.evaluate_batch(snapshots.x_points)
    psi_y = dictionary.evaluate_batch(snapshots.y_points)
    resid = psi_x @ model.matrix.T - psi_y
    lift_scale = float(np.sqrt(np.mean(np.sum(psi_y**2, axis=1))))
    rms = float(np.sqrt(np.mean(np.sum(resid**2, axis=1))))
    if rms <= zero_rms * max(lift_scale, 1e-300):
        log.info("one-step residuals at machine-noise level (rms %.3g); "
                 "geometric weight degenerates to the identity", rms)
        return Metric(np.eye(n), normalized=True)

    sigma = resid.T @ resid / snapshots.m
    sigma = 0.5 * (sigma + sigma.T)
    evals = np.linalg.eigvalsh(sigma)
    cond = evals[-1] / evals[0] if evals[0] > 0 else np.inf
    if cond > cond_threshold:
        bump = tau * np.trace(sigma) / n
        log.info("residual covariance condition %.3g above %.0e; adding %.3g "
                 "to the diagonal", cond, cond_threshold, bump)
        sigma = sigma + bump * np.eye(n)

    evals, evecs = eigh(sigma)
    evals = np.maximum(evals, evals[-1] * 1e-300)
    logdet = float(np.sum(np.log(evals)))
    volume_scale = np.exp(logdet / n)
    w = (evecs * (volume_scale / evals)) @ evecs.T
    return Metric(0.5 * (w + w.T), normalized=True)


@dataclass(frozen=True)
class MetricConditionReport:
    min_abs_det: float
    ok: bool


def check_metric_condition(dictionary: Dictionary, metric: Metric, probes,
                           threshold: float = 1e-10) -> MetricConditionReport:
    """Evaluate det(DPsi^T W DPsi) at each probe state.

    The projection onto the manifold is well defined near points where this
    determinant is bounded away from zero.
    """
    pts = np.atleast_2d(np.asarray(probes, dtype=float))
    w = metric.weight
    min_det = np.inf
    for x in pts:
        jac = dictionary.jacobian(x)
        det = abs(float(np.linalg.det(jac.T @ w @ jac)))
        min_det = min(min_det, det)
    return MetricConditionReport(min_abs_det=float(min_det), ok=bool(min_det > threshold))


# --------------------------------------------------------------------------
# projections


def project_coordinate(dictionary: Dictionary, reconstruction: ReconstructionMap, z):
    """Recover the state from designated components and re-lift.

    Returns ``(x, p)`` with ``p`` the on-manifold lift of ``x``. Raises
    :class:`ReconstructionError` where the reconstruction is undefined.
    """
    z = np.asarray(z, dtype=float)
    x = reconstruction(z)
    return x, dictionary.evaluate(x)


@dataclass(frozen=True)
class ClosestPointConfig:
    """Search settings for the closest-point solver.

    ``box`` is the nominal state domain: multistart grid points are placed
    on it and iterates are clamped to its inflation by ``inflate_margin``.
    ``grad_tol`` is relative to max(1, cost). Of the ``multistart_grid**d``
    grid starts, only the ``grid_keep`` cheapest (by initial cost) are
    actually iterated.
    """

    box: Box
    max_iters: int = 50
    grad_tol: float = 1e-9
    multistart_grid: int = 5
    damping_init: float = 1e-3
    grid_keep: int = 10
    inflate_margin: float = 0.5
    tie_tol: float = 1e-10

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.multistart_grid < 1:
            raise ValueError("multistart_grid must be >= 1")


@dataclass(frozen=True)
class ProjectionResult:
    """Outcome of projecting one ambient lifted point."""

    x: np.ndarray
    lifted: np.ndarray
    residual: float
    converged: bool


def _projected_gradient(grad, x, lo, hi):
    pg = grad.copy()
    pg[(x <= lo) & (grad > 0)] = 0.0
    pg[(x >= hi) & (grad < 0)] = 0.0
    return pg


def _grad_state(dictionary, w, z, x, lo, hi):
    r = z - dictionary.evaluate(x)
    jac = dictionary.jacobian(x)
    wr = w @ r
    pg = _projected_gradient(-2.0 * (jac.T @ wr), x, lo, hi)
    # magnitude of the terms entering the gradient: the natural scale for a
    # relative stationarity test, and it scales exactly with scalings of W
    gscale = 2.0 * float(np.linalg.norm(np.abs(jac).T @ (np.abs(w) @ np.abs(r))))
    return r, jac, wr, pg, gscale


def _gauss_newton(dictionary: Dictionary, w: np.ndarray, z: np.ndarray, x0,
                  lo, hi, cfg: ClosestPointConfig):
    """Damped Gauss-Newton descent on ||z - Psi(x)||_W^2, clamped to [lo, hi].

    Every quantity in the iteration is equivariant under W -> alpha W, so
    minimizers agree across metric scalings to machine precision.
    """
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    cost = None
    mu = cfg.damping_init
    eye = np.eye(dictionary.d)
    converged = False
    for _ in range(cfg.max_iters):
        r, jac, wr, pg, gscale = _grad_state(dictionary, w, z, x, lo, hi)
        if cost is None:
            cost = float(max(r @ wr, 0.0))
        if np.linalg.norm(pg) <= cfg.grad_tol * gscale + 1e-300:
            converged = True
            break
        h = jac.T @ (w @ jac)
        rhs = jac.T @ wr
        damp_scale = max(float(np.mean(np.diag(h))), 1e-300)
        accepted = False
        for _ in range(25):
            try:
                step = np.linalg.solve(h + mu * damp_scale * eye, rhs)
            except np.linalg.LinAlgError:
                mu = max(mu, 1e-12) * 10.0
                continue
            if not np.all(np.isfinite(step)):
                mu = max(mu, 1e-12) * 10.0
                continue
            x_new = np.clip(x + step, lo, hi)
            r_new = z - dictionary.evaluate(x_new)
            cost_new = float(max(r_new @ w @ r_new, 0.0))
            if cost_new <= cost:
                moved = bool(np.any(x_new != x))
                x, cost = x_new, cost_new
                mu = max(mu * 0.3, 1e-12)
                accepted = moved
                break
            mu = max(mu, 1e-12) * 10.0
        if not accepted:
            break
    r, jac, wr, pg, gscale = _grad_state(dictionary, w, z, x, lo, hi)
    converged = bool(np.linalg.norm(pg) <= cfg.grad_tol * gscale + 1e-300)
    if cost is None:
        cost = float(max(r @ wr, 0.0))
    if converged:
        # polish with near-undamped steps: quadratic convergence pins the
        # minimizer to machine precision once the damped phase has landed
        for _ in range(2):
            jac = dictionary.jacobian(x)
            wr = w @ (z - dictionary.evaluate(x))
            h = jac.T @ (w @ jac)
            try:
                step = np.linalg.solve(
                    h + 1e-14 * max(float(np.mean(np.diag(h))), 1e-300) * eye,
                    jac.T @ wr)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(step)):
                break
            x_new = np.clip(x + step, lo, hi)
            r_new = z - dictionary.evaluate(x_new)
            cost_new = float(max(r_new @ w @ r_new, 0.0))
            if cost_new > cost or not np.any(x_new != x):
                break
            x, cost = x_new, cost_new
    return x, cost, converged


def _pick_candidate(candidates, tie_tol):
    # the tie window is relative to the best cost so that candidate selection
    # is invariant under scalings of the metric
    best_cost = min(c for _, c, _ in candidates)
    window = tie_tol * max(best_cost, 1e-300)
    tied = [cand for cand in candidates if cand[1] <= best_cost + window]
    tied.sort(key=lambda cand: tuple(cand[0]))
    return tied[0]


def project_closest(dictionary: Dictionary, metric: Metric, z,
                    config: ClosestPointConfig, seeds=(),
                    fast: bool = False) -> ProjectionResult:
    """W-weighted closest point on the manifold, by multistart Gauss-Newton.

    Starts are the caller-provided ``seeds`` (e.g. a reconstruction guess or
    the previous rollout state) plus a coarse grid over the search box. Under
    ``fast=True`` the grid is skipped when a seed start already converges.
    Among runs whose final costs tie within ``tie_tol``, the componentwise
    smallest minimizer is returned, which keeps the set-valued argmin
    deterministic. Never raises on non-convergence: the best iterate comes
    back with ``converged=False`` and callers decide.

    The caller is responsible for having checked the metric condition on the
    search box; where it fails the minimizer may not be locally unique.
    """
    z = np.asarray(z, dtype=float)
    w = metric.weight
    clamp = config.box.inflated(config.inflate_margin)
    lo, hi = clamp.lo, clamp.hi

    seed_starts = [np.clip(np.asarray(s, dtype=float), lo, hi) for s in seeds]
    candidates = []
    for start in seed_starts:
        candidates.append(_gauss_newton(dictionary, w, z, start, lo, hi, config))
    if fast and candidates and any(c[2] for c in candidates):
        x, cost, conv = _pick_candidate([c for c in candidates if c[2]], config.tie_tol)
        return ProjectionResult(x, dictionary.evaluate(x), float(np.sqrt(cost)), conv)

    grid = config.box.grid(config.multistart_grid)
    if grid.shape[0] > config.grid_keep:
        lifts = dictionary.evaluate_batch(grid)
        diffs = lifts - z[None, :]
        costs = np.einsum("ij,jk,ik->i", diffs, w, diffs)
        grid = grid[np.argsort(costs, kind="stable")[: config.grid_keep]]
    for start in grid:
        candidates.append(_gauss_newton(dictionary, w, z, start, lo, hi, config))

    converged_only = [c for c in candidates if c[2]]
    x, cost, conv = _pick_candidate(converged_only or candidates, config.tie_tol)
    return ProjectionResult(x, dictionary.evaluate(x), float(np.sqrt(cost)), conv)


@dataclass(frozen=True)
class Projector:
    """Named rule mapping ambient lifted points back onto the manifold.

    kind "coordinate" needs a reconstruction, "closest_point" needs a metric
    and solver config, "none" passes lifted points through untouched (state
    readout still goes through the coordinate components).
    """

    kind: str
    metric: Metric | None = None
    reconstruction: ReconstructionMap | None = None
    solver_config: ClosestPointConfig | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("coordinate", "closest_point", "none"):
            raise ValueError(f"unknown projector kind {self.kind!r}")
        if self.kind == "coordinate" and self.reconstruction is None:
            raise ValueError("coordinate projector requires a reconstruction map")
        if self.kind == "closest_point" and (self.metric is None or self.solver_config is None):
            raise ValueError("closest-point projector requires a metric and solver config")
        if not self.label:
            object.__setattr__(self, "label", self.kind)

    def project(self, dictionary: Dictionary, z, seeds=(), fast: bool = False) -> ProjectionResult:
        z = np.asarray(z, dtype=float)
        if self.kind == "coordinate":
            x, p = project_coordinate(dictionary, self.reconstruction, z)
            return ProjectionResult(x, p, float(np.linalg.norm(z - p)), True)
        if self.kind == "closest_point":
            return project_closest(dictionary, self.metric, z, self.solver_config,
                                   seeds=seeds, fast=fast)
        # kind "none": identity on the ambient point, coordinate readout
        if dictionary.coordinate_indices is None:
            raise ReconstructionError(
                "state readout undefined: dictionary has no coordinate observables")
        x = z[np.asarray(dictionary.coordinate_indices, dtype=int)]
        return ProjectionResult(x, z.copy(), 0.0, True)


def build_projector(kind: str, model: KoopmanApproximation | None = None,
                    snapshots: SnapshotSet | None = None, box: Box | None = None,
                    solver_config: ClosestPointConfig | None = None,
                    metric: Metric | None = None) -> Projector:
    """Assemble a projector by name: none | coordinate | geometric | closest_point.

    "geometric" estimates the metric from the model's snapshot residuals and
    is a closest-point projector underneath; "closest_point" takes an
    explicit metric. ``box``/``solver_config`` set up the search region.
    """
    if kind == "none":
        return Projector(kind="none")
    if kind == "coordinate":
        if model is None:
            raise ValueError("coordinate projector needs the fitted model")
        return Projector(kind="coordinate",
                         reconstruction=default_reconstruction(model.dictionary),
                         label="coordinate")
    if kind in ("geometric", "closest_point"):
        if solver_config is None:
            if box is None:
                raise ValueError("closest-point projector needs a search box or solver config")
            solver_config = ClosestPointConfig(box=box)
        if kind == "geometric":
            if model is None or snapshots is None:
                raise ValueError("geometric projector needs the model and snapshots")
            metric = geometric_metric(model, snapshots)
        elif metric is None:
            raise ValueError("closest_point projector needs an explicit metric")
        return Projector(kind="closest_point", metric=metric,
                         solver_config=solver_config, label=kind)
    raise ValueError(f"unknown projector kind {kind!r}")


@dataclass(frozen=True)
class BoundCheckReport:
    """Outcome of verifying the twice-the-training-error projection bound."""

    n_points: int
    n_converged: int
    violations: tuple[int, ...]
    max_ratio: float
    slack: float

    @property
    def ok(self) -> bool:
        return len(self.violations) == 0


def projection_bound_check(model: KoopmanApproximation, metric: Metric,
                           projector: Projector, test_points,
                           system: DynamicalSystem, flow_tol: float = 1e-12) -> BoundCheckReport:
    """Check that projecting never more than doubles the one-step error in W.

    For each test state the projected propagated lift must satisfy
    ||proj - truth||_W <= 2 ||propagated - truth||_W + slack, where the
    slack (1e-8 plus a first-order solver allowance) absorbs approximate
    stationarity of the closest-point search. Violations are reported, not
    raised; an unconverged solver can legitimately produce them.
    """
    if projector.kind != "closest_point":
        raise ValueError("the projection bound applies to closest-point projectors")
    if projector.metric is not metric and not np.array_equal(
            projector.metric.weight, metric.weight):
        raise ValueError("projector metric differs from the metric under test")
    pts = np.atleast_2d(np.asarray(test_points, dtype=float))
    truth, _ = flow_batch(system, pts, model.dt, rel_tol=flow_tol, abs_tol=flow_tol)
    dictionary = model.dictionary
    slack = 1e-8 + 10.0 * projector.solver_config.grad_tol
    violations = []
    n_converged = 0
    max_ratio = 0.0
    for j, x_hat in enumerate(pts):
        z = model.matrix @ dictionary.evaluate(x_hat)
        target = dictionary.evaluate(truth[j])
        result = projector.project(dictionary, z, seeds=[x_hat])
        n_converged += int(result.converged)
        lhs = metric.norm(result.lifted - target)
        rhs = metric.norm(z - target)
        bound = 2.0 * rhs + slack
        if rhs > 0:
            max_ratio = max(max_ratio, lhs / rhs)
        if lhs > bound:
            violations.append(j)
    return BoundCheckReport(n_points=pts.shape[0], n_converged=n_converged,
                            violations=tuple(violations), max_ratio=float(max_ratio),
                            slack=slack)
