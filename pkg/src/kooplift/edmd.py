"""Snapshot sampling and the lifted least-squares regression.

The regression minimizes the empirical cost

    sum_j || Psi(y_j) - K Psi(x_j) ||^2      (y_j the flow of x_j over dt)

whose minimizer is K = (PsiY PsiX^T)(PsiX PsiX^T)^(-1). Observables are
rescaled to unit max magnitude before solving, which leaves the minimizer
unchanged in exact arithmetic but keeps high-degree monomial bases on large
boxes numerically sane; the scaling is folded back into the returned matrix.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .dictionary import Dictionary
from .dynamics import Box, DynamicalSystem, flow_batch

__all__ = [
    "SnapshotSet",
    "KoopmanApproximation",
    "FitError",
    "sample_uniform",
    "build_snapshots",
    "fit",
]

log = logging.getLogger(__name__)

# Gram condition number beyond which we switch to a truncated pseudoinverse.
_PINV_COND = 1e12
# Relative eigenvalue cutoff treating the Gram matrix as numerically singular.
_SINGULAR_RCOND = 1e-15


class FitError(RuntimeError):
    """Regression could not be solved as posed."""


@dataclass(frozen=True)
class SnapshotSet:
    """Paired states (x_j, x(dt; x_j)) used as regression data."""

    x_points: np.ndarray
    y_points: np.ndarray
    dt: float
    seed: int | None = None
    system_name: str = ""

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x_points, dtype=float))
        y = np.atleast_2d(np.asarray(self.y_points, dtype=float))
        if x.shape != y.shape or x.shape[0] < 1:
            raise ValueError("x_points and y_points must be equal-shape, non-empty")
        object.__setattr__(self, "x_points", x)
        object.__setattr__(self, "y_points", y)

    @property
    def m(self) -> int:
        return self.x_points.shape[0]

    @property
    def d(self) -> int:
        return self.x_points.shape[1]


@dataclass(frozen=True)
class KoopmanApproximation:
    """Fitted lifted transition matrix with its snapshot metadata.

    ``matrix`` advances lifted vectors over one time step ``dt``;
    ``condition_number`` refers to the (scaled, regularized) Gram matrix
    actually solved and ``residual_rms`` is the root-mean-square lifted
    one-step residual over the training snapshots.
    """

    matrix: np.ndarray
    dictionary: Dictionary
    dt: float
    m: int
    condition_number: float
    residual_rms: float
    ridge: float = 0.0
    system_name: str = ""

    def __post_init__(self):
        k = np.asarray(self.matrix, dtype=float)
        n = self.dictionary.size
        if k.shape != (n, n):
            raise ValueError(f"matrix must be ({n}, {n}) for this dictionary")
        if not np.all(np.isfinite(k)):
            raise ValueError("fitted matrix has non-finite entries")
        if self.condition_number < 1:
            raise ValueError("condition number cannot be below 1")
        object.__setattr__(self, "matrix", k)


def sample_uniform(domain: Box, m: int, seed: int) -> np.ndarray:
    """m i.i.d. uniform points on the box, deterministic given the seed."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    return rng.uniform(domain.lo, domain.hi, size=(m, domain.d))


def build_snapshots(system: DynamicalSystem, points, dt: float, tol: float = 1e-12,
                    seed: int | None = None, strict: bool = False) -> SnapshotSet:
    """Flow every point over dt and pair it with its terminal state.

    Points whose flow exits the inflated domain box are dropped with a
    logged count; losing more than 10% of the batch is a warning, or an
    error under ``strict``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    terminal, inside = flow_batch(system, pts, dt, rel_tol=tol, abs_tol=tol)
    dropped = int(np.sum(~inside))
    if dropped:
        log.info("dropped %d/%d snapshot points that left the inflated domain",
                 dropped, pts.shape[0])
    if dropped > 0.1 * pts.shape[0]:
        msg = (f"{dropped}/{pts.shape[0]} snapshot points left the inflated "
               f"domain of {system.name!r} over dt={dt}")
        if strict:
            raise FitError(msg)
        warnings.warn(msg, stacklevel=2)
    return SnapshotSet(pts[inside], terminal[inside], dt=dt, seed=seed,
                       system_name=system.name)


def fit(snapshots: SnapshotSet, dictionary: Dictionary, ridge: float = 0.0) -> KoopmanApproximation:
    """Least-squares estimate of the lifted one-step transition matrix.

    Solves the per-observable-scaled normal equations through a symmetric
    eigendecomposition (rank revealing); one iterative-refinement pass keeps
    the stationarity residual near machine precision. Condition numbers
    above 1e12 fall back to a truncated pseudoinverse with a logged warning;
    a numerically singular Gram matrix with ridge=0 is an error.
    """
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    n = dictionary.size
    if snapshots.m < n:
        warnings.warn(
            f"m={snapshots.m} snapshots for N={n} observables; "
            "the regression is rank deficient", stacklevel=2)

    psi_x = dictionary.evaluate_batch(snapshots.x_points).T  # (N, m)
    psi_y = dictionary.evaluate_batch(snapshots.y_points).T
    scale = np.max(np.abs(psi_x), axis=1)
    scale = np.where(scale > 0, scale, 1.0)
    sx = psi_x / scale[:, None]
    sy = psi_y / scale[:, None]

    m = snapshots.m
    gram = (sx @ sx.T) / m
    cross = (sy @ sx.T) / m
    # ridge * I in the original variables becomes ridge * diag(1/scale^2)
    # after the per-observable rescaling
    reg = gram + ridge * np.diag(1.0 / scale**2)

    evals, evecs = eigh(reg)
    lam_max = float(evals[-1])
    if lam_max <= 0:
        raise FitError("Gram matrix is zero; no usable snapshot data")
    lam_min = float(evals[0])
    cond = lam_max / lam_min if lam_min > 0 else np.inf
    if lam_min <= lam_max * _SINGULAR_RCOND:
        if ridge == 0:
            raise FitError(
                "Gram matrix is numerically singular; add ridge regularization "
                "or use a smaller dictionary (or more snapshots)")
        log.warning("regularized Gram matrix still numerically singular; "
                    "solving through a truncated pseudoinverse")
    elif cond > _PINV_COND:
        log.warning("Gram condition number %.3g exceeds %.0e; using a "
                    "truncated pseudoinverse", cond, _PINV_COND)

    inv_evals = np.where(evals > lam_max * _SINGULAR_RCOND, 1.0 / evals, 0.0)
    apply_inv = (evecs * inv_evals) @ evecs.T

    k_scaled = cross @ apply_inv
    # one refinement pass against the normal equations
    k_scaled += (cross - k_scaled @ reg) @ apply_inv

    k = (scale[:, None] / scale[None, :]) * k_scaled  # undo the scaling: S K S^-1
    residual = psi_y - k @ psi_x
    residual_rms = float(np.sqrt(np.mean(np.sum(residual**2, axis=0))))
    return KoopmanApproximation(
        matrix=k, dictionary=dictionary, dt=snapshots.dt, m=m,
        condition_number=float(min(cond, 1 / _SINGULAR_RCOND)),
        residual_rms=residual_rms, ridge=ridge, system_name=snapshots.system_name)
