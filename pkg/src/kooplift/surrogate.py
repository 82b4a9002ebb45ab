"""Discrete-time prediction dynamics: lift, propagate, project, read out."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dictionary import Dictionary
from .dynamics import Box
from .edmd import KoopmanApproximation
from .manifold import Projector, ReconstructionError

__all__ = ["Surrogate", "Rollout", "StepError", "rollout_lifted"]


class StepError(RuntimeError):
    """A prediction step failed; carries the offending lifted point."""

    def __init__(self, message: str, lifted: np.ndarray):
        super().__init__(message)
        self.lifted = lifted


@dataclass(frozen=True)
class Rollout:
    """Iterated surrogate trajectory.

    ``states`` holds the recovered states at times k*dt (row 0 is the
    initial condition); ``lifted`` is populated for unprojected rollouts.
    ``diverged_at`` is the first step index that left the trusted region or
    failed, with no states recorded from there on.
    """

    states: np.ndarray
    times: np.ndarray
    diverged_at: int | None = None
    lifted: np.ndarray | None = None


@dataclass(frozen=True)
class Surrogate:
    """A fitted transition matrix composed with a projection rule.

    Under ``strict`` a non-converged closest-point search raises a
    :class:`StepError` instead of returning the best iterate.
    """

    model: KoopmanApproximation
    projector: Projector
    strict: bool = False
    descriptor: str = field(default="")

    def __post_init__(self):
        if not self.descriptor:
            object.__setattr__(
                self, "descriptor",
                f"{self.model.dictionary.name}/{self.projector.label}")

    @property
    def dictionary(self) -> Dictionary:
        return self.model.dictionary

    @property
    def dt(self) -> float:
        return self.model.dt

    def step(self, x, seed_hint=None, fast: bool = False) -> np.ndarray:
        """One prediction step: project K Psi(x) back to the manifold and read the state.

        ``seed_hint`` adds a warm start for the closest-point search (the
        previous state during rollouts); ``fast`` lets a converged warm
        start skip the multistart grid.
        """
        return self.step_result(x, seed_hint=seed_hint, fast=fast).x

    def step_result(self, x, seed_hint=None, fast: bool = False):
        """Like :meth:`step` but returns the full projection result."""
        x = np.asarray(x, dtype=float)
        z = self.model.matrix @ self.dictionary.evaluate(x)
        seeds = [x] if seed_hint is None else [np.asarray(seed_hint, dtype=float), x]
        try:
            result = self.projector.project(self.dictionary, z, seeds=seeds, fast=fast)
        except ReconstructionError as exc:
            raise StepError(f"projection failed: {exc}", z) from exc
        if self.strict and not result.converged:
            raise StepError("closest-point search did not converge", z)
        return result

    def rollout(self, x0, n_steps: int, domain: Box | None = None) -> Rollout:
        """Iterate the step map, stopping early when the state leaves the trusted box.

        ``domain`` is the nominal system box; divergence is measured against
        its standard inflation. Projector kind "none" delegates to the purely
        lifted iteration.
        """
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.projector.kind == "none":
            return rollout_lifted(self.model, x0, n_steps, domain=domain)
        x0 = np.asarray(x0, dtype=float)
        trusted = domain.inflated() if domain is not None else None
        states = [x0.copy()]
        diverged_at = None
        x = x0
        for k in range(1, n_steps + 1):
            try:
                # closest-point searches warm start from the previous state
                # and only fall back to the multistart grid on non-convergence
                x_next = self.step(x, seed_hint=x, fast=True)
            except StepError:
                diverged_at = k
                break
            if not np.all(np.isfinite(x_next)) or (
                    trusted is not None and not trusted.contains(x_next)):
                diverged_at = k
                break
            states.append(x_next)
            x = x_next
        states = np.asarray(states)
        times = np.arange(states.shape[0]) * self.dt
        return Rollout(states=states, times=times, diverged_at=diverged_at)


def rollout_lifted(model: KoopmanApproximation, x0, n_steps: int,
                   domain: Box | None = None) -> Rollout:
    """Iterate purely in the lifted space, reading states off the coordinate components.

    The lift happens once at the start; afterwards the ambient point is
    propagated by the transition matrix without reprojection.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    dictionary = model.dictionary
    if dictionary.coordinate_indices is None:
        raise ReconstructionError(
            "lifted rollout needs coordinate observables to read states")
    idx = np.asarray(dictionary.coordinate_indices, dtype=int)
    x0 = np.asarray(x0, dtype=float)
    trusted = domain.inflated() if domain is not None else None

    z = dictionary.evaluate(x0)
    lifted = [z.copy()]
    states = [z[idx].copy()]
    diverged_at = None
    for k in range(1, n_steps + 1):
        z = model.matrix @ z
        x = z[idx]
        if not np.all(np.isfinite(z)) or (trusted is not None and not trusted.contains(x)):
            diverged_at = k
            break
        lifted.append(z.copy())
        states.append(x.copy())
    states = np.asarray(states)
    times = np.arange(states.shape[0]) * model.dt
    return Rollout(states=states, times=times, diverged_at=diverged_at,
                   lifted=np.asarray(lifted))
