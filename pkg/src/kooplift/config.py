"""Experiment configuration: a flat INI file with one section per concern.

Every knob an experiment needs lives here with the library defaults filled
in, so a config file only has to state what it overrides. See the README
for the documented key reference.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dictionary import Dictionary, exclusions_from_labels, monomial_dictionary
from .dynamics import DynamicalSystem, get_system
from .manifold import ClosestPointConfig

__all__ = ["ExperimentConfig", "ConfigError"]

_PROJECTOR_KINDS = ("none", "coordinate", "geometric", "closest_point")


class ConfigError(ValueError):
    """A configuration value is missing, malformed or out of range."""


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment settings with validated values."""

    system_name: str = "pendulum"
    system_params: dict = field(default_factory=dict)
    degree: int = 3
    exclude_labels: tuple = ()
    dt: float = 0.01
    m: int = 10_000
    seed: int = 7
    ridge: float = 0.0
    snapshot_tol: float = 1e-12
    projector_kinds: tuple = ("coordinate", "geometric")
    metric_file: str = ""
    max_iters: int = 50
    grad_tol: float = 1e-9
    multistart_grid: int = 5
    damping_init: float = 1e-3
    grid_keep: int = 10
    grid_resolution: int = 50
    n_eval: int = 500
    dt_ladder: tuple = (0.005, 0.01, 0.02, 0.05, 0.1, 0.2)
    rollout_x0: tuple = (1.5, 0.0)
    rollout_steps: int = 2000
    mean_error_grid: int = 10
    mean_error_steps: int = 1000
    trajectory_x0: tuple = (1.0, 1.0, 25.0)
    trajectory_steps: int = 500
    out_dir: str = "out"
    source_text: str = ""

    def __post_init__(self):
        if self.degree < 1:
            raise ConfigError("dictionary degree must be >= 1")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.ridge < 0:
            raise ConfigError("ridge must be non-negative")
        if self.grid_resolution < 2:
            raise ConfigError("grid_resolution must be >= 2")
        if self.n_eval < 1:
            raise ConfigError("n_eval must be >= 1")
        if any(dt <= 0 for dt in self.dt_ladder):
            raise ConfigError("dt ladder entries must be positive")
        for kind in self.projector_kinds:
            if kind not in _PROJECTOR_KINDS:
                raise ConfigError(
                    f"unknown projector kind {kind!r}; choose from {_PROJECTOR_KINDS}")
        # fail fast on unresolvable names
        self.system()

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        text = Path(path).read_text()
        return cls.from_text(text)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        kw: dict = {"source_text": text}

        def grab(section, key, cast, dest=None):
            if parser.has_option(section, key):
                try:
                    kw[dest or key] = cast(parser.get(section, key))
                except ValueError as exc:
                    raise ConfigError(f"[{section}] {key}: {exc}") from exc

        if parser.has_section("system"):
            grab("system", "name", str, "system_name")
            params = {k: float(v) for k, v in parser.items("system") if k != "name"}
            if params:
                kw["system_params"] = params
        if parser.has_section("dictionary"):
            if parser.has_option("dictionary", "type"):
                if parser.get("dictionary", "type").strip() != "monomial":
                    raise ConfigError("only monomial dictionaries are supported")
            grab("dictionary", "degree", int)
            grab("dictionary", "exclude", _names, "exclude_labels")
        grab("edmd", "dt", float)
        grab("edmd", "m", int)
        grab("edmd", "seed", int)
        grab("edmd", "ridge", float)
        grab("edmd", "snapshot_tol", float)
        grab("projector", "kinds", _names, "projector_kinds")
        grab("projector", "metric_file", str)
        grab("solver", "max_iters", int)
        grab("solver", "grad_tol", float)
        grab("solver", "multistart_grid", int)
        grab("solver", "damping_init", float)
        grab("solver", "grid_keep", int)
        grab("evaluation", "grid_resolution", int)
        grab("evaluation", "n_eval", int)
        grab("evaluation", "dt_ladder", _floats)
        grab("evaluation", "rollout_x0", _floats)
        grab("evaluation", "rollout_steps", int)
        grab("evaluation", "mean_error_grid", int)
        grab("evaluation", "mean_error_steps", int)
        grab("evaluation", "trajectory_x0", _floats)
        grab("evaluation", "trajectory_steps", int)
        grab("output", "dir", str, "out_dir")
        return cls(**kw)

    def override(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def system(self) -> DynamicalSystem:
        try:
            return get_system(self.system_name, **self.system_params)
        except (KeyError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def dictionary(self) -> Dictionary:
        system = self.system()
        try:
            exclude = exclusions_from_labels(self.degree, system.dimension,
                                             self.exclude_labels)
            return monomial_dictionary(self.degree, system.dimension, exclude=exclude)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def solver_config(self) -> ClosestPointConfig:
        return ClosestPointConfig(
            box=self.system().domain, max_iters=self.max_iters,
            grad_tol=self.grad_tol, multistart_grid=self.multistart_grid,
            damping_init=self.damping_init, grid_keep=self.grid_keep)
