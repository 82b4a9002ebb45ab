"""Figure rendering, one function per kind.

Rendering is pure: the same input CSVs always produce the same image
dimensions and color mapping. Heatmap color limits come from the 1% and
99% quantiles of the data (stated in the plot title) so single outliers
cannot wash out the scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402
from matplotlib.colors import LogNorm, TwoSlopeNorm  # noqa: E402

from .schema import SchemaError, read_csv_columns, require  # noqa: E402

__all__ = ["PlotSpec", "render", "KINDS"]

_FIGSIZE = (6.4, 4.8)
_DPI = 120


@dataclass(frozen=True)
class PlotSpec:
    """What to draw: a kind, its input CSVs, and the output path."""

    kind: str
    inputs: tuple
    output: str
    title: str = ""
    labels: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown plot kind {self.kind!r}; "
                             f"choose from {sorted(KINDS)}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def _axis_columns(columns, path):
    # grid CSVs carry the axis columns first, then error/converged
    names = [n for n in columns if n not in ("error", "converged")]
    if len(names) != 2:
        raise SchemaError(f"{Path(path).name}: heatmaps need exactly two axis "
                          f"columns, found {names}")
    return names


def _pivot_grid(columns, path):
    ax_names = _axis_columns(columns, path)
    a = np.unique(columns[ax_names[0]])
    b = np.unique(columns[ax_names[1]])
    values = columns["error"]
    if values.size != a.size * b.size:
        raise SchemaError(f"{Path(path).name}: {values.size} rows do not tile "
                          f"a {a.size}x{b.size} grid")
    # long form is written with the second axis varying fastest
    grid = values.reshape(a.size, b.size)
    return ax_names, a, b, grid


def _finite(values):
    return values[np.isfinite(values)]


def render_heatmap(spec: PlotSpec, ax) -> None:
    columns = read_csv_columns(spec.inputs[0])
    require(columns, ["error"], spec.inputs[0])
    ax_names, a, b, grid = _pivot_grid(columns, spec.inputs[0])
    finite = _finite(grid.ravel())
    positive = finite[finite > 0]
    if positive.size == 0:
        raise SchemaError(f"{Path(spec.inputs[0]).name}: no positive finite errors")
    lo, hi = np.quantile(positive, [0.01, 0.99])
    hi = max(hi, lo * (1 + 1e-12))
    mesh = ax.pcolormesh(a, b, np.clip(grid, lo, hi).T,
                         norm=LogNorm(vmin=lo, vmax=hi), cmap="viridis",
                         shading="nearest")
    ax.figure.colorbar(mesh, ax=ax, label="one-step error")
    ax.set_xlabel(ax_names[0])
    ax.set_ylabel(ax_names[1])
    ax.set_title(spec.title or
                 f"{Path(spec.inputs[0]).stem} (scale: 1%..99% quantiles)")


def render_diff_heatmap(spec: PlotSpec, ax) -> None:
    columns = read_csv_columns(spec.inputs[0])
    require(columns, ["error"], spec.inputs[0])
    ax_names, a, b, grid = _pivot_grid(columns, spec.inputs[0])
    finite = _finite(grid.ravel())
    if finite.size == 0:
        raise SchemaError(f"{Path(spec.inputs[0]).name}: no finite differences")
    span = float(np.quantile(np.abs(finite), 0.99))
    span = span if span > 0 else 1e-300
    mesh = ax.pcolormesh(a, b, np.clip(grid, -span, span).T,
                         norm=TwoSlopeNorm(vcenter=0.0, vmin=-span, vmax=span),
                         cmap="RdBu_r", shading="nearest")
    ax.figure.colorbar(mesh, ax=ax, label="error difference")
    ax.set_xlabel(ax_names[0])
    ax.set_ylabel(ax_names[1])
    ax.set_title(spec.title or
                 f"{Path(spec.inputs[0]).stem} (diverging, 99% quantile span)")


def render_sweep(spec: PlotSpec, ax) -> None:
    columns = read_csv_columns(spec.inputs[0])
    require(columns, ["dt", "projector", "median", "q25", "q75"], spec.inputs[0])
    for name in np.unique(columns["projector"]):
        sel = columns["projector"] == name
        order = np.argsort(columns["dt"][sel])
        dts = columns["dt"][sel][order]
        med = columns["median"][sel][order]
        ax.fill_between(dts, columns["q25"][sel][order], columns["q75"][sel][order],
                        alpha=0.2)
        ax.plot(dts, med, marker="o", label=str(name))
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("time step")
    ax.set_ylabel("median one-step error")
    ax.legend()
    ax.set_title(spec.title or Path(spec.inputs[0]).stem)


def render_series(spec: PlotSpec, ax) -> None:
    for i, path in enumerate(spec.inputs):
        columns = read_csv_columns(path)
        require(columns, ["t", "error"], path)
        label = spec.labels[i] if i < len(spec.labels) else Path(path).stem
        if "surrogate" in columns:
            for name in np.unique(columns["surrogate"]):
                sel = columns["surrogate"] == name
                ax.plot(columns["t"][sel], columns["error"][sel], label=str(name))
        else:
            ax.plot(columns["t"], columns["error"], label=label)
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("error")
    ax.legend()
    ax.set_title(spec.title or Path(spec.inputs[0]).stem)


def render_trajectory(spec: PlotSpec, ax_list) -> None:
    first = read_csv_columns(spec.inputs[0])
    require(first, ["t"], spec.inputs[0])
    state_names = [n for n in first if n != "t"]
    if not state_names:
        raise SchemaError(f"{Path(spec.inputs[0]).name}: missing column 'x'")
    for i, path in enumerate(spec.inputs):
        columns = read_csv_columns(path)
        require(columns, ["t"] + state_names, path)
        label = spec.labels[i] if i < len(spec.labels) else Path(path).stem
        for ax, name in zip(ax_list, state_names):
            ax.plot(columns["t"], columns[name], label=label)
    for ax, name in zip(ax_list, state_names):
        ax.set_ylabel(name)
        ax.legend(fontsize="small")
    ax_list[-1].set_xlabel("t")
    ax_list[0].set_title(spec.title or "trajectories")


KINDS = {
    "trajectory": render_trajectory,
    "heatmap": render_heatmap,
    "diff-heatmap": render_diff_heatmap,
    "sweep": render_sweep,
    "series": render_series,
}


def render(spec: PlotSpec) -> Path:
    """Draw one figure to its output path and return that path."""
    for path in spec.inputs:
        if not Path(path).exists():
            raise SchemaError(f"input CSV not found: {path}")
    if spec.kind == "trajectory":
        first = read_csv_columns(spec.inputs[0])
        n_states = max(len([n for n in first if n != "t"]), 1)
        fig, axes = plt.subplots(n_states, 1, sharex=True,
                                 figsize=(_FIGSIZE[0], 2.2 * n_states), dpi=_DPI)
        axes = np.atleast_1d(axes)
        try:
            render_trajectory(spec, list(axes))
            fig.tight_layout()
            fig.savefig(spec.output)
        finally:
            plt.close(fig)
    else:
        fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
        try:
            KINDS[spec.kind](spec, ax)
            fig.tight_layout()
            fig.savefig(spec.output)
        finally:
            plt.close(fig)
    return Path(spec.output)
