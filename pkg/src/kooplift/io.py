"""CSV and manifest serialization for models, snapshots and evaluation results.

Floats are written with Python's shortest round-trip representation, so
re-running a deterministic experiment overwrites its outputs byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np

from .dictionary import Dictionary, variable_names
from .edmd import KoopmanApproximation, SnapshotSet
from .evaluation import ErrorGrid, ErrorSeries, SweepResult
from .surrogate import Rollout

__all__ = [
    "fmt",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_koopman",
    "read_koopman",
    "write_snapshots",
    "read_snapshots",
    "write_grid",
    "write_series",
    "write_mean_error",
    "write_rollout",
    "write_sweep",
    "write_manifest",
]


def fmt(x) -> str:
    """Shortest representation that round-trips to the same float64."""
    return repr(float(x))


def _write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_matrix_csv(path, matrix) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in matrix:
            writer.writerow([fmt(v) for v in row])


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    return np.asarray(rows)


def write_koopman(path, model: KoopmanApproximation) -> Path:
    """Matrix CSV plus a ``.meta.txt`` sidecar carrying the metadata."""
    path = Path(path)
    write_matrix_csv(path, model.matrix)
    meta = path.with_suffix(".meta.txt")
    dictionary = model.dictionary
    exps = ";".join(",".join(str(int(a)) for a in row) for row in dictionary.exponents)
    lines = [
        f"system={model.system_name}",
        f"dictionary={dictionary.name}",
        f"N={dictionary.size}",
        f"d={dictionary.d}",
        f"exponents={exps}",
        f"labels={'|'.join(dictionary.labels)}",
        f"dt={fmt(model.dt)}",
        f"m={model.m}",
        f"ridge={fmt(model.ridge)}",
        f"condition_number={fmt(model.condition_number)}",
        f"residual_rms={fmt(model.residual_rms)}",
    ]
    meta.write_text("\n".join(lines) + "\n")
    return meta


def read_koopman(path) -> KoopmanApproximation:
    path = Path(path)
    matrix = read_matrix_csv(path)
    meta = dict(
        line.split("=", 1)
        for line in path.with_suffix(".meta.txt").read_text().splitlines()
        if line.strip()
    )
    exps = [[int(a) for a in grp.split(",")] for grp in meta["exponents"].split(";")]
    dictionary = Dictionary(np.asarray(exps, dtype=np.int64), name=meta["dictionary"])
    return KoopmanApproximation(
        matrix=matrix, dictionary=dictionary, dt=float(meta["dt"]),
        m=int(meta["m"]), condition_number=float(meta["condition_number"]),
        residual_rms=float(meta["residual_rms"]), ridge=float(meta["ridge"]),
        system_name=meta["system"])


def write_snapshots(path, snapshots: SnapshotSet) -> None:
    """Columns x1..xd, y1..yd with a comment header recording provenance."""
    d = snapshots.d
    names = [f"x{i + 1}" for i in range(d)] + [f"y{i + 1}" for i in range(d)]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# system={snapshots.system_name}\n")
        fh.write(f"# dt={fmt(snapshots.dt)}\n")
        fh.write(f"# seed={'' if snapshots.seed is None else snapshots.seed}\n")
        writer = csv.writer(fh)
        writer.writerow(names)
        for xr, yr in zip(snapshots.x_points, snapshots.y_points):
            writer.writerow([fmt(v) for v in xr] + [fmt(v) for v in yr])


def read_snapshots(path) -> SnapshotSet:
    header = {}
    with open(path, newline="") as fh:
        pos = fh.tell()
        line = fh.readline()
        while line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            header[key.strip()] = val.strip()
            pos = fh.tell()
            line = fh.readline()
        fh.seek(pos)
        reader = csv.reader(fh)
        names = next(reader)
        rows = np.asarray([[float(v) for v in row] for row in reader if row])
    d = sum(1 for n in names if n.startswith("x"))
    seed = header.get("seed", "")
    return SnapshotSet(rows[:, :d], rows[:, d:], dt=float(header["dt"]),
                       seed=int(seed) if seed else None,
                       system_name=header.get("system", ""))


def write_grid(path, grid: ErrorGrid) -> None:
    """Long-form nodes: one axis column per dimension, then error and converged."""
    d = len(grid.axes)
    names = list(variable_names(d))
    nodes = grid.nodes
    values = grid.values.ravel()
    conv = (grid.converged.ravel() if grid.converged is not None
            else np.ones(values.size, dtype=bool))
    rows = ([fmt(c) for c in nodes[j]] + [fmt(values[j]), str(int(conv[j]))]
            for j in range(values.size))
    _write_rows(path, names + ["error", "converged"], rows)


def write_series(path, series: ErrorSeries) -> None:
    rows = ([fmt(t), fmt(e)] for t, e in zip(series.times, series.errors))
    _write_rows(path, ["t", "error"], rows)


def write_mean_error(path, series_list) -> None:
    """Long-form (t, surrogate, error) for several mean-error curves."""
    rows = []
    for series in series_list:
        for t, e in zip(series.times, series.errors):
            rows.append([fmt(t), series.descriptor, fmt(e)])
    _write_rows(path, ["t", "surrogate", "error"], rows)


def write_rollout(path, rollout: Rollout) -> None:
    d = rollout.states.shape[1]
    names = list(variable_names(d))
    rows = ([fmt(t)] + [fmt(v) for v in row]
            for t, row in zip(rollout.times, rollout.states))
    _write_rows(path, ["t"] + names, rows)


def write_sweep(path, sweep: SweepResult) -> None:
    rows = []
    for kind in sweep.kinds:
        for i, dt in enumerate(sweep.dts):
            rows.append([fmt(dt), kind, fmt(sweep.medians[kind][i]),
                         fmt(sweep.q25[kind][i]), fmt(sweep.q75[kind][i])])
    _write_rows(path, ["dt", "projector", "median", "q25", "q75"], rows)


def config_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def write_manifest(path, command: str, config_text: str, seed, outputs) -> None:
    """Plain-text run record: command, config hash, seed, library versions."""
    import scipy

    from . import __version__

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"command={command}",
        f"config_sha256={config_digest(config_text)}",
        f"seed={seed}",
        f"kooplift={__version__}",
        f"numpy={np.__version__}",
        f"scipy={scipy.__version__}",
        "outputs=" + ",".join(str(o) for o in outputs),
    ]
    path.write_text("\n".join(lines) + "\n")
