import shutil
import subprocess
import sys

import matplotlib.pyplot as plt
import numpy as np
import pytest

from figplot import PlotSpec, SchemaError, render
from figplot.render import render_series, render_sweep


def write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture
def grid_csv(tmp_path):
    rows = ["x,v,error,converged"]
    for xv in np.linspace(-1, 1, 4):
        for vv in np.linspace(-2, 2, 5):
            rows.append(f"{xv},{vv},{abs(xv) + abs(vv) + 0.01},1")
    return write(tmp_path / "grid.csv", "\n".join(rows) + "\n")


@pytest.fixture
def diff_csv(tmp_path):
    rows = ["x,v,error,converged"]
    for xv in np.linspace(-1, 1, 4):
        for vv in np.linspace(-2, 2, 5):
            rows.append(f"{xv},{vv},{xv * vv * 1e-3},1")
    return write(tmp_path / "diff.csv", "\n".join(rows) + "\n")


@pytest.fixture
def sweep_csv(tmp_path):
    rows = ["dt,projector,median,q25,q75"]
    for dt in (0.01, 0.02, 0.05):
        rows.append(f"{dt},coordinate,{dt * 0.1},{dt * 0.05},{dt * 0.2}")
        rows.append(f"{dt},geometric,{dt * 0.01},{dt * 0.005},{dt * 0.02}")
    return write(tmp_path / "sweep.csv", "\n".join(rows) + "\n")


@pytest.fixture
def series_csv(tmp_path):
    rows = ["t,error"] + [f"{0.01 * k},{1e-4 * (k + 1)}" for k in range(20)]
    return write(tmp_path / "series.csv", "\n".join(rows) + "\n")


@pytest.fixture
def rollout_csvs(tmp_path):
    paths = []
    for j in range(3):
        rows = ["t,x,v"] + [f"{0.01 * k},{np.sin(0.1 * k + j)},{np.cos(0.1 * k)}"
                            for k in range(30)]
        paths.append(write(tmp_path / f"roll{j}.csv", "\n".join(rows) + "\n"))
    return paths


def png_signature(path):
    return path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestRenderKinds:
    def test_heatmap(self, grid_csv, tmp_path):
        out = render(PlotSpec("heatmap", (grid_csv,), str(tmp_path / "h.png")))
        assert png_signature(out)

    def test_diff_heatmap(self, diff_csv, tmp_path):
        out = render(PlotSpec("diff-heatmap", (diff_csv,), str(tmp_path / "d.png")))
        assert png_signature(out)

    def test_self_difference_renders_uniform_midscale(self, tmp_path):
        rows = ["x,v,error,converged"]
        for xv in np.linspace(-1, 1, 4):
            for vv in np.linspace(-1, 1, 4):
                rows.append(f"{xv},{vv},0.0,1")
        path = write(tmp_path / "zero.csv", "\n".join(rows) + "\n")
        out = render(PlotSpec("diff-heatmap", (path,), str(tmp_path / "z.png")))
        assert png_signature(out)
        # all-zero differences sit exactly at the center of the diverging scale
        from matplotlib.colors import TwoSlopeNorm
        norm = TwoSlopeNorm(vcenter=0.0, vmin=-1e-300, vmax=1e-300)
        assert norm(0.0) == 0.5

    def test_sweep_lines_and_log_axis(self, sweep_csv, tmp_path):
        out = render(PlotSpec("sweep", (sweep_csv,), str(tmp_path / "s.png")))
        assert png_signature(out)
        fig, ax = plt.subplots()
        try:
            render_sweep(PlotSpec("sweep", (sweep_csv,), "unused.png"), ax)
            assert len(ax.lines) == 2  # one line per projector
            assert ax.get_yscale() == "log" and ax.get_xscale() == "log"
        finally:
            plt.close(fig)

    def test_series(self, series_csv, tmp_path):
        out = render(PlotSpec("series", (series_csv,), str(tmp_path / "e.png")))
        assert png_signature(out)

    def test_long_form_series_multiline(self, tmp_path):
        rows = ["t,surrogate,error"]
        for k in range(10):
            rows.append(f"{0.01 * k},a,{1e-3 * (k + 1)}")
            rows.append(f"{0.01 * k},b,{1e-4 * (k + 1)}")
        path = write(tmp_path / "mean.csv", "\n".join(rows) + "\n")
        fig, ax = plt.subplots()
        try:
            render_series(PlotSpec("series", (path,), "unused.png"), ax)
            assert len(ax.lines) == 2
        finally:
            plt.close(fig)

    def test_trajectory_multifile(self, rollout_csvs, tmp_path):
        out = render(PlotSpec("trajectory", tuple(rollout_csvs),
                              str(tmp_path / "t.png")))
        assert png_signature(out)


class TestSchemaErrors:
    def test_empty_series_is_error_not_empty_image(self, tmp_path):
        path = write(tmp_path / "empty.csv", "t,error\n")
        with pytest.raises(SchemaError, match="no data rows"):
            render(PlotSpec("series", (path,), str(tmp_path / "x.png")))
        assert not (tmp_path / "x.png").exists()

    def test_missing_column_named(self, tmp_path):
        path = write(tmp_path / "bad.csv", "t,value\n0,1\n")
        with pytest.raises(SchemaError, match="'error'"):
            render(PlotSpec("series", (path,), str(tmp_path / "x.png")))

    def test_sweep_missing_quantiles_named(self, tmp_path):
        path = write(tmp_path / "bad.csv", "dt,projector,median\n0.1,a,1\n")
        with pytest.raises(SchemaError, match="'q25'"):
            render(PlotSpec("sweep", (path,), str(tmp_path / "x.png")))

    def test_ragged_grid_rejected(self, tmp_path):
        path = write(tmp_path / "bad.csv",
                     "x,v,error,converged\n0,0,1,1\n0,1,1,1\n1,0,1,1\n")
        with pytest.raises(SchemaError, match="grid"):
            render(PlotSpec("heatmap", (path,), str(tmp_path / "x.png")))

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError, match="not found"):
            render(PlotSpec("series", (str(tmp_path / "nope.csv"),),
                            str(tmp_path / "x.png")))

    def test_unknown_kind(self, series_csv, tmp_path):
        with pytest.raises(ValueError, match="unknown plot kind"):
            PlotSpec("pie", (series_csv,), str(tmp_path / "x.png"))


class TestDeterminism:
    def test_same_csv_same_image(self, grid_csv, tmp_path):
        a = render(PlotSpec("heatmap", (grid_csv,), str(tmp_path / "a.png")))
        b = render(PlotSpec("heatmap", (grid_csv,), str(tmp_path / "b.png")))
        assert a.read_bytes() == b.read_bytes()


class TestCli:
    def test_cli_renders(self, series_csv, tmp_path, capsys):
        from figplot.cli import main
        out = tmp_path / "cli.png"
        assert main(["series", series_csv, "-o", str(out)]) == 0
        assert out.exists()

    def test_cli_schema_error_exit(self, tmp_path, capsys):
        from figplot.cli import main
        bad = write(tmp_path / "bad.csv", "t,value\n0,1\n")
        assert main(["series", bad, "-o", str(tmp_path / "x.png")]) == 1
        assert "error" in capsys.readouterr().err


@pytest.fixture(scope="module")
def outputs(tmp_path_factory):
    if shutil.which("kooplift") is None:
        pytest.skip("primary CLI not installed")
    outdir = tmp_path_factory.mktemp("repro")
    cfg = outdir / "small.cfg"
    cfg.write_text(
        "[edmd]\nm = 1500\nseed = 7\n"
        "[evaluation]\ngrid_resolution = 8\nn_eval = 40\n"
        "dt_ladder = 0.01, 0.05\nrollout_steps = 60\nmean_error_grid = 3\n"
        "mean_error_steps = 40\ntrajectory_steps = 15\n"
        f"[output]\ndir = {outdir}\n")
    for figure in ("fig3", "fig45", "fig6", "fig7"):
        subprocess.run(["kooplift", "--config", str(cfg), "reproduce", figure],
                       check=True, capture_output=True)
    return outdir


class TestEndToEnd:
    """Render every reproduce-command CSV through the documented interface."""

    def test_all_five_figure_kinds(self, outputs, tmp_path):
        rollouts = sorted(str(p) for p in outputs.glob("fig3_rollout_*.csv"))
        made = [
            render(PlotSpec("trajectory", tuple(rollouts), str(tmp_path / "f_traj.png"))),
            render(PlotSpec("series", (str(outputs / "fig3_mean_error.csv"),),
                            str(tmp_path / "f_mean.png"))),
            render(PlotSpec("heatmap", (str(outputs / "fig45_grid_V3_coordinate.csv"),),
                            str(tmp_path / "f_heat.png"))),
            render(PlotSpec("diff-heatmap", (str(outputs / "fig45_diff_V3.csv"),),
                            str(tmp_path / "f_diff.png"))),
            render(PlotSpec("sweep", (str(outputs / "fig6_sweep_V3.csv"),),
                            str(tmp_path / "f_sweep.png"))),
            render(PlotSpec("series", (str(outputs / "fig7_series_geometric.csv"),),
                            str(tmp_path / "f_series.png"))),
        ]
        assert len(made) == 6
        for path in made:
            assert png_signature(path), path

    def test_every_emitted_csv_renders(self, outputs, tmp_path):
        kind_of = {"fig3_rollout": "trajectory", "fig3_mean": "series",
                   "fig45_grid": "heatmap", "fig45_diff": "diff-heatmap",
                   "fig6_sweep": "sweep", "fig7_series": "series"}
        count = 0
        for csv_path in sorted(outputs.glob("fig*.csv")):
            kind = next(v for k, v in kind_of.items() if csv_path.name.startswith(k))
            out = render(PlotSpec(kind, (str(csv_path),),
                                  str(tmp_path / (csv_path.stem + ".png"))))
            assert png_signature(out)
            count += 1
        assert count == 14  # 4 + 6 + 2 + 2 files across the four commands
