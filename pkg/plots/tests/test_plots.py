import subprocess
import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

from diffplots import (
    MissingColumnError,
    PlotSpec,
    SeriesSpec,
    SpecError,
    aggregate_series,
    compute_plot_data,
    load_metrics,
    parse_plot_spec,
    render,
)
from diffplots.cli import main as cli_main

HEADER = "seed,epoch,agent,task,mean_return,disagreement"

DEMO_CONFIG = """
[meta]
schema_version = 1
name = plots-demo

[experiment]
seeds = 0 1
epochs = 3
eval_episodes = 2
mode = sync
out_dir = {out}

[env]
kind = pendulum
n_tasks = 2
episode_max_steps = 30

[env.grid]
pole_mass = 0.9 1.1

[agent]
algorithm = siac
role = diffusion
hidden = 8
episodes_per_update = 1

[network]
topology = ring
"""


def write_csv(path: Path, rows):
    lines = [HEADER] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def simple_rows(seed=0, agents=2, epochs=3, base=-100.0):
    rows = []
    for e in range(epochs):
        for a in range(agents):
            rows.append((seed, e, a, a, base + 10 * e + a, 0.5))
    return rows


@pytest.fixture(scope="session")
def demo_run(tmp_path_factory):
    """Metrics produced by the training harness itself, via its CLI."""
    out = tmp_path_factory.mktemp("demo_run")
    config = out / "demo.ini"
    config.write_text(DEMO_CONFIG.format(out=out / "results"))
    proc = subprocess.run(
        [sys.executable, "-m", "diffrl.harness.cli", "run", str(config)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    paths = sorted((out / "results").glob("metrics_seed*.csv"))
    assert paths
    return paths


def spec_for(tmp_path, metrics, **kw):
    defaults = dict(
        title="t", output=str(tmp_path / "fig.png"),
        series=(SeriesSpec("run", tuple(str(p) for p in metrics)),),
    )
    defaults.update(kw)
    return PlotSpec(**defaults)


# --- loading and validation -------------------------------------------------------


def test_load_metrics_round_trip(tmp_path):
    path = tmp_path / "m.csv"
    write_csv(path, simple_rows())
    cols = load_metrics(path)
    assert cols["epoch"].tolist() == [0, 0, 1, 1, 2, 2]
    np.testing.assert_allclose(cols["mean_return"][:2], [-100.0, -99.0])


def test_missing_column_is_named(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("seed,epoch,agent,task,mean_return\n0,0,0,0,1.0\n")
    with pytest.raises(MissingColumnError) as err:
        load_metrics(path)
    assert err.value.column == "disagreement"


def test_spec_validation(tmp_path):
    with pytest.raises(SpecError):
        spec_for(tmp_path, ["x.csv"], kind="pie")
    with pytest.raises(SpecError):
        spec_for(tmp_path, ["x.csv"], output=str(tmp_path / "fig.bmp"))
    with pytest.raises(SpecError):
        PlotSpec(title="t", output=str(tmp_path / "f.png"), series=())


def test_parse_plot_spec_resolves_relative_paths(tmp_path):
    write_csv(tmp_path / "m.csv", simple_rows())
    spec_file = tmp_path / "p.ini"
    spec_file.write_text(
        "[plot]\ntitle = demo\noutput = out/fig.svg\naggregation = mean_stderr\n"
        "normalise = true\n\n[series.a]\nlabel = A\nmetrics = m.csv\n"
    )
    spec = parse_plot_spec(spec_file)
    assert spec.aggregation == "mean_stderr" and spec.normalise
    assert Path(spec.output) == tmp_path / "out" / "fig.svg"
    assert Path(spec.series[0].metrics[0]) == tmp_path / "m.csv"


# --- aggregation ---------------------------------------------------------------------


def test_single_seed_series_band_collapses(tmp_path):
    path = tmp_path / "m.csv"
    write_csv(path, [(0, e, 0, 0, float(e), 0.0) for e in range(4)])
    spec = spec_for(tmp_path, [path])
    data = aggregate_series(spec, spec.series[0])
    np.testing.assert_array_equal(data.centre, data.lo)
    np.testing.assert_array_equal(data.centre, data.hi)


def test_two_identical_files_two_identical_curves(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    rows = simple_rows()
    write_csv(a, rows)
    write_csv(b, rows)
    spec = spec_for(
        tmp_path, [a],
        series=(SeriesSpec("first", (str(a),)), SeriesSpec("second", (str(b),))),
    )
    first, second = compute_plot_data(spec)
    np.testing.assert_array_equal(first.centre, second.centre)
    np.testing.assert_array_equal(first.lo, second.lo)


def test_aggregates_match_independent_recomputation(tmp_path):
    rng = np.random.default_rng(0)
    paths = []
    rows_by_seed = {}
    for seed in range(3):
        rows = [
            (seed, e, a, a, float(rng.normal()), 0.0)
            for e in range(5)
            for a in range(4)
        ]
        rows_by_seed[seed] = rows
        p = tmp_path / f"s{seed}.csv"
        write_csv(p, rows)
        paths.append(p)
    spec = spec_for(tmp_path, paths)
    data = compute_plot_data(spec)[0]
    for i, epoch in enumerate(data.epochs):
        pooled = sorted(
            row[4] for rows in rows_by_seed.values() for row in rows if row[1] == epoch
        )
        assert abs(data.centre[i] - np.median(pooled)) < 1e-9
        assert abs(data.lo[i] - np.quantile(pooled, 0.25)) < 1e-9
        assert abs(data.hi[i] - np.quantile(pooled, 0.75)) < 1e-9


def test_mean_stderr_aggregation(tmp_path):
    path = tmp_path / "m.csv"
    values = [1.0, 2.0, 3.0, 6.0]
    write_csv(path, [(0, 0, a, a, v, 0.0) for a, v in enumerate(values)])
    spec = spec_for(tmp_path, [path], aggregation="mean_stderr")
    data = compute_plot_data(spec)[0]
    assert data.centre[0] == pytest.approx(3.0)
    assert data.hi[0] - data.centre[0] == pytest.approx(np.std(values, ddof=1) / 2.0)


def test_normalisation_scales_by_global_max(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(a, [(0, e, 0, 0, 10.0 * (e + 1), 0.0) for e in range(3)])
    write_csv(b, [(0, e, 0, 0, 5.0 * (e + 1), 0.0) for e in range(3)])
    spec = spec_for(
        tmp_path, [a], normalise=True,
        series=(SeriesSpec("hi", (str(a),)), SeriesSpec("lo", (str(b),))),
    )
    hi, lo = compute_plot_data(spec)
    assert hi.centre.max() == pytest.approx(1.0)
    assert lo.centre.max() == pytest.approx(0.5)


def test_empty_series_skipped_with_warning(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text(HEADER + "\n")
    full = tmp_path / "f.csv"
    write_csv(full, simple_rows())
    spec = spec_for(
        tmp_path, [full],
        series=(SeriesSpec("full", (str(full),)), SeriesSpec("void", (str(empty),))),
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        data = compute_plot_data(spec)
    assert [d.label for d in data] == ["full"]
    assert any("void" in str(w.message) for w in caught)


def test_bars_reduce_to_requested_epoch(tmp_path):
    path = tmp_path / "m.csv"
    write_csv(path, simple_rows(epochs=4))
    spec = spec_for(tmp_path, [path], kind="bars")
    data = compute_plot_data(spec)[0]
    assert data.epochs.tolist() == [3]
    spec1 = spec_for(tmp_path, [path], kind="bars", bar_epoch=1)
    assert compute_plot_data(spec1)[0].centre[0] == pytest.approx(-89.5)


# --- rendering ----------------------------------------------------------------------


def test_render_curves_and_bars(tmp_path):
    path = tmp_path / "m.csv"
    write_csv(path, simple_rows())
    for kind, name in (("curves", "c.png"), ("bars", "b.svg")):
        spec = spec_for(tmp_path, [path], kind=kind, output=str(tmp_path / name))
        out = render(spec)
        assert out.exists() and out.stat().st_size > 0


def test_render_demo_run_and_endpoint_matches_csv(demo_run, tmp_path):
    spec = spec_for(tmp_path, demo_run, title="demo")
    out = render(spec)
    assert out.exists()
    data = compute_plot_data(spec)[0]
    # endpoint equals the final-epoch aggregate recomputed from the raw CSVs
    finals = []
    for p in demo_run:
        cols = load_metrics(p)
        finals.extend(cols["mean_return"][cols["epoch"] == cols["epoch"].max()])
    assert abs(data.centre[-1] - np.median(finals)) < 1e-9


def test_render_comparison_figures_from_demo(demo_run, tmp_path):
    # the three figure styles used for reporting: algorithm comparison with
    # quartile bands, topology comparison, and a dropped-link sweep
    labelled = {
        "algorithms": ("Diffusion", "Centralised"),
        "topologies": ("sparse", "dense"),
        "drop": ("p = 0.0", "p = 0.4", "p = 0.8"),
    }
    for name, labels in labelled.items():
        spec = spec_for(
            tmp_path, demo_run,
            output=str(tmp_path / f"{name}.png"),
            normalise=(name == "algorithms"),
            series=tuple(
                SeriesSpec(label, tuple(str(p) for p in demo_run)) for label in labels
            ),
        )
        out = render(spec)
        assert out.exists() and out.stat().st_size > 0
        data = compute_plot_data(spec)
        assert [d.label for d in data] == list(labels)


def test_render_deterministic_bytes(tmp_path):
    path = tmp_path / "m.csv"
    write_csv(path, simple_rows())
    blobs = []
    for name in ("one.svg", "two.svg"):
        spec = spec_for(tmp_path, [path], output=str(tmp_path / name))
        blobs.append(render(spec).read_bytes())
    assert blobs[0] == blobs[1]


def test_cli_render_with_overrides(tmp_path, capsys):
    write_csv(tmp_path / "m.csv", simple_rows())
    spec_file = tmp_path / "p.ini"
    spec_file.write_text(
        "[plot]\ntitle = t\noutput = fig.png\n\n[series.a]\nmetrics = m.csv\n"
    )
    assert cli_main([str(spec_file), "--output", str(tmp_path / "o.png"),
                     "--aggregation", "mean_stderr"]) == 0
    assert (tmp_path / "o.png").exists()
    assert "wrote" in capsys.readouterr().out


def test_cli_reports_missing_column(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("seed,epoch\n0,0\n")
    spec_file = tmp_path / "p.ini"
    spec_file.write_text(
        "[plot]\ntitle = t\noutput = fig.png\n\n[series.a]\nmetrics = bad.csv\n"
    )
    assert cli_main([str(spec_file)]) == 1
    assert "missing required column" in capsys.readouterr().err
