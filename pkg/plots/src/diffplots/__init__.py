"""Static figures from experiment metrics CSVs.

Reads only the training harness's documented metrics schema

    seed, epoch, agent, task, mean_return, disagreement

and renders either learning curves (one line per series with a median/IQR or
mean/standard-error band) or summary bars over a chosen epoch.  A plot is
described by a plain-text INI spec; see ``parse_plot_spec`` for the format.
Rendering is deterministic given identical inputs.
"""

from __future__ import annotations

import configparser
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("seed", "epoch", "agent", "task", "mean_return", "disagreement")

AGGREGATIONS = ("median_iqr", "mean_stderr")
KINDS = ("curves", "bars")
VALUE_COLUMNS = ("mean_return", "disagreement")


class SpecError(ValueError):
    pass


class MissingColumnError(ValueError):
    def __init__(self, path, column):
        super().__init__(f"{path}: missing required column {column!r}")
        self.column = column


@dataclass(frozen=True)
class SeriesSpec:
    label: str
    metrics: tuple[str, ...]


@dataclass(frozen=True)
class PlotSpec:
    title: str
    output: str
    series: tuple[SeriesSpec, ...]
    kind: str = "curves"
    aggregation: str = "median_iqr"
    normalise: bool = False
    value_column: str = "mean_return"
    bar_epoch: int | None = None  # bars: which epoch to summarise; None = last
    xlabel: str = "epoch"
    ylabel: str = ""

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SpecError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.aggregation not in AGGREGATIONS:
            raise SpecError(f"aggregation must be one of {AGGREGATIONS}")
        if self.value_column not in VALUE_COLUMNS:
            raise SpecError(f"value_column must be one of {VALUE_COLUMNS}")
        if not self.series:
            raise SpecError("a plot needs at least one series")
        suffix = Path(self.output).suffix.lower()
        if suffix not in (".png", ".svg"):
            raise SpecError(f"output must be a .png or .svg path, got {self.output!r}")


def parse_plot_spec(path: str | Path) -> PlotSpec:
    """Read a plot spec file.

    Format (INI): a ``[plot]`` section with ``title``, ``output``, ``kind``,
    ``aggregation``, ``normalise``, ``value_column``, ``bar_epoch``; one
    ``[series.<name>]`` section per plotted series carrying ``label`` and a
    whitespace-separated ``metrics`` list of CSV paths, resolved relative to
    the spec file.
    """
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        parser.read_string(path.read_text())
    except (OSError, configparser.Error) as exc:
        raise SpecError(f"cannot read plot spec {path}: {exc}") from exc
    if not parser.has_section("plot"):
        raise SpecError("plot spec needs a [plot] section")
    plot = parser["plot"]
    series = []
    for section in parser.sections():
        if not section.startswith("series."):
            continue
        sec = parser[section]
        if "metrics" not in sec:
            raise SpecError(f"[{section}] is missing the metrics key")
        metrics = tuple(str((path.parent / p).resolve()) for p in sec["metrics"].split())
        series.append(SeriesSpec(sec.get("label", section.split(".", 1)[1]), metrics))
    bar_epoch = plot.get("bar_epoch")
    return PlotSpec(
        title=plot.get("title", path.stem),
        output=str((path.parent / plot.get("output", path.stem + ".png")).resolve()),
        series=tuple(series),
        kind=plot.get("kind", "curves"),
        aggregation=plot.get("aggregation", "median_iqr"),
        normalise=plot.getboolean("normalise", fallback=False),
        value_column=plot.get("value_column", "mean_return"),
        bar_epoch=int(bar_epoch) if bar_epoch is not None else None,
        xlabel=plot.get("xlabel", "epoch"),
        ylabel=plot.get("ylabel", ""),
    )


# -- metrics loading ---------------------------------------------------------------


def load_metrics(path: str | Path) -> dict[str, np.ndarray]:
    """Columns of one harness metrics CSV, validated against the schema."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise MissingColumnError(path, CSV_COLUMNS[0])
    header = lines[0].split(",")
    for column in CSV_COLUMNS:
        if column not in header:
            raise MissingColumnError(path, column)
    idx = {name: header.index(name) for name in CSV_COLUMNS}
    rows = [line.split(",") for line in lines[1:] if line.strip()]
    out: dict[str, np.ndarray] = {}
    for name in ("seed", "epoch", "agent", "task"):
        out[name] = np.array([int(r[idx[name]]) for r in rows])
    for name in ("mean_return", "disagreement"):
        out[name] = np.array([float(r[idx[name]]) for r in rows])
    return out


@dataclass
class SeriesData:
    """Aggregate of one series: per-epoch centre line and band edges."""

    label: str
    epochs: np.ndarray
    centre: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


def aggregate_series(spec: PlotSpec, series: SeriesSpec) -> SeriesData | None:
    """Pool a series' CSVs and aggregate its value column per epoch.

    Returns None (with a warning) when the series has no rows.
    """
    epochs_all = []
    values_all = []
    for path in series.metrics:
        cols = load_metrics(path)
        epochs_all.append(cols["epoch"])
        values_all.append(cols[spec.value_column])
    epochs = np.concatenate(epochs_all) if epochs_all else np.array([], dtype=int)
    values = np.concatenate(values_all) if values_all else np.array([])
    if values.size == 0:
        warnings.warn(f"series {series.label!r} is empty; skipped", stacklevel=2)
        return None
    uniq = np.unique(epochs)
    centre = np.empty(uniq.size)
    lo = np.empty(uniq.size)
    hi = np.empty(uniq.size)
    for i, e in enumerate(uniq):
        group = values[epochs == e]
        if spec.aggregation == "median_iqr":
            centre[i] = np.median(group)
            lo[i] = np.quantile(group, 0.25)
            hi[i] = np.quantile(group, 0.75)
        else:
            centre[i] = group.mean()
            err = group.std(ddof=1) / np.sqrt(group.size) if group.size > 1 else 0.0
            lo[i] = centre[i] - err
            hi[i] = centre[i] + err
    return SeriesData(series.label, uniq, centre, lo, hi)


def _normalise(series_data: list[SeriesData]) -> list[SeriesData]:
    """Scale every series by the maximum centre value over all of them."""
    peak = max(float(s.centre.max()) for s in series_data)
    if peak == 0.0:
        return series_data
    return [
        SeriesData(s.label, s.epochs, s.centre / peak, s.lo / peak, s.hi / peak)
        for s in series_data
    ]


def compute_plot_data(spec: PlotSpec) -> list[SeriesData]:
    """Everything render() draws, exposed for independent verification."""
    data = [d for d in (aggregate_series(spec, s) for s in spec.series) if d is not None]
    if spec.normalise and data:
        data = _normalise(data)
    if spec.kind == "bars":
        reduced = []
        for s in data:
            epoch = spec.bar_epoch if spec.bar_epoch is not None else int(s.epochs.max())
            mask = s.epochs == epoch
            if not mask.any():
                warnings.warn(f"series {s.label!r} has no epoch {epoch}; skipped", stacklevel=2)
                continue
            reduced.append(
                SeriesData(s.label, s.epochs[mask], s.centre[mask], s.lo[mask], s.hi[mask])
            )
        data = reduced
    return data


def render(spec: PlotSpec) -> Path:
    """Render one figure to spec.output; returns the written path."""
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "diffrl-plots"  # reproducible element ids
    import matplotlib.pyplot as plt

    data = compute_plot_data(spec)
    fig, ax = plt.subplots(figsize=(7.0, 4.5), dpi=120)
    if spec.kind == "curves":
        for s in data:
            ax.plot(s.epochs, s.centre, label=s.label, linewidth=1.6)
            ax.fill_between(s.epochs, s.lo, s.hi, alpha=0.25, linewidth=0)
        ax.set_xlabel(spec.xlabel)
    else:
        positions = np.arange(len(data))
        heights = [float(s.centre[0]) for s in data]
        errors = [
            [float(s.centre[0] - s.lo[0]) for s in data],
            [float(s.hi[0] - s.centre[0]) for s in data],
        ]
        ax.bar(positions, heights, yerr=errors, capsize=4, tick_label=[s.label for s in data])
    ax.set_ylabel(spec.ylabel or spec.value_column)
    ax.set_title(spec.title)
    if spec.kind == "curves" and data:
        ax.legend()
    ax.grid(alpha=0.3)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata=_stable_metadata(out.suffix))
    plt.close(fig)
    return out


def _stable_metadata(suffix: str) -> dict:
    # strip creation timestamps so identical inputs give identical bytes
    if suffix == ".svg":
        return {"Date": None}
    return {"Software": "diffrl-plots"}
