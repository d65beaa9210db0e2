"""Comparison figures for federated-simulation metrics CSVs."""

from .plotting import (
    METRICS_COLUMNS,
    PlotSpec,
    SchemaError,
    build_figure,
    build_target_bars,
    downsample,
    plot_curves,
    read_metrics,
)

__version__ = "0.1.0"

__all__ = [
    "METRICS_COLUMNS",
    "PlotSpec",
    "SchemaError",
    "build_figure",
    "build_target_bars",
    "downsample",
    "plot_curves",
    "read_metrics",
]
