"""Render comparison figures from simulation metrics CSVs.

Consumes the documented metrics schema (virtual_time, round,
test_accuracy, test_loss, mean_staleness, max_staleness,
corrections_applied) and never modifies its inputs.  Output is
deterministic for identical inputs: fixed figure geometry and no
embedded timestamps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

METRICS_COLUMNS = (
    "virtual_time",
    "round",
    "test_accuracy",
    "test_loss",
    "mean_staleness",
    "max_staleness",
    "corrections_applied",
)

X_AXES = ("virtual_time", "round")

MAX_POINTS_PER_CURVE = 2000


class SchemaError(ValueError):
    """A metrics CSV does not match the documented column layout."""


@dataclass(frozen=True)
class PlotSpec:
    inputs: tuple[tuple[str, str], ...]  # (csv path, legend label)
    out_path: str
    x_axis: str = "virtual_time"
    target_accuracy: float | None = None
    title: str = ""
    figsize: tuple[float, float] = field(default=(8.0, 5.0))
    dpi: int = 100

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("need at least one input CSV")
        labels = [label for _, label in self.inputs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"labels must be unique, got {labels}")
        if self.x_axis not in X_AXES:
            raise ValueError(f"x_axis must be one of {X_AXES}, got {self.x_axis!r}")


def read_metrics(path: str) -> dict[str, np.ndarray]:
    """Load one metrics CSV as column arrays, validating the schema."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        for col in METRICS_COLUMNS:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        for col in header:
            if col not in METRICS_COLUMNS:
                raise SchemaError(f"{path}: unexpected column {col!r}")
        idx = {col: header.index(col) for col in METRICS_COLUMNS}
        rows = list(reader)
    out = {}
    for col in METRICS_COLUMNS:
        try:
            out[col] = np.array([float(r[idx[col]]) for r in rows])
        except (ValueError, IndexError) as exc:
            raise SchemaError(f"{path}: column {col!r}: {exc}") from None
    return out


def downsample(values: np.ndarray, limit: int = MAX_POINTS_PER_CURVE) -> np.ndarray:
    """Uniform index striding down to at most ``limit`` points."""
    n = values.shape[0]
    if n <= limit:
        return values
    stride = math.ceil(n / limit)
    return values[::stride]


def build_figure(spec: PlotSpec) -> plt.Figure:
    fig, ax = plt.subplots(figsize=spec.figsize, dpi=spec.dpi)
    for path, label in spec.inputs:
        cols = read_metrics(path)
        x = downsample(cols[spec.x_axis])
        y = downsample(cols["test_accuracy"])
        ax.plot(x, y, label=label, linewidth=1.5)
    if spec.target_accuracy is not None:
        ax.axhline(spec.target_accuracy, color="gray", linestyle="--", linewidth=1.0,
                   label=f"target {spec.target_accuracy:g}")
    ax.set_xlabel("virtual time (s)" if spec.x_axis == "virtual_time" else "round")
    ax.set_ylabel("test accuracy")
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    return fig


def plot_curves(spec: PlotSpec) -> str:
    """Render the comparison figure and return the output path."""
    fig = build_figure(spec)
    try:
        # pinned metadata keeps repeated renders byte-identical
        if spec.out_path.endswith(".svg"):
            fig.savefig(spec.out_path, metadata={"Date": None})
        elif spec.out_path.endswith(".png"):
            fig.savefig(spec.out_path, metadata={"Software": "aflplot"})
        else:
            fig.savefig(spec.out_path)
    finally:
        plt.close(fig)
    return spec.out_path


def time_to_target_seconds(cols: dict[str, np.ndarray], target: float) -> float | None:
    hits = np.nonzero(cols["test_accuracy"] >= target)[0]
    return float(cols["virtual_time"][hits[0]]) if hits.size else None


def build_target_bars(specs: list[tuple[str, str]], target: float, out_path: str,
                      figsize: tuple[float, float] = (8.0, 5.0), dpi: int = 100) -> str:
    """Bar chart of time-to-target per run; failed runs get a hatched bar."""
    labels, values, failed = [], [], []
    for path, label in specs:
        cols = read_metrics(path)
        t = time_to_target_seconds(cols, target)
        labels.append(label)
        if t is None:
            failed.append(label)
            values.append(float(np.max(cols["virtual_time"])))
        else:
            values.append(t)
    fig, ax = plt.subplots(figsize=figsize, dpi=dpi)
    bars = ax.bar(labels, values, color="steelblue")
    for bar, label in zip(bars, labels):
        if label in failed:
            bar.set_color("lightgray")
            bar.set_hatch("//")
    ax.set_ylabel(f"virtual seconds to accuracy {target:g}")
    if failed:
        ax.set_title(f"hatched = target never reached: {', '.join(failed)}")
    try:
        fig.savefig(out_path, metadata={"Software": "aflplot"} if out_path.endswith(".png") else None)
    finally:
        plt.close(fig)
    return out_path
