"""Loss curves of pretraining runs, rendered to SVG with matplotlib."""
from pathlib import Path

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure
from pandas import DataFrame

from ..exceptions import MetricsFormatError
from ..helpers import atomic_write_bytes
from ..training.runlog import COLUMNS


LOSS_LIMITS = (-1.0, 0.0)
FIGSIZE = (7, 6)


def read_metrics_csv(path: str | Path) -> DataFrame:
    """Read and validate a metrics CSV.

    Raises:
        FileNotFoundError: If the file does not exist.
        MetricsFormatError: If the file is empty, lacks a column, or a row does
            not parse. The message names the line.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Metrics file not found: {path}")
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError as e:
        raise MetricsFormatError(f"{path}: empty file") from e
    except pd.errors.ParserError as e:
        raise MetricsFormatError(f"{path}: {e}") from e

    missing = [col for col in COLUMNS if col not in df.columns]
    if missing:
        raise MetricsFormatError(f"{path}: line 1: missing column(s) {', '.join(missing)}")
    if not len(df):
        raise MetricsFormatError(f"{path}: no rows")

    for col in ("epoch", "step", "value"):
        numeric = pd.to_numeric(df[col], errors="coerce")
        bad = np.flatnonzero(numeric.isna().to_numpy())
        if len(bad):
            # +2 for the header and 1-based line numbers
            raise MetricsFormatError(
                f"{path}: line {bad[0] + 2}: {col} is not a number ({df[col].iloc[bad[0]]!r})"
            )
        df[col] = numeric
    df["lr"] = pd.to_numeric(df["lr"], errors="coerce")
    return df


def _run_names(paths: list[Path]) -> list[str]:
    names = []
    for path in paths:
        name = path.parent.name if path.stem == "metrics" and path.parent.name else path.stem
        candidate, i = name, 1
        while candidate in names:
            i += 1
            candidate = f"{name}-{i}"
        names.append(candidate)
    return names


def merge_runs(paths: list[str | Path]) -> DataFrame:
    """All rows of all runs in one tidy frame with a 'run' column."""
    paths = [Path(path) for path in paths]
    frames = [
        read_metrics_csv(path).assign(run=name)
        for path, name in zip(paths, _run_names(paths))
    ]
    return pd.concat(frames, ignore_index=True)[["run", *COLUMNS]]


def _fractional_epoch(rows: DataFrame) -> pd.Series:
    """epoch + k / n for the k-th of n logged steps of the epoch, k = 1..n."""
    rank = rows.groupby("epoch").cumcount() + 1
    count = rows.groupby("epoch")["epoch"].transform("size")
    return rows["epoch"] + rank / count


def plot_curves(merged: DataFrame, split: str = "train") -> Figure:
    """Loss (clamped to [-1, 0]) and representation_std against epoch, one line per run."""
    has_std = (merged["metric"] == "representation_std").any()
    fig = Figure(figsize=FIGSIZE)
    axes = fig.subplots(2 if has_std else 1, 1, sharex=True, squeeze=False)[:, 0]

    for run, df in merged.loc[merged["split"] == split].groupby("run", sort=False):
        for ax, metric in zip(axes, ("loss", "representation_std")):
            rows = df.loc[df["metric"] == metric].sort_values(["epoch", "step"])
            if len(rows):
                ax.plot(_fractional_epoch(rows), rows["value"], label=run)

    axes[0].set_ylim(*LOSS_LIMITS)
    axes[0].set_ylabel("symmetric loss")
    axes[0].set_title("Symmetric cosine similarity loss during self-supervised training")
    axes[0].legend(loc="upper right")
    if has_std:
        axes[1].set_ylabel("representation std")
        axes[1].set_ylim(bottom=0)
    axes[-1].set_xlabel("epoch")
    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    return fig


def write_curves(paths: list[str | Path], out: str | Path) -> tuple[Path, Path]:
    """Write the SVG chart to 'out' and the merged CSV next to it.

    Returns:
        The paths of the SVG and the merged CSV.
    """
    if not paths:
        raise MetricsFormatError("No metrics files given.")
    out = Path(out)
    if out.suffix != ".svg":
        out = out.with_suffix(".svg")
    merged = merge_runs(paths)
    fig = plot_curves(merged)

    out.parent.mkdir(parents=True, exist_ok=True)
    # fixed ids and no date, so the same input gives the same file
    with matplotlib.rc_context({"svg.hashsalt": "ssl-lab", "svg.fonttype": "none"}):
        fig.savefig(out, format="svg", metadata={"Date": None})

    csv_path = out.with_suffix(".csv")
    atomic_write_bytes(
        csv_path, merged.to_csv(index=False, lineterminator="\n").encode("utf-8")
    )
    return out, csv_path
