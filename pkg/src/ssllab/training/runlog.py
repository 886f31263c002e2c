"""The metrics log of a run, kept as a DataFrame and flushed to CSV."""
from pathlib import Path

import numpy as np
import pandas as pd
from pandas import DataFrame

from ..helpers import atomic_write_bytes


COLUMNS = ["epoch", "step", "split", "metric", "value", "lr"]
METRICS_FILE = "metrics.csv"
NOTES_FILE = "notes.txt"


class RunLog:
    """Rows of (epoch, step, split, metric, value, lr) plus free-text notes.

    The notes record how the run was set up: the learning rate derivation, the
    validation split and the provenance of initial weights.

    Args:
        verbose: Print every note and every recorded row.

    Examples
    --------
    >>> runlog = RunLog()
    >>> runlog.record(epoch=0, step=1, split="train", metrics={"loss": -0.5}, lr=1e-3)
    >>> runlog.log
       epoch  step  split metric  value     lr
    0      0     1  train   loss   -0.5  0.001
    """

    def __init__(self, verbose: bool = False) -> None:
        self.log = DataFrame(columns=COLUMNS)
        self.notes: list[str] = []
        self.verbose = verbose

    def record(
        self,
        epoch: int,
        step: int,
        split: str,
        metrics: dict[str, float],
        lr: float | None = None,
    ) -> None:
        df = DataFrame(
            {
                "epoch": epoch,
                "step": step,
                "split": split,
                "metric": list(metrics),
                "value": [float(value) for value in metrics.values()],
                "lr": np.nan if lr is None else float(lr),
            }
        )
        if self.verbose:
            shown = ", ".join(f"{key}={value:.4f}" for key, value in metrics.items())
            print(f"epoch {epoch} step {step} {split}: {shown}")
        if not len(self.log):
            self.log = df
            return
        self.log = pd.concat([self.log, df], ignore_index=True)

    def note(self, text: str) -> None:
        if self.verbose:
            print(text)
        self.notes.append(text)

    def values(self, metric: str, split: str = "train") -> pd.Series:
        rows = self.log.loc[(self.log["metric"] == metric) & (self.log["split"] == split)]
        return rows["value"].reset_index(drop=True)

    def epoch_means(self, metric: str = "loss", split: str = "train") -> pd.Series:
        rows = self.log.loc[(self.log["metric"] == metric) & (self.log["split"] == split)]
        return rows.groupby("epoch")["value"].mean()

    def last(self, metric: str, split: str = "train") -> float:
        values = self.values(metric, split)
        if not len(values):
            raise KeyError(f"No '{metric}' values logged for split '{split}'")
        return float(values.iloc[-1])

    def flush(self, folder: str | Path) -> Path:
        """Write metrics.csv and notes.txt into 'folder', each file atomically."""
        folder = Path(folder)
        path = folder / METRICS_FILE
        csv = self.log[COLUMNS].to_csv(index=False, lineterminator="\n")
        atomic_write_bytes(path, csv.encode("utf-8"))
        atomic_write_bytes(folder / NOTES_FILE, "".join(f"{n}\n" for n in self.notes).encode())
        return path

    def __len__(self) -> int:
        return len(self.log)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(rows={len(self.log)}, notes={len(self.notes)})"
