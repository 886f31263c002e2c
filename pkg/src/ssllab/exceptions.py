"""Some small exception classes."""


class InvalidShapeError(ValueError):
    """A dimension is zero or negative."""

    def __init__(self, shape) -> None:
        self.shape = tuple(shape)

    def __str__(self):
        return f"All dimensions must be >= 1. Got shape {self.shape}"


class LengthError(ValueError):
    """Number of explicit values does not match the product of the shape."""

    def __init__(self, n_values: int, shape) -> None:
        self.n_values = n_values
        self.shape = tuple(shape)

    def __str__(self):
        return f"Got {self.n_values} values for shape {self.shape}"


class ShapeError(ValueError):
    """Operand shapes are incompatible for the operation."""


class RankError(ValueError):
    """Tensor has the wrong number of dimensions, e.g. non-scalar loss."""


class GraphConsumedError(RuntimeError):
    """backward was called on a graph that has already been consumed.

    Pass retain_graph=True to the first backward call to keep the graph alive.
    """


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class DegenerateBatchError(ValueError):
    """The batch is too small for a batch statistic (batch norm, std)."""


class DegenerateVectorError(ValueError):
    """A vector has (near) zero norm, so the cosine similarity is undefined."""

    def __init__(self, n_rows: int, min_norm: float) -> None:
        self.n_rows = n_rows
        self.min_norm = min_norm

    def __str__(self):
        return (
            f"{self.n_rows} row(s) with l2 norm below 1e-12 (smallest {self.min_norm:.3g}). "
            "The representation has collapsed to zero."
        )


class CollapseError(RuntimeError):
    """Training aborted because the representation collapsed."""

    def __init__(self, epoch: int, step: int, reason: str) -> None:
        self.epoch = epoch
        self.step = step
        self.reason = reason

    def __str__(self):
        return (
            f"Representation collapse at epoch {self.epoch}, step {self.step}: "
            f"{self.reason}"
        )


class DatasetFormatError(ValueError):
    """Binary dataset file does not have the expected size or layout."""


class CorruptRecordError(ValueError):
    """A record in a dataset file holds an impossible value."""


class UnlabeledSplitError(LookupError):
    """Labels were requested from a split that has none."""


class LabelError(ValueError):
    """Labels or targets are out of range or not binary."""


class ScheduleExhaustedError(IndexError):
    """Learning rate was requested past the final step of the schedule."""


class IncompleteBackwardError(RuntimeError):
    """An optimizer step was attempted while a parameter has no gradient."""

    def __init__(self, names: list[str]) -> None:
        self.names = names

    def __str__(self):
        shown = ", ".join(self.names[:5])
        more = f" and {len(self.names) - 5} more" if len(self.names) > 5 else ""
        return f"No gradient for parameter(s) {shown}{more}. Run backward first."


class IncompatibleCheckpointError(ValueError):
    """Checkpoint does not fit the requested model or config."""


class CheckpointFormatError(ValueError):
    """File is not a checkpoint (bad magic or unreadable header)."""


class CorruptCheckpointError(ValueError):
    """Checkpoint payload is truncated or the manifest does not cover it."""


class UndefinedInputError(ValueError):
    """The metric is undefined for the input, e.g. zero predictions."""


class NoComputableAUCError(ValueError):
    """No class has both positive and negative targets."""


class MetricsFormatError(ValueError):
    """A metrics CSV is empty, lacks columns or has unparsable rows."""
