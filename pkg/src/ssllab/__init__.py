from .backbones.build import backbone_forward, build_backbone, param_count
from .backbones.config import BackboneConfig
from .data.augment import AugmentationPolicy, make_views
from .data.binary import load_cifar10, load_stl10, write_cifar10, write_stl10
from .data.loader import labeled_batch, view_batch
from .data.source import DatasetSource, Normalization
from .data.synthetic import synth_gaussian, synth_shapes
from .exceptions import (
    CheckpointFormatError,
    CollapseError,
    ConfigError,
    CorruptCheckpointError,
    CorruptRecordError,
    DatasetFormatError,
    DegenerateBatchError,
    DegenerateVectorError,
    GraphConsumedError,
    IncompatibleCheckpointError,
    IncompleteBackwardError,
    LabelError,
    MetricsFormatError,
    NoComputableAUCError,
    ScheduleExhaustedError,
    ShapeError,
    UndefinedInputError,
    UnlabeledSplitError,
)
from .nn.layers import (
    GELU,
    BatchNorm,
    Conv2d,
    LayerNorm,
    Linear,
    MultiheadAttention,
    Pool2d,
    ReLU,
)
from .nn.module import Module, Parameter, Sequential
from .parallel.parallel import Parallel
from .plotting.curves import merge_runs, plot_curves, read_metrics_csv, write_curves
from .simsiam.heads import PredictionHead, ProjectionHead
from .simsiam.losses import (
    negative_cosine_similarity,
    representation_std,
    symmetric_loss,
)
from .simsiam.siamese import SiameseModel, build_siamese, siamese_forward
from .tensor.creation import make_rng, tensor_create
from .tensor.gradcheck import grad_check
from .tensor.tensor import Tensor, no_grad
from .training.checkpoint import (
    load_backbone_weights,
    load_checkpoint,
    read_checkpoint,
    save_checkpoint,
)
from .training.classifier import Classifier
from .training.config import DataConfig, RunConfig, TrainConfig
from .training.losses import binary_cross_entropy, cross_entropy
from .training.metrics import UNANNOTATED, accuracy, auc, macro_micro_metrics
from .training.optim import Adam, OptimizerState, Schedule, adam_step, cosine_lr, pretrain_lr
from .training.runlog import RunLog
from .training.trainer import (
    MONITOR_SPLIT,
    TrainResult,
    evaluate,
    load_split,
    predict,
    train_pretrain,
    train_supervised,
)
