"""The training regimes: siamese pretraining, fine-tuning and linear probes."""
import copy
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data.augment import AugmentationPolicy
from ..data.binary import load_cifar10, load_stl10
from ..data.loader import labeled_batch, view_batch
from ..data.source import DatasetSource, Normalization
from ..data.synthetic import synth_gaussian, synth_shapes
from ..exceptions import (
    CollapseError,
    ConfigError,
    DegenerateVectorError,
    LabelError,
)
from ..parallel.parallel import Parallel
from ..simsiam.losses import representation_std, symmetric_loss
from ..simsiam.siamese import SiameseModel, siamese_forward
from ..tensor.ops import sigmoid
from ..tensor.tensor import Tensor, no_grad
from .checkpoint import save_checkpoint
from .classifier import Classifier
from .config import DataConfig, TrainConfig
from .losses import binary_cross_entropy, cross_entropy
from .metrics import accuracy, macro_micro_metrics
from .optim import Adam, Schedule, pretrain_lr
from .runlog import RunLog


FINAL_CHECKPOINT = "final.ckpt"
BEST_CHECKPOINT = "best.ckpt"
MONITOR_SPLIT = "monitor"

# test splits of the synthetic datasets are drawn with this offset to the seed
SYNTHETIC_TEST_SEED_OFFSET = 7919


@dataclass
class TrainResult:
    """What a training run returns.

    'model' holds the final weights, or the best-by-validation weights for
    supervised runs.
    """

    model: SiameseModel | Classifier
    runlog: RunLog
    final_checkpoint: Path | None = None
    best_checkpoint: Path | None = None
    best_metric: float | None = None
    checkpoint_hashes: dict[str, str] = field(default_factory=dict)


def load_split(
    config: DataConfig,
    split: str,
    seed: int = 0,
    normalization: Normalization | None = None,
) -> DatasetSource:
    """Open one split ('train', 'test' or 'unlabeled') of the configured dataset."""
    if config.dataset == "cifar10":
        if split == "unlabeled":
            split = "train"
        return load_cifar10(config.path, split, normalization=normalization, seed=seed)
    if config.dataset == "stl10":
        return load_stl10(config.path, split, normalization=normalization, seed=seed)

    data_seed = seed + SYNTHETIC_TEST_SEED_OFFSET if split == "test" else seed
    num = config.test_items if split == "test" else config.num_items
    if config.dataset == "synth_gaussian":
        source = synth_gaussian(num, config.image_size, seed=data_seed)
    else:
        source = synth_shapes(
            num,
            config.image_size,
            classes=config.classes,
            multilabel=config.multilabel,
            seed=data_seed,
        )
    if normalization is not None:
        source = source.with_normalization(normalization)
    return source


def _micro_batches(source: DatasetSource, batch_size: int, epoch: int) -> list[np.ndarray]:
    """Shuffled micro-batches. A trailing batch of one image is dropped, since batch
    norm needs two."""
    batches = list(source.batches(batch_size, epoch=epoch, shuffle=True))
    if len(batches) > 1 and len(batches[-1]) < 2:
        batches = batches[:-1]
    return batches


def _count_steps(n_micro: int, accumulation: int) -> int:
    return math.ceil(n_micro / accumulation)


def _rescale_grads(params: dict, factor: float) -> None:
    for param in params.values():
        if param.grad is not None:
            param.grad = param.grad * param.grad.dtype.type(factor)


def _check_micro_batches(source: DatasetSource, cfg: TrainConfig) -> int:
    if source.num_items < 2:
        raise ConfigError(f"Training needs at least two images. Got {source.num_items}")
    n_micro = len(_micro_batches(source, cfg.batch_size, 0))
    return n_micro * cfg.epochs


def _monitor_std(model: SiameseModel, images: np.ndarray) -> float:
    # batch norm uses its running statistics here
    model.eval()
    try:
        with no_grad():
            z = model.encode(Tensor(images))
        return representation_std(z)
    finally:
        model.train()


def train_pretrain(
    model: SiameseModel,
    data: DatasetSource,
    cfg: TrainConfig,
    policy: AugmentationPolicy | None = None,
    out_dir: str | Path | None = None,
    runlog: RunLog | None = None,
    threads: int | None = None,
    verbose: bool = False,
) -> TrainResult:
    """Self-supervised training of the siamese model with the symmetric loss.

    Each micro-batch gets two views per image. Gradients of cfg.accumulation
    micro-batches are summed before one Adam step with the cosine scheduled
    learning rate. Every applied step logs loss, lr and representation_std.
    At the end of each epoch, representation_std is also measured in eval mode
    on a fixed batch of unaugmented images and logged with split "monitor".

    Args:
        model: The siamese model. Trained in place.
        data: Images to pretrain on. Labels are ignored.
        cfg: Training config, with regime 'pretrain'.
        policy: Augmentation policy. Defaults to AugmentationPolicy().
        out_dir: Folder for final.ckpt and best.ckpt (lowest epoch mean loss).
            Nothing is written if None.
        runlog: Log to append to. A new one is made if None.
        threads: Workers of the view generation.
        verbose: Print progress.

    Raises:
        CollapseError: If a representation collapses to zero norm.
    """
    if cfg.regime != "pretrain":
        raise ConfigError(f"train_pretrain needs regime 'pretrain'. Got {cfg.regime!r}")
    policy = policy or AugmentationPolicy()
    runlog = runlog or RunLog(verbose=verbose)
    parallel = Parallel(threads)

    if cfg.lr is not None:
        base_lr = cfg.lr
        runlog.note(f"lr = {base_lr} (fixed)")
    else:
        base_lr = pretrain_lr(cfg.base_lr, cfg.effective_batch)
        runlog.note(
            f"lr = {cfg.base_lr} x {cfg.batch_size} x {cfg.accumulation} / 256 = {base_lr}"
        )

    total_micro = _check_micro_batches(data, cfg)
    schedule = Schedule(base_lr, _count_steps(total_micro, cfg.accumulation), "cosine")
    params = dict(model.named_parameters())
    optimizer = Adam(
        params.items(),
        weight_decay=cfg.weight_decay,
        decoupled=cfg.decoupled_weight_decay,
    )
    runlog.note(
        f"pretraining on {data.name}: {data.num_items} images, {cfg.epochs} epochs, "
        f"{schedule.total_steps} optimizer steps, stop_gradient={model.stop_gradient}"
    )

    result = TrainResult(model, runlog)
    best_loss = np.inf
    window_losses: list[float] = []
    window_stds: list[float] = []
    monitor_images = data.get(slice(0, min(cfg.batch_size, data.num_items)))
    micro_count = 0
    model.train()
    optimizer.zero_grad()

    for epoch in range(cfg.epochs):
        epoch_losses = []
        for indices in _micro_batches(data, cfg.batch_size, epoch):
            x1, x2 = view_batch(data, indices, policy, epoch=epoch, parallel=parallel)
            try:
                p1, p2, z1, z2 = siamese_forward(model, Tensor(x1), Tensor(x2))
                loss = symmetric_loss(p1, p2, z1, z2)
                std = representation_std(z1)
            except DegenerateVectorError as e:
                raise CollapseError(epoch, optimizer.steps, str(e)) from e

            (loss * (1.0 / cfg.accumulation)).backward()
            window_losses.append(loss.item())
            window_stds.append(std)
            epoch_losses.append(loss.item())
            micro_count += 1

            last_micro = micro_count == total_micro
            if len(window_losses) == cfg.accumulation or last_micro:
                if len(window_losses) < cfg.accumulation:
                    warnings.warn(
                        f"Final accumulation window has {len(window_losses)} of "
                        f"{cfg.accumulation} micro-batches. Gradients are rescaled."
                    )
                    _rescale_grads(params, cfg.accumulation / len(window_losses))
                lr = schedule.lr(optimizer.steps)
                optimizer.step(lr)
                optimizer.zero_grad()
                runlog.record(
                    epoch,
                    optimizer.steps,
                    "train",
                    {
                        "loss": float(np.mean(window_losses)),
                        "representation_std": float(np.mean(window_stds)),
                    },
                    lr=lr,
                )
                window_losses, window_stds = [], []

        try:
            monitor_std = _monitor_std(model, monitor_images)
        except DegenerateVectorError as e:
            raise CollapseError(epoch, optimizer.steps, str(e)) from e
        runlog.record(
            epoch, optimizer.steps, MONITOR_SPLIT, {"representation_std": monitor_std}
        )

        epoch_mean = float(np.mean(epoch_losses))
        if verbose:
            print(
                f"epoch {epoch}: mean loss {epoch_mean:.4f}, "
                f"representation_std {monitor_std:.4f}"
            )
        if out_dir is not None and epoch_mean < best_loss:
            best_loss = epoch_mean
            path = Path(out_dir) / BEST_CHECKPOINT
            result.checkpoint_hashes[BEST_CHECKPOINT] = save_checkpoint(
                model,
                path,
                data.normalization,
                meta={"epoch": epoch, "loss": epoch_mean},
            )
            result.best_checkpoint = path
            result.best_metric = epoch_mean

    if out_dir is not None:
        path = Path(out_dir) / FINAL_CHECKPOINT
        result.checkpoint_hashes[FINAL_CHECKPOINT] = save_checkpoint(
            model, path, data.normalization, meta={"epoch": cfg.epochs - 1}
        )
        result.final_checkpoint = path
    return result


def _forward_eval(model: Classifier, images: np.ndarray) -> np.ndarray:
    # no_grad is thread-local, so it is set inside the worker
    with no_grad():
        return model(Tensor(images)).data


def predict(
    model: Classifier,
    source: DatasetSource,
    batch_size: int = 256,
    threads: int | None = None,
) -> np.ndarray:
    """Logits of every image of 'source', in order.

    Batches are sharded over threads. Eval mode has no side effects, so the
    result does not depend on the number of threads.
    """
    model.eval()
    batches = [
        source.get(indices)
        for indices in source.batches(batch_size, shuffle=False)
    ]
    logits = Parallel(threads).starmap(_forward_eval, [(model, b) for b in batches])
    return np.concatenate(logits)


def evaluate(
    model: Classifier,
    source: DatasetSource,
    task: str | None = None,
    batch_size: int = 256,
    threads: int | None = None,
) -> dict[str, float]:
    """Accuracy (single-label) or macro/micro accuracy and AUC (multi-label).

    Raises:
        UnlabeledSplitError: If 'source' has no labels.
    """
    labels = source.labels
    task = task or model.task
    logits = predict(model, source, batch_size, threads)
    if task == "single":
        return {"accuracy": accuracy(logits.argmax(axis=1), labels)}
    scores = sigmoid(logits.astype(np.float64))
    return macro_micro_metrics(scores, labels)


def _check_labels(model: Classifier, source: DatasetSource) -> None:
    labels = source.labels
    if model.task == "single":
        if labels.ndim != 1 or labels.min() < 0 or labels.max() >= model.num_classes:
            raise LabelError(
                f"{source.name} needs class indices in [0, {model.num_classes}) "
                f"for a single-label classifier."
            )
    elif labels.ndim != 2 or labels.shape[1] != model.num_classes:
        raise LabelError(
            f"{source.name} needs [N, {model.num_classes}] attribute bits "
            f"for a multi-label classifier. Got labels of shape {labels.shape}"
        )


def selection_metric(task: str) -> str:
    return "accuracy" if task == "single" else "micro_auc"


def train_supervised(
    model: Classifier,
    data: DatasetSource,
    cfg: TrainConfig,
    val: DatasetSource | None = None,
    policy: AugmentationPolicy | None = None,
    out_dir: str | Path | None = None,
    runlog: RunLog | None = None,
    threads: int | None = None,
    seed: int = 0,
    verbose: bool = False,
) -> TrainResult:
    """Fine-tune all weights, or train a linear probe on a frozen backbone.

    The learning rate is flat (cfg.lr, else cfg.base_lr). After each epoch the
    validation metric (accuracy, or micro AUC for multi-label data) is logged, and
    the best epoch is kept: written to best.ckpt and returned as the model.

    Args:
        model: Classifier with a random or restored backbone. With regime 'probe'
            its backbone is frozen.
        data: Labeled training images.
        cfg: Training config, with regime 'finetune' or 'probe'.
        val: Validation images. Held out from 'data' (cfg.val_fraction, seeded) if
            None.
        policy: Augmentation of the training images, None for none.
        out_dir: Folder for best.ckpt and final.ckpt.
        runlog: Log to append to.
        threads: Workers of augmentation and evaluation.
        seed: Seed of the validation hold-out.
        verbose: Print progress.

    Raises:
        LabelError: If the labels do not fit the classifier.
    """
    if cfg.regime not in ("finetune", "probe"):
        raise ConfigError(f"train_supervised needs regime finetune or probe. Got {cfg.regime!r}")
    runlog = runlog or RunLog(verbose=verbose)
    parallel = Parallel(threads)
    model.frozen_backbone = cfg.regime == "probe"
    _check_labels(model, data)

    if val is None:
        data, val = data.split(cfg.val_fraction, seed=seed)
        runlog.note(
            f"validation split: {val.num_items} of {data.num_items + val.num_items} "
            f"images held out, seed {seed}"
        )

    lr = cfg.lr if cfg.lr is not None else cfg.base_lr
    runlog.note(f"lr = {lr} (flat, {cfg.regime})")
    loss_name = cfg.loss_for(model.task)
    loss_fn = binary_cross_entropy if loss_name == "binary-cross-entropy" else cross_entropy

    total_micro = _check_micro_batches(data, cfg)
    schedule = Schedule(lr, _count_steps(total_micro, cfg.accumulation), "constant")
    params = dict(model.trainable_parameters())
    optimizer = Adam(
        params.items(),
        weight_decay=cfg.weight_decay,
        decoupled=cfg.decoupled_weight_decay,
    )
    metric_name = selection_metric(model.task)

    result = TrainResult(model, runlog)
    best_state = None
    window_losses: list[float] = []
    micro_count = 0

    optimizer.zero_grad()
    for epoch in range(cfg.epochs):
        model.train()
        for indices in _micro_batches(data, cfg.batch_size, epoch):
            images, labels = labeled_batch(data, indices, policy, epoch, parallel)
            loss = loss_fn(model(Tensor(images)), labels)
            (loss * (1.0 / cfg.accumulation)).backward()
            window_losses.append(loss.item())
            micro_count += 1

            if len(window_losses) == cfg.accumulation or micro_count == total_micro:
                if len(window_losses) < cfg.accumulation:
                    _rescale_grads(params, cfg.accumulation / len(window_losses))
                step_lr = schedule.lr(optimizer.steps)
                optimizer.step(step_lr)
                optimizer.zero_grad()
                runlog.record(
                    epoch,
                    optimizer.steps,
                    "train",
                    {"loss": float(np.mean(window_losses))},
                    lr=step_lr,
                )
                window_losses = []

        metrics = evaluate(model, val, batch_size=cfg.eval_batch_size, threads=threads)
        runlog.record(epoch, optimizer.steps, "val", metrics)
        value = metrics[metric_name]
        if result.best_metric is None or value > result.best_metric:
            result.best_metric = value
            best_state = copy.deepcopy(model.state_dict())
            if out_dir is not None:
                path = Path(out_dir) / BEST_CHECKPOINT
                result.checkpoint_hashes[BEST_CHECKPOINT] = save_checkpoint(
                    model,
                    path,
                    data.normalization,
                    meta={"epoch": epoch, metric_name: value},
                )
                result.best_checkpoint = path

    if out_dir is not None:
        path = Path(out_dir) / FINAL_CHECKPOINT
        result.checkpoint_hashes[FINAL_CHECKPOINT] = save_checkpoint(
            model, path, data.normalization, meta={"epoch": cfg.epochs - 1}
        )
        result.final_checkpoint = path
    if best_state is not None:
        model.load_state_dict(best_state)
    return result
