"""Backbone plus linear head, for fine-tuning and linear probes."""
import numpy as np

from ..backbones.build import BackboneModel
from ..exceptions import ConfigError
from ..nn.layers import Linear
from ..nn.module import Module, Parameter
from ..tensor.creation import make_rng
from ..tensor.tensor import Tensor, no_grad


class Classifier(Module):
    """A linear classifier on top of a backbone.

    Args:
        backbone: The feature extractor, randomly initialized or restored from a
            checkpoint.
        num_classes: Number of classes k (single-label) or attributes m (multi-label).
        rng: Generator of the head weights.
        frozen_backbone: Linear probe. The backbone stays in eval mode, runs without
            recording a graph, and only the head is trained.
        task: "single" or "multilabel". Decides the loss and the metrics.
    """

    checkpoint_kind = "classifier"

    def __init__(
        self,
        backbone: BackboneModel,
        num_classes: int,
        rng: np.random.Generator | None = None,
        frozen_backbone: bool = False,
        task: str = "single",
    ) -> None:
        super().__init__()
        if task not in ("single", "multilabel"):
            raise ConfigError(f"task must be 'single' or 'multilabel'. Got {task!r}")
        self.backbone = backbone
        self.head = Linear(backbone.output_dim, num_classes, rng=rng or make_rng(0, 2))
        self.num_classes = num_classes
        self.frozen_backbone = frozen_backbone
        self.task = task

    @property
    def backbone_config(self):
        return self.backbone.config

    def checkpoint_meta(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "frozen_backbone": self.frozen_backbone,
            "task": self.task,
        }

    def train(self, mode: bool = True) -> "Classifier":
        super().train(mode)
        if self.frozen_backbone:
            self.backbone.train(False)
        return self

    def trainable_parameters(self) -> list[tuple[str, Parameter]]:
        if self.frozen_backbone:
            return list(self.head.named_parameters("head."))
        return list(self.named_parameters())

    def forward(self, images: Tensor) -> Tensor:
        if self.frozen_backbone:
            with no_grad():
                features = self.backbone(images)
            return self.head(features.detach())
        return self.head(self.backbone(images))
