"""The siamese model: backbone f, projection head p and prediction head h.

For two views x1, x2 of the same images:

    z1 = p(f(x1)),  z2 = p(f(x2)),  p1 = h(z1),  p2 = h(z2)

z1 and z2 are returned detached (stop-gradient), so the loss only trains through
the prediction branch of each view.
"""
import numpy as np

from ..backbones.build import BackboneModel, build_backbone
from ..backbones.config import BackboneConfig
from ..exceptions import ConfigError, ShapeError
from ..nn.module import Module
from ..tensor.creation import make_rng
from ..tensor.tensor import Tensor, as_tensor
from .heads import PredictionHead, ProjectionHead


class SiameseModel(Module):
    """Backbone plus projection and prediction heads.

    Args:
        backbone: The feature extractor f.
        projection_dim: Output size d of the projection head. Must be divisible by 4.
        rng: Generator for the head weights.
        stop_gradient: Detach z1 and z2. Turning it off lets the representation
            collapse, which is what the collapse-contrast experiment shows.
        projection_output_bn: Batch norm after the last projection layer.
    """

    checkpoint_kind = "siamese"

    def __init__(
        self,
        backbone: BackboneModel,
        projection_dim: int = 256,
        rng: np.random.Generator | None = None,
        stop_gradient: bool = True,
        projection_output_bn: bool = False,
    ) -> None:
        super().__init__()
        rng = rng or make_rng(0)
        if projection_dim % 4:
            raise ConfigError(
                f"projection_dim must be divisible by 4. Got {projection_dim}"
            )
        self.backbone = backbone
        self.projection = ProjectionHead(
            backbone.output_dim, projection_dim, rng, output_bn=projection_output_bn
        )
        self.prediction = PredictionHead(projection_dim, rng)
        self.stop_gradient = stop_gradient
        self.projection_dim = projection_dim

    @property
    def backbone_config(self) -> BackboneConfig:
        return self.backbone.config

    def checkpoint_meta(self) -> dict:
        return {
            "projection_dim": self.projection_dim,
            "stop_gradient": self.stop_gradient,
            "projection_output_bn": self.projection.output_bn,
        }

    def encode(self, x: Tensor) -> Tensor:
        """z = p(f(x))"""
        return self.projection(self.backbone(x))

    def forward(self, x1: Tensor, x2: Tensor) -> tuple[Tensor, Tensor, Tensor, Tensor]:
        return siamese_forward(self, x1, x2)


def siamese_forward(
    model: SiameseModel, x1: Tensor, x2: Tensor
) -> tuple[Tensor, Tensor, Tensor, Tensor]:
    """Return (p1, p2, z1, z2), all [N, d].

    The backbone and projection run once per view; z is reused as input of the
    prediction head. z1 and z2 are detached when the model has stop_gradient.

    Raises:
        ShapeError: If the views do not have the same shape.
    """
    x1, x2 = as_tensor(x1), as_tensor(x2)
    if x1.shape != x2.shape:
        raise ShapeError(f"Views must have the same shape. Got {x1.shape}, {x2.shape}")
    z1 = model.encode(x1)
    z2 = model.encode(x2)
    p1 = model.prediction(z1)
    p2 = model.prediction(z2)
    if model.stop_gradient:
        z1, z2 = z1.detach(), z2.detach()
    return p1, p2, z1, z2


def build_siamese(
    config: BackboneConfig,
    projection_dim: int = 256,
    seed: int = 0,
    stop_gradient: bool = True,
    projection_output_bn: bool = False,
) -> SiameseModel:
    """Backbone from 'config' plus heads, all initialized from 'seed'."""
    if projection_dim % 4:
        raise ConfigError(f"projection_dim must be divisible by 4. Got {projection_dim}")
    backbone = build_backbone(config, seed=seed)
    return SiameseModel(
        backbone,
        projection_dim,
        rng=make_rng(seed, 1),
        stop_gradient=stop_gradient,
        projection_output_bn=projection_output_bn,
    )
