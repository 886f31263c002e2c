"""Building and running backbones."""
from ..exceptions import ShapeError
from ..nn.module import Module
from ..tensor.creation import make_rng
from ..tensor.tensor import Tensor, as_tensor
from .config import BackboneConfig
from .resnet import ResNetSmall
from .transformer import PoolingVisionTransformer, VisionTransformer


BackboneModel = ResNetSmall | VisionTransformer | PoolingVisionTransformer

_FAMILY_CLASSES = {
    "resnet_small": ResNetSmall,
    "vit_tiny": VisionTransformer,
    "pit_tiny": PoolingVisionTransformer,
}


def build_backbone(config: BackboneConfig | dict, seed: int = 0) -> BackboneModel:
    """Build the feature extractor described by 'config', initialized from 'seed'.

    Args:
        config: A BackboneConfig or a dict of its fields.
        seed: Seed of the weight initialization.

    Returns:
        A module with 'config' and 'output_dim' attributes, mapping [N, C, H, W]
        images to [N, output_dim] features.

    Examples
    --------
    >>> model = build_backbone(BackboneConfig("resnet_small"))
    >>> model.output_dim
    512
    """
    if not isinstance(config, BackboneConfig):
        config = BackboneConfig.from_dict(config)
    rng = make_rng(seed)
    return _FAMILY_CLASSES[config.family](config, rng)


def backbone_forward(
    model: BackboneModel, images: Tensor, mode: str = "train"
) -> Tensor:
    """Run the backbone in train or eval mode.

    In eval mode the output is a pure function of the images. In train mode batch
    norm layers use batch statistics and update their running statistics.

    Raises:
        ShapeError: If the images do not have the configured (C, H, W).
    """
    images = as_tensor(images)
    if images.ndim != 4 or images.shape[1:] != model.config.input_size:
        c, h, w = model.config.input_size
        raise ShapeError(
            f"Backbone expects images of shape [N, {c}, {h}, {w}]. Got {images.shape}"
        )
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval'. Got {mode!r}")
    model.train(mode == "train")
    return model(images)


def param_count(model: Module) -> int:
    """Number of trainable values. Running statistics are not counted."""
    return model.num_parameters()
