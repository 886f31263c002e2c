"""Configuration of the feature extractors."""
from dataclasses import asdict, dataclass, fields

from ..exceptions import ConfigError


FAMILIES = ("resnet_small", "vit_tiny", "pit_tiny")

# PiT halves the token grid this many times.
PIT_POOLING_STAGES = 2


@dataclass
class BackboneConfig:
    """Sets the architecture of a backbone.

    Args:
        family: "resnet_small", "vit_tiny" or "pit_tiny".
        input_size: (C, H, W) of the images.
        embed_dim: Token width of the transformers. PiT doubles it at each pooling
            stage. Ignored by resnet_small.
        depth: Residual blocks per stage (resnet_small, 4 stages), encoder blocks
            (vit_tiny) or encoder blocks per stage (pit_tiny, 3 stages).
        heads: Attention heads. PiT doubles them at each pooling stage.
        patch_size: Side of the square patches. Defaults to 8 for images of 96 pixels
            and more, else 4 (64 tokens at 32x32).
        width_multiplier: Scales the resnet channel widths (64, 128, 256, 512).
        mlp_ratio: Hidden width of the transformer MLP relative to embed_dim.
        pool: "cls" to use the class token as output, "mean" to average the tokens.

    Raises:
        ConfigError: If the family is unknown, embed_dim is not divisible by heads, or
            the image size is not divisible by the patch size (times 4 for PiT).

    Examples
    --------
    >>> BackboneConfig("vit_tiny", input_size=(3, 32, 32)).num_tokens
    65
    """

    family: str = "resnet_small"
    input_size: tuple[int, int, int] = (3, 32, 32)
    embed_dim: int = 64
    depth: int = 2
    heads: int = 4
    patch_size: int | None = None
    width_multiplier: float = 1.0
    mlp_ratio: int = 2
    pool: str = "cls"

    def __post_init__(self):
        self.input_size = tuple(int(x) for x in self.input_size)
        if self.family not in FAMILIES:
            raise ConfigError(
                f"family must be one of {', '.join(FAMILIES)}. Got {self.family!r}"
            )
        if len(self.input_size) != 3 or min(self.input_size) < 1:
            raise ConfigError(f"input_size must be (C, H, W). Got {self.input_size}")
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1. Got {self.depth}")

        if self.family == "resnet_small":
            if self.width_multiplier <= 0 or self.base_width < 1:
                raise ConfigError(
                    f"width_multiplier {self.width_multiplier} gives no channels"
                )
            return

        _, h, w = self.input_size
        if self.patch_size is None:
            self.patch_size = 8 if h >= 96 else 4
        if self.heads < 1 or self.embed_dim % self.heads:
            raise ConfigError(
                f"embed_dim ({self.embed_dim}) must be divisible by heads ({self.heads})"
            )
        if self.pool not in ("cls", "mean"):
            raise ConfigError(f"pool must be 'cls' or 'mean'. Got {self.pool!r}")

        divisor = self.patch_size
        if self.family == "pit_tiny":
            divisor *= 2**PIT_POOLING_STAGES
        if h % divisor or w % divisor:
            raise ConfigError(
                f"{self.family} needs H and W divisible by {divisor}. "
                f"Got {h}x{w} with patch_size {self.patch_size}"
            )

    @property
    def base_width(self) -> int:
        return int(round(64 * self.width_multiplier))

    @property
    def grid_size(self) -> tuple[int, int]:
        _, h, w = self.input_size
        return h // self.patch_size, w // self.patch_size

    @property
    def num_tokens(self) -> int:
        """Patch tokens plus the class token (transformers)."""
        gh, gw = self.grid_size
        return gh * gw + 1

    @property
    def output_dim(self) -> int:
        if self.family == "resnet_small":
            return 8 * self.base_width
        if self.family == "pit_tiny":
            return self.embed_dim * 2**PIT_POOLING_STAGES
        return self.embed_dim

    def to_dict(self) -> dict:
        out = asdict(self)
        out["input_size"] = list(self.input_size)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "BackboneConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data).difference(names)
        if unknown:
            raise ConfigError(f"Unknown backbone key(s) {', '.join(sorted(unknown))}")
        return cls(**data)
