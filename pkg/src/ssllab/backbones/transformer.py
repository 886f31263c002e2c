"""Tiny vision transformers: ViT and the pooling-based PiT.

Both split the image into non-overlapping patches that are flattened and linearly
projected, add learned position embeddings and prepend a class token. The encoder
blocks are pre-norm: x + attn(norm(x)), then x + mlp(norm(x)).

PiT halves the token grid twice with 2x2 average pooling and doubles the width
(and the number of heads) with a linear layer after each pooling. The class token
goes through its own linear layer.
"""
import numpy as np

from ..nn.init import trunc_normal
from ..nn.layers import GELU, LayerNorm, Linear, MultiheadAttention
from ..nn.module import Module, Parameter, Sequential
from ..tensor.ops import avg_pool2d
from ..tensor.tensor import Tensor, concat
from .config import PIT_POOLING_STAGES, BackboneConfig


def patchify(images: Tensor, patch_size: int) -> Tensor:
    """[N, C, H, W] -> [N, (H/p)(W/p), C p p], patches in row-major grid order."""
    n, c, h, w = images.shape
    gh, gw = h // patch_size, w // patch_size
    return (
        images.reshape(n, c, gh, patch_size, gw, patch_size)
        .transpose(0, 2, 4, 1, 3, 5)
        .reshape(n, gh * gw, c * patch_size * patch_size)
    )


class EncoderBlock(Module):
    def __init__(
        self, dim: int, heads: int, mlp_ratio: int, rng: np.random.Generator
    ) -> None:
        super().__init__()
        self.norm1 = LayerNorm(dim)
        self.attn = MultiheadAttention(dim, heads, rng=rng)
        self.norm2 = LayerNorm(dim)
        self.mlp = Sequential(
            Linear(dim, dim * mlp_ratio, rng=rng, init="trunc_normal"),
            GELU(),
            Linear(dim * mlp_ratio, dim, rng=rng, init="trunc_normal"),
        )

    def forward(self, x: Tensor) -> Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class PatchEmbed(Module):
    def __init__(self, config: BackboneConfig, rng: np.random.Generator) -> None:
        super().__init__()
        channels = config.input_size[0]
        self.patch_size = config.patch_size
        self.proj = Linear(
            channels * config.patch_size**2,
            config.embed_dim,
            rng=rng,
            init="trunc_normal",
        )

    def forward(self, images: Tensor) -> Tensor:
        return self.proj(patchify(images, self.patch_size))


def _pool_output(tokens: Tensor, pool: str) -> Tensor:
    """Class token, or the mean of the patch tokens."""
    if pool == "cls":
        return tokens[:, 0]
    return tokens[:, 1:].mean(axis=1)


class VisionTransformer(Module):
    """ViT: patch embedding, class token, position embeddings, encoder blocks."""

    def __init__(self, config: BackboneConfig, rng: np.random.Generator) -> None:
        super().__init__()
        self.config = config
        dim = config.embed_dim
        self.patch_embed = PatchEmbed(config, rng)
        self.cls_token = Parameter(trunc_normal(rng, (1, 1, dim)))
        self.pos_embed = Parameter(trunc_normal(rng, (1, config.num_tokens, dim)))
        self.blocks = Sequential(
            *(
                EncoderBlock(dim, config.heads, config.mlp_ratio, rng)
                for _ in range(config.depth)
            )
        )
        self.norm = LayerNorm(dim)
        self.output_dim = dim

    def forward(self, images: Tensor) -> Tensor:
        tokens = self.patch_embed(images)
        n = tokens.shape[0]
        cls = self.cls_token.broadcast_to((n, 1, self.output_dim))
        x = concat([cls, tokens], axis=1) + self.pos_embed
        x = self.norm(self.blocks(x))
        return _pool_output(x, self.config.pool)


class TokenPooling(Module):
    """Halve the token grid with 2x2 average pooling and double the width."""

    def __init__(self, dim: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.proj = Linear(dim, 2 * dim, rng=rng, init="trunc_normal")
        self.cls_proj = Linear(dim, 2 * dim, rng=rng, init="trunc_normal")

    def forward(self, x: Tensor, grid: tuple[int, int]) -> Tensor:
        n, _, dim = x.shape
        gh, gw = grid
        cls, tokens = x[:, :1], x[:, 1:]
        spatial = tokens.reshape(n, gh, gw, dim).transpose(0, 3, 1, 2)
        pooled = avg_pool2d(spatial, 2, 2).transpose(0, 2, 3, 1)
        tokens = pooled.reshape(n, (gh // 2) * (gw // 2), dim)
        return concat([self.cls_proj(cls), self.proj(tokens)], axis=1)


class PoolingVisionTransformer(Module):
    """PiT: three stages of encoder blocks with token pooling between them."""

    def __init__(self, config: BackboneConfig, rng: np.random.Generator) -> None:
        super().__init__()
        self.config = config
        dim = config.embed_dim
        gh, gw = config.grid_size
        self.patch_embed = PatchEmbed(config, rng)
        self.cls_token = Parameter(trunc_normal(rng, (1, 1, dim)))
        self.pos_embed = Parameter(trunc_normal(rng, (1, gh * gw, dim)))

        stages, poolings = [], []
        heads = config.heads
        for stage in range(PIT_POOLING_STAGES + 1):
            stages.append(
                Sequential(
                    *(
                        EncoderBlock(dim, heads, config.mlp_ratio, rng)
                        for _ in range(config.depth)
                    )
                )
            )
            if stage < PIT_POOLING_STAGES:
                poolings.append(TokenPooling(dim, rng))
                dim *= 2
                heads *= 2
        self.stages = Sequential(*stages)
        self.poolings = Sequential(*poolings)
        self.norm = LayerNorm(dim)
        self.output_dim = dim

    def token_grids(self) -> list[tuple[int, int]]:
        """Token grid of each stage, e.g. 8x8, 4x4, 2x2."""
        gh, gw = self.config.grid_size
        return [(gh // 2**i, gw // 2**i) for i in range(PIT_POOLING_STAGES + 1)]

    def forward(self, images: Tensor) -> Tensor:
        tokens = self.patch_embed(images) + self.pos_embed
        n = tokens.shape[0]
        cls = self.cls_token.broadcast_to((n, 1, self.config.embed_dim))
        x = concat([cls, tokens], axis=1)
        grids = self.token_grids()
        for i, stage in enumerate(self.stages):
            x = stage(x)
            if i < PIT_POOLING_STAGES:
                x = self.poolings[i](x, grids[i])
        x = self.norm(x)
        return _pool_output(x, self.config.pool)
