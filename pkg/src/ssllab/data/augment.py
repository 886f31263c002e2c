"""The two-view stochastic augmentation pipeline.

The chain is applied in this order, each step with its own probability:
random resized crop, color jitter, grayscale, gaussian blur, horizontal flip.
Every random draw comes from a generator keyed by (seed, epoch, item index, view),
so a view never depends on which worker computed it.
"""
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..exceptions import ConfigError
from ..helpers import as_range
from ..tensor.creation import make_rng


# ITU-R 601 luma weights
LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)

# RGB <-> YIQ, used for hue rotation
_RGB_TO_YIQ = np.array(
    [
        [0.299, 0.587, 0.114],
        [0.596, -0.274, -0.322],
        [0.211, -0.523, 0.312],
    ]
)
_YIQ_TO_RGB = np.linalg.inv(_RGB_TO_YIQ)

CROP_ATTEMPTS = 10
BLUR_KERNEL = 3


@dataclass
class AugmentationPolicy:
    """Probabilities and ranges of the augmentation chain.

    The defaults are the usual simple-siamese recipe, with the blur shrunk to a
    3 x 3 kernel for 32 x 32 images.

    Args:
        crop_scale: Range of the crop area as a fraction of the image area.
        crop_ratio: Range of the crop aspect ratio (width / height).
        flip_p: Probability of a horizontal flip.
        jitter_p: Probability of color jitter.
        brightness: Brightness factor is drawn from [1 - brightness, 1 + brightness].
        contrast: Same for contrast.
        saturation: Same for saturation.
        hue: Hue shift is drawn from [-hue, hue], in turns (max 0.5).
        grayscale_p: Probability of converting to grayscale.
        blur_p: Probability of a gaussian blur.
        blur_sigma: Range of the blur sigma.
        seed: Seed of all random draws.
    """

    crop_scale: tuple[float, float] = (0.2, 1.0)
    crop_ratio: tuple[float, float] = (3 / 4, 4 / 3)
    flip_p: float = 0.5
    jitter_p: float = 0.8
    brightness: float = 0.4
    contrast: float = 0.4
    saturation: float = 0.4
    hue: float = 0.1
    grayscale_p: float = 0.2
    blur_p: float = 0.5
    blur_sigma: tuple[float, float] = (0.1, 1.0)
    seed: int = 0

    def __post_init__(self):
        self.crop_scale = tuple(float(x) for x in as_range(self.crop_scale))
        self.crop_ratio = tuple(float(x) for x in as_range(self.crop_ratio))
        self.blur_sigma = tuple(float(x) for x in as_range(self.blur_sigma))
        self.seed = int(self.seed)

        for name in ("flip_p", "jitter_p", "grayscale_p", "blur_p"):
            value = float(getattr(self, name))
            if not 0 <= value <= 1:
                raise ConfigError(f"{name} must be a probability. Got {value}")
            setattr(self, name, value)

        for name in ("brightness", "contrast", "saturation", "hue"):
            value = float(getattr(self, name))
            if value < 0:
                raise ConfigError(f"{name} must be >= 0. Got {value}")
            setattr(self, name, value)
        if self.hue > 0.5:
            raise ConfigError(f"hue must be <= 0.5. Got {self.hue}")

        low, high = self.crop_scale
        if not 0 < low <= high <= 1:
            raise ConfigError(f"crop_scale must satisfy 0 < low <= high <= 1. Got {self.crop_scale}")
        low, high = self.crop_ratio
        if not 0 < low <= high:
            raise ConfigError(f"crop_ratio must satisfy 0 < low <= high. Got {self.crop_ratio}")
        low, high = self.blur_sigma
        if not 0 < low <= high:
            raise ConfigError(f"blur_sigma must satisfy 0 < low <= high. Got {self.blur_sigma}")

    @classmethod
    def identity(cls, seed: int = 0) -> "AugmentationPolicy":
        """A policy whose views equal the input image."""
        return cls(
            crop_scale=(1.0, 1.0),
            crop_ratio=(1.0, 1.0),
            flip_p=0.0,
            jitter_p=0.0,
            grayscale_p=0.0,
            blur_p=0.0,
            seed=seed,
        )

    @classmethod
    def weak(cls, seed: int = 0) -> "AugmentationPolicy":
        """Crop and flip only, for supervised training."""
        return cls(crop_scale=(0.6, 1.0), jitter_p=0.0, grayscale_p=0.0, blur_p=0.0, seed=seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AugmentationPolicy":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown augmentation keys: {sorted(unknown)}")
        return cls(**data)


def crop_box(
    height: int,
    width: int,
    scale: tuple[float, float],
    ratio: tuple[float, float],
    rng: np.random.Generator,
) -> tuple[int, int, int, int]:
    """(top, left, h, w) of a random crop with area fraction in 'scale'.

    Falls back to the largest central crop within 'ratio' after ten failed draws.
    """
    area = height * width
    log_ratio = (math.log(ratio[0]), math.log(ratio[1]))
    for _ in range(CROP_ATTEMPTS):
        target_area = area * rng.uniform(*scale)
        aspect = math.exp(rng.uniform(*log_ratio))
        w = int(round(math.sqrt(target_area * aspect)))
        h = int(round(math.sqrt(target_area / aspect)))
        if 0 < w <= width and 0 < h <= height:
            top = int(rng.integers(0, height - h + 1))
            left = int(rng.integers(0, width - w + 1))
            return top, left, h, w

    in_ratio = width / height
    if in_ratio < ratio[0]:
        w, h = width, int(round(width / ratio[0]))
    elif in_ratio > ratio[1]:
        h, w = height, int(round(height * ratio[1]))
    else:
        h, w = height, width
    return (height - h) // 2, (width - w) // 2, h, w


def _resize_axis(image: np.ndarray, size: int, axis: int) -> np.ndarray:
    """Bilinear resampling along one axis, with aligned pixel centers."""
    in_size = image.shape[axis]
    if in_size == size:
        return image
    pos = (np.arange(size) + 0.5) * in_size / size - 0.5
    pos = np.clip(pos, 0, in_size - 1)
    low = np.floor(pos).astype(int)
    high = np.minimum(low + 1, in_size - 1)
    frac = (pos - low).astype(image.dtype)
    shape = [1] * image.ndim
    shape[axis] = size
    frac = frac.reshape(shape)
    return np.take(image, low, axis=axis) * (1 - frac) + np.take(image, high, axis=axis) * frac


def resize(image: np.ndarray, height: int, width: int) -> np.ndarray:
    return _resize_axis(_resize_axis(image, height, axis=1), width, axis=2)


def random_resized_crop(
    image: np.ndarray,
    scale: tuple[float, float],
    ratio: tuple[float, float],
    rng: np.random.Generator,
) -> np.ndarray:
    _, height, width = image.shape
    top, left, h, w = crop_box(height, width, scale, ratio, rng)
    crop = image[:, top : top + h, left : left + w]
    if (h, w) == (height, width):
        return crop
    return resize(crop, height, width)


def hflip(image: np.ndarray) -> np.ndarray:
    return image[:, :, ::-1]


def grayscale(image: np.ndarray) -> np.ndarray:
    """Luma replicated over the channels. Single-channel images are returned as is."""
    if image.shape[0] != 3:
        return image
    luma = np.tensordot(LUMA, image, axes=(0, 0))
    return np.broadcast_to(luma, image.shape).astype(image.dtype)


def _clip(image: np.ndarray, value_range: tuple[float, float] | None) -> np.ndarray:
    if value_range is None:
        return image
    return np.clip(image, *value_range)


def adjust_hue(image: np.ndarray, shift: float) -> np.ndarray:
    """Rotate the chroma plane by 'shift' turns."""
    if image.shape[0] != 3 or shift == 0:
        return image
    angle = 2 * np.pi * shift
    cos, sin = np.cos(angle), np.sin(angle)
    rotation = np.array([[1, 0, 0], [0, cos, -sin], [0, sin, cos]])
    matrix = (_YIQ_TO_RGB @ rotation @ _RGB_TO_YIQ).astype(image.dtype)
    return np.tensordot(matrix, image, axes=(1, 0))


def color_jitter(
    image: np.ndarray,
    policy: AugmentationPolicy,
    rng: np.random.Generator,
    value_range: tuple[float, float] | None,
) -> np.ndarray:
    """Brightness, contrast, saturation and hue in a random order."""
    factors = {
        "brightness": rng.uniform(1 - policy.brightness, 1 + policy.brightness),
        "contrast": rng.uniform(1 - policy.contrast, 1 + policy.contrast),
        "saturation": rng.uniform(1 - policy.saturation, 1 + policy.saturation),
        "hue": rng.uniform(-policy.hue, policy.hue),
    }
    dtype = image.dtype
    for name in rng.permutation(list(factors)):
        factor = factors[name]
        if name == "brightness":
            image = image * factor
        elif name == "contrast":
            mean = grayscale(image).mean()
            image = (image - mean) * factor + mean
        elif name == "saturation":
            gray = grayscale(image)
            image = (image - gray) * factor + gray
        else:
            image = adjust_hue(image, factor)
        image = _clip(image, value_range)
    return image.astype(dtype)


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """3 x 3 separable gaussian blur with reflected borders."""
    radius = BLUR_KERNEL // 2
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-(offsets**2) / (2 * sigma**2))
    kernel = (kernel / kernel.sum()).astype(image.dtype)
    _, height, width = image.shape
    mode = "reflect" if min(height, width) > radius else "edge"
    padded = np.pad(image, ((0, 0), (radius, radius), (radius, radius)), mode=mode)
    rows = sum(k * padded[:, i : i + height, :] for i, k in enumerate(kernel))
    return sum(k * rows[:, :, i : i + width] for i, k in enumerate(kernel))


def augment(
    image: np.ndarray,
    policy: AugmentationPolicy,
    rng: np.random.Generator,
    value_range: tuple[float, float] | None = (0.0, 1.0),
) -> np.ndarray:
    """One draw of the augmentation chain. The output has the shape of the input."""
    x = random_resized_crop(image, policy.crop_scale, policy.crop_ratio, rng)
    if rng.random() < policy.jitter_p:
        x = color_jitter(x, policy, rng, value_range)
    if rng.random() < policy.grayscale_p:
        x = grayscale(x)
    if rng.random() < policy.blur_p:
        x = gaussian_blur(x, rng.uniform(*policy.blur_sigma))
    if rng.random() < policy.flip_p:
        x = hflip(x)
    return np.ascontiguousarray(x, dtype=image.dtype)


def make_views(
    image: np.ndarray,
    policy: AugmentationPolicy,
    index: int,
    epoch: int = 0,
    value_range: tuple[float, float] | None = (0.0, 1.0),
) -> tuple[np.ndarray, np.ndarray]:
    """Two independent draws of the augmentation chain for one image.

    Args:
        image: Raw image of shape [C, H, W].
        policy: The augmentation policy.
        index: Index of the image in its dataset.
        epoch: Epoch number, so each epoch sees new views.
        value_range: Range to clip color transforms to, None for unbounded images.

    Returns:
        The views x1 and x2, same shape and dtype as 'image'.

    Examples
    --------
    >>> image = np.random.rand(3, 8, 8).astype("float32")
    >>> x1, x2 = sl.make_views(image, sl.AugmentationPolicy.identity(), index=0)
    >>> bool((x1 == image).all() and (x2 == image).all())
    True
    """
    image = np.asarray(image)
    if image.ndim != 3:
        raise ConfigError(f"image must be [C, H, W]. Got shape {image.shape}")
    return tuple(
        augment(image, policy, make_rng(policy.seed, epoch, index, view), value_range)
        for view in (0, 1)
    )
