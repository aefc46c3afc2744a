"""Region partitions, pixel-replacement missingness approximations, and
removal orderings.

A partition is stored as an (H, W) label map: grid patches in row-major cell
order, or superpixels in ascending label order. Removal always works on the
union pixel mask of the removed regions; pixels outside it are bit-identical
before and after. DropTokens is not a pixel edit: it returns the original
image together with the token indices to drop (conservative cover).
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .models import tokens_covering
from .util import derive_rng

BLACK = "black"
MEAN_COLOR = "mean_color"
RANDOM_COLOR_PER_IMAGE = "random_color_per_image"
RANDOM_COLOR_PER_PIXEL = "random_color_per_pixel"
BLUR = "blur"
DROP_TOKENS = "drop_tokens"

PIXEL_KINDS = (BLACK, MEAN_COLOR, RANDOM_COLOR_PER_IMAGE, RANDOM_COLOR_PER_PIXEL, BLUR)

RANDOM = "random"
MOST_SALIENT_FIRST = "most_salient_first"
LEAST_SALIENT_FIRST = "least_salient_first"


class SpecError(ValueError):
    """Missingness spec incompatible with the requested operation or model."""


@dataclass(frozen=True)
class Region:
    index: int
    pixels: np.ndarray  # (N, 2) array of (row, col) coordinates


@dataclass(frozen=True)
class RegionPartition:
    kind: str  # "grid" | "superpixels"
    labels: np.ndarray  # (H, W) int32 region index per pixel
    num_regions: int
    cell_shape: tuple | None = None  # (cell_h, cell_w) for grid partitions

    @property
    def image_shape(self):
        return self.labels.shape

    def region(self, index):
        if not 0 <= index < self.num_regions:
            raise IndexError(f"region {index} out of range")
        coords = np.argwhere(self.labels == index)
        return Region(index, coords)

    def regions(self):
        return [self.region(i) for i in range(self.num_regions)]

    def mask_of(self, region_ids):
        ids = np.asarray(list(region_ids), dtype=np.int64)
        if ids.size == 0:
            return np.zeros(self.labels.shape, dtype=bool)
        return np.isin(self.labels, ids)

    @property
    def descriptor(self):
        return f"{self.kind}:{self.num_regions}:{zlib.crc32(np.ascontiguousarray(self.labels, dtype=np.int32).tobytes()):08x}"


def grid_partition(height, width, cell_h, cell_w):
    """Row-major grid cells; edge cells shrink when sizes do not divide."""
    if cell_h <= 0 or cell_w <= 0:
        raise ValueError("cell sizes must be positive")
    rows = np.arange(height) // cell_h
    cols = np.arange(width) // cell_w
    ncols = -(-width // cell_w)
    nrows = -(-height // cell_h)
    labels = (rows[:, None] * ncols + cols[None, :]).astype(np.int32)
    return RegionPartition("grid", labels, int(nrows * ncols), cell_shape=(cell_h, cell_w))


@dataclass(frozen=True)
class MissingnessSpec:
    kind: str
    rgb: tuple | None = None  # MeanColor; carried but ignored elsewhere
    kernel_size: int = 21
    sigma: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PIXEL_KINDS + (DROP_TOKENS,):
            raise SpecError(f"unknown missingness kind {self.kind!r}")
        if self.kind == MEAN_COLOR:
            if self.rgb is None or len(self.rgb) != 3:
                raise SpecError("mean_color needs an (r, g, b) triple")
            if any(not 0.0 <= c <= 1.0 for c in self.rgb):
                raise SpecError("rgb components must lie in [0, 1]")
        if self.kernel_size % 2 == 0 or self.kernel_size < 1:
            raise SpecError("blur kernel size must be odd and positive")
        if self.sigma <= 0:
            raise SpecError("blur sigma must be positive")

    @property
    def is_pixel_replacement(self):
        return self.kind in PIXEL_KINDS

    @staticmethod
    def black():
        return MissingnessSpec(BLACK)

    @staticmethod
    def mean_color(rgb):
        return MissingnessSpec(MEAN_COLOR, rgb=tuple(float(c) for c in rgb))

    @staticmethod
    def random_color_per_image(seed=0):
        return MissingnessSpec(RANDOM_COLOR_PER_IMAGE, seed=seed)

    @staticmethod
    def random_color_per_pixel(seed=0):
        return MissingnessSpec(RANDOM_COLOR_PER_PIXEL, seed=seed)

    @staticmethod
    def blur(kernel_size=21, sigma=10.0):
        return MissingnessSpec(BLUR, kernel_size=kernel_size, sigma=sigma)

    @staticmethod
    def drop_tokens(rgb=None):
        return MissingnessSpec(DROP_TOKENS, rgb=rgb)

    def label(self):
        if self.kind == MEAN_COLOR:
            return f"mean_color({self.rgb[0]:g};{self.rgb[1]:g};{self.rgb[2]:g})"
        if self.kind == BLUR:
            return f"blur(k{self.kernel_size};s{self.sigma:g})"
        return self.kind


def gaussian_kernel(kernel_size, sigma):
    """1-d Gaussian taps normalized to sum exactly 1."""
    half = kernel_size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(image, kernel_size=21, sigma=10.0):
    """Separable Gaussian blur with replicate (edge) padding, so a constant
    image blurs to itself exactly."""
    k = gaussian_kernel(kernel_size, sigma)
    half = kernel_size // 2
    out = np.asarray(image, dtype=np.float64)
    padded = np.pad(out, ((0, 0), (half, half), (0, 0)), mode="edge")
    out = sum(k[t] * padded[:, t : t + image.shape[1], :] for t in range(kernel_size))
    padded = np.pad(out, ((0, 0), (0, 0), (half, half)), mode="edge")
    out = sum(k[t] * padded[:, :, t : t + image.shape[2]] for t in range(kernel_size))
    return out.astype(image.dtype)


def _as_removed_mask(removed, shape):
    if isinstance(removed, np.ndarray) and removed.dtype == bool:
        if removed.shape != shape:
            raise ValueError(f"mask shape {removed.shape} does not match image {shape}")
        return removed
    mask = np.zeros(shape, dtype=bool)
    for region in removed:
        mask[region.pixels[:, 0], region.pixels[:, 1]] = True
    return mask


def apply_approximation(image, removed, spec, image_index=0):
    """Replace the removed pixels of a (3,H,W) float image per the spec.

    ``removed`` is a set of Region objects or a boolean (H, W) mask. Random
    colors are drawn from a stream keyed by (spec.seed, image_index).
    """
    if spec.kind == DROP_TOKENS:
        raise SpecError("drop_tokens is a model-side operation, not a pixel edit")
    image = np.asarray(image)
    mask = _as_removed_mask(removed, image.shape[1:])
    if not mask.any():
        return image.copy()
    out = image.copy()
    if spec.kind == BLACK:
        out[:, mask] = 0.0
    elif spec.kind == MEAN_COLOR:
        out[:, mask] = np.asarray(spec.rgb, dtype=image.dtype)[:, None]
    elif spec.kind == RANDOM_COLOR_PER_IMAGE:
        color = derive_rng(spec.seed, image_index).random(3)
        out[:, mask] = color.astype(image.dtype)[:, None]
    elif spec.kind == RANDOM_COLOR_PER_PIXEL:
        colors = derive_rng(spec.seed, image_index).random((3, int(mask.sum())))
        out[:, mask] = colors.astype(image.dtype)
    elif spec.kind == BLUR:
        blurred = gaussian_blur(image, spec.kernel_size, spec.sigma)
        out[:, mask] = blurred[:, mask]
    return out


def region_saliency(partition, saliency_map):
    """Mean of the saliency map over each region's pixels."""
    saliency_map = np.asarray(saliency_map, dtype=np.float64)
    if saliency_map.shape != partition.image_shape:
        raise ValueError(f"map shape {saliency_map.shape} does not match partition {partition.image_shape}")
    flat_labels = partition.labels.reshape(-1)
    sums = np.bincount(flat_labels, weights=saliency_map.reshape(-1), minlength=partition.num_regions)
    counts = np.bincount(flat_labels, minlength=partition.num_regions)
    return sums / counts


@dataclass(frozen=True)
class RemovalOrder:
    kind: str
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (RANDOM, MOST_SALIENT_FIRST, LEAST_SALIENT_FIRST):
            raise ValueError(f"unknown removal order {self.kind!r}")


def order_regions(partition, order, model=None, image=None, saliency_map=None, image_index=0):
    """Permutation of region indices to remove, first to last.

    Saliency orders score regions by the mean saliency of the designated
    model on this image; ties break by ascending region index.
    """
    r = partition.num_regions
    if order.kind == RANDOM:
        return derive_rng(order.seed, image_index).permutation(r)
    if saliency_map is None:
        if model is None or image is None:
            raise ValueError("saliency orders need a model and image (or a precomputed map)")
        from .models import saliency_map as compute_map

        saliency_map = compute_map(model, image)
    scores = region_saliency(partition, saliency_map)
    if order.kind == MOST_SALIENT_FIRST:
        return np.lexsort((np.arange(r), -scores))
    return np.lexsort((np.arange(r), scores))


@dataclass
class MaskedInput:
    """Result of removing a fraction of regions: a pixel-edited image for
    replacement specs, or the untouched image plus tokens to drop."""

    image: np.ndarray
    removed_region_ids: np.ndarray
    dropped_tokens: np.ndarray | None = None


def removal_count(fraction, num_regions):
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    return int(np.ceil(fraction * num_regions))


def remove_fraction(image, model_kind, partition, ordering, fraction, spec, token_size=None, image_index=0):
    """Remove the first ceil(fraction * R) regions of the ordering."""
    if spec.kind == DROP_TOKENS and model_kind != "vit":
        raise SpecError("drop_tokens requires a token model; CNNs need pixel replacement")
    ordering = np.asarray(ordering)
    n = removal_count(fraction, partition.num_regions)
    removed_ids = ordering[:n]
    mask = partition.mask_of(removed_ids)
    if spec.kind == DROP_TOKENS:
        if token_size is None:
            raise ValueError("token_size is required for drop_tokens removal")
        dropped = tokens_covering(mask, token_size)
        return MaskedInput(np.asarray(image).copy(), removed_ids, dropped_tokens=dropped)
    edited = apply_approximation(image, mask, spec, image_index=image_index)
    return MaskedInput(edited, removed_ids)
